use super::PlotError;
use serde::{Deserialize, Serialize};

/// Fixed-width 1D histogram over the half-open range `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw1D")]
pub struct Histogram1D {
    name: String,
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
}

#[derive(Deserialize)]
struct Raw1D {
    name: String,
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
}

impl TryFrom<Raw1D> for Histogram1D {
    type Error = PlotError;

    fn try_from(raw: Raw1D) -> Result<Self, PlotError> {
        let mut h = Histogram1D::new(raw.name, raw.counts.len(), raw.lo, raw.hi)?;
        h.counts = raw.counts;
        h.underflow = raw.underflow;
        h.overflow = raw.overflow;
        Ok(h)
    }
}

fn check_range(n: usize, lo: f64, hi: f64) -> Result<(), PlotError> {
    if n == 0 {
        return Err(PlotError::InvalidHistogram("bin count must be positive".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(PlotError::InvalidHistogram(format!("range [{lo}, {hi}) is empty")));
    }
    Ok(())
}

/// Bin index of `x` in `[lo, hi)` with `n` bins, or `None` outside.
fn bin_of(x: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if x < lo || x >= hi {
        return None;
    }
    let i = ((x - lo) * n as f64 / (hi - lo)).floor() as usize;
    // rounding can land exactly on n just below hi
    Some(i.min(n - 1))
}

impl Histogram1D {
    pub fn new(name: impl Into<String>, n_bins: usize, lo: f64, hi: f64) -> Result<Self, PlotError> {
        check_range(n_bins, lo, hi)?;
        Ok(Self {
            name: name.into(),
            lo,
            hi,
            counts: vec![0; n_bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn fill(&mut self, x: f64) -> Result<(), PlotError> {
        if !x.is_finite() {
            return Err(PlotError::NonFinite);
        }
        match bin_of(x, self.lo, self.hi, self.counts.len()) {
            Some(i) => self.counts[i] += 1,
            None if x < self.lo => self.underflow += 1,
            None => self.overflow += 1,
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.underflow = 0;
        self.overflow = 0;
    }
}

/// Fixed-width 2D histogram over `[xlo, xhi) × [ylo, yhi)`. Counts are
/// stored row-major: `counts[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw2D")]
pub struct Histogram2D {
    name: String,
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    counts: Vec<u64>,
    out_of_range: u64,
}

#[derive(Deserialize)]
struct Raw2D {
    name: String,
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    counts: Vec<u64>,
    out_of_range: u64,
}

impl TryFrom<Raw2D> for Histogram2D {
    type Error = PlotError;

    fn try_from(raw: Raw2D) -> Result<Self, PlotError> {
        let mut h = Histogram2D::new(raw.name, raw.nx, raw.x_range, raw.ny, raw.y_range)?;
        if raw.counts.len() != h.counts.len() {
            return Err(PlotError::InvalidHistogram(format!(
                "expected {} counts, found {}",
                h.counts.len(),
                raw.counts.len()
            )));
        }
        h.counts = raw.counts;
        h.out_of_range = raw.out_of_range;
        Ok(h)
    }
}

impl Histogram2D {
    pub fn new(
        name: impl Into<String>,
        nx: usize,
        x_range: (f64, f64),
        ny: usize,
        y_range: (f64, f64),
    ) -> Result<Self, PlotError> {
        check_range(nx, x_range.0, x_range.1)?;
        check_range(ny, y_range.0, y_range.1)?;
        let cells = nx
            .checked_mul(ny)
            .ok_or_else(|| PlotError::InvalidHistogram("too many bins".into()))?;
        Ok(Self {
            name: name.into(),
            nx,
            ny,
            x_range,
            y_range,
            counts: vec![0; cells],
            out_of_range: 0,
        })
    }

    pub fn fill(&mut self, x: f64, y: f64) -> Result<(), PlotError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(PlotError::NonFinite);
        }
        let ix = bin_of(x, self.x_range.0, self.x_range.1, self.nx);
        let iy = bin_of(y, self.y_range.0, self.y_range.1, self.ny);
        match (ix, iy) {
            (Some(ix), Some(iy)) => self.counts[iy * self.nx + ix] += 1,
            _ => self.out_of_range += 1,
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.y_range
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.out_of_range
    }
}
