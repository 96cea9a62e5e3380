//! Weighted nonlinear least squares with Levenberg–Marquardt damping.
//!
//! Minimizes `Σ wᵢ (yᵢ − f(xᵢ; p))²`. Each iteration solves
//! `(JᵀWJ + λ·diag(JᵀWJ)) δ = JᵀW r`; λ starts at 1e-3, is divided by 10
//! after an accepted step and multiplied by 10 after a rejected one.
//! Parameters a model marks as strictly positive (Gaussian widths) are
//! iterated as their logarithm and reported back-transformed.

use super::{DataSeries, Histogram1D};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_STEP: f64 = 10.0;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("initial guess must have {expected} finite values")]
    InvalidGuess { expected: usize },
    #[error("gaussian width must be positive")]
    NonPositiveSigma,
    #[error("jacobian is singular at the initial guess")]
    SingularJacobian,
    #[error("data contains non-finite values")]
    NonFiniteData,
}

/// A model that can be fitted. Implement this to add fit options beyond
/// the built-in polynomial and Gaussian-sum models.
pub trait FitFunction: Send + Sync {
    fn name(&self) -> &str;

    fn n_params(&self) -> usize;

    fn eval(&self, params: &[f64], x: f64) -> f64;

    /// ∂f/∂pⱼ at `x`. Defaults to central differences.
    fn gradient(&self, params: &[f64], x: f64, out: &mut [f64]) {
        let mut p = params.to_vec();
        for j in 0..params.len() {
            let h = 1e-6 * params[j].abs().max(1.0);
            p[j] = params[j] + h;
            let up = self.eval(&p, x);
            p[j] = params[j] - h;
            let down = self.eval(&p, x);
            p[j] = params[j];
            out[j] = (up - down) / (2.0 * h);
        }
    }

    /// Indices of parameters constrained to be positive.
    fn positive_params(&self) -> Vec<usize> {
        Vec::new()
    }
}

/// `Σᵢ Aᵢ·exp(−(x−μᵢ)²/(2σᵢ²))` with `params = [A₁, μ₁, σ₁, …]`.
pub fn gaussian_sum_eval(params: &[f64], x: f64) -> Result<f64, FitError> {
    check_gaussian_params(params)?;
    Ok(gaussian_sum_unchecked(params, x))
}

/// Analytic gradient of [`gaussian_sum_eval`] with respect to each
/// parameter, in the same layout.
pub fn gaussian_sum_gradient(params: &[f64], x: f64) -> Result<Vec<f64>, FitError> {
    check_gaussian_params(params)?;
    let mut out = vec![0.0; params.len()];
    gaussian_sum_gradient_into(params, x, &mut out);
    Ok(out)
}

fn check_gaussian_params(params: &[f64]) -> Result<(), FitError> {
    if params.len() % 3 != 0 {
        return Err(FitError::InvalidGuess {
            expected: params.len().div_ceil(3) * 3,
        });
    }
    if params.chunks_exact(3).any(|c| !(c[2] > 0.0)) {
        return Err(FitError::NonPositiveSigma);
    }
    Ok(())
}

fn gaussian_sum_unchecked(params: &[f64], x: f64) -> f64 {
    params
        .chunks_exact(3)
        .map(|c| {
            let z = (x - c[1]) / c[2];
            c[0] * (-0.5 * z * z).exp()
        })
        .sum()
}

fn gaussian_sum_gradient_into(params: &[f64], x: f64, out: &mut [f64]) {
    for (c, g) in params.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        let (a, mu, sigma) = (c[0], c[1], c[2]);
        let d = x - mu;
        let e = (-0.5 * d * d / (sigma * sigma)).exp();
        g[0] = e;
        g[1] = a * e * d / (sigma * sigma);
        g[2] = a * e * d * d / (sigma * sigma * sigma);
    }
}

struct GaussianSum {
    k: usize,
}

impl FitFunction for GaussianSum {
    fn name(&self) -> &str {
        "gaussian_sum"
    }

    fn n_params(&self) -> usize {
        3 * self.k
    }

    fn eval(&self, params: &[f64], x: f64) -> f64 {
        gaussian_sum_unchecked(params, x)
    }

    fn gradient(&self, params: &[f64], x: f64, out: &mut [f64]) {
        gaussian_sum_gradient_into(params, x, out)
    }

    fn positive_params(&self) -> Vec<usize> {
        (0..self.k).map(|i| 3 * i + 2).collect()
    }
}

/// `c₀ + c₁x + … + c_d x^d`.
struct Polynomial {
    degree: usize,
}

impl FitFunction for Polynomial {
    fn name(&self) -> &str {
        "polynomial"
    }

    fn n_params(&self) -> usize {
        self.degree + 1
    }

    fn eval(&self, params: &[f64], x: f64) -> f64 {
        params.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn gradient(&self, _params: &[f64], x: f64, out: &mut [f64]) {
        let mut power = 1.0;
        for g in out.iter_mut() {
            *g = power;
            power *= x;
        }
    }
}

/// Which model to fit.
#[derive(Clone)]
pub enum ModelSpec {
    Polynomial { degree: usize },
    GaussianSum { k: usize },
    Custom(Arc<dyn FitFunction>),
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.kind().label())
    }
}

impl ModelSpec {
    pub fn kind(&self) -> FitKind {
        match self {
            ModelSpec::Polynomial { degree } => FitKind::Polynomial { degree: *degree },
            ModelSpec::GaussianSum { k } => FitKind::GaussianSum { k: *k },
            ModelSpec::Custom(f) => FitKind::Custom {
                name: f.name().to_string(),
            },
        }
    }

    fn function(&self) -> Arc<dyn FitFunction> {
        match self {
            ModelSpec::Polynomial { degree } => Arc::new(Polynomial { degree: *degree }),
            ModelSpec::GaussianSum { k } => Arc::new(GaussianSum { k: *k }),
            ModelSpec::Custom(f) => Arc::clone(f),
        }
    }

    pub fn eval(&self, params: &[f64], x: f64) -> f64 {
        self.function().eval(params, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitKind {
    Polynomial { degree: usize },
    GaussianSum { k: usize },
    Custom { name: String },
}

impl FitKind {
    pub fn label(&self) -> String {
        match self {
            FitKind::Polynomial { degree } => format!("polynomial({degree})"),
            FitKind::GaussianSum { k } => format!("gaussian_sum({k})"),
            FitKind::Custom { name } => format!("custom({name})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub kind: FitKind,
    pub params: Vec<f64>,
    pub chi2: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Fits a series with unit weights.
pub fn fit_series(series: &DataSeries, spec: &ModelSpec, guess: &[f64], opts: FitOptions) -> Result<FitModel, FitError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.points.iter().map(|p| (p[0], p[1])).unzip();
    let weights = vec![1.0; xs.len()];
    fit_points(&xs, &ys, &weights, spec, guess, opts)
}

/// Fits bin contents at bin centers with weights `1/max(count, 1)`.
pub fn fit_histogram(hist: &Histogram1D, spec: &ModelSpec, guess: &[f64], opts: FitOptions) -> Result<FitModel, FitError> {
    let xs: Vec<f64> = (0..hist.n_bins()).map(|i| hist.bin_center(i)).collect();
    let ys: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    let weights: Vec<f64> = hist.counts().iter().map(|&c| 1.0 / c.max(1) as f64).collect();
    fit_points(&xs, &ys, &weights, spec, guess, opts)
}

/// Core solver. A run that exhausts `max_iter` without meeting the
/// tolerance still returns the best parameters found; `converged` then
/// reports whether the final iteration was still lowering chi².
pub fn fit_points(
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    spec: &ModelSpec,
    guess: &[f64],
    opts: FitOptions,
) -> Result<FitModel, FitError> {
    let model = spec.function();
    let m = model.n_params();
    if guess.len() != m || guess.iter().any(|g| !g.is_finite()) {
        return Err(FitError::InvalidGuess { expected: m });
    }
    let n = xs.len();
    if ys.len() != n || weights.len() != n {
        return Err(FitError::InsufficientData {
            needed: n,
            got: ys.len().min(weights.len()),
        });
    }
    if n < m {
        return Err(FitError::InsufficientData { needed: m, got: n });
    }
    if xs.iter().chain(ys).chain(weights).any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteData);
    }
    let positive = model.positive_params();
    if positive.iter().any(|&j| !(guess[j] > 0.0)) {
        return Err(FitError::NonPositiveSigma);
    }

    let to_external = |q: &DVector<f64>| -> Vec<f64> {
        let mut p: Vec<f64> = q.iter().copied().collect();
        for &j in &positive {
            p[j] = p[j].exp();
        }
        p
    };
    let chi2_of = |p: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .zip(weights)
            .map(|((&x, &y), &w)| {
                let r = y - model.eval(p, x);
                w * r * r
            })
            .sum()
    };

    let mut q = DVector::from_column_slice(guess);
    for &j in &positive {
        q[j] = q[j].ln();
    }
    let mut p = to_external(&q);
    let mut chi2 = chi2_of(&p);
    if !chi2.is_finite() {
        return Err(FitError::NonFiniteData);
    }
    let mut lambda = LAMBDA_START;
    let mut grad = vec![0.0; m];
    let mut converged = false;
    let mut last_accepted = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // normal equations in the internal parametrization
        let mut jtj = DMatrix::<f64>::zeros(m, m);
        let mut jtr = DVector::<f64>::zeros(m);
        for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
            model.gradient(&p, x, &mut grad);
            for &j in &positive {
                grad[j] *= p[j];
            }
            let r = y - model.eval(&p, x);
            for a in 0..m {
                jtr[a] += w * grad[a] * r;
                for b in a..m {
                    jtj[(a, b)] += w * grad[a] * grad[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        let diag: Vec<f64> = (0..m).map(|a| jtj[(a, a)]).collect();
        if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            if iterations == 1 {
                return Err(FitError::SingularJacobian);
            }
            converged = last_accepted;
            break;
        }

        last_accepted = false;
        let mut stalled = false;
        loop {
            let mut damped = jtj.clone();
            for a in 0..m {
                damped[(a, a)] += lambda * diag[a];
            }
            let step = damped.cholesky().map(|c| c.solve(&jtr));
            match step {
                Some(delta) if delta.iter().all(|d| d.is_finite()) => {
                    let q_new = &q + &delta;
                    let p_new = to_external(&q_new);
                    let chi2_new = chi2_of(&p_new);
                    if chi2_new.is_finite() && chi2_new < chi2 {
                        let small = delta.norm() <= opts.rel_tol * (q.norm() + opts.rel_tol);
                        q = q_new;
                        p = p_new;
                        chi2 = chi2_new;
                        lambda = (lambda / LAMBDA_STEP).max(1e-300);
                        last_accepted = true;
                        converged = small;
                        break;
                    }
                }
                _ => {}
            }
            lambda *= LAMBDA_STEP;
            if lambda > LAMBDA_MAX {
                // no downhill step at any damping: stationary to precision
                stalled = true;
                break;
            }
        }
        if converged || stalled {
            converged = true;
            break;
        }
    }
    if iterations >= opts.max_iter && !converged {
        converged = last_accepted;
    }
    Ok(FitModel {
        kind: spec.kind(),
        params: p,
        chi2,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn gaussian_eval_examples() {
        assert_eq!(gaussian_sum_eval(&[1.0, 0.0, 1.0], 0.0).unwrap(), 1.0);
        let at_sigma = gaussian_sum_eval(&[1.0, 0.0, 1.0], 1.0).unwrap();
        assert!((at_sigma - (-0.5f64).exp()).abs() < 1e-15);
        assert!((at_sigma - 0.60653).abs() < 1e-5);
        let p = [1.5, -2.0, 0.7, 1.5, 2.0, 0.7];
        for x in [0.3, 1.0, 2.5, 7.0] {
            assert_eq!(gaussian_sum_eval(&p, x).unwrap(), gaussian_sum_eval(&p, -x).unwrap());
        }
        assert_eq!(gaussian_sum_eval(&[1.0, 0.0, 0.0], 0.0), Err(FitError::NonPositiveSigma));
        assert_eq!(gaussian_sum_eval(&[1.0, 0.0, -1.0], 0.0), Err(FitError::NonPositiveSigma));
    }

    #[test]
    fn single_gaussian_noiseless_recovery() {
        let truth = [2.0, 1.0, 0.5];
        let xs = grid(-1.0, 3.0, 81);
        let ys: Vec<f64> = xs.iter().map(|&x| gaussian_sum_eval(&truth, x).unwrap()).collect();
        let w = vec![1.0; xs.len()];
        let guess = [2.3, 1.15, 0.42];
        let fit = fit_points(&xs, &ys, &w, &ModelSpec::GaussianSum { k: 1 }, &guess, FitOptions::default()).unwrap();
        assert!(fit.converged);
        for (got, want) in fit.params.iter().zip(truth) {
            assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn straight_line_exact() {
        let xs = grid(-3.0, 5.0, 17);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let w = vec![1.0; xs.len()];
        let fit = fit_points(&xs, &ys, &w, &ModelSpec::Polynomial { degree: 1 }, &[0.0, 0.0], FitOptions::default())
            .unwrap();
        assert!((fit.params[0] - 1.0).abs() < 1e-10);
        assert!((fit.params[1] - 2.0).abs() < 1e-10);
        assert_eq!(fit.kind, FitKind::Polynomial { degree: 1 });
    }

    #[test]
    fn histogram_fit_uses_bin_centers() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.5, 1.2).unwrap();
        let mut h = Histogram1D::new("h", 60, -5.0, 6.0).unwrap();
        for _ in 0..200_000 {
            h.fill(normal.sample(&mut rng)).unwrap();
        }
        let peak = *h.counts().iter().max().unwrap() as f64;
        let fit = fit_histogram(&h, &ModelSpec::GaussianSum { k: 1 }, &[peak, 0.0, 1.0], FitOptions::default())
            .unwrap();
        assert!((fit.params[1] - 0.5).abs() < 0.02, "{:?}", fit.params);
        assert!((fit.params[2] - 1.2).abs() < 0.02, "{:?}", fit.params);
    }

    #[test]
    fn refit_does_not_increase_chi2() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let truth = [1.0, 0.0, 1.0];
        let xs = grid(-4.0, 4.0, 101);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| gaussian_sum_eval(&truth, x).unwrap() + noise.sample(&mut rng))
            .collect();
        let w = vec![1.0; xs.len()];
        let spec = ModelSpec::GaussianSum { k: 1 };
        let first = fit_points(&xs, &ys, &w, &spec, &[0.8, 0.3, 1.4], FitOptions::default()).unwrap();
        let second = fit_points(&xs, &ys, &w, &spec, &first.params, FitOptions::default()).unwrap();
        assert!(second.chi2 <= first.chi2 * (1.0 + 1e-8));
    }

    #[test]
    fn error_paths() {
        let spec = ModelSpec::GaussianSum { k: 1 };
        let xs = [0.0, 1.0];
        assert!(matches!(
            fit_points(&xs, &xs, &[1.0, 1.0], &spec, &[1.0, 0.0, 1.0], FitOptions::default()),
            Err(FitError::InsufficientData { needed: 3, got: 2 })
        ));
        let xs = [0.0, 1.0, 2.0];
        assert!(matches!(
            fit_points(&xs, &xs, &[1.0; 3], &spec, &[1.0, f64::NAN, 1.0], FitOptions::default()),
            Err(FitError::InvalidGuess { expected: 3 })
        ));
        assert_eq!(
            fit_points(&xs, &xs, &[1.0; 3], &spec, &[1.0, 0.0, -1.0], FitOptions::default()),
            Err(FitError::NonPositiveSigma)
        );
        // amplitude zero and width tiny: every derivative vanishes on the data
        assert_eq!(
            fit_points(&xs, &xs, &[1.0; 3], &spec, &[0.0, 100.0, 0.01], FitOptions::default()),
            Err(FitError::SingularJacobian)
        );
    }

    #[test]
    fn iteration_cap_reports_best_so_far() {
        let truth = [2.0, 1.0, 0.5];
        let xs = grid(-1.0, 3.0, 81);
        let ys: Vec<f64> = xs.iter().map(|&x| gaussian_sum_eval(&truth, x).unwrap()).collect();
        let w = vec![1.0; xs.len()];
        let opts = FitOptions {
            max_iter: 2,
            ..FitOptions::default()
        };
        let fit = fit_points(&xs, &ys, &w, &ModelSpec::GaussianSum { k: 1 }, &[1.5, 1.3, 0.8], opts).unwrap();
        assert_eq!(fit.iterations, 2);
        let start = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (y - gaussian_sum_eval(&[1.5, 1.3, 0.8], x).unwrap()).powi(2))
            .sum::<f64>();
        assert!(fit.chi2 < start);
    }

    struct Exponential;

    impl FitFunction for Exponential {
        fn name(&self) -> &str {
            "exp"
        }
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, p: &[f64], x: f64) -> f64 {
            p[0] * (-x / p[1]).exp()
        }
        fn positive_params(&self) -> Vec<usize> {
            vec![1]
        }
    }

    #[test]
    fn custom_model_with_numeric_gradient() {
        let xs = grid(0.0, 5.0, 40);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-x / 1.7f64).exp()).collect();
        let w = vec![1.0; xs.len()];
        let spec = ModelSpec::Custom(Arc::new(Exponential));
        let fit = fit_points(&xs, &ys, &w, &spec, &[1.0, 1.0], FitOptions::default()).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-6);
        assert!((fit.params[1] - 1.7).abs() < 1e-6);
        assert_eq!(fit.kind, FitKind::Custom { name: "exp".into() });
    }
}
