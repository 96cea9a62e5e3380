//! Software camera and perspective projection for point-cloud views.
//!
//! NDC convention: x and y in [-1, 1] with y up, depth in [0, 1] after the
//! perspective divide (0 at the near plane).

use nalgebra::{Matrix4, Point3, Unit, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

pub const PITCH_LIMIT_DEG: f64 = 89.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum View3dError {
    #[error("degenerate camera: {0}")]
    DegenerateCamera(&'static str),
    #[error("aspect ratio must be positive and finite, got {0}")]
    InvalidAspect(f64),
    #[error("point cloud contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub fov_y: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            eye: [0.0, 0.0, 5.0],
            look_at: [0.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_y: 60.0,
            near: 0.1,
            far: 100.0,
        }
    }
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl Camera {
    /// Builds a camera; `up` is normalized.
    pub fn new(eye: [f64; 3], look_at: [f64; 3], up: [f64; 3], fov_y: f64, near: f64, far: f64) -> Result<Self, View3dError> {
        let cam = Self {
            eye,
            look_at,
            up: v3(up).try_normalize(0.0).map(|u| [u.x, u.y, u.z]).unwrap_or(up),
            fov_y,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), View3dError> {
        let all = self.eye.iter().chain(&self.look_at).chain(&self.up);
        if !all.chain([&self.fov_y, &self.near, &self.far]).all(|v| v.is_finite()) {
            return Err(View3dError::DegenerateCamera("non-finite field"));
        }
        let forward = v3(self.look_at) - v3(self.eye);
        if forward.norm() == 0.0 {
            return Err(View3dError::DegenerateCamera("eye equals look_at"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(View3dError::DegenerateCamera("fov_y outside (0, 180)"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(View3dError::DegenerateCamera("need 0 < near < far"));
        }
        let up = v3(self.up);
        if up.norm() == 0.0 || forward.normalize().cross(&up.normalize()).norm() < 1e-12 {
            return Err(View3dError::DegenerateCamera("up parallel to view direction"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        (v3(self.eye) - v3(self.look_at)).norm()
    }

    /// Orthonormal `(right, up, back)` camera basis; `back` points from
    /// `look_at` towards the eye.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let back = (v3(self.eye) - v3(self.look_at)).normalize();
        let right = v3(self.up).cross(&back).normalize();
        let up = back.cross(&right);
        (right, up, back)
    }

    /// Right-handed world-to-camera transform.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let (r, u, b) = self.basis();
        let e = v3(self.eye);
        #[rustfmt::skip]
        let m = Matrix4::new(
            r.x, r.y, r.z, -r.dot(&e),
            u.x, u.y, u.z, -u.dot(&e),
            b.x, b.y, b.z, -b.dot(&e),
            0.0, 0.0, 0.0, 1.0,
        );
        m
    }

    /// Perspective with `tan(fov_y/2)` vertical scaling, mapping the view
    /// depth range [near, far] to [0, 1].
    pub fn projection_matrix(&self, aspect: f64) -> Matrix4<f64> {
        let f = 1.0 / (self.fov_y.to_radians() / 2.0).tan();
        let (n, fa) = (self.near, self.far);
        #[rustfmt::skip]
        let m = Matrix4::new(
            f / aspect, 0.0, 0.0, 0.0,
            0.0, f, 0.0, 0.0,
            0.0, 0.0, fa / (n - fa), n * fa / (n - fa),
            0.0, 0.0, -1.0, 0.0,
        );
        m
    }
}

pub fn view_projection(camera: &Camera, aspect: f64) -> Result<Matrix4<f64>, View3dError> {
    camera.validate()?;
    if !(aspect > 0.0 && aspect.is_finite()) {
        return Err(View3dError::InvalidAspect(aspect));
    }
    Ok(camera.projection_matrix(aspect) * camera.view_matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projected {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    /// True when the point lies on or behind the eye plane.
    pub culled: bool,
}

/// Applies a view-projection matrix and the perspective divide.
pub fn project_point(vp: &Matrix4<f64>, p: [f64; 3]) -> Projected {
    let c: Vector4<f64> = vp * Vector4::new(p[0], p[1], p[2], 1.0);
    if c.w <= 0.0 {
        return Projected {
            x: f64::NAN,
            y: f64::NAN,
            depth: f64::NAN,
            culled: true,
        };
    }
    Projected {
        x: c.x / c.w,
        y: c.y / c.w,
        depth: c.z / c.w,
        culled: false,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_scalar: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self, View3dError> {
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(View3dError::NonFinite);
        }
        Ok(Self {
            positions,
            color_scalar: None,
        })
    }

    pub fn with_color_scalar(mut self, scalar: Vec<f64>) -> Result<Self, View3dError> {
        if scalar.len() != self.positions.len() || scalar.iter().any(|v| !v.is_finite()) {
            return Err(View3dError::NonFinite);
        }
        self.color_scalar = Some(scalar);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    /// Index of the source point in the cloud.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

/// Projects every point and drops those outside the view frustum.
/// Retained points keep their input order.
pub fn project_cloud(camera: &Camera, aspect: f64, cloud: &PointCloud) -> Result<Vec<ScreenPoint>, View3dError> {
    let vp = view_projection(camera, aspect)?;
    let inside = |v: f64| (-1.0..=1.0).contains(&v);
    Ok(cloud
        .positions
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let q = project_point(&vp, *p);
            (!q.culled && inside(q.x) && inside(q.y) && (0.0..=1.0).contains(&q.depth)).then_some(ScreenPoint {
                index,
                x: q.x,
                y: q.y,
                depth: q.depth,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orbit {
    pub camera: Camera,
    /// Set when the requested pitch exceeded the limit and was clamped.
    pub pitch_clamped: bool,
}

/// Current elevation of the eye above the plane normal to `up`, degrees.
pub fn pitch_deg(camera: &Camera) -> f64 {
    let offset = (v3(camera.eye) - v3(camera.look_at)).normalize();
    offset.dot(&v3(camera.up).normalize()).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Rotates the eye about `look_at`: yaw around `up`, then pitch around the
/// camera's right axis. Pitch is clamped to ±89°. Angles in degrees.
pub fn orbit(camera: &Camera, d_yaw: f64, d_pitch: f64) -> Result<Orbit, View3dError> {
    camera.validate()?;
    if !(d_yaw.is_finite() && d_pitch.is_finite()) {
        return Err(View3dError::DegenerateCamera("non-finite orbit angle"));
    }
    let up = Unit::new_normalize(v3(camera.up));
    let offset = v3(camera.eye) - v3(camera.look_at);

    let current = pitch_deg(camera);
    let wanted = current + d_pitch;
    let target = wanted.clamp(-PITCH_LIMIT_DEG, PITCH_LIMIT_DEG);
    let pitch_clamped = target != wanted;

    let yawed = UnitQuaternion::from_axis_angle(&up, d_yaw.to_radians()) * offset;
    let right = Unit::new_normalize(up.cross(&yawed));
    // positive pitch raises the eye towards `up`
    let pitched = UnitQuaternion::from_axis_angle(&right, -(target - current).to_radians()) * yawed;

    let look = Point3::from(v3(camera.look_at));
    let eye = look + pitched;
    Ok(Orbit {
        camera: Camera {
            eye: [eye.x, eye.y, eye.z],
            up: [up.x, up.y, up.z],
            ..*camera
        },
        pitch_clamped,
    })
}
