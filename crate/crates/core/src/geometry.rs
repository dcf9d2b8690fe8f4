//! Pinhole camera model and rigid transforms.
//!
//! Camera frame convention: `+z` along the optical axis, `+x` to the right
//! in the image and `+y` down. Poses stored on a camera map camera
//! coordinates to world coordinates. No lens distortion is modeled.

use nalgebra::{Matrix3, Matrix4, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type WorldPoint = Point3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Fails unless `rotation` is orthonormal with determinant +1 (to 1e-9).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("pose translation must be finite"));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(gram_err <= ORTHONORMAL_TOL) || !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(Error::invalid(format!(
                "rotation is not a proper orthonormal matrix (|R^T R - I| = {gram_err:e}, det = {det})"
            )));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self { rotation: *rotation.matrix(), translation }
    }

    /// Camera-to-world pose of a camera at `eye` looking at `target`, with
    /// image "up" as close to `up` as possible.
    pub fn look_at(eye: WorldPoint, target: WorldPoint, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(Error::invalid("look_at: eye and target coincide"));
        }
        let z = forward.normalize();
        let x = z.cross(&-up);
        if x.norm() < 1e-12 {
            return Err(Error::invalid("look_at: up is parallel to the view direction"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Ok(Self { rotation, translation: eye.coords })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn inverse_transform_point(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    #[inline]
    pub fn inverse_transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// On-disk form: row-major rotation rows and a translation vector.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let r = &p.rotation;
        PoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let rows = r.rotation;
        Pose::new(
            Matrix3::new(
                rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0], rows[2][1],
                rows[2][2],
            ),
            Vector3::from(r.translation),
        )
    }
}

/// Continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// `(u / width, v / height)`.
    pub fn normalized(&self, width: usize, height: usize) -> PixelCoord {
        PixelCoord::new(self.u / width as f64, self.v / height as f64)
    }

    pub fn denormalized(&self, width: usize, height: usize) -> PixelCoord {
        PixelCoord::new(self.u * width as f64, self.v * height as f64)
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr")]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Deserialize)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<IntrinsicsRepr> for Intrinsics {
    type Error = Error;

    fn try_from(r: IntrinsicsRepr) -> Result<Self> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::invalid(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::invalid(format!("principal point ({cx}, {cy}) outside a {width}x{height} image")));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }
}

/// Intrinsics plus camera-to-world pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Self {
        Self { intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self { intrinsics: self.intrinsics, pose }
    }

    pub fn world_to_camera(&self, p: &WorldPoint) -> WorldPoint {
        self.pose.inverse_transform_point(p)
    }

    /// Pixel coordinates and optical-axis depth of `p`. The depth may be
    /// non-positive for points behind the camera; pixels outside the image are
    /// returned as-is.
    #[inline]
    pub fn project(&self, p: &WorldPoint) -> (PixelCoord, f64) {
        let c = self.world_to_camera(p);
        let k = &self.intrinsics;
        (PixelCoord::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy), c.z)
    }

    pub fn backproject(&self, px: PixelCoord, depth: f64) -> Result<WorldPoint> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::invalid(format!("backproject needs positive depth, got {depth}")));
        }
        let k = &self.intrinsics;
        let c = WorldPoint::new((px.u - k.cx) * depth / k.fx, (px.v - k.cy) * depth / k.fy, depth);
        Ok(self.pose.transform_point(&c))
    }

    /// World-frame unit direction of the ray through continuous pixel `px`.
    pub fn ray_direction(&self, px: PixelCoord) -> Vector3<f64> {
        let k = &self.intrinsics;
        let d = Vector3::new((px.u - k.cx) / k.fx, (px.v - k.cy) / k.fy, 1.0);
        self.pose.transform_vector(&d).normalize()
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::from(*self.pose.translation())
    }

    /// Positive depth and pixel inside `[0, width) x [0, height)`.
    pub fn in_frustum(&self, p: &WorldPoint) -> bool {
        let (px, depth) = self.project(p);
        depth > 0.0 && self.pixel_in_image(px)
    }

    #[inline]
    pub fn pixel_in_image(&self, px: PixelCoord) -> bool {
        px.u >= 0.0 && px.u < self.intrinsics.width as f64 && px.v >= 0.0 && px.v < self.intrinsics.height as f64
    }

    /// Moves a pixel observed at `depth` by `self` into the image of `dst`.
    pub fn reproject_pixel(&self, dst: &CameraModel, px: PixelCoord, depth: f64) -> Result<PixelCoord> {
        let world = self.backproject(px, depth)?;
        Ok(dst.project(&world).0)
    }
}
