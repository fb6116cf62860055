//! Cameras, rays, boxes, and the foreground/background scene bounds.
//!
//! The internal camera convention is x-right, y-down, z-forward; dataset
//! loaders are expected to convert on ingestion. All values are world units
//! unless noted.

use crate::error::{Error, Result};
use crate::{Mat3, Mat4, Vec3};

/// Pinhole camera with a rigid camera-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera-to-world transform, row-major on the wire.
    pub pose: Mat4,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        pose: Mat4,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::domain(format!("focal lengths must be positive, got fx={fx}, fy={fy}")));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(Error::domain(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        let r = pose.fixed_view::<3, 3>(0, 0).into_owned();
        let rtr = r.transpose() * r;
        if (rtr - Mat3::identity()).amax() > 1e-6 {
            return Err(Error::domain("pose rotation block is not orthonormal"));
        }
        let bottom = pose.row(3);
        if (bottom[0]).abs() > 1e-9
            || (bottom[1]).abs() > 1e-9
            || (bottom[2]).abs() > 1e-9
            || (bottom[3] - 1.0).abs() > 1e-9
        {
            return Err(Error::domain("pose bottom row must be (0, 0, 0, 1)"));
        }
        Ok(Self { fx, fy, cx, cy, width, height, pose })
    }

    pub fn rotation(&self) -> Mat3 {
        self.pose.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.pose[(0, 3)], self.pose[(1, 3)], self.pose[(2, 3)])
    }

    /// Camera-frame direction through continuous pixel coordinate
    /// `(px, py)`, where the pixel center sits at the half-integer offset.
    fn pixel_dir(&self, px: f64, py: f64) -> Vec3 {
        Vec3::new((px + 0.5 - self.cx) / self.fx, (py + 0.5 - self.cy) / self.fy, 1.0)
    }

    /// Returns a copy translated by `offset` expressed in the camera frame.
    pub fn translated_in_camera_frame(&self, offset: Vec3) -> CameraModel {
        let world_offset = self.rotation() * offset;
        let mut pose = self.pose;
        pose[(0, 3)] += world_offset.x;
        pose[(1, 3)] += world_offset.y;
        pose[(2, 3)] += world_offset.z;
        CameraModel { pose, ..self.clone() }
    }
}

/// A world-space ray with march bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::domain("ray direction must be unit-norm"));
        }
        if !(t_near >= 0.0 && t_near <= t_far) {
            return Err(Error::domain(format!("invalid march bounds [{t_near}, {t_far}]")));
        }
        Ok(Self { origin, direction, t_near, t_far })
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Axis-aligned box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(Error::domain("aabb min must not exceed max"));
        }
        Ok(Self { min, max })
    }

    /// Degenerate box around a single point; extended via `expand`.
    pub fn point(p: Vec3) -> Self {
        Self { min: p, max: p }
    }

    pub fn expand(&mut self, p: Vec3) {
        self.min = self.min.inf(&p);
        self.max = self.max.sup(&p);
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Closed-box membership.
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Scales the box about its center by a per-axis factor.
    pub fn scaled(&self, factor: Vec3) -> Aabb {
        let c = self.center();
        let h = self.extent().component_mul(&factor) * 0.5;
        Aabb { min: c - h, max: c + h }
    }

    /// Clamps a point into the closed box.
    pub fn clamp(&self, p: Vec3) -> Vec3 {
        p.sup(&self.min).inf(&self.max)
    }
}

/// Region classification relative to the scene bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Foreground,
    Background,
    Outside,
}

/// Foreground box wrapping all camera frustums plus the proportionally
/// enlarged background box around it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBounds {
    pub fg: Aabb,
    pub bg: Aabb,
    pub enlargement: Vec3,
}

impl SceneBounds {
    pub fn new(fg: Aabb, enlargement: Vec3) -> Result<Self> {
        if enlargement.x <= 1.0 || enlargement.y <= 1.0 || enlargement.z <= 1.0 {
            return Err(Error::domain("enlargement must exceed 1 on every axis"));
        }
        if fg.extent().min() <= 0.0 {
            return Err(Error::domain("foreground box must have positive extent"));
        }
        let bg = fg.scaled(enlargement);
        Ok(Self { fg, bg, enlargement })
    }

    /// Maps world coordinates so the foreground box becomes `[-1, 1]^3`.
    #[inline]
    pub fn fg_normalized(&self, x: Vec3) -> Vec3 {
        let c = self.fg.center();
        let h = self.fg.extent() * 0.5;
        Vec3::new((x.x - c.x) / h.x, (x.y - c.y) / h.y, (x.z - c.z) / h.z)
    }

    /// Inverse of `fg_normalized`.
    #[inline]
    pub fn fg_denormalized(&self, n: Vec3) -> Vec3 {
        let c = self.fg.center();
        let h = self.fg.extent() * 0.5;
        Vec3::new(c.x + n.x * h.x, c.y + n.y * h.y, c.z + n.z * h.z)
    }
}

/// Casts the world-space ray through pixel `(px, py)`.
pub fn generate_ray(camera: &CameraModel, px: f64, py: f64) -> Result<Ray> {
    if !(px >= 0.0 && px < camera.width as f64 && py >= 0.0 && py < camera.height as f64) {
        return Err(Error::domain(format!(
            "pixel ({px}, {py}) outside {}x{} image",
            camera.width, camera.height
        )));
    }
    let dir_world = camera.rotation() * camera.pixel_dir(px, py);
    Ray::new(camera.position(), dir_world.normalize(), 0.0, f64::INFINITY)
}

/// Wraps every camera frustum (eight corners through the image-plane corners
/// at the near and far depth, plus the camera center) in a tight box, then
/// enlarges it proportionally for the background.
pub fn compute_scene_bounds(
    cameras: &[CameraModel],
    frustum_near: f64,
    frustum_far: f64,
    enlargement: Vec3,
) -> Result<SceneBounds> {
    if cameras.is_empty() {
        return Err(Error::domain("scene bounds need at least one camera"));
    }
    if !(frustum_near >= 0.0 && frustum_near < frustum_far) {
        return Err(Error::domain(format!(
            "invalid frustum depths [{frustum_near}, {frustum_far}]"
        )));
    }
    let mut fg = Aabb::point(cameras[0].position());
    for cam in cameras {
        fg.expand(cam.position());
        let r = cam.rotation();
        let t = cam.position();
        for &(px, py) in &[
            (0.0, 0.0),
            (cam.width as f64, 0.0),
            (0.0, cam.height as f64),
            (cam.width as f64, cam.height as f64),
        ] {
            // Image-plane corners, so no half-pixel center offset here.
            let dir = Vec3::new((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
            for &depth in &[frustum_near, frustum_far] {
                fg.expand(t + r * (dir * depth));
            }
        }
    }
    SceneBounds::new(fg, enlargement)
}

/// Classifies a point as foreground (closed fg box), background (closed bg
/// box minus fg), or outside.
pub fn classify_point(bounds: &SceneBounds, x: Vec3) -> Region {
    if bounds.fg.contains(x) {
        Region::Foreground
    } else if bounds.bg.contains(x) {
        Region::Background
    } else {
        Region::Outside
    }
}

/// Slab test. Returns the parametric overlap of the ray with the box,
/// clipped to `[ray.t_near, ray.t_far]`, or `None` when they do not meet.
pub fn ray_aabb_intersect(ray: &Ray, bbox: &Aabb) -> Option<(f64, f64)> {
    let mut t_enter = ray.t_near;
    let mut t_exit = ray.t_far;
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        if d == 0.0 {
            if o < bbox.min[axis] || o > bbox.max[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let t0 = (bbox.min[axis] - o) * inv;
        let t1 = (bbox.max[axis] - o) * inv;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        t_enter = t_enter.max(lo);
        t_exit = t_exit.min(hi);
        if t_enter > t_exit {
            return None;
        }
    }
    Some((t_enter, t_exit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn identity_camera(width: u32, height: u32, fx: f64) -> CameraModel {
        CameraModel::new(
            fx,
            fx,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            Mat4::identity(),
        )
        .unwrap()
    }

    #[test]
    fn principal_point_ray_is_optical_axis() {
        let cam = identity_camera(100, 80, 60.0);
        let ray = generate_ray(&cam, cam.cx - 0.5, cam.cy - 0.5).unwrap();
        assert_relative_eq!(ray.direction, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        assert_eq!(ray.origin, Vec3::zeros());
    }

    #[test]
    fn unit_image_corner_ray_is_axis() {
        let cam = CameraModel::new(1.0, 1.0, 0.5, 0.5, 1, 1, Mat4::identity()).unwrap();
        let ray = generate_ray(&cam, 0.0, 0.0).unwrap();
        assert_relative_eq!(ray.direction, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn translation_moves_origin_only() {
        let mut pose = Mat4::identity();
        pose[(0, 3)] = 1.0;
        pose[(1, 3)] = 2.0;
        pose[(2, 3)] = 3.0;
        let cam = CameraModel::new(50.0, 50.0, 50.0, 40.0, 100, 80, pose).unwrap();
        let ray = generate_ray(&cam, cam.cx - 0.5, cam.cy - 0.5).unwrap();
        assert_eq!(ray.origin, Vec3::new(1.0, 2.0, 3.0));
        assert_relative_eq!(ray.direction, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn out_of_bounds_pixel_is_rejected() {
        let cam = identity_camera(100, 80, 60.0);
        assert!(generate_ray(&cam, 100.0, 10.0).is_err());
        assert!(generate_ray(&cam, -0.1, 10.0).is_err());
    }

    #[test]
    fn bounds_of_single_90_degree_camera() {
        // 90 degree FOV on both axes: tan(half) = 1, so fx = width/2.
        let cam = identity_camera(100, 100, 50.0);
        let bounds =
            compute_scene_bounds(&[cam], 0.0, 1.0, Vec3::new(2.0, 2.0, 2.0)).unwrap();
        assert_relative_eq!(bounds.fg.min, Vec3::new(-1.0, -1.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(bounds.fg.max, Vec3::new(1.0, 1.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn enlargement_scales_about_center() {
        let fg = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let bounds = SceneBounds::new(fg, Vec3::new(2.0, 2.0, 2.0)).unwrap();
        assert_relative_eq!(bounds.bg.min, Vec3::new(-2.0, -2.0, -2.0), epsilon = 1e-12);
        assert_relative_eq!(bounds.bg.max, Vec3::new(2.0, 2.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn duplicate_cameras_do_not_grow_bounds() {
        let cam = identity_camera(100, 100, 50.0);
        let one = compute_scene_bounds(&[cam.clone()], 0.0, 1.0, Vec3::new(2.0, 2.0, 2.0)).unwrap();
        let two = compute_scene_bounds(&[cam.clone(), cam], 0.0, 1.0, Vec3::new(2.0, 2.0, 2.0))
            .unwrap();
        assert_eq!(one.fg, two.fg);
    }

    #[test]
    fn empty_camera_list_is_rejected() {
        assert!(compute_scene_bounds(&[], 0.0, 1.0, Vec3::new(2.0, 2.0, 2.0)).is_err());
    }

    #[test]
    fn classification_partitions_space() {
        let fg = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let bounds = SceneBounds::new(fg, Vec3::new(2.0, 2.0, 2.0)).unwrap();
        assert_eq!(classify_point(&bounds, Vec3::zeros()), Region::Foreground);
        // On the bg boundary but outside fg: background (closed bg box).
        assert_eq!(classify_point(&bounds, Vec3::new(2.0, 0.0, 0.0)), Region::Background);
        assert_eq!(classify_point(&bounds, Vec3::new(2.1, 0.0, 0.0)), Region::Outside);
    }

    #[test]
    fn slab_test_from_outside() {
        let ray = Ray::new(Vec3::new(0.0, 0.0, -2.0), Vec3::new(0.0, 0.0, 1.0), 0.0, f64::MAX)
            .unwrap();
        let bbox = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let (t0, t1) = ray_aabb_intersect(&ray, &bbox).unwrap();
        assert_relative_eq!(t0, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t1, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_ray_outside_slab_misses() {
        let ray = Ray::new(Vec3::new(0.0, 5.0, -2.0), Vec3::new(0.0, 0.0, 1.0), 0.0, f64::MAX)
            .unwrap();
        let bbox = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(ray_aabb_intersect(&ray, &bbox).is_none());
    }

    #[test]
    fn origin_inside_box_clips_to_march_start() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 0.25, f64::MAX).unwrap();
        let bbox = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let (t0, t1) = ray_aabb_intersect(&ray, &bbox).unwrap();
        assert_eq!(t0, ray.t_near);
        assert_relative_eq!(t1, 1.0, epsilon = 1e-12);
    }

    fn arbitrary_camera() -> impl Strategy<Value = CameraModel> {
        (20.0f64..200.0, 20.0f64..200.0).prop_map(|(fx, fy)| {
            CameraModel::new(fx, fy, 64.0, 48.0, 128, 96, Mat4::identity()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn generated_rays_are_unit_norm(cam in arbitrary_camera(),
                                        px in 0.0f64..127.9,
                                        py in 0.0f64..95.9) {
            let ray = generate_ray(&cam, px, py).unwrap();
            prop_assert!((ray.direction.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn frustum_corners_are_contained(fx in 30.0f64..150.0,
                                         near in 0.0f64..0.5,
                                         span in 0.5f64..40.0) {
            let cam = CameraModel::new(fx, fx, 64.0, 48.0, 128, 96, Mat4::identity()).unwrap();
            let far = near + span;
            let bounds = compute_scene_bounds(&[cam.clone()], near, far,
                                              Vec3::new(2.0, 2.0, 2.0)).unwrap();
            for &(px, py) in &[(0.0, 0.0), (128.0, 0.0), (0.0, 96.0), (128.0, 96.0)] {
                let dir = Vec3::new((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
                for &d in &[near, far] {
                    let p = dir * d;
                    prop_assert!(bounds.fg.contains(p + Vec3::new(0.0, 0.0, 0.0)));
                }
            }
            prop_assert!(bounds.fg.contains(cam.position()));
        }

        #[test]
        fn classify_is_exhaustive_and_nested(x in -3.0f64..3.0,
                                             y in -3.0f64..3.0,
                                             z in -3.0f64..3.0) {
            let fg = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
            let bounds = SceneBounds::new(fg, Vec3::new(2.0, 2.0, 2.0)).unwrap();
            let p = Vec3::new(x, y, z);
            match classify_point(&bounds, p) {
                Region::Foreground => prop_assert!(bounds.fg.contains(p) && bounds.bg.contains(p)),
                Region::Background => {
                    prop_assert!(bounds.bg.contains(p) && !bounds.fg.contains(p))
                }
                Region::Outside => prop_assert!(!bounds.bg.contains(p)),
            }
        }

        #[test]
        fn intersection_points_lie_on_boundary(ox in -4.0f64..4.0, oy in -4.0f64..4.0,
                                               dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
            let dir = Vec3::new(dx, dy, 1.0).normalize();
            let ray = Ray::new(Vec3::new(ox, oy, -3.0), dir, 0.0, f64::MAX).unwrap();
            let bbox = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
            if let Some((t0, t1)) = ray_aabb_intersect(&ray, &bbox) {
                if t1 > t0 {
                    for &t in &[t0, t1] {
                        let p = ray.at(t);
                        let on_face = (0..3).any(|a| {
                            (p[a] - bbox.min[a]).abs() < 1e-9 || (p[a] - bbox.max[a]).abs() < 1e-9
                        });
                        let inside = (0..3).all(|a| {
                            p[a] > bbox.min[a] - 1e-9 && p[a] < bbox.max[a] + 1e-9
                        });
                        prop_assert!(on_face && inside);
                    }
                }
            }
        }
    }
}
