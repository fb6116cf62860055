//! Synthetic scene generation: analytic ray casting of boxes, spheres, and
//! a ground slab with Lambertian shading plus an optional specular lobe,
//! simulated LiDAR returns, and dataset directory output.

use crate::dataset::{image_path, save_poses, Split};
use crate::error::{Error, Result};
use crate::geometry::{generate_ray, ray_aabb_intersect, Aabb, CameraModel, Ray};
use crate::io::{write_pgm, write_ppm, DepthImage, Image, PlyFormat};
use crate::lidar::PointCloud;
use crate::rng;
use crate::{Mat4, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SpecularSpec {
    /// Lobe strength multiplying the cosine-power term.
    pub strength: f64,
    /// Cosine power around the mirror direction.
    pub power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PrimitiveSpec {
    Box {
        center: [f64; 3],
        half_extent: [f64; 3],
        albedo: [f64; 3],
        #[serde(default)]
        specular: Option<SpecularSpec>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: [f64; 3],
        #[serde(default)]
        specular: Option<SpecularSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GroundSpec {
    /// Plane height (y points down, so the ground is the largest y).
    pub y: f64,
    pub albedo: [f64; 3],
    #[serde(default)]
    pub specular: Option<SpecularSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CameraPathSpec {
    /// Number of poses along the arc.
    pub count: usize,
    pub fov_deg: f64,
    /// Arc center and radius in the horizontal (x, z) plane.
    pub orbit_center: [f64; 3],
    pub orbit_radius: f64,
    /// Camera height (y, pointing down).
    pub height: f64,
    pub look_at: [f64; 3],
    pub start_deg: f64,
    pub end_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LidarScanSpec {
    pub azimuth_steps: usize,
    pub elevation_steps: usize,
    /// Elevation limits in degrees, positive above the horizon.
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub max_range: f64,
    /// Fraction of returns randomly discarded.
    #[serde(default)]
    pub dropout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    /// Direction light travels (world frame).
    pub direction: [f64; 3],
    /// Ambient fraction in [0, 1).
    pub ambient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub seed: u64,
    pub image: ImageSize,
    /// Declared extent containing all primitives.
    pub scene_min: [f64; 3],
    pub scene_max: [f64; 3],
    #[serde(default)]
    pub ground: Option<GroundSpec>,
    pub primitives: Vec<PrimitiveSpec>,
    pub cameras: CameraPathSpec,
    pub lidar: LidarScanSpec,
    pub light: LightSpec,
}

impl SyntheticSceneSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: SyntheticSceneSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.count < 2 {
            return Err(Error::Config("camera path needs at least 2 poses".into()));
        }
        let lo = Vec3::from(self.scene_min);
        let hi = Vec3::from(self.scene_max);
        let bbox = Aabb::new(lo, hi)?;
        for p in &self.primitives {
            let inside = match p {
                PrimitiveSpec::Box { center, half_extent, .. } => {
                    let c = Vec3::from(*center);
                    let h = Vec3::from(*half_extent);
                    bbox.contains(c - h) && bbox.contains(c + h)
                }
                PrimitiveSpec::Sphere { center, radius, .. } => {
                    let c = Vec3::from(*center);
                    let r = Vec3::new(*radius, *radius, *radius);
                    bbox.contains(c - r) && bbox.contains(c + r)
                }
            };
            if !inside {
                return Err(Error::Config("primitive extends outside the declared extent".into()));
            }
        }
        Ok(())
    }
}

enum Shape {
    Box(Aabb),
    Sphere { center: Vec3, radius: f64 },
}

struct Surface {
    shape: Shape,
    albedo: [f64; 3],
    specular: Option<SpecularSpec>,
}

struct Hit<'a> {
    t: f64,
    normal: Vec3,
    surface: &'a Surface,
}

/// Compiled scene: primitives plus the ground slab.
pub struct RayCaster {
    surfaces: Vec<Surface>,
    light_to: Vec3,
    ambient: f64,
}

impl RayCaster {
    pub fn new(spec: &SyntheticSceneSpec) -> Self {
        let mut surfaces = Vec::new();
        for p in &spec.primitives {
            match p {
                PrimitiveSpec::Box { center, half_extent, albedo, specular } => {
                    let c = Vec3::from(*center);
                    let h = Vec3::from(*half_extent);
                    surfaces.push(Surface {
                        shape: Shape::Box(Aabb { min: c - h, max: c + h }),
                        albedo: *albedo,
                        specular: *specular,
                    });
                }
                PrimitiveSpec::Sphere { center, radius, albedo, specular } => {
                    surfaces.push(Surface {
                        shape: Shape::Sphere { center: Vec3::from(*center), radius: *radius },
                        albedo: *albedo,
                        specular: *specular,
                    });
                }
            }
        }
        if let Some(g) = &spec.ground {
            // Thin slab spanning the declared extent at the ground height.
            let min = Vec3::new(spec.scene_min[0], g.y, spec.scene_min[2]);
            let max = Vec3::new(spec.scene_max[0], g.y + 1e-4, spec.scene_max[2]);
            surfaces.push(Surface {
                shape: Shape::Box(Aabb { min, max }),
                albedo: g.albedo,
                specular: g.specular,
            });
        }
        // Shading uses the direction toward the light.
        let light_to = -Vec3::from(spec.light.direction).normalize();
        Self { surfaces, light_to, ambient: spec.light.ambient }
    }

    fn hit(&self, ray: &Ray) -> Option<Hit<'_>> {
        let mut best: Option<Hit> = None;
        for surface in &self.surfaces {
            let t = match &surface.shape {
                Shape::Box(bbox) => match ray_aabb_intersect(ray, bbox) {
                    Some((t0, t1)) if t1 > 1e-9 => {
                        if t0 > 1e-9 {
                            Some(t0)
                        } else {
                            None // origin inside the slab: skip
                        }
                    }
                    _ => None,
                },
                Shape::Sphere { center, radius } => {
                    let oc = ray.origin - center;
                    let b = oc.dot(&ray.direction);
                    let c = oc.norm_squared() - radius * radius;
                    let disc = b * b - c;
                    if disc < 0.0 {
                        None
                    } else {
                        let t = -b - disc.sqrt();
                        (t > 1e-9).then_some(t)
                    }
                }
            };
            if let Some(t) = t {
                if best.as_ref().map(|h| t < h.t).unwrap_or(true) {
                    let p = ray.at(t);
                    let normal = match &surface.shape {
                        Shape::Box(bbox) => box_normal(bbox, p),
                        Shape::Sphere { center, radius } => (p - center) / *radius,
                    };
                    best = Some(Hit { t, normal, surface });
                }
            }
        }
        best
    }

    /// Lambertian term plus an optional cosine-power lobe around the
    /// mirror direction.
    fn shade(&self, hit: &Hit, view_dir: Vec3) -> [f64; 3] {
        let mut n = hit.normal;
        if n.dot(&view_dir) > 0.0 {
            n = -n; // face the viewer
        }
        let diffuse = self.ambient + (1.0 - self.ambient) * n.dot(&self.light_to).max(0.0);
        let mut out = [0.0; 3];
        for ch in 0..3 {
            out[ch] = hit.surface.albedo[ch] * diffuse;
        }
        if let Some(spec) = &hit.surface.specular {
            let reflected = 2.0 * n.dot(&self.light_to) * n - self.light_to;
            let highlight = reflected.dot(&(-view_dir)).max(0.0).powf(spec.power);
            for slot in &mut out {
                *slot += spec.strength * highlight;
            }
        }
        for slot in &mut out {
            *slot = slot.clamp(0.0, 1.0);
        }
        out
    }

    /// Renders the ground-truth image and per-pixel hit distance.
    pub fn render(&self, cam: &CameraModel) -> Result<(Image, DepthImage)> {
        let (w, h) = (cam.width as usize, cam.height as usize);
        let mut image = Image::new(w, h);
        let mut depths = vec![None; w * h];
        for py in 0..h {
            for px in 0..w {
                let ray = generate_ray(cam, px as f64, py as f64)?;
                if let Some(hit) = self.hit(&ray) {
                    image.set_pixel(px, py, self.shade(&hit, ray.direction));
                    depths[py * w + px] = Some(hit.t);
                }
            }
        }
        Ok((image, DepthImage::quantize(w, h, &depths)))
    }

    /// First-hit returns of a spherical scan pattern from `origin`.
    pub fn scan(
        &self,
        origin: Vec3,
        scan: &LidarScanSpec,
        seed: u64,
        pose_index: u64,
    ) -> Vec<Vec3> {
        let mut points = Vec::new();
        let mut counter = 0u64;
        for ei in 0..scan.elevation_steps {
            let f = if scan.elevation_steps == 1 {
                0.5
            } else {
                ei as f64 / (scan.elevation_steps - 1) as f64
            };
            let elev_deg =
                scan.elevation_min_deg + f * (scan.elevation_max_deg - scan.elevation_min_deg);
            let elev = elev_deg.to_radians();
            for ai in 0..scan.azimuth_steps {
                counter += 1;
                let az = ai as f64 / scan.azimuth_steps as f64 * std::f64::consts::TAU;
                // Elevation is measured above the horizon; y points down.
                let dir = Vec3::new(
                    elev.cos() * az.sin(),
                    -elev.sin(),
                    elev.cos() * az.cos(),
                );
                let ray = Ray { origin, direction: dir, t_near: 0.0, t_far: scan.max_range };
                if let Some(hit) = self.hit(&ray) {
                    if hit.t <= scan.max_range {
                        if scan.dropout > 0.0 {
                            let u = rng::unit_f64(
                                seed,
                                rng::domain::LIDAR_DROPOUT,
                                pose_index,
                                counter,
                            );
                            if u < scan.dropout {
                                continue;
                            }
                        }
                        points.push(ray.at(hit.t));
                    }
                }
            }
        }
        points
    }
}

fn box_normal(bbox: &Aabb, p: Vec3) -> Vec3 {
    // Face with the smallest distance to the hit point.
    let mut best_axis = 0;
    let mut best_sign = -1.0;
    let mut best_d = f64::INFINITY;
    for axis in 0..3 {
        let d_min = (p[axis] - bbox.min[axis]).abs();
        let d_max = (p[axis] - bbox.max[axis]).abs();
        if d_min < best_d {
            best_d = d_min;
            best_axis = axis;
            best_sign = -1.0;
        }
        if d_max < best_d {
            best_d = d_max;
            best_axis = axis;
            best_sign = 1.0;
        }
    }
    let mut n = Vec3::zeros();
    n[best_axis] = best_sign;
    n
}

/// Cameras along the configured arc, looking at the target point.
pub fn camera_path(spec: &SyntheticSceneSpec) -> Result<Vec<CameraModel>> {
    let c = &spec.cameras;
    let mut cams = Vec::with_capacity(c.count);
    let fov = c.fov_deg.to_radians();
    let fx = spec.image.width as f64 / 2.0 / (fov / 2.0).tan();
    let fy = fx;
    let look_at = Vec3::from(c.look_at);
    for i in 0..c.count {
        let f = if c.count == 1 { 0.5 } else { i as f64 / (c.count - 1) as f64 };
        let angle = (c.start_deg + f * (c.end_deg - c.start_deg)).to_radians();
        let center = Vec3::from(c.orbit_center);
        let position = Vec3::new(
            center.x + c.orbit_radius * angle.sin(),
            c.height,
            center.z - c.orbit_radius * angle.cos(),
        );
        let forward = (look_at - position).normalize();
        // World down is +y; camera frame is x-right, y-down, z-forward.
        let down = Vec3::new(0.0, 1.0, 0.0);
        let right = down.cross(&forward).normalize();
        let cam_down = forward.cross(&right);
        let mut pose = Mat4::identity();
        for r in 0..3 {
            pose[(r, 0)] = right[r];
            pose[(r, 1)] = cam_down[r];
            pose[(r, 2)] = forward[r];
            pose[(r, 3)] = position[r];
        }
        cams.push(CameraModel::new(
            fx,
            fy,
            spec.image.width as f64 / 2.0,
            spec.image.height as f64 / 2.0,
            spec.image.width,
            spec.image.height,
            pose,
        )?);
    }
    Ok(cams)
}

/// Renders the full dataset into `out_dir`: poses (every 10th marked test),
/// images, depth maps, and the simulated point cloud.
pub fn generate_dataset(spec: &SyntheticSceneSpec, out_dir: &Path) -> Result<()> {
    spec.validate()?;
    let caster = RayCaster::new(spec);
    let cams = camera_path(spec)?;
    std::fs::create_dir_all(out_dir.join("images"))?;
    std::fs::create_dir_all(out_dir.join("depth"))?;

    let tagged: Vec<(CameraModel, Split)> = cams
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, cam)| (cam, if i % 10 == 0 { Split::Test } else { Split::Train }))
        .collect();
    save_poses(&out_dir.join("poses.json"), &tagged)?;

    let mut cloud = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        let (image, depth) = caster.render(cam)?;
        write_ppm(&image_path(out_dir, i), &image)?;
        write_pgm(&out_dir.join("depth").join(format!("{i:04}.pgm")), &depth)?;
        cloud.extend(caster.scan(cam.position(), &spec.lidar, spec.seed, i as u64));
    }
    PointCloud::new(cloud).save_ply(&out_dir.join("pointcloud.ply"), PlyFormat::BinaryLittleEndian)
}

/// A compact reference scene: gray ground, two boxes, one sphere, twenty
/// poses. `specular` adds a glossy lobe to the ground and sphere so the
/// view-dependent head has real signal to learn.
pub fn reference_scene_spec(width: u32, height: u32, poses: usize, specular: bool) -> SyntheticSceneSpec {
    let spec = |on: bool| {
        if on {
            Some(SpecularSpec { strength: 0.35, power: 12.0 })
        } else {
            None
        }
    };
    SyntheticSceneSpec {
        seed: 7,
        image: ImageSize { width, height },
        scene_min: [-4.0, -2.5, -1.0],
        scene_max: [4.0, 1.01, 8.0],
        ground: Some(GroundSpec { y: 1.0, albedo: [0.55, 0.5, 0.45], specular: spec(specular) }),
        primitives: vec![
            PrimitiveSpec::Box {
                center: [-1.2, 0.5, 3.5],
                half_extent: [0.5, 0.5, 0.5],
                albedo: [0.8, 0.25, 0.2],
                specular: None,
            },
            PrimitiveSpec::Box {
                center: [1.1, 0.65, 4.5],
                half_extent: [0.7, 0.35, 0.5],
                albedo: [0.2, 0.35, 0.85],
                specular: None,
            },
            PrimitiveSpec::Sphere {
                center: [0.1, 0.55, 2.6],
                radius: 0.45,
                albedo: [0.25, 0.7, 0.3],
                specular: spec(specular),
            },
        ],
        cameras: CameraPathSpec {
            count: poses,
            fov_deg: 60.0,
            orbit_center: [0.0, 0.0, 3.4],
            orbit_radius: 3.2,
            height: -0.4,
            look_at: [0.0, 0.45, 3.4],
            start_deg: -32.0,
            end_deg: 32.0,
        },
        lidar: LidarScanSpec {
            azimuth_steps: 180,
            elevation_steps: 24,
            elevation_min_deg: -40.0,
            elevation_max_deg: 25.0,
            max_range: 30.0,
            dropout: 0.0,
        },
        light: LightSpec { direction: [0.35, 0.8, 0.45], ambient: 0.35 },
    }
}
