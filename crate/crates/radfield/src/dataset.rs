//! Dataset directories: `poses.json`, `images/NNNN.ppm`, `pointcloud.ply`,
//! optional `depth/NNNN.pgm`.

use crate::error::{Error, Result};
use crate::geometry::CameraModel;
use crate::io::{read_ppm, Image};
use crate::Mat4;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// One camera record as stored in `poses.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major 4x4 camera-to-world transform.
    pub c2w: [f64; 16],
    #[serde(default)]
    pub split: Split,
}

impl CameraRecord {
    pub fn from_camera(cam: &CameraModel, split: Split) -> Self {
        let mut c2w = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                c2w[r * 4 + c] = cam.pose[(r, c)];
            }
        }
        Self {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            c2w,
            split,
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        CameraModel::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Mat4::from_row_slice(&self.c2w),
        )
    }
}

pub fn save_poses(path: &Path, cameras: &[(CameraModel, Split)]) -> Result<()> {
    let records: Vec<CameraRecord> =
        cameras.iter().map(|(cam, split)| CameraRecord::from_camera(cam, *split)).collect();
    let json = serde_json::to_string_pretty(&records)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_poses(path: &Path) -> Result<Vec<(CameraModel, Split)>> {
    let text = std::fs::read_to_string(path)?;
    let records: Vec<CameraRecord> = serde_json::from_str(&text)?;
    records.iter().map(|r| Ok((r.to_camera()?, r.split))).collect()
}

/// A fully loaded scene dataset.
#[derive(Debug, Clone)]
pub struct SceneDataset {
    pub root: PathBuf,
    pub cameras: Vec<CameraModel>,
    pub splits: Vec<Split>,
    pub images: Vec<Image>,
    pub pointcloud_path: PathBuf,
}

pub fn image_path(root: &Path, index: usize) -> PathBuf {
    root.join("images").join(format!("{index:04}.ppm"))
}

pub fn depth_path(root: &Path, index: usize) -> PathBuf {
    root.join("depth").join(format!("{index:04}.pgm"))
}

impl SceneDataset {
    pub fn load(root: &Path) -> Result<Self> {
        let poses = load_poses(&root.join("poses.json"))?;
        let mut cameras = Vec::with_capacity(poses.len());
        let mut splits = Vec::with_capacity(poses.len());
        let mut images = Vec::with_capacity(poses.len());
        for (i, (cam, split)) in poses.into_iter().enumerate() {
            let img = read_ppm(&image_path(root, i))?;
            if img.width != cam.width as usize || img.height != cam.height as usize {
                return Err(Error::Format(format!(
                    "image {i} is {}x{} but its camera says {}x{}",
                    img.width, img.height, cam.width, cam.height
                )));
            }
            cameras.push(cam);
            splits.push(split);
            images.push(img);
        }
        if cameras.is_empty() {
            return Err(Error::Format("dataset has no cameras".into()));
        }
        // The invariant is image count == camera count; a missing image
        // file already failed above, an extra image is tolerated.
        Ok(Self {
            root: root.to_path_buf(),
            cameras,
            splits,
            images,
            pointcloud_path: root.join("pointcloud.ply"),
        })
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == split).then_some(i))
            .collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices_of(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices_of(Split::Test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_camera(t: f64) -> CameraModel {
        let mut pose = Mat4::identity();
        pose[(0, 3)] = t;
        CameraModel::new(50.0, 55.0, 32.0, 24.0, 64, 48, pose).unwrap()
    }

    #[test]
    fn poses_round_trip_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cams =
            vec![(sample_camera(0.0), Split::Test), (sample_camera(1.5), Split::Train)];
        let p1 = dir.path().join("poses.json");
        let p2 = dir.path().join("poses2.json");
        save_poses(&p1, &cams).unwrap();
        let back = load_poses(&p1).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1, Split::Test);
        assert_eq!(back[1].0.position().x, 1.5);
        save_poses(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn split_defaults_to_train_when_absent() {
        let json = r#"[{"fx":50.0,"fy":50.0,"cx":32.0,"cy":24.0,"width":64,"height":48,
            "c2w":[1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}]"#;
        let records: Vec<CameraRecord> = serde_json::from_str(json).unwrap();
        assert_eq!(records[0].split, Split::Train);
    }
}

#[cfg(test)]
mod rt_debug_tests {
    use super::*;

    #[test]
    fn roundtrip_debug() {
        let p1 = std::path::Path::new("/tmp/pdiff_scene/poses.json");
        if !p1.exists() { return; }
        let cams = load_poses(p1).unwrap();
        println!("loaded {} cams, first tx {}", cams.len(), cams[0].0.position().x);
        let p2 = std::path::Path::new("/tmp/pdiff_scene/poses2.json");
        save_poses(p2, &cams).unwrap();
        let a = std::fs::read(p1).unwrap();
        let b = std::fs::read(p2).unwrap();
        if a != b {
            let sa = String::from_utf8(a).unwrap();
            let sb = String::from_utf8(b).unwrap();
            for (la, lb) in sa.lines().zip(sb.lines()) {
                if la != lb { println!("L: {la}\nR: {lb}"); }
            }
            panic!("differs");
        }
    }
}
