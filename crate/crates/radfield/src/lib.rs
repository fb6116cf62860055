//! A desk-scale differentiable radiance-field engine.
//!
//! The scene is split into a foreground box holding an explicit density
//! voxel grid plus a multi-resolution hashed color-embedding grid, and a
//! warped background region sharing the same machinery in four dimensions.
//! Geometry can be seeded from LiDAR point clouds before optimization, ray
//! marching is accelerated by a binary occupancy grid, and per-sample color
//! is decomposed into view-independent and view-dependent factors produced
//! by two small MLP heads. All gradients are hand-written; training runs in
//! double precision on the CPU, data-parallel across rays.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod lidar;
pub mod metrics;
pub mod parallel;
pub mod renderer;
pub mod rng;
pub mod sampler;
pub mod scene;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec4 = nalgebra::Vector4<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Mat4 = nalgebra::Matrix4<f64>;
