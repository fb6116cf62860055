//! File formats: PPM/PGM images, the PLY point-cloud subset, and the
//! binary checkpoint.

mod checkpoint;
mod image;
mod ply;
mod ppm;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use image::{DepthImage, Image};
pub use ply::{read_ply, write_ply, PlyFormat};
pub use ppm::{read_pgm, read_ppm, write_pgm, write_ppm};
