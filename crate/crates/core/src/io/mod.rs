//! File formats: PLY clouds, key-value text, images.

pub mod image;
pub mod kv;
pub mod ply;

pub use ply::{load_ply, read_ply, save_ply, save_ply_colored, write_ply, PlyFormat};
