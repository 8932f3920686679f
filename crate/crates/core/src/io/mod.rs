//! File formats: PLY point clouds, STL and OBJ triangle meshes.

mod mesh;
mod ply;

pub use mesh::{load_mesh, parse_obj, parse_stl, write_ascii_stl};
pub use ply::{read_ply, write_ply, PlyFormat};
