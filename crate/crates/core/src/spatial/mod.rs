mod bvh;
mod kdtree;

pub use bvh::Bvh;
pub use kdtree::{KdTree, Neighbor};
