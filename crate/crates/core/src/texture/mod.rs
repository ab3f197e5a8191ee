//! Gray-level quantization and the four texture-matrix families over masked
//! 3D regions: GLCM, GLRLM, GLSZM and the multi-level MGLSZM, plus their
//! statistic vectors.

mod matrices;
mod quantize;
mod stats;

pub use matrices::{glcm, glrlm, glszm, mglszm, Connectivity, MatrixKind, TextureMatrix};
pub use quantize::{in_mask_window, quantize, QuantizedRegion};
pub use stats::{stat_names, texture_statistics, GLCM_STATS, GLRLM_STATS, GLSZM_STATS};

/// The 13 unique voxel directions at unit chessboard distance in 3D
/// (one representative per +/- pair).
pub const DIRECTIONS_13: [(i32, i32, i32); 13] = [
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 1, 0),
    (1, -1, 0),
    (1, 0, 1),
    (1, 0, -1),
    (0, 1, 1),
    (0, 1, -1),
    (1, 1, 1),
    (1, 1, -1),
    (1, -1, 1),
    (1, -1, -1),
];
