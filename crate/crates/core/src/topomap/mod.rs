//! Power topographic maps: electrode projection, biharmonic spline
//! interpolation and 32×32×5 frame assembly.

mod biharmonic;
mod frame;
mod layout;
mod linalg;

pub use biharmonic::{biharmonic_eval, biharmonic_fit, green, BiharmonicModel, BIHARMONIC_RIDGE};
pub use frame::{
    grid_coords, read_frame_cache, write_frame_cache, FrameCacheHeader, TopoFrame, TopoMapper,
    FRAME_BANDS, FRAME_SIZE, GRID_SIZE, PAD,
};
pub use layout::{
    deap_layout, deap_spherical, mirror_index, project_layout, Electrode, ElectrodeLayout,
    SphericalPos, CHANNEL_NAMES,
};
pub use linalg::Lu;
