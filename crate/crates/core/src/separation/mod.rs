//! Collagen/metabolic separation on the Casorati matrix.
//!
//! The total signal is arranged as a pixels x time matrix, decomposed by SVD, and an interval of
//! singular components starting at a data-driven cut-off is mapped back to a per-pixel
//! metabolic intensity.

mod casorati;
mod cutoff;
mod intensity;
mod svd;

pub use casorati::{build_casorati, build_component, CasoratiMatrix, Component};
pub use cutoff::{
    fit_breakpoint, fit_svd, select_cutoff, tv_profile, tv_seminorm, BreakpointFit, FitConfig,
};
pub use intensity::{
    best_possible_map, default_interval_length, filter_matrix, min_max_normalize,
    normalized_error, oracle_index, reconstruct_intensity, select_index_set, IntensityMap,
    SingularIndexSet,
};
pub use svd::{compute_svd, svd_of, SvdResult};
