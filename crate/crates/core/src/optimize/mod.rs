//! Optimizers for the cutoff rate: exhaustive search over the one-parameter
//! family `Q_n(t)`, geodesic descent over all of SO(n), and steepest ascent
//! over NUQAM level sets.
//!
//! All optimizers return local optima.

mod family;
mod nuqam;
mod rotation;

pub use family::{
    g_of_t, grid_search_t, grid_search_t_profile, low_snr_optimal_t, search, FamilyObjective,
    TSearchResult,
};
pub use nuqam::{
    nuqam_objective, optimize_nuqam, standard_qam_energy, AlphaDescentResult, NuqamOptions,
    DEFAULT_PERTURBED_STARTS,
};
pub use rotation::{
    cutoff_rate_gradient, default_initial_rotation, optimize_rotation_full, RotationObjective,
};
