//! Closed-form solutions, barriers and transforms used as oracles.

pub mod barrier;
pub mod closed_form;
pub mod hyperdual;
pub mod legendre;
pub mod level_set;

pub use barrier::{calibrate_w1, verify_barrier, verify_wbar_formulas, BarrierKind, BarrierSpec};
pub use closed_form::{verify_ma_identity, ClosedForm, ClosedFormKind};
pub use legendre::{involution_check, legendre_full, partial_legendre_2d, PartialLegendre};
pub use level_set::{
    gauss_identity_check, level_set_graph, levelset_pogorelov_monitor, levelset_pogorelov_series,
    ExplicitSmooth, Patch, Smooth,
};
