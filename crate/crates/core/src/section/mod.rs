//! Boundary sections, their sliding normalization and the monitors built
//! on them.

pub mod extract;
pub mod john;
pub mod monitors;
pub mod normalize;

pub use extract::{compute_section, supporting_slope, value_at, Section};
pub use john::{john_ellipse_2d, john_interval, slice_john_axes, JohnAxes};
pub use monitors::{
    enforce_h2, growth_envelope, normal_derivative_monitor, pogorelov_monitor, pogorelov_series,
    tangent_cone_profile, ConeProfile,
};
pub use normalize::{
    default_ladder, dn_from_axes, h_ladder, image_center, normalize_section, scaling_fit,
    sliding_from_center, NormalizationRecord, ScalingFit, SlidingMap,
};
