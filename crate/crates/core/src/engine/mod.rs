//! Numerical Kähler geometry on user-supplied metric fields.

pub mod curvature;
pub mod field;
pub mod geodesic;
pub mod ode;
pub mod riemann;

pub use curvature::{
    calibration_constant, calibration_sign, curvature_at, hsc, hsc_from, r0, r0_with_metric, random_unit, rm,
    verify_space_form, CurvatureComponents,
};
pub use field::{ComponentFn, Domain, Evaluator, MetricDerivatives, MetricField, Potential, Puncture};
pub use geodesic::{exp_map, geodesic, geodesic_with_frame, log_map, parallel_transport, ShootingOptions};
pub use ode::OdeOptions;
pub use riemann::{real_rm, real_rm_with_steps, real_sectional, rm_oracle};
