//! Metrics, the composite-value bound check, seeded sweeps and SVG plots.

mod bound;
mod metrics;
mod plot;
mod sweep;

pub use bound::{bound_check, composite_value, hop_product, BoundConfig, BoundReport, BoundTrial};
pub use metrics::{
    delusion_frequency, feasibility_errors, mean_ci95, welch_t_test, ErrorPair, ErrorReport, ErrorSample,
    ExpectedDistance,
};
pub use plot::plot_svg;
pub use sweep::{sweep, sweep_csv, sweep_summary, SweepRun, SweepSpec};
