//! Synthetic scenes and Monte-Carlo risk experiments.

mod functions;
mod risk;
mod scene;
mod sweep;

pub use functions::TestFunction;
pub use risk::{risk_experiment, risk_experiment_with, PointRisk, RiskRow, RiskTable, MAX_EXCLUSION_RATE};
pub use scene::{DesignSpec, Scene, SceneSpec, SigmaSpec, SigmaTrueSpec};
pub use sweep::{delta_sweep, SweepCell, SweepReport};
