//! Joint laws of the estimates across scales, modeling bias, oracle indices
//! and the closed-form risk bounds.

mod bias;
mod bounds;
mod joint;
mod kl;
mod report;
mod smb;
mod wilks;

pub use bias::{modeling_bias, oracle_index, ModelingBias};
pub use bounds::{
    componentwise_scaling, deviation_scales, exp_moment_bound, oracle_risk_bound, phi, poly_moment_bound,
    propagation_bound, propagation_factor, quasi_parametric_moment_bound, z2_bounds, z2_bounds_homogeneous, z2_exact,
    z2_homogeneous,
};
pub use joint::{
    boxcar_determinant, boxcar_determinant_from, boxcar_log_determinant_from, component_covariance, joint_covariance,
    sandwich_range,
};
pub use kl::{kl_homogeneous, kl_joint, kl_sandwich, KlReport};
pub use report::{oracle_report, ComponentDiagnostics, OracleInputs, OracleReport, ScaleDiagnostics};
pub use smb::{bias_sup_sequence, component_sd, lambda0, s_j_estimate, smb_from_tradeoff, SmbChoice};
pub use wilks::{projector_trace, two_log_likelihood_ratio, wilks_spectrum};
