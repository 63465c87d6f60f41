//! Doubly robust triple-difference estimation of the average treatment
//! effect on the treated, for two-period panels and repeated
//! cross-sections.

pub mod bootstrap;
pub mod config;
pub mod data;
pub mod dgp;
pub mod error;
pub mod montecarlo;
pub mod nuisance;
pub mod panel;
mod pipeline;
pub mod rc;
pub mod result;
pub mod weights;

pub use bootstrap::{bootstrap_se, Resample};
pub use data::{
    cell_counts_panel, cell_counts_rc, load_panel_csv, load_rc_csv, write_panel_csv, write_rc_csv, CellCounts, Design, Matrix,
    PanelColumns, PanelDataset, RcColumns, RcDataset,
};
pub use dgp::{derive_seed, generate_panel, generate_rc, pdt_violation_gap, treated_mean_x0, true_att, true_nuisances, DgpConfig};
pub use error::{Error, Result};
pub use montecarlo::{robustness_grid, run_scenario, EstimatorSummary, GridReport, McReport, Scenario};
pub use nuisance::{
    crossfit_assign, fit_outcome, fit_propensity, misspecify, predict_propensity, NuisanceConfig, OutcomeFamily, OutcomeModel,
    PropensityFamily, PropensityModel, ResponseKind,
};
pub use panel::{estimate_dr_panel, estimate_ipw_panel, estimate_or_panel, PanelEstimator};
pub use pipeline::Specification;
pub use rc::{
    compositional_change_diagnostic, estimate_dr_rc, estimate_dr_rc_ncc, estimate_ipw_rc, estimate_or_rc, CompositionReport,
    RcEstimator,
};
pub use result::{Diagnostics, EstimateResult};
pub use weights::{alpha_gdt, omega_gdt, phi0, rho0, w_gd, CellProbs4, CellProbs8};
