"""Doubly robust triple-difference estimation of the ATT."""

from tripledd._native import (
    EstimateResult,
    PanelDataset,
    RcDataset,
    compositional_change_diagnostic,
    estimate_panel,
    estimate_rc,
    robustness_grid,
    run_scenario,
    simulate,
)

__all__ = [
    "EstimateResult",
    "PanelDataset",
    "RcDataset",
    "compositional_change_diagnostic",
    "estimate_panel",
    "estimate_rc",
    "robustness_grid",
    "run_scenario",
    "simulate",
]
