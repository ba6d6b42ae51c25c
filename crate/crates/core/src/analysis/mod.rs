//! Receptive-field and cost analysis of stacked masks.

mod cost;
mod reach;

pub use cost::{analytic_macs, cost_report, CostReport, LayerCost};
pub use reach::{reachability, seed_sweep, BitMatrix, ReachabilityReport, SeedSummary};
