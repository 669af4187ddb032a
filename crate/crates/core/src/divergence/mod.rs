//! Discrepancy terms of the bounds, each with an exact route and, where it
//! matters, a scalable estimation route.
//!
//! | term | exact | estimated |
//! |------|-------|-----------|
//! | HΔH divergence | [`hdh_divergence_exact`] | [`hdh_divergence_adversarial`] |
//! | single-hypothesis divergence | [`single_hyp_discrepancy_exact`] | [`single_hyp_discrepancy_adversarial`] |
//! | discrepancy distance | [`mansour_discrepancy`] | |
//! | Wasserstein-1 | [`wasserstein1_exact`] | [`wasserstein1_sinkhorn`] |
//! | λ | [`lambda_exact`] | [`lambda_trained`] (upper bound) |

mod adversarial;
mod finite;
mod lambda;
mod ot;
mod sinkhorn;

use serde::{Deserialize, Serialize};

pub use adversarial::{
    hdh_divergence_adversarial, single_hyp_discrepancy_adversarial, AdversaryConfig,
};
pub use finite::{hdh_divergence_exact, mansour_discrepancy, single_hyp_discrepancy_exact};
pub use lambda::{lambda_exact, lambda_trained, LambdaEstimate, Witness};
pub use ot::{euclidean, transport_plan_exact, wasserstein1_exact, TransportPlan};
pub use sinkhorn::{wasserstein1_sinkhorn, SinkhornConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactEnum,
    Adversarial,
    ExactOt,
    Sinkhorn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactEnum => "exact_enum",
            Method::Adversarial => "adversarial",
            Method::ExactOt => "exact_ot",
            Method::Sinkhorn => "sinkhorn",
        }
    }
}

/// What the reported value certifies about the true quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    LowerBound,
    UpperBound,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::LowerBound => "lower_bound",
            Status::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Sinkhorn: L1 violation of the unprojected marginal.
    pub marginal_violation: Option<f64>,
    /// Adversarial routes: the smoothed objective that was ascended.
    pub surrogate: Option<String>,
    /// Exact routes: indices of the maximizing member(s).
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub method: Method,
    pub status: Status,
    pub diagnostics: Diagnostics,
}

impl DivergenceEstimate {
    pub(crate) fn exact(value: f64, method: Method, diagnostics: Diagnostics) -> Self {
        Self {
            value,
            method,
            status: Status::Optimal,
            diagnostics,
        }
    }

    /// True when the value is exact.
    pub fn is_exact(&self) -> bool {
        self.status == Status::Optimal
    }
}
