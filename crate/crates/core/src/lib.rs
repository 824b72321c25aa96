//! Stochastic optimal-velocity car-following model.
//!
//! A follower tracks a lead vehicle moving at constant speed. In the lead
//! vehicle's frame the pair reduces to a planar system in the gap `x` and
//! relative velocity `y`, with a singular velocity-matching force
//! `-β y / x²` that keeps the deterministic dynamics away from `x = 0`.
//! This crate integrates that system, builds the barrier curve used to
//! bound collision probabilities under small additive noise, simulates the
//! regularized SDE with Euler–Maruyama and runs Monte Carlo sweeps over the
//! noise level and horizon.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod error;
pub mod integrator;
pub mod interp;
pub mod mc;
pub mod model;
pub mod ode;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use model::{DerivedConstants, ModelParams, PhysicalParams, State, Tangent};

#[cfg(test)]
pub(crate) mod testing {
    use crate::model::ModelParams;

    pub(crate) fn canonical() -> ModelParams {
        #[derive(serde::Deserialize)]
        struct File {
            model: ModelParams,
        }
        let text = include_str!("../../../configs/canonical.json");
        serde_json::from_str::<File>(text).unwrap().model
    }
}
