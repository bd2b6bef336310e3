//! The unified stochastic proximal loop and its variance-reduction estimators.
//!
//! Every variant runs the same iteration
//!
//! ```text
//! i_k ~ U[n]
//! e_k = estimator(i_k)
//! x_{k+1} = argmin_x f_{i_k}(x) − ⟨e_k, x − x_k⟩ + (1/α_k) D_h(x, x_k)     (implicit)
//! x_{k+1} = ∇h*(∇h(x_k) − α_k (∇f_{i_k}(x_k) − e_k))                        (explicit)
//! ```
//!
//! followed by an estimator update that uses the pre-update iterate `x_k`.
//!
//! | variant | `e_k`                                   | state                     |
//! |---------|-----------------------------------------|---------------------------|
//! | `none`  | `0`                                     | none                      |
//! | `saga`  | `∇f_{i_k}(φ_{i_k}) − (1/n) Σ ∇f_j(φ_j)` | gradient table            |
//! | `lsvrg` | `∇f_{i_k}(u) − ∇F(u)`                   | anchor, refreshed w.p. p  |
//! | `svrp`  | `∇f_{i_k}(x̃_s) − ∇F(x̃_s)`               | epoch anchor              |

mod averaging;
mod config;
mod estimator;
mod run;

pub use averaging::{averaged_iterate, AveragingWeights};
pub use config::{
    RunConfig, SamplingStreams, StepSchedule, SvrpOuter, UpdateMode, Variant, STREAM_BERNOULLI,
    STREAM_EPOCH, STREAM_INDEX,
};
pub use estimator::EstimatorState;
pub use run::{
    run_unified, run_unified_with_kernel, RunRecord, RunStatus, Trace, DIVERGENCE_THRESHOLD,
};
