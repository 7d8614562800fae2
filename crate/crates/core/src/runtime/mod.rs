//! States, trajectories, generalized events and traces.

mod boundary;
mod event;
mod state;
mod traj;

pub use boundary::detect_boundary;
pub use event::{compat, trace_concat, Event, ReadySet, Trace};
pub use state::{merge_states, State};
pub use traj::{OdeSol, PwlPath, Trajectory, DEFAULT_STEP};

pub use crate::syntax::{CommDir, Dir};

/// Numeric settings shared by the executors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Integrator step.
    pub step: f64,
    /// Boundary search stops here.
    pub horizon: f64,
    /// Bisection width for boundary times.
    pub boundary_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { step: DEFAULT_STEP, horizon: 100.0, boundary_tol: 1e-12 }
    }
}

/// `traj_eval`.
pub fn traj_eval(tr: &Trajectory, t: f64) -> crate::Result<State> {
    tr.eval(t)
}
