//! Trajectory simulation of the coupled system with steady-state detection
//! and basin classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::find_interior_roots;
use crate::error::{ModelError, Result};
use crate::physics::{step, Params, State};

/// Sup-norm profile change below which a step counts toward steady state.
const STEADY_TEMP_TOL: f64 = 1e-8;
/// Iceline change threshold for the same test.
const STEADY_ETA_TOL: f64 = 1e-10;
/// Consecutive quiet steps required before declaring convergence; a single
/// step would false-trigger during slow drift.
const STEADY_WINDOW: usize = 100;
/// A basin sample counts as sitting on the separatrix when the iceline never
/// leaves this neighbourhood of the unstable root.
const SEPARATRIX_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Steady state reached with the iceline inside the grid.
    ConvergedInterior,
    /// Iceline left through the equatorward end of the grid.
    Frozen,
    /// Iceline left through the poleward end of the grid.
    IceFreeLocked,
    MaxSteps,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ConvergedInterior => "converged_interior",
            Outcome::Frozen => "frozen",
            Outcome::IceFreeLocked => "ice_free_locked",
            Outcome::MaxSteps => "max_steps",
        }
    }
}

/// One recorded sample along a trajectory. The profile is attached only on a
/// sparse subset of frames to bound output size.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub eta: f64,
    pub iceline_temp: f64,
    pub mean_temp: f64,
    pub profile: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: Params,
    pub frames: Vec<Frame>,
    pub outcome: Outcome,
    pub final_state: State,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub max_steps: usize,
    /// Steps between recorded frames.
    pub stride: usize,
    /// Recorded frames between profile dumps.
    pub profile_stride: usize,
    pub record_profiles: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_steps: 500_000,
            stride: 50,
            profile_stride: 10,
            record_profiles: false,
        }
    }
}

/// Integrate the coupled system until steady state, an iceline exit one grid
/// cell short of the domain ends, or the step budget runs out.
pub fn simulate(initial: State, params: &Params, opts: &SimOptions) -> Result<Trajectory> {
    let grid = params.grid();
    let exit_lo = grid.y_min() + grid.h();
    let exit_hi = grid.y_max() - grid.h();
    let dt = params.time_step();

    let mut frames = Vec::new();
    let mut state = initial;
    let mut quiet = 0usize;
    let mut outcome = Outcome::MaxSteps;
    let mut steps = opts.max_steps;

    for k in 0..opts.max_steps {
        if k.is_multiple_of(opts.stride) {
            let frame_idx = k / opts.stride;
            let profile = if opts.record_profiles && frame_idx.is_multiple_of(opts.profile_stride) {
                Some(state.profile.values().to_vec())
            } else {
                None
            };
            frames.push(Frame {
                time: k as f64 * dt,
                eta: state.eta,
                iceline_temp: state.profile.eval_clamped(state.eta),
                mean_temp: state.profile.mean_unit_interval(),
                profile,
            });
        }

        let next = step(&state, params);
        if !next.profile.is_finite() || !next.eta.is_finite() {
            return Err(ModelError::NonFiniteState { step: k });
        }

        let d_temp = next.profile.sup_distance(&state.profile);
        let d_eta = (next.eta - state.eta).abs();
        if d_temp < STEADY_TEMP_TOL && d_eta < STEADY_ETA_TOL {
            quiet += 1;
        } else {
            quiet = 0;
        }

        state = next;

        if quiet >= STEADY_WINDOW {
            outcome = Outcome::ConvergedInterior;
            steps = k + 1;
            break;
        }
        if state.eta < exit_lo {
            outcome = Outcome::Frozen;
            steps = k + 1;
            break;
        }
        if state.eta > exit_hi {
            outcome = Outcome::IceFreeLocked;
            steps = k + 1;
            break;
        }
    }

    Ok(Trajectory {
        params: *params,
        frames,
        outcome,
        final_state: state,
        steps,
    })
}

/// Relax the profile with the iceline pinned: the coupled step with the
/// iceline rate forced to zero. Converges to the local equilibrium of the
/// initial iceline.
pub fn fixed_iceline_simulate(
    initial: State,
    params: &Params,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let frozen = params
        .with_iceline_rate(0.0)
        .expect("zero rate is always valid");
    simulate(initial, &frozen, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinRecord {
    pub eta0: f64,
    pub outcome: Outcome,
    pub final_eta: f64,
    /// True when the iceline never left the 1e-3 neighbourhood of the
    /// unstable interior root.
    pub separatrix: bool,
}

/// Run one trajectory per iceline sample, seeded on the local equilibrium so
/// the reduced one-dimensional flow is isolated from fast transients.
pub fn classify_basins(
    eta_samples: &[f64],
    params: &Params,
    opts: &SimOptions,
) -> Result<Vec<BasinRecord>> {
    let unstable = find_interior_roots(params)
        .iter()
        .find(|r| !r.stable)
        .map(|r| r.eta);
    eta_samples
        .par_iter()
        .map(|&eta0| {
            let initial = State::new(
                crate::equilibria::equilibrium_profile(eta0, params),
                eta0,
            );
            let traj = simulate(initial, params, opts)?;
            let separatrix = match unstable {
                Some(root) => {
                    (traj.final_state.eta - root).abs() <= SEPARATRIX_TOL
                        && traj
                            .frames
                            .iter()
                            .all(|f| (f.eta - root).abs() <= SEPARATRIX_TOL)
                }
                None => false,
            };
            Ok(BasinRecord {
                eta0,
                outcome: traj.outcome,
                final_eta: traj.final_state.eta,
                separatrix,
            })
        })
        .collect()
}
