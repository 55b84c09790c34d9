//! Cross-module checks tying the computed invariant graph to the flow it is
//! supposed to organize, plus the set-invariance properties of the transform.

use dibm::equilibria::{equilibrium_profile, find_interior_roots};
use dibm::grid::Profile;
use dibm::manifold::{
    certificate, equilibrium_graph, fixed_point, graph_transform, invariant_class_bound,
    FixedPointOptions, GraphFn,
};
use dibm::physics::{fast_field, insolation, step, slow_field, Params, State};

const CERTIFIED_RATE: f64 = 4e-4;

fn opts(nodes: usize) -> FixedPointOptions {
    FixedPointOptions {
        tol: 1e-9,
        max_iter: 2000,
        eta_nodes: nodes,
    }
}

fn parabolic(p: &Params) -> Profile {
    Profile::from_fn(p.grid(), |y| 14.0 - 54.0 * y * y)
}

/// After the fast transient, the running distance of a trajectory to the
/// invariant graph must not grow: the graph is the attractor the flow
/// collapses onto. The matched comparison against the local-equilibrium
/// family is strictly larger mid-drift, which separates the two objects.
#[test]
fn trajectories_collapse_onto_the_invariant_graph() {
    let p = Params::default().with_iceline_rate(CERTIFIED_RATE).unwrap();
    let run = fixed_point(&p, &FixedPointOptions::default()).unwrap();

    let mut state = State::new(
        {
            // local equilibrium plus a bump: off-manifold start
            let base = equilibrium_profile(0.35, &p);
            Profile::new(
                p.grid(),
                p.grid()
                    .nodes()
                    .zip(base.values())
                    .map(|(y, v)| v + 3.0 * (-(y - 0.3) * (y - 0.3) / 0.02).exp())
                    .collect(),
            )
            .unwrap()
        },
        0.35,
    );

    let mut prev_gap: Option<f64> = None;
    let mut tracked = 0usize;
    let mut saw_larger_equilibrium_gap = false;
    for _ in 0..60_000 {
        let f = fast_field(&state, &p);
        if f.sup_norm() < 0.1 {
            let on_graph = run.graph.profile_at(state.eta);
            let gap = state.profile.sup_distance(&on_graph);
            if let Some(prev) = prev_gap {
                assert!(gap <= prev + 1e-3, "distance to the graph grew: {prev} -> {gap}");
            }
            let eq_gap = state
                .profile
                .sup_distance(&equilibrium_profile(state.eta, &p));
            if eq_gap > 2.0 * gap + 1e-3 {
                saw_larger_equilibrium_gap = true;
            }
            prev_gap = Some(gap);
            tracked += 1;
        }
        state = step(&state, &p);
        if slow_field(&state, &p).abs() < 1e-11 && fast_field(&state, &p).sup_norm() < 1e-9 {
            break;
        }
    }
    assert!(tracked > 100, "tracked {tracked} post-transient steps");
    assert!(
        saw_larger_equilibrium_gap,
        "mid-drift the trajectory must hug the graph tighter than the equilibrium family"
    );
}

/// Fast relaxation precedes slow drift in the certified regime: the fast
/// field dies down long before the iceline covers half its journey. At the
/// simulation rate 0.025 this ordering genuinely fails (the moving front
/// keeps the fast field excited), so the small-rate regime is the one tested.
#[test]
fn fast_relaxation_precedes_slow_drift() {
    let p = Params::default().with_iceline_rate(CERTIFIED_RATE).unwrap();
    let eta2 = find_interior_roots(&p)[1].eta;
    let mut state = State::new(parabolic(&p), 0.5);
    let half_gap = 0.5 * (eta2 - 0.5).abs();
    let mut t_fast: Option<f64> = None;
    let mut t_half: Option<f64> = None;
    for k in 0..2_000_000u64 {
        if t_fast.is_none() && fast_field(&state, &p).sup_norm() < 1.0 {
            t_fast = Some(k as f64 * p.time_step());
        }
        if t_half.is_none() && (state.eta - eta2).abs() <= half_gap {
            t_half = Some(k as f64 * p.time_step());
        }
        if t_fast.is_some() && t_half.is_some() {
            break;
        }
        state = step(&state, &p);
    }
    let (t_fast, t_half) = (t_fast.unwrap(), t_half.unwrap());
    assert!(
        t_fast < t_half,
        "fast time {t_fast} must precede halving time {t_half}"
    );
}

/// One transform step keeps graphs inside the profile ball.
#[test]
fn transform_preserves_the_profile_ball() {
    let p = Params::default().with_iceline_rate(CERTIFIED_RATE).unwrap();
    let cert = certificate(&p);
    let grid = p.grid();
    for (base, amp, omega) in [(0.0, 100.0, 2.0), (-40.0, 300.0, 0.7), (30.0, 380.0, 1.3)] {
        let g = GraphFn::sample(grid.y_min(), grid.y_max(), 201, |eta| {
            Profile::from_fn(grid, |y| base + amp * (omega * y).sin() * (0.5 * eta).cos())
        });
        assert!(g.sup_bound() <= cert.r_bound);
        let m = graph_transform(&g, &p).unwrap();
        assert!(
            m.sup_bound() <= cert.r_bound + 1e-9,
            "ball violated: {} > {}",
            m.sup_bound(),
            cert.r_bound
        );
    }
}

/// The transform does NOT preserve the certificate's small Lipschitz class:
/// one step of the zero graph already has slope ~ dt * 0.15 M Q s(0) from the
/// albedo front. What is preserved is the self-consistent class bound.
#[test]
fn transform_lipschitz_class_is_the_self_consistent_one() {
    let p = Params::default().with_iceline_rate(CERTIFIED_RATE).unwrap();
    let cert = certificate(&p);
    let grid = p.grid();

    let zero = GraphFn::sample(grid.y_min(), grid.y_max(), 201, |_| {
        Profile::constant(grid, 0.0)
    });
    let m_zero = graph_transform(&zero, &p).unwrap();
    let front_gain = p.time_step()
        * 0.15
        * p.albedo_steepness()
        * p.solar_constant()
        * insolation(0.0);
    assert!(
        m_zero.lipschitz_in_eta() > 40.0 * cert.l_bound,
        "the small class is genuinely not preserved (measured {})",
        m_zero.lipschitz_in_eta()
    );
    assert!(
        m_zero.lipschitz_in_eta() <= front_gain * 1.02,
        "one-step slope {} exceeds the front bound {}",
        m_zero.lipschitz_in_eta(),
        front_gain
    );

    // members of the self-consistent class stay inside it
    let l_inv = invariant_class_bound(&p);
    assert!(l_inv.is_finite() && l_inv > front_gain);
    let steep = equilibrium_graph(&p, 201); // slope ~360, well inside l_inv
    assert!(steep.lipschitz_in_eta() <= l_inv);
    let m_steep = graph_transform(&steep, &p).unwrap();
    assert!(
        m_steep.lipschitz_in_eta() <= l_inv + 1e-6,
        "class bound violated: {} > {l_inv}",
        m_steep.lipschitz_in_eta()
    );
}

/// Residual of the converged graph under one more transform stays below
/// twice the convergence tolerance.
#[test]
fn fixed_point_residual_bound() {
    let p = Params::default().with_iceline_rate(CERTIFIED_RATE).unwrap();
    let run = fixed_point(&p, &opts(201)).unwrap();
    let again = graph_transform(&run.graph, &p).unwrap();
    assert!(again.distance(&run.graph) < 2e-9);
}
