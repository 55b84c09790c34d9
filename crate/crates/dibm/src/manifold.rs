//! Graph-transform computation of the attracting invariant manifold.
//!
//! A graph assigns a temperature profile to every iceline position. One
//! transform step pulls each iceline back through the slow map's preimage and
//! advances the profile found there by one Euler step of the fast field;
//! iterating from the local-equilibrium family converges to the invariant
//! graph. The contraction certificate evaluates the constants under which a
//! single transform step provably shrinks graph distances.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::equilibrium_profile;
use crate::error::{ModelError, Result};
use crate::grid::Profile;
use crate::physics::{fast_field, insolation, Params, State, ALBEDO_HALF_RANGE};

/// Convergence threshold for the scalar preimage iteration.
const PREIMAGE_TOL: f64 = 1e-12;
const PREIMAGE_MAX_ITER: usize = 200;
/// Number of trailing residual ratios averaged into the empirical rate.
const RATIO_TAIL: usize = 10;

/// Default node count of the iceline grid carrying a graph.
pub const DEFAULT_ETA_NODES: usize = 401;

/// A discretized graph: one profile per node of a uniform iceline grid.
/// Between nodes the graph is evaluated by linear interpolation of profiles;
/// beyond the grid it extends as a constant, which loses nothing because the
/// albedo is saturated there.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFn {
    eta_min: f64,
    eta_max: f64,
    profiles: Vec<Profile>,
}

impl GraphFn {
    pub fn sample<F: Fn(f64) -> Profile>(
        eta_min: f64,
        eta_max: f64,
        n_nodes: usize,
        f: F,
    ) -> Self {
        assert!(n_nodes >= 2 && eta_min < eta_max);
        let profiles = (0..n_nodes)
            .map(|i| {
                let t = i as f64 / (n_nodes - 1) as f64;
                f(eta_min + (eta_max - eta_min) * t)
            })
            .collect();
        GraphFn {
            eta_min,
            eta_max,
            profiles,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.profiles.len()
    }

    pub fn eta_node(&self, i: usize) -> f64 {
        let t = i as f64 / (self.profiles.len() - 1) as f64;
        self.eta_min + (self.eta_max - self.eta_min) * t
    }

    pub fn eta_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.profiles.len()).map(move |i| self.eta_node(i))
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    fn spacing(&self) -> f64 {
        (self.eta_max - self.eta_min) / (self.profiles.len() - 1) as f64
    }

    fn locate(&self, eta: f64) -> (usize, f64) {
        let e = eta.clamp(self.eta_min, self.eta_max);
        let t = (e - self.eta_min) / self.spacing();
        let nearest = t.round();
        if (t - nearest).abs() < 1e-9 {
            let i = (nearest as usize).min(self.profiles.len() - 1);
            return (i.min(self.profiles.len() - 2), if i == self.profiles.len() - 1 { 1.0 } else { 0.0 });
        }
        let i = (t.floor() as usize).min(self.profiles.len() - 2);
        (i, t - i as f64)
    }

    /// Profile at an arbitrary iceline, linearly interpolated between nodes.
    pub fn profile_at(&self, eta: f64) -> Profile {
        let (i, w) = self.locate(eta);
        if w == 0.0 {
            return self.profiles[i].clone();
        }
        if w == 1.0 {
            return self.profiles[i + 1].clone();
        }
        self.profiles[i].blend(&self.profiles[i + 1], w)
    }

    /// Temperature of the graph at iceline `eta`, zone `y`; both coordinates
    /// are clamped into their grids.
    pub fn value_at(&self, eta: f64, y: f64) -> f64 {
        let (i, w) = self.locate(eta);
        let v0 = self.profiles[i].eval_clamped(y);
        if w == 0.0 {
            return v0;
        }
        let v1 = self.profiles[i + 1].eval_clamped(y);
        v0 * (1.0 - w) + v1 * w
    }

    /// Sup over nodes of the profile sup-norms: the graph-space norm.
    pub fn sup_bound(&self) -> f64 {
        self.profiles.iter().fold(0.0f64, |m, p| m.max(p.sup_norm()))
    }

    /// Max over adjacent nodes of sup-norm difference quotients: the
    /// discrete Lipschitz-in-iceline estimate.
    pub fn lipschitz_in_eta(&self) -> f64 {
        let d = self.spacing();
        self.profiles
            .windows(2)
            .fold(0.0f64, |m, w| m.max(w[0].sup_distance(&w[1]) / d))
    }

    /// Graph-space distance: sup over nodes of profile sup-distances.
    pub fn distance(&self, other: &GraphFn) -> f64 {
        debug_assert_eq!(self.profiles.len(), other.profiles.len());
        self.profiles
            .iter()
            .zip(&other.profiles)
            .fold(0.0f64, |m, (a, b)| m.max(a.sup_distance(b)))
    }
}

/// Constants of the contraction argument, evaluated for a parameter set.
///
/// `rho` uses the sum of the two auxiliary constants; `rho_literal` doubles
/// the larger one. Certification requires both below one, which holds
/// exactly when `eps <= eps_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    /// Lipschitz bound of the graph family used by the estimates.
    pub l_bound: f64,
    /// Sup bound on admissible profiles.
    pub r_bound: f64,
    /// Largest iceline rate the contraction argument admits.
    pub eps_max: f64,
    /// Rate actually configured.
    pub eps_used: f64,
    pub dt_used: f64,
    /// L eps / (1 - (L + r) eps); None when the denominator is not positive.
    pub delta1: Option<f64>,
    /// L r eps / (1 - (L + r) eps).
    pub delta2: Option<f64>,
    /// (1 - dt B) + dt (delta1 + delta2).
    pub rho: Option<f64>,
    /// (1 - dt B) + dt (2 delta2).
    pub rho_literal: Option<f64>,
    pub certified: bool,
}

/// Evaluate the contraction constants for `params`.
pub fn certificate(params: &Params) -> ContractionCertificate {
    let l = (0.62f64).max(ALBEDO_HALF_RANGE * params.albedo_steepness());
    let r = params.solar_constant() * insolation(0.0);
    let b = params.olr_slope();
    let dt = params.time_step();
    let eps = params.iceline_rate();
    let eps_max = b / (2.0 * (l * r + l + r));
    let denom = 1.0 - (l + r) * eps;
    let (delta1, delta2, rho, rho_literal) = if denom > 0.0 {
        let d1 = l * eps / denom;
        let d2 = l * r * eps / denom;
        (
            Some(d1),
            Some(d2),
            Some((1.0 - dt * b) + dt * (d1 + d2)),
            Some((1.0 - dt * b) + dt * 2.0 * d2),
        )
    } else {
        (None, None, None, None)
    };
    let certified = eps <= eps_max
        && rho.is_some_and(|r| r < 1.0)
        && rho_literal.is_some_and(|r| r < 1.0);
    ContractionCertificate {
        l_bound: l,
        r_bound: r,
        eps_max,
        eps_used: eps,
        dt_used: dt,
        delta1,
        delta2,
        rho,
        rho_literal,
        certified,
    }
}

/// Self-consistent Lipschitz bound of the class the transform leaves
/// invariant: one step maps a graph with constant `l` to one with constant at
/// most `kappa ((1 - dt B) l + dt 0.15 M Q s(0))`, and this value is the
/// fixed point of that recursion. The bound from the certificate is far
/// smaller and is not preserved; see the ball-invariance tests.
pub fn invariant_class_bound(params: &Params) -> f64 {
    let cert = certificate(params);
    let kappa = {
        let shrink = 1.0 - params.iceline_rate() * params.time_step() * (cert.l_bound + cert.r_bound);
        if shrink > 0.0 {
            1.0 / shrink
        } else {
            return f64::INFINITY;
        }
    };
    let front_gain = params.time_step()
        * ALBEDO_HALF_RANGE
        * params.albedo_steepness()
        * params.solar_constant()
        * insolation(0.0);
    let decay = kappa * (1.0 - params.time_step() * params.olr_slope());
    if decay >= 1.0 {
        return f64::INFINITY;
    }
    kappa * front_gain / (1.0 - decay)
}

/// Solve `eta = xi + eps dt (graph(xi)(xi) - T_c)` for the preimage `xi` by
/// the fixed-point iteration on the displacement, starting from zero.
pub fn preimage(graph: &GraphFn, eta: f64, params: &Params) -> Result<f64> {
    let scale = params.iceline_rate() * params.time_step();
    let t_c = params.critical_temp();
    let mut k = 0.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..PREIMAGE_MAX_ITER {
        let xi = eta + k;
        let next = scale * (t_c - graph.value_at(xi, xi));
        residual = (next - k).abs();
        k = next;
        if residual < PREIMAGE_TOL {
            return Ok(eta + k);
        }
    }
    Err(ModelError::PreimageDiverged {
        eta,
        iterations: PREIMAGE_MAX_ITER,
        residual,
    })
}

/// One graph-transform step: pull each node back through the preimage and
/// advance the profile found there by one Euler step of the fast field.
/// Nodes are independent and run in parallel.
pub fn graph_transform(graph: &GraphFn, params: &Params) -> Result<GraphFn> {
    let n = graph.n_nodes();
    let profiles: Result<Vec<Profile>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta = graph.eta_node(i);
            let xi = preimage(graph, eta, params)?;
            let pulled = graph.profile_at(xi);
            let tendency = fast_field(&State::new(pulled.clone(), xi), params);
            let dt = params.time_step();
            let values = pulled
                .values()
                .iter()
                .zip(tendency.values())
                .map(|(t, f)| t + dt * f)
                .collect();
            Ok(Profile::from_values_unchecked(*pulled.spec(), values))
        })
        .collect();
    Ok(GraphFn {
        eta_min: graph.eta_min,
        eta_max: graph.eta_max,
        profiles: profiles?,
    })
}

/// The local-equilibrium graph, the seed of the fixed-point iteration.
pub fn equilibrium_graph(params: &Params, n_nodes: usize) -> GraphFn {
    let grid = params.grid();
    GraphFn::sample(grid.y_min(), grid.y_max(), n_nodes, |eta| {
        equilibrium_profile(eta, params)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub eta_nodes: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-9,
            max_iter: 10_000,
            eta_nodes: DEFAULT_ETA_NODES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointRun {
    pub graph: GraphFn,
    pub iterations: usize,
    pub final_residual: f64,
    /// Mean of the trailing residual ratios; None when convergence was
    /// immediate.
    pub empirical_ratio: Option<f64>,
}

/// Iterate the transform from the local-equilibrium seed until successive
/// graphs agree to `tol` in the graph norm.
pub fn fixed_point(params: &Params, opts: &FixedPointOptions) -> Result<FixedPointRun> {
    fixed_point_from(equilibrium_graph(params, opts.eta_nodes), params, opts)
}

/// Same iteration from an arbitrary seed; the limit is seed-independent.
pub fn fixed_point_from(
    seed: GraphFn,
    params: &Params,
    opts: &FixedPointOptions,
) -> Result<FixedPointRun> {
    let mut current = seed;
    let mut ratios: Vec<f64> = Vec::new();
    let mut prev_residual: Option<f64> = None;
    for iter in 1..=opts.max_iter {
        let next = graph_transform(&current, params)?;
        let residual = next.distance(&current);
        current = next;
        if let Some(prev) = prev_residual {
            if prev > 0.0 {
                ratios.push(residual / prev);
            }
        }
        prev_residual = Some(residual);
        if residual < opts.tol {
            let tail = ratios.iter().rev().take(RATIO_TAIL).copied().collect::<Vec<_>>();
            let empirical_ratio = if tail.is_empty() {
                None
            } else {
                Some(tail.iter().sum::<f64>() / tail.len() as f64)
            };
            return Ok(FixedPointRun {
                graph: current,
                iterations: iter,
                final_residual: residual,
                empirical_ratio,
            });
        }
    }
    let ratio = ratios.last().copied().unwrap_or(f64::NAN);
    Err(ModelError::FixedPointDiverged {
        iterations: opts.max_iter,
        residual: prev_residual.unwrap_or(f64::NAN),
        ratio,
    })
}

/// Matched-iceline distance between a graph and the local-equilibrium family:
/// max over nodes of the profile sup-distance at the same iceline.
pub fn distance_to_equilibrium_set(phi: &GraphFn, params: &Params) -> f64 {
    phi.eta_nodes()
        .zip(phi.profiles())
        .fold(0.0f64, |m, (eta, p)| {
            m.max(p.sup_distance(&equilibrium_profile(eta, params)))
        })
}

/// Same distance restricted to iceline nodes inside [0, 1].
pub fn distance_to_equilibrium_unit_interval(phi: &GraphFn, params: &Params) -> f64 {
    phi.eta_nodes()
        .zip(phi.profiles())
        .filter(|(eta, _)| (0.0..=1.0).contains(eta))
        .fold(0.0f64, |m, (eta, p)| {
            m.max(p.sup_distance(&equilibrium_profile(eta, params)))
        })
}

/// Iceline temperature excess of the graph along the diagonal, tabulated at
/// the nodes inside [0, 1]; its sign is the reduced 1-D dynamics.
pub fn reduced_dynamics(phi: &GraphFn, params: &Params) -> Vec<(f64, f64)> {
    phi.eta_nodes()
        .zip(phi.profiles())
        .filter(|(eta, _)| (0.0..=1.0).contains(eta))
        .map(|(eta, p)| (eta, p.eval_clamped(eta) - params.critical_temp()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::find_interior_roots;
    use approx::assert_relative_eq;

    fn small_opts() -> FixedPointOptions {
        FixedPointOptions {
            tol: 1e-9,
            max_iter: 2000,
            eta_nodes: 201,
        }
    }

    #[test]
    fn certificate_at_defaults() {
        let p = Params::default();
        let c = certificate(&p);
        assert_eq!(c.l_bound, 3.75);
        assert_relative_eq!(c.r_bound, 343.0 * 1.241, epsilon = 1e-9);
        assert_relative_eq!(c.eps_max, 4.6899e-4, max_relative = 1e-4);
        // default eps = 0.025 is far beyond the certified regime
        assert!(!c.certified);
        assert!(c.delta1.is_none(), "denominator is negative at eps = 0.025");
    }

    #[test]
    fn certificate_at_zero_rate() {
        let p = Params::default().with_iceline_rate(0.0).unwrap();
        let c = certificate(&p);
        assert_eq!(c.delta1, Some(0.0));
        assert_eq!(c.delta2, Some(0.0));
        assert_relative_eq!(c.rho.unwrap(), 1.0 - 0.1 * 1.9, epsilon = 1e-12);
        assert!(c.certified);
    }

    #[test]
    fn certificate_at_eps_max_stays_contractive() {
        let p = Params::default();
        let eps_max = certificate(&p).eps_max;
        let c = certificate(&Params::default().with_iceline_rate(eps_max).unwrap());
        let b_half = p.olr_slope() / 2.0;
        assert!(c.delta1.unwrap() < c.delta2.unwrap());
        assert!(c.delta2.unwrap() < b_half);
        assert!(c.rho.unwrap() < 1.0);
        assert!(c.rho_literal.unwrap() < 1.0);
        assert!(c.certified);
    }

    #[test]
    fn preimage_identity_cases() {
        let p0 = Params::default().with_iceline_rate(0.0).unwrap();
        let g = equilibrium_graph(&p0, 101);
        assert_eq!(preimage(&g, 0.37, &p0).unwrap(), 0.37);

        // critical-temperature graph: no displacement at any rate
        let p = Params::default();
        let flat = GraphFn::sample(-0.5, 1.5, 101, |_| {
            Profile::constant(p.grid(), p.critical_temp())
        });
        assert_eq!(preimage(&flat, 0.8, &p).unwrap(), 0.8);
    }

    #[test]
    fn preimage_constant_profile_closed_form() {
        let p = Params::default();
        let c = 5.0;
        let flat = GraphFn::sample(-0.5, 1.5, 101, |_| Profile::constant(p.grid(), c));
        let eta = 0.3;
        let xi = preimage(&flat, eta, &p).unwrap();
        let expect = eta - p.iceline_rate() * p.time_step() * (c - p.critical_temp());
        assert_eq!(xi, expect);
    }

    #[test]
    fn preimage_consistency_across_nodes() {
        let p = Params::default().with_iceline_rate(4e-4).unwrap();
        let g = equilibrium_graph(&p, 201);
        let scale = p.iceline_rate() * p.time_step();
        for i in 0..g.n_nodes() {
            let eta = g.eta_node(i);
            let xi = preimage(&g, eta, &p).unwrap();
            let residual = (xi + scale * (g.value_at(xi, xi) - p.critical_temp()) - eta).abs();
            assert!(residual < 1e-10, "node {i}: residual {residual}");
        }
    }

    #[test]
    fn preimage_reports_divergence_for_absurd_rates() {
        // eps dt times the diagonal slope of the equilibrium family is far
        // above one here, so the displacement iteration cannot settle
        let mut v = Params::default().values();
        v.iceline_rate = 50.0;
        let p = Params::try_from(v).unwrap();
        let g = equilibrium_graph(&p, 201);
        let err = preimage(&g, 0.24, &p).unwrap_err();
        assert!(matches!(err, ModelError::PreimageDiverged { .. }));
    }

    #[test]
    fn transform_fixes_equilibrium_graph_at_zero_rate() {
        let p = Params::default().with_iceline_rate(0.0).unwrap();
        let g = equilibrium_graph(&p, 201);
        let m = graph_transform(&g, &p).unwrap();
        assert!(m.distance(&g) < 1e-10);
    }

    #[test]
    fn transform_of_zero_graph_is_bounded_by_one_forcing_step() {
        let p = Params::default().with_iceline_rate(4e-4).unwrap();
        let zero = GraphFn::sample(-0.5, 1.5, 201, |_| Profile::constant(p.grid(), 0.0));
        let m = graph_transform(&zero, &p).unwrap();
        let bound = p.time_step() * (p.solar_constant() * insolation(0.0) * 0.68 + p.olr_intercept());
        assert!(m.sup_bound() <= bound + 1e-9, "{} vs {}", m.sup_bound(), bound);
    }

    #[test]
    fn fixed_point_immediate_at_zero_rate() {
        let p = Params::default().with_iceline_rate(0.0).unwrap();
        let run = fixed_point(&p, &small_opts()).unwrap();
        assert!(run.iterations <= 2);
        let seed = equilibrium_graph(&p, small_opts().eta_nodes);
        assert!(run.graph.distance(&seed) < 1e-9);
    }

    #[test]
    fn fixed_point_limit_is_seed_independent() {
        let p = Params::default().with_iceline_rate(4e-4).unwrap();
        let opts = small_opts();
        let from_equilibrium = fixed_point(&p, &opts).unwrap();
        let zero_seed = GraphFn::sample(-0.5, 1.5, opts.eta_nodes, |_| {
            Profile::constant(p.grid(), 0.0)
        });
        let from_zero = fixed_point_from(zero_seed, &p, &opts).unwrap();
        assert!(
            from_equilibrium.graph.distance(&from_zero.graph) < 1e-6,
            "distance {}",
            from_equilibrium.graph.distance(&from_zero.graph)
        );
    }

    #[test]
    fn fixed_point_ratio_below_certificate_rho() {
        let p = Params::default().with_iceline_rate(4e-4).unwrap();
        let run = fixed_point(&p, &small_opts()).unwrap();
        let rho = certificate(&p).rho.unwrap();
        let measured = run.empirical_ratio.unwrap();
        assert!(measured <= rho + 0.01, "ratio {measured} vs rho {rho}");
    }

    #[test]
    fn fixed_point_converges_at_simulation_rate() {
        // uncertified regime; convergence is empirical
        let p = Params::default();
        let run = fixed_point(&p, &small_opts()).unwrap();
        assert!(run.final_residual < 1e-9);
        assert!(run.empirical_ratio.unwrap() < 1.0);
    }

    #[test]
    fn reduced_dynamics_sign_pattern_matches_roots() {
        let p = Params::default().with_iceline_rate(4e-4).unwrap();
        let run = fixed_point(&p, &small_opts()).unwrap();
        let table = reduced_dynamics(&run.graph, &p);
        let signs: Vec<bool> = table.iter().map(|(_, v)| *v > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 2, "one positive window between two negative ones");
        assert!(!signs[0] && !*signs.last().unwrap());
        // crossings sit near the equilibrium roots
        let roots = find_interior_roots(&p);
        let cross: Vec<f64> = table
            .windows(2)
            .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
            .map(|w| 0.5 * (w[0].0 + w[1].0))
            .collect();
        let cert = certificate(&p);
        let slack = cert.eps_used * cert.r_bound / p.olr_slope() + 0.01;
        assert!((cross[0] - roots[0].eta).abs() < slack);
        assert!((cross[1] - roots[1].eta).abs() < slack);
    }

    #[test]
    fn scalar_and_profile_evaluation_agree() {
        let p = Params::default();
        let g = equilibrium_graph(&p, 101);
        for eta in [-0.6, -0.5, -0.137, 0.0, 0.4421, 1.0, 1.3, 1.5, 1.8] {
            for y in [-0.5, -0.21, 0.0, 0.333, 0.91, 1.5, 2.0] {
                let direct = g.value_at(eta, y);
                let via_profile = g.profile_at(eta).eval_clamped(y);
                assert!(
                    (direct - via_profile).abs() < 1e-12,
                    "paths disagree at ({eta}, {y}): {direct} vs {via_profile}"
                );
            }
        }
    }

    #[test]
    fn equilibrium_family_saturates_beyond_the_window() {
        let p = Params::default();
        let inside_lo = equilibrium_profile(-0.5, &p);
        let outside_lo = equilibrium_profile(-0.7, &p);
        assert!(inside_lo.sup_distance(&outside_lo) < 1e-8);
        let inside_hi = equilibrium_profile(1.5, &p);
        let outside_hi = equilibrium_profile(1.7, &p);
        assert!(inside_hi.sup_distance(&outside_hi) < 1e-8);
    }
}
