//! Closed-form local equilibrium profiles, the scalar iceline-excess map, and
//! its roots.
//!
//! For a frozen iceline the fast field vanishes on a unique profile whose
//! closed form follows from the absorbed-energy integral. Evaluating that
//! profile at the iceline and subtracting the critical temperature gives the
//! one-dimensional reduced map whose sign drives the slow dynamics; its roots
//! are the global equilibria.

use serde::Serialize;

use crate::grid::Profile;
use crate::physics::{albedo, insolation, Params};

/// Uniform spacing of the sign-change scan over [0, 1].
const SCAN_STEP: f64 = 1e-3;
/// Bisection width at which a bracketed root is accepted.
const BISECT_TOL: f64 = 1e-9;
/// Centered-difference step for stability classification.
const STABILITY_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    Interior,
    IceCoveredBoundary,
    IceFreeBoundary,
}

impl RootKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootKind::Interior => "interior",
            RootKind::IceCoveredBoundary => "ice_covered_boundary",
            RootKind::IceFreeBoundary => "ice_free_boundary",
        }
    }
}

/// A root of the reduced dynamics, with its stability under the 1-D flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumRoot {
    pub eta: f64,
    /// Equilibrium temperature at the iceline (degC); equals the critical
    /// temperature at an interior root.
    pub iceline_temp: f64,
    pub stable: bool,
    pub kind: RootKind,
}

/// Shortwave energy absorbed over the unit interval for a given iceline,
/// integrated by composite Simpson on the parameter grid.
pub fn absorbed_integral(eta: f64, params: &Params) -> f64 {
    let q = params.solar_constant();
    params
        .grid()
        .simpson_unit(|y| q * insolation(y) * (1.0 - albedo(eta, y, params)))
}

/// Closed-form equilibrium value at one zone, shared by the profile sampling
/// and the scalar map so both stay bit-consistent.
fn equilibrium_value(eta: f64, y: f64, absorbed: f64, params: &Params) -> f64 {
    let q = params.solar_constant();
    let a = params.olr_intercept();
    let b = params.olr_slope();
    let c = params.transport_coeff();
    let yc = y.clamp(0.0, 1.0);
    (q * insolation(yc) * (1.0 - albedo(eta, yc, params)) - a + (c / b) * (absorbed - a)) / (b + c)
}

/// The profile on which the fast field vanishes for a frozen iceline. Its
/// global mean satisfies mean = (g - A)/B with g the absorbed integral.
pub fn equilibrium_profile(eta: f64, params: &Params) -> Profile {
    let g = absorbed_integral(eta, params);
    Profile::from_fn(params.grid(), |y| equilibrium_value(eta, y, g, params))
}

/// Temperature excess over the critical value at the iceline of the local
/// equilibrium: positive pushes the iceline poleward once the fast variable
/// has relaxed. Outside [0, 1] the clamped branch of the closed form applies.
pub fn iceline_excess(eta: f64, params: &Params) -> f64 {
    let g = absorbed_integral(eta, params);
    equilibrium_value(eta, eta, g, params) - params.critical_temp()
}

fn excess_slope(eta: f64, params: &Params) -> f64 {
    let d = STABILITY_FD_STEP;
    (iceline_excess(eta + d, params) - iceline_excess(eta - d, params)) / (2.0 * d)
}

/// Scan [0, 1] for sign changes of the iceline excess and refine each bracket
/// by bisection. Zero roots is a legitimate outcome (e.g. at low solar
/// constant); the roots found are returned sorted ascending.
pub fn find_interior_roots(params: &Params) -> Vec<EquilibriumRoot> {
    let n = (1.0 / SCAN_STEP).round() as usize;
    let mut roots = Vec::new();
    let mut prev_eta = 0.0;
    let mut prev_h = iceline_excess(0.0, params);
    for i in 1..=n {
        let eta = i as f64 * SCAN_STEP;
        let h = iceline_excess(eta, params);
        if prev_h == 0.0 {
            roots.push(prev_eta);
        } else if prev_h * h < 0.0 {
            roots.push(bisect(prev_eta, eta, prev_h, params));
        }
        prev_eta = eta;
        prev_h = h;
    }
    roots
        .into_iter()
        .map(|eta| EquilibriumRoot {
            eta,
            iceline_temp: params.critical_temp() + iceline_excess(eta, params),
            stable: excess_slope(eta, params) < 0.0,
            kind: RootKind::Interior,
        })
        .collect()
}

fn bisect(mut lo: f64, mut hi: f64, mut h_lo: f64, params: &Params) -> f64 {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let h_mid = iceline_excess(mid, params);
        if h_lo * h_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            h_lo = h_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stability records for the two ends of the physical interval, read off the
/// sign of the excess there: a frozen planet is stable when the excess at the
/// equator is negative, an ice-free one when the excess at the pole is
/// positive.
pub fn boundary_equilibria(params: &Params) -> Vec<EquilibriumRoot> {
    let h0 = iceline_excess(0.0, params);
    let h1 = iceline_excess(1.0, params);
    vec![
        EquilibriumRoot {
            eta: 0.0,
            iceline_temp: params.critical_temp() + h0,
            stable: h0 < 0.0,
            kind: RootKind::IceCoveredBoundary,
        },
        EquilibriumRoot {
            eta: 1.0,
            iceline_temp: params.critical_temp() + h1,
            stable: h1 > 0.0,
            kind: RootKind::IceFreeBoundary,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{fast_field, State};
    use approx::assert_relative_eq;

    /// Closed-form sharp-albedo (front width -> 0) oracle for the excess map,
    /// built from the exact antiderivative of the insolation.
    pub(crate) fn sharp_excess(eta: f64, params: &Params) -> f64 {
        let q = params.solar_constant();
        let a = params.olr_intercept();
        let b = params.olr_slope();
        let c = params.transport_coeff();
        let e = eta.clamp(0.0, 1.0);
        // int_0^e s(y) dy for s = 1 - 0.482 (3y^2 - 1)/2
        let s_cum = 1.241 * e - 0.241 * e * e * e;
        let g = q * (0.38 + 0.3 * s_cum);
        (q * insolation(e) * 0.53 - a + (c / b) * (g - a)) / (b + c) - params.critical_temp()
    }

    #[test]
    fn absorbed_integral_saturation_limits() {
        let p = Params::default();
        // fully ice-covered: co-albedo 0.38 against unit-mean insolation
        assert!((absorbed_integral(-1.0, &p) - 130.34).abs() < 0.1);
        // ice-free: co-albedo 0.68
        assert!((absorbed_integral(2.0, &p) - 233.24).abs() < 0.1);
    }

    #[test]
    fn absorbed_integral_monotone_in_eta() {
        let p = Params::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let eta = i as f64 / 200.0;
            let g = absorbed_integral(eta, &p);
            assert!(g >= prev, "g not monotone at eta = {eta}");
            prev = g;
        }
    }

    #[test]
    fn mean_identity() {
        let p = Params::default();
        for eta in [-1.0, -0.2, 0.0, 0.33, 0.5, 0.9, 1.0, 1.4, 2.0] {
            let prof = equilibrium_profile(eta, &p);
            let expect = (absorbed_integral(eta, &p) - p.olr_intercept()) / p.olr_slope();
            assert!(
                (prof.mean_unit_interval() - expect).abs() < 1e-8,
                "mean identity broken at eta = {eta}"
            );
        }
        // ice-free limit mean temperature
        let ice_free = equilibrium_profile(2.0, &p);
        assert!((ice_free.mean_unit_interval() - 16.44).abs() < 0.1);
        let snowball = equilibrium_profile(-1.0, &p);
        assert!((snowball.mean_unit_interval() - (-37.7)).abs() < 0.1);
    }

    #[test]
    fn equilibrium_profile_is_a_fixed_point_of_the_fast_field() {
        let p = Params::default();
        let state = State::new(equilibrium_profile(0.5, &p), 0.5);
        assert!(fast_field(&state, &p).sup_norm() < 1e-8);
    }

    #[test]
    fn fixed_point_property_on_random_icelines() {
        let p = Params::default();
        // deterministic linear-congruential sweep over [-0.5, 1.5]
        let mut x = 0.123456789_f64;
        for _ in 0..100 {
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let eta = -0.5 + 2.0 * (x / 233280.0);
            let state = State::new(equilibrium_profile(eta, &p), eta);
            let r = fast_field(&state, &p).sup_norm();
            assert!(r < 1e-6, "residual {r} at eta {eta}");
        }
    }

    #[test]
    fn excess_examples() {
        let p = Params::default();
        let mid = iceline_excess(0.5, &p);
        assert!((mid - 4.6).abs() < 0.1, "h(0.5) = {mid}");
        assert_relative_eq!(mid, sharp_excess(0.5, &p), epsilon = 0.05);

        let pole = iceline_excess(1.0, &p);
        assert!(pole < 0.0, "ice-free instability requires h(1) < 0");
        assert!((-2.5..=-1.0).contains(&pole), "h(1) = {pole}");
        // sharp-albedo cross-check: iceline temperature at the pole
        let sharp_pole_temp = sharp_excess(1.0, &p) + p.critical_temp();
        assert!((sharp_pole_temp - (-11.71)).abs() < 0.05);
    }

    #[test]
    fn equilibrium_profile_slope_is_bounded() {
        // |d T*/dy| <= (Q sup(s) 0.15 M + Q 0.68 sup|s'|) / (B + C), with the
        // insolation slope peaking at 1.446 on the unit interval
        let p = Params::default();
        let prof = equilibrium_profile(0.5, &p);
        let est = prof.lipschitz_estimate();
        let bound = (p.solar_constant() * insolation(0.0) * 0.15 * p.albedo_steepness()
            + p.solar_constant() * 0.68 * 1.446)
            / (p.olr_slope() + p.transport_coeff());
        assert!(est <= bound, "{est} > {bound}");

        // dense finite differences of the closed form as an oracle
        let g = absorbed_integral(0.5, &p);
        let closed = |y: f64| {
            let yc = y.clamp(0.0, 1.0);
            (p.solar_constant() * insolation(yc) * (1.0 - albedo(0.5, yc, &p))
                - p.olr_intercept()
                + (p.transport_coeff() / p.olr_slope()) * (g - p.olr_intercept()))
                / (p.olr_slope() + p.transport_coeff())
        };
        let n = 6001;
        let mut dense = 0.0f64;
        for i in 0..n - 1 {
            let y0 = -0.5 + 2.0 * i as f64 / (n - 1) as f64;
            let y1 = -0.5 + 2.0 * (i + 1) as f64 / (n - 1) as f64;
            dense = dense.max(((closed(y1) - closed(y0)) / (y1 - y0)).abs());
        }
        assert!(dense <= bound);
        assert!((est - dense).abs() <= 0.01 * dense, "est {est} vs dense {dense}");
    }

    #[test]
    fn excess_has_two_sign_changes() {
        let p = Params::default();
        let mut changes = 0;
        let mut prev = iceline_excess(0.0, &p);
        for i in 1..=1000 {
            let h = iceline_excess(i as f64 * 1e-3, &p);
            if prev * h < 0.0 {
                changes += 1;
            }
            prev = h;
        }
        assert_eq!(changes, 2);
    }

    #[test]
    fn interior_roots_at_defaults() {
        let p = Params::default();
        let roots = find_interior_roots(&p);
        assert_eq!(roots.len(), 2);
        // measured positions for these constants; the sharp-albedo limit
        // puts them at 0.24552 and 0.94875
        assert!((roots[0].eta - 0.2458).abs() < 5e-4, "eta1 = {}", roots[0].eta);
        assert!((roots[1].eta - 0.9470).abs() < 5e-4, "eta2 = {}", roots[1].eta);
        assert!(!roots[0].stable && roots[1].stable);
        for r in &roots {
            assert!(
                (r.iceline_temp - p.critical_temp()).abs() < 1e-6,
                "root not on the critical isotherm"
            );
        }
    }

    #[test]
    fn no_interior_roots_at_low_solar_constant() {
        let p = Params::default().with_solar_constant(280.0).unwrap();
        assert!(find_interior_roots(&p).is_empty());
        // oracle: the excess is negative across the whole interval
        for i in 0..=1000 {
            assert!(iceline_excess(i as f64 * 1e-3, &p) < 0.0);
        }
    }

    #[test]
    fn roots_stable_under_scan_refinement() {
        let p = Params::default();
        let coarse = find_interior_roots(&p);
        // refined scan: brackets from a 1e-4 grid must give the same roots
        let mut fine = Vec::new();
        let mut prev_eta = 0.0;
        let mut prev_h = iceline_excess(0.0, &p);
        for i in 1..=10_000 {
            let eta = i as f64 * 1e-4;
            let h = iceline_excess(eta, &p);
            if prev_h * h < 0.0 {
                fine.push(super::bisect(prev_eta, eta, prev_h, &p));
            }
            prev_eta = eta;
            prev_h = h;
        }
        assert_eq!(coarse.len(), fine.len());
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c.eta - f).abs() < 1e-8);
        }
    }

    #[test]
    fn two_roots_across_steepness_sweep() {
        for m in [10.5, 25.0, 50.0, 100.0] {
            let p = Params::default().with_albedo_steepness(m).unwrap();
            assert_eq!(find_interior_roots(&p).len(), 2, "M = {m}");
        }
    }

    #[test]
    fn boundary_stability_at_defaults_and_high_q() {
        let p = Params::default();
        let b = boundary_equilibria(&p);
        assert_eq!(b[0].kind, RootKind::IceCoveredBoundary);
        assert!(b[0].stable, "frozen planet is stable at defaults");
        assert_eq!(b[1].kind, RootKind::IceFreeBoundary);
        assert!(!b[1].stable, "ice-free planet is unstable at defaults");

        let hot = Params::default().with_solar_constant(500.0).unwrap();
        let b = boundary_equilibria(&hot);
        assert!(b[1].stable, "ice-free planet becomes stable at Q = 500");
    }

    #[test]
    fn shifted_albedo_base_moves_roots_outside_tolerance() {
        // sensitivity check: a 0.48 base instead of 0.47 displaces the upper
        // root by far more than the verification window
        let p = Params::default();
        let corrupted = |eta: f64| {
            let g = p.grid().simpson_unit(|y| {
                let a = 0.48
                    + 0.15 * (p.albedo_steepness() * (y - eta)).tanh();
                p.solar_constant() * insolation(y) * (1.0 - a)
            });
            let e = eta.clamp(0.0, 1.0);
            let a_ice = 0.48 + 0.15 * (p.albedo_steepness() * (e - eta)).tanh();
            (p.solar_constant() * insolation(e) * (1.0 - a_ice) - p.olr_intercept()
                + (p.transport_coeff() / p.olr_slope()) * (g - p.olr_intercept()))
                / (p.olr_slope() + p.transport_coeff())
                - p.critical_temp()
        };
        let good = find_interior_roots(&p);
        // locate the corrupted upper root by scan + bisection
        let mut root = None;
        let mut prev = corrupted(0.5);
        for i in 501..=1000 {
            let eta = i as f64 * 1e-3;
            let h = corrupted(eta);
            if prev * h < 0.0 {
                let (mut lo, mut hi, mut h_lo) = (eta - 1e-3, eta, prev);
                while hi - lo > 1e-9 {
                    let mid = 0.5 * (lo + hi);
                    let hm = corrupted(mid);
                    if h_lo * hm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        h_lo = hm;
                    }
                }
                root = Some(0.5 * (lo + hi));
                break;
            }
            prev = h;
        }
        let shifted = root.expect("corrupted map still has an upper root");
        assert!(
            (shifted - good[1].eta).abs() > 0.02,
            "albedo corruption must be detectable: {} vs {}",
            shifted,
            good[1].eta
        );
    }
}
