//! Builders for the CSV tables, JSON summaries, and the bifurcation SVG
//! emitted by the command-line interface and the verification suite.

use serde_json::json;

use crate::bifurcation::BifurcationTable;
use crate::dynamics::Trajectory;
use crate::equilibria::{boundary_equilibria, find_interior_roots, iceline_excess};
use crate::manifold::{
    certificate, distance_to_equilibrium_set, distance_to_equilibrium_unit_interval,
    FixedPointRun,
};
use crate::output::{fmt_f64, CsvTable};
use crate::physics::Params;
use crate::svg::LinePlot;

/// Roots and boundary records, sorted by iceline position.
pub fn equilibria_csv(params: &Params) -> CsvTable {
    let mut rows = find_interior_roots(params);
    rows.extend(boundary_equilibria(params));
    rows.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let mut t = CsvTable::new(["eta", "iceline_temp_C", "kind", "stable", "h_value"]);
    for r in rows {
        t.push_row([
            fmt_f64(r.eta),
            fmt_f64(r.iceline_temp),
            r.kind.as_str().to_string(),
            r.stable.to_string(),
            fmt_f64(iceline_excess(r.eta, params)),
        ]);
    }
    t
}

/// The scalar excess map tabulated over [0, 1].
pub fn excess_csv(params: &Params, step: f64) -> CsvTable {
    let mut t = CsvTable::new(["eta", "h"]);
    let n = (1.0 / step).round() as usize;
    for i in 0..=n {
        let eta = i as f64 * step;
        t.push_row([fmt_f64(eta), fmt_f64(iceline_excess(eta, params))]);
    }
    t
}

/// Iceline temperature of the invariant graph next to the equilibrium value,
/// over the whole iceline grid.
pub fn manifold_diag_csv(run: &FixedPointRun, params: &Params) -> CsvTable {
    let mut t = CsvTable::new(["eta", "phi_iceline_temp", "h_plus_Tc", "gap"]);
    for (eta, p) in run.graph.eta_nodes().zip(run.graph.profiles()) {
        let phi_diag = p.eval_clamped(eta);
        let local = iceline_excess(eta, params) + params.critical_temp();
        t.push_row([
            fmt_f64(eta),
            fmt_f64(phi_diag),
            fmt_f64(local),
            fmt_f64(phi_diag - local),
        ]);
    }
    t
}

/// Full long-format dump of the invariant graph.
pub fn manifold_graph_csv(run: &FixedPointRun) -> CsvTable {
    let mut t = CsvTable::new(["eta", "y", "temperature"]);
    for (eta, p) in run.graph.eta_nodes().zip(run.graph.profiles()) {
        for (y, v) in p.spec().nodes().zip(p.values()) {
            t.push_row([fmt_f64(eta), fmt_f64(y), fmt_f64(*v)]);
        }
    }
    t
}

pub fn manifold_report_json(
    run: &FixedPointRun,
    params: &Params,
    wall_time_s: f64,
) -> serde_json::Value {
    let cert = certificate(params);
    let dist = distance_to_equilibrium_set(&run.graph, params);
    let dist01 = distance_to_equilibrium_unit_interval(&run.graph, params);
    json!({
        "certificate": cert,
        "iterations": run.iterations,
        "final_residual": run.final_residual,
        "empirical_ratio": run.empirical_ratio,
        "eta_nodes": run.graph.n_nodes(),
        "distance_to_equilibrium": dist,
        "distance_unit_interval": dist01,
        "distance_bound": cert.eps_used * cert.r_bound / params.olr_slope(),
        "wall_time_s": wall_time_s,
    })
}

pub fn frames_csv(traj: &Trajectory) -> CsvTable {
    let mut t = CsvTable::new(["time", "eta", "iceline_temp_C", "mean_temp_C"]);
    for f in &traj.frames {
        t.push_row([
            fmt_f64(f.time),
            fmt_f64(f.eta),
            fmt_f64(f.iceline_temp),
            fmt_f64(f.mean_temp),
        ]);
    }
    t
}

/// Long-format profile dump for the frames that carry one.
pub fn profiles_csv(traj: &Trajectory) -> CsvTable {
    let grid = traj.params.grid();
    let mut t = CsvTable::new(["time", "y", "temperature_C"]);
    for f in &traj.frames {
        if let Some(values) = &f.profile {
            for (y, v) in grid.nodes().zip(values) {
                t.push_row([fmt_f64(f.time), fmt_f64(y), fmt_f64(*v)]);
            }
        }
    }
    t
}

pub fn run_summary_json(traj: &Trajectory, eta0: f64, fixed_iceline: bool, wall_time_s: f64) -> serde_json::Value {
    json!({
        "outcome": traj.outcome.as_str(),
        "eta0": eta0,
        "fixed_iceline": fixed_iceline,
        "final_eta": traj.final_state.eta,
        "final_iceline_temp_C": traj.final_state.profile.eval_clamped(traj.final_state.eta),
        "final_mean_temp_C": traj.final_state.profile.mean_unit_interval(),
        "steps": traj.steps,
        "frames": traj.frames.len(),
        "wall_time_s": wall_time_s,
        "params": traj.params,
    })
}

pub fn bifurcation_csv(table: &BifurcationTable) -> CsvTable {
    let mut t = CsvTable::new(["Q", "eta", "kind", "stable"]);
    for r in &table.rows {
        t.push_row([
            fmt_f64(r.solar_constant),
            fmt_f64(r.eta),
            r.kind.as_str().to_string(),
            r.stable.to_string(),
        ]);
    }
    t
}

/// Diagram with stable branches solid, unstable branches dashed, and a
/// vertical marker at the reference solar constant.
pub fn bifurcation_svg(table: &BifurcationTable) -> String {
    let mut plot = LinePlot::new(
        "Equilibrium icelines vs solar constant",
        "Q (W m^-2)",
        "iceline eta",
    );
    // split rows into contiguous polylines per (kind, stability, branch side)
    use crate::equilibria::RootKind;
    let kinds = [
        RootKind::IceCoveredBoundary,
        RootKind::IceFreeBoundary,
        RootKind::Interior,
    ];
    for kind in kinds {
        for stable in [true, false] {
            let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
            if kind == RootKind::Interior {
                // lower and upper interior branches tracked separately
                for pick_upper in [false, true] {
                    let mut seg: Vec<(f64, f64)> = Vec::new();
                    let mut q_seen = std::collections::BTreeMap::new();
                    for r in table.rows.iter().filter(|r| r.kind == kind) {
                        q_seen
                            .entry(r.solar_constant.to_bits())
                            .or_insert_with(Vec::new)
                            .push(*r);
                    }
                    for rows in q_seen.values() {
                        let row = if pick_upper {
                            rows.iter().cloned().max_by(|a, b| a.eta.total_cmp(&b.eta))
                        } else if rows.len() > 1 {
                            rows.iter().cloned().min_by(|a, b| a.eta.total_cmp(&b.eta))
                        } else {
                            None
                        };
                        match row {
                            Some(r) if r.stable == stable => seg.push((r.solar_constant, r.eta)),
                            _ => {
                                if seg.len() > 1 {
                                    segments.push(std::mem::take(&mut seg));
                                } else {
                                    seg.clear();
                                }
                            }
                        }
                    }
                    if seg.len() > 1 {
                        segments.push(seg);
                    }
                }
            } else {
                let mut seg: Vec<(f64, f64)> = Vec::new();
                for r in table.rows.iter().filter(|r| r.kind == kind) {
                    if r.stable == stable {
                        seg.push((r.solar_constant, r.eta));
                    } else if seg.len() > 1 {
                        segments.push(std::mem::take(&mut seg));
                    } else {
                        seg.clear();
                    }
                }
                if seg.len() > 1 {
                    segments.push(seg);
                }
            }
            for seg in segments {
                plot.add_series(seg, "blue", !stable);
            }
        }
    }
    plot.add_vline(table.q_current, "green");
    plot.render()
}
