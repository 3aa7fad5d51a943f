use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use stable_op_core::nonlocal_apply::QuadratureBudget;
use stable_op_core::spectral_measure::{canonical, Canonical, SpectralMeasure, StableOperator};
use stable_op_core::verification::{
    barrier_check, convolution_fixed_point_check, counterexample_boundary, counterexample_interior,
    halfspace_profile_residual, BarrierKind, BarrierSpec, BoundaryCounterexample, FixedPointField,
    InteriorCounterexample,
};
use stable_op_core::LabError;

use crate::artifacts::{fmt_num, short, Artifacts, Table, Verdict};
use crate::error::CliResult;
use crate::inputs::load_operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Barriers,
    Liouville,
    Halfspace,
    CounterexampleInterior,
    CounterexampleBoundary,
    All,
}

impl Suite {
    const EACH: [Suite; 5] = [
        Suite::Barriers,
        Suite::Liouville,
        Suite::Halfspace,
        Suite::CounterexampleInterior,
        Suite::CounterexampleBoundary,
    ];

    fn name(self) -> &'static str {
        match self {
            Suite::Barriers => "barriers",
            Suite::Liouville => "liouville",
            Suite::Halfspace => "halfspace",
            Suite::CounterexampleInterior => "counterexample-interior",
            Suite::CounterexampleBoundary => "counterexample-boundary",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Operator for the barrier, Liouville and half-space experiments;
    /// each has its own default.
    #[arg(long)]
    pub op: Option<PathBuf>,
    /// Quadrature tolerance of the pointwise evaluations.
    #[arg(long, default_value_t = 1e-4, value_parser = crate::inputs::positive_tol)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

struct Experiment {
    name: &'static str,
    verdicts: Vec<Verdict>,
    report: serde_json::Value,
    tables: Vec<(&'static str, Table)>,
    bounds: Vec<(String, f64)>,
}

const BARRIER_RHOS: [f64; 4] = [1e-1, 3e-2, 1e-2, 3e-3];

fn barriers(op: &StableOperator, tol: f64) -> Result<Experiment, LabError> {
    let reports = BarrierKind::ALL
        .par_iter()
        .map(|&which| {
            let mut spec = BarrierSpec::new(which, op.clone(), BARRIER_RHOS.to_vec());
            spec.budget.tol = tol;
            barrier_check(&spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(["barrier", "rho", "value", "error_bound", "sign_ok"]);
    let mut verdicts = Vec::new();
    let mut worst_bound: f64 = 0.0;
    for r in &reports {
        let tag = serde_json::to_value(r.which).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for p in &r.probes {
            let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
            let sign = p.sign_ok.map(|b| b.to_string()).unwrap_or_default();
            table.push(vec![tag.clone(), fmt_num(p.rho), opt(p.value), opt(p.error_bound), sign]);
            worst_bound = worst_bound.max(p.error_bound.unwrap_or(0.0));
        }
        let mut detail = r.condition.clone();
        if let (Some(f), Some(e)) = (r.fit, r.expected_exponent) {
            detail.push_str(&format!("; fitted exponent {:.3} (expected {e})", f.exponent));
        }
        if let Some(rho) = r.smallest_certified_rho {
            detail.push_str(&format!("; smallest certified rho {}", short(rho)));
        }
        verdicts.push(Verdict::new(format!("barriers/{tag}"), r.passed, detail));
    }
    Ok(Experiment {
        name: "barriers",
        verdicts,
        report: json!({"s": op.s, "rhos": BARRIER_RHOS, "tol": tol, "reports": reports}),
        tables: vec![("probes.csv", table)],
        bounds: vec![("barriers.max_error_bound".into(), worst_bound)],
    })
}

fn liouville(op: &StableOperator) -> Result<Experiment, LabError> {
    let constant = convolution_fixed_point_check(op, FixedPointField::Constant, None)?;
    let mut verdicts = vec![Verdict::new(
        "liouville/constant",
        constant.deviation <= 1e-6,
        format!("max |p * 1 - 1| = {}", short(constant.deviation)),
    )];
    let mut table = Table::new(["field", "s", "deviation"]);
    table.push(vec!["constant".into(), fmt_num(op.s), fmt_num(constant.deviation)]);
    let linear = if op.s > 0.5 {
        let r = convolution_fixed_point_check(op, FixedPointField::Linear, None)?;
        verdicts.push(Verdict::new(
            "liouville/linear",
            r.deviation <= 1e-4,
            format!("max |p * x1 - x1| on the inner half = {}", short(r.deviation)),
        ));
        table.push(vec!["linear".into(), fmt_num(op.s), fmt_num(r.deviation)]);
        Some(r)
    } else {
        None
    };
    Ok(Experiment {
        name: "liouville",
        verdicts,
        report: json!({"constant": constant, "linear": linear, "linear_skipped": op.s <= 0.5}),
        tables: vec![("deviation.csv", table)],
        bounds: Vec::new(),
    })
}

fn halfspace(ops: &[(String, StableOperator)], tol: f64) -> Result<Experiment, LabError> {
    let budget = QuadratureBudget::with_tol(tol);
    let mut table = Table::new(["operator", "x1", "x_n", "residual", "error_bound", "dilated", "reduced"]);
    let mut verdicts = Vec::new();
    let mut reports = Vec::new();
    let mut worst_bound: f64 = 0.0;
    for (tag, op) in ops {
        let n = op.dim();
        let pts: Vec<Vec<f64>> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&t| {
                let mut p = vec![0.0; n];
                if n > 1 {
                    p[0] = 0.2;
                }
                p[n - 1] = t;
                p
            })
            .collect();
        let r = halfspace_profile_residual(op, &pts, &budget)?;
        for p in &r.points {
            table.push(vec![
                tag.clone(),
                fmt_num(p.x[0]),
                fmt_num(p.x[n - 1]),
                fmt_num(p.residual.value),
                fmt_num(p.residual.error_bound),
                fmt_num(p.dilated_residual.value),
                fmt_num(p.reduced_residual.value),
            ]);
        }
        worst_bound = worst_bound.max(r.max_error_bound);
        verdicts.push(Verdict::new(
            format!("halfspace/{tag}"),
            r.max_residual <= 1e-3,
            format!("max |L (x_n)_+^s| = {}", short(r.max_residual)),
        ));
        reports.push(json!({"operator": tag, "report": r}));
    }
    Ok(Experiment {
        name: "halfspace",
        verdicts,
        report: json!({"tol": tol, "reports": reports}),
        tables: vec![("residuals.csv", table)],
        bounds: vec![("halfspace.max_error_bound".into(), worst_bound)],
    })
}

fn interior() -> Result<Experiment, LabError> {
    let cfg = InteriorCounterexample::default();
    let r = counterexample_interior(&cfg)?;
    let mut table = Table::new(["delta", "d", "d_from_operator", "operator_error", "lower_bound"]);
    for row in &r.rows {
        table.push_numbers([row.delta, row.d, row.d_from_operator, row.operator_error, row.lower_bound]);
    }
    let slope = r.fit.map(|f| f.slope);
    let exponent_ok = slope.is_some_and(|p| (p - r.expected_exponent).abs() <= 0.03);
    let verdicts = vec![
        Verdict::new(
            "counterexample-interior/exponent",
            exponent_ok,
            format!("fitted exponent {} vs alpha - epsilon = {}", slope.map(short).unwrap_or("none".into()), r.expected_exponent),
        ),
        Verdict::new(
            "counterexample-interior/lower_bound",
            r.positive && r.above_lower_bound,
            format!("D > 0: {}, D above the lower bound: {}", r.positive, r.above_lower_bound),
        ),
    ];
    let worst = r.rows.iter().map(|row| row.operator_error).fold(0.0, f64::max);
    Ok(Experiment {
        name: "counterexample-interior",
        verdicts,
        report: json!(r),
        tables: vec![("table.csv", table)],
        bounds: vec![("counterexample_interior.operator_error".into(), worst)],
    })
}

fn boundary() -> Result<Experiment, LabError> {
    let cfg = BoundaryCounterexample::default();
    let r = counterexample_boundary(&cfg)?;
    let mut table = Table::new(["r", "scaled", "scaled_error", "unscaled", "control"]);
    for row in &r.rows {
        table.push_numbers([row.r, row.scaled.value, row.scaled.error_bound, row.unscaled.value, row.control.value]);
    }
    let verdicts = vec![
        Verdict::new(
            "counterexample-boundary/divergence",
            r.strictly_increasing && r.growth_slope > 0.0 && r.slopes_stable,
            format!(
                "increasing: {}, slope vs log(1/r) {} (derived rate {}), decade slopes {:?}",
                r.strictly_increasing,
                short(r.growth_slope),
                short(r.predicted_slope),
                r.decade_slopes.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
            ),
        ),
        Verdict::new(
            "counterexample-boundary/control",
            r.control_converges,
            format!("fixed-cutoff control converges: {}", r.control_converges),
        ),
    ];
    let worst = r.rows.iter().map(|row| row.scaled.error_bound).fold(0.0, f64::max);
    Ok(Experiment {
        name: "counterexample-boundary",
        verdicts,
        report: json!(r),
        tables: vec![("table.csv", table)],
        bounds: vec![("counterexample_boundary.max_error_bound".into(), worst)],
    })
}

fn default_op(name: Canonical, s: f64) -> StableOperator {
    canonical(name, 2, s).expect("canonical operators are valid")
}

fn rotated_atoms() -> StableOperator {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let m = SpectralMeasure::atomic(2, vec![(vec![c, c], 0.3), (vec![-c, c], 0.2)]).expect("valid atoms");
    StableOperator::new(0.5, m).expect("non-degenerate")
}

pub fn run(a: &VerifyArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let user_op = match &a.op {
        Some(p) => Some(load_operator(p)?),
        None => None,
    };
    let suites: Vec<Suite> = if a.suite == Suite::All { Suite::EACH.to_vec() } else { vec![a.suite] };
    let op_for = |fallback: StableOperator| user_op.as_ref().map(|(o, _)| o.clone()).unwrap_or(fallback);
    let experiments = suites
        .par_iter()
        .map(|&suite| match suite {
            Suite::Barriers => barriers(&op_for(default_op(Canonical::FractionalLaplacian, 0.5)), a.tol),
            Suite::Liouville => liouville(&op_for(default_op(Canonical::AxisSum, 0.75))),
            Suite::Halfspace => {
                let ops = match &user_op {
                    Some((o, _)) => vec![("user".to_string(), o.clone())],
                    None => vec![
                        ("axis_sum_s0.75".to_string(), default_op(Canonical::AxisSum, 0.75)),
                        ("rotated_atoms_s0.5".to_string(), rotated_atoms()),
                    ],
                };
                halfspace(&ops, a.tol)
            }
            Suite::CounterexampleInterior => interior(),
            Suite::CounterexampleBoundary => boundary(),
            Suite::All => unreachable!("expanded above"),
        })
        .collect::<Result<Vec<_>, _>>()?;
    for e in experiments {
        for (file, table) in &e.tables {
            out.write_table(&format!("{}/{file}", e.name), table)?;
        }
        out.write_json(&format!("{}/verdict.json", e.name), &json!({
            "experiment": e.name,
            "passed": e.verdicts.iter().all(|v| v.passed),
            "verdicts": e.verdicts,
            "report": e.report,
        }))?;
        for (k, v) in e.bounds {
            out.bound(k, v);
        }
        for v in e.verdicts {
            out.verdict(v);
        }
    }
    Ok(json!({
        "suite": a.suite.name(),
        "operator": user_op.map(|(_, raw)| raw),
        "tol": a.tol,
    }))
}
