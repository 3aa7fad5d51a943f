use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use stable_op_core::spectral_measure::StableOperator;
use stable_op_core::symbol_heat::{
    heat_convolve, heat_kernel, heat_selfsimilarity_check, lipschitz_seminorm, moment_integral, GridSpec,
    HeatKernelGrid,
};

use crate::artifacts::{short, Artifacts, Table, Verdict};
use crate::error::CliResult;
use crate::inputs::load_operator;

/// Grid flags shared by both heat subcommands; omitted values fall back to
/// the per-dimension defaults.
#[derive(Debug, Args)]
pub struct GridArgs {
    /// Half width L of the periodic cube [-L, L)^n.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Nodes per axis (even).
    #[arg(long)]
    pub grid_points: Option<usize>,
}

impl GridArgs {
    fn spec(&self, dim: usize) -> CliResult<GridSpec> {
        let d = GridSpec::default_for(dim)?;
        Ok(match (self.half_width, self.grid_points) {
            (None, None) => d,
            (l, n) => GridSpec::new(dim, l.unwrap_or(d.half_width), n.unwrap_or(d.points))?,
        })
    }
}

#[derive(Debug, Args)]
pub struct HeatKernelArgs {
    #[arg(long)]
    pub op: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// δ of the moment ∫(1 + |x|^{2s-δ}) p dx; defaults to s.
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatChecksArgs {
    #[arg(long)]
    pub op: PathBuf,
    /// Tolerance of the self-similarity and semigroup checks.
    #[arg(long, default_value_t = 1e-5, value_parser = crate::inputs::positive_tol)]
    pub tol: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn kernel_table(p: &HeatKernelGrid) -> Table {
    let g = p.geometry();
    let n = g.dim();
    let mut header: Vec<String> = if n == 1 { vec!["x".into()] } else { (1..=n).map(|i| format!("x{i}")).collect() };
    header.push("value".into());
    let mut t = Table::new(header);
    for (k, &v) in p.values.iter().enumerate() {
        let mut row = g.point(k);
        row.push(v);
        t.push_numbers(row);
    }
    t
}

pub fn run_kernel(a: &HeatKernelArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let (op, op_raw) = load_operator(&a.op)?;
    let spec = a.grid.spec(op.dim())?;
    let p = heat_kernel(&op, a.t, &spec)?;
    let delta = a.delta.unwrap_or(op.s);
    let moment = moment_integral(&p, delta);
    let lipschitz = lipschitz_seminorm(&p);
    out.write_table("p.csv", &kernel_table(&p))?;
    out.write_json(
        "report.json",
        &json!({
            "t": p.t,
            "s": p.s,
            "grid": spec,
            "mass": p.mass(),
            "min": p.min(),
            "max": p.max(),
            "moment": {"delta": delta, "value": moment.value, "raw": moment.raw, "tail_bound": moment.tail_bound, "corrected": moment.corrected},
            "lipschitz": lipschitz,
            "tail_bound": p.tail_bound,
            "nyquist_damping": p.nyquist_damping,
        }),
    )?;
    out.bound("heat_kernel.tail_bound", p.tail_bound);
    out.bound("heat_kernel.moment_tail_bound", moment.tail_bound);
    Ok(json!({"operator": op_raw, "t": a.t, "delta": delta, "grid": spec}))
}

/// Mass, ringing, symmetry, self-similarity and the semigroup identity.
pub fn heat_checks(op: &StableOperator, spec: &GridSpec, tol: f64) -> CliResult<(Vec<Verdict>, serde_json::Value)> {
    let p1 = heat_kernel(op, 1.0, spec)?;
    let p2 = heat_kernel(op, 2.0, spec)?;
    let mass = p1.mass();
    let ringing = (-p1.min()).max(0.0) / p1.max();
    let symmetry = p1.symmetry_defect();
    let selfsim = heat_selfsimilarity_check(op, 1.0, 4.0, spec)?;
    let conv = heat_convolve(&p1, &p1.to_grid_function())?;
    let g = spec.geometry();
    let inner = 0.5 * spec.half_width;
    let mut semigroup: f64 = 0.0;
    for k in 0..g.len() {
        if g.point(k).iter().all(|c| c.abs() <= inner) {
            semigroup = semigroup.max((conv.values[k] - p2.values[k]).abs());
        }
    }
    let verdicts = vec![
        Verdict::new("mass", (mass - 1.0).abs() <= 1e-6, format!("mass - 1 = {}", short(mass - 1.0))),
        Verdict::new("ringing", ringing <= 1e-8, format!("-min p / max p = {}", short(ringing))),
        Verdict::new("self_similarity", selfsim <= tol, format!("t = 4 vs t = 1 relative defect {}", short(selfsim))),
        Verdict::new("semigroup", semigroup <= tol, format!("max |p1 * p1 - p2| on the inner half {}", short(semigroup))),
    ];
    let report = json!({
        "s": op.s,
        "grid": spec,
        "tol": tol,
        "mass": mass,
        "ringing": ringing,
        "symmetry_defect": symmetry,
        "self_similarity": selfsim,
        "semigroup": semigroup,
        "tail_bound": p1.tail_bound,
    });
    Ok((verdicts, report))
}

pub fn run_checks(a: &HeatChecksArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let (op, op_raw) = load_operator(&a.op)?;
    let spec = a.grid.spec(op.dim())?;
    let (verdicts, report) = heat_checks(&op, &spec, a.tol)?;
    let mut table = Table::new(["check", "passed", "detail"]);
    for v in &verdicts {
        table.push(vec![v.name.clone(), v.passed.to_string(), format!("\"{}\"", v.detail)]);
    }
    out.write_table("checks.csv", &table)?;
    out.write_json("report.json", &report)?;
    for v in verdicts {
        out.verdict(v);
    }
    Ok(json!({"operator": op_raw, "tol": a.tol, "grid": spec}))
}
