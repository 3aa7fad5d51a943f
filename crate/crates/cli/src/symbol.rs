use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use stable_op_core::symbol_heat::{multiplier_eval, symbol_eval};

use crate::artifacts::{short, Artifacts, Table, Verdict};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_operator, parse_points, parse_points_csv, read_text};

#[derive(Debug, Args)]
pub struct SymbolArgs {
    /// Operator JSON.
    #[arg(long)]
    pub op: PathBuf,
    /// Frequencies as `a,b;c,d`.
    #[arg(long, conflicts_with = "points", allow_hyphen_values = true)]
    pub xi: Option<String>,
    /// CSV of frequencies with a header row.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Random frequencies drawn for the ellipticity check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: &SymbolArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let (op, op_raw) = load_operator(&a.op)?;
    let n = op.dim();
    let xis = match (&a.xi, &a.points) {
        (Some(t), _) => parse_points(t, "--xi")?,
        (None, Some(p)) => parse_points_csv(&read_text(p)?, &format!("points {}", p.display()))?,
        (None, None) => (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect(),
    };
    if xis[0].len() != n {
        return Err(CliError::config(format!("frequencies have {} components, operator dimension is {n}", xis[0].len())));
    }
    let mut header: Vec<String> = (1..=n).map(|i| format!("xi{i}")).collect();
    header.extend(["symbol".into(), "multiplier".into()]);
    let mut table = Table::new(header);
    for xi in &xis {
        let mut row: Vec<f64> = xi.clone();
        row.push(symbol_eval(&op, xi));
        row.push(multiplier_eval(&op, xi));
        table.push_numbers(row);
    }
    out.write_table("symbol.csv", &table)?;

    // λ|ξ|^{2s} ≤ A(ξ) ≤ Λ|ξ|^{2s} on random frequencies.
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for _ in 0..a.samples {
        let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let r = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let ratio = symbol_eval(&op, &xi) / r.powf(2.0 * op.s);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let ok = a.samples == 0 || (lo >= op.lambda * (1.0 - 1e-9) && hi <= op.big_lambda * (1.0 + 1e-12));
    out.verdict(Verdict::new(
        "ellipticity",
        ok,
        format!(
            "A(ξ)/|ξ|^2s in [{}, {}] over {} samples; lambda = {}, Lambda = {}",
            short(lo),
            short(hi),
            a.samples,
            short(op.lambda),
            short(op.big_lambda)
        ),
    ));
    out.write_json(
        "report.json",
        &json!({
            "s": op.s,
            "dim": n,
            "c_s": op.c_s,
            "lambda": op.lambda,
            "big_lambda": op.big_lambda,
            "ellipticity": {"samples": a.samples, "seed": a.seed, "min_ratio": lo, "max_ratio": hi, "passed": ok},
        }),
    )?;
    Ok(json!({
        "operator": op_raw,
        "xi": xis,
        "samples": a.samples,
        "seed": a.seed,
    }))
}
