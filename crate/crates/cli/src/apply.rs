use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use stable_op_core::nonlocal_apply::{apply_pointwise, EvaluableField, QuadratureBudget};

use crate::artifacts::{Artifacts, Table};
use crate::error::{CliError, CliResult};
use crate::inputs::{grid_c2_bound, load_field, load_operator, parse_points_csv, read_text, FieldInput};

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub op: PathBuf,
    /// Field: a grid CSV (`x1,...,xn,value`) or an analytic-field JSON.
    #[arg(long)]
    pub field: PathBuf,
    /// CSV of evaluation points with a header row.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value_t = 1e-6, value_parser = crate::inputs::positive_tol)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: &ApplyArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let (op, op_raw) = load_operator(&a.op)?;
    let (input, field_raw) = load_field(&a.field)?;
    let points = parse_points_csv(&read_text(&a.points)?, &format!("points {}", a.points.display()))?;
    let n = op.dim();
    if points[0].len() != n {
        return Err(CliError::config(format!("points have {} coordinates, operator dimension is {n}", points[0].len())));
    }
    // Grid fields are only resolved down to their spacing.
    let (field, budget) = match input {
        FieldInput::Grid(u) => {
            let h = u.geom.h;
            let m2 = grid_c2_bound(&u);
            let f = EvaluableField::grid(u, None)?.with_c2_bound(m2);
            (f, QuadratureBudget { r0: h, tol: a.tol, ..Default::default() })
        }
        FieldInput::Analytic(spec) => (spec.build()?, QuadratureBudget::with_tol(a.tol)),
    };
    if field.dim() != n {
        return Err(CliError::config(format!("field dimension {} differs from operator dimension {n}", field.dim())));
    }
    let estimates = points
        .par_iter()
        .map(|x| apply_pointwise(&op, &field, x, &budget))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(["Lu".into(), "err_bound".into()]);
    let mut table = Table::new(header);
    for (x, e) in points.iter().zip(&estimates) {
        let mut row = x.clone();
        row.extend([e.value, e.error_bound]);
        table.push_numbers(row);
    }
    out.write_table("apply.csv", &table)?;
    let max_bound = estimates.iter().map(|e| e.error_bound).fold(0.0, f64::max);
    out.bound("apply.max_error_bound", max_bound);
    out.write_json(
        "report.json",
        &json!({
            "points": points.len(),
            "tol": a.tol,
            "r0": budget.r0,
            "max_error_bound": max_bound,
            "estimates": estimates,
        }),
    )?;
    Ok(json!({"operator": op_raw, "field": field_raw, "points": points, "tol": a.tol}))
}
