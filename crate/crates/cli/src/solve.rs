use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use stable_op_core::dirichlet::{residual_check, solve, DirichletProblem};

use crate::artifacts::{short, Artifacts, Verdict};
use crate::error::CliResult;
use crate::inputs::{load_json, ProblemFile};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem JSON: operator, domain, f, h and optional residual probes.
    #[arg(long)]
    pub problem: PathBuf,
    /// Bound on the pointwise residual at the probes.
    #[arg(long, default_value_t = 0.02, value_parser = crate::inputs::positive_tol)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: &SolveArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let (file, raw): (ProblemFile, _) = load_json(&a.problem, &format!("problem {}", a.problem.display()))?;
    let op = file.operator.build()?;
    let mut p = DirichletProblem::new(op, file.domain.clone(), file.f.clone(), file.h)?;
    if let Some(bc) = file.boundary_cell {
        p = p.with_boundary_cell(bc);
    }
    if let Some(d) = file.directions {
        p.directions = d;
    }
    let sol = solve(&p)?;
    out.write_text("u.csv", &sol.u.to_csv())?;
    let residual = if file.residual_probes.is_empty() {
        None
    } else {
        let r = residual_check(&p, &sol.u, &file.residual_probes)?;
        out.verdict(Verdict::new(
            "residual",
            r <= a.tol,
            format!("max |Lu - f| at {} probes = {}", file.residual_probes.len(), short(r)),
        ));
        out.bound("solve.residual_check", r);
        Some(r)
    };
    out.bound("solve.algebraic_residual", sol.algebraic_residual);
    out.write_json(
        "report.json",
        &json!({
            "unknowns": sol.unknowns,
            "h": p.h,
            "boundary_cell": p.boundary_cell,
            "algebraic_residual": sol.algebraic_residual,
            "residual_check": residual,
            "residual_probes": file.residual_probes,
            "sup_norm": sol.u.sup_norm(),
        }),
    )?;
    Ok(json!({"problem": raw, "tol": a.tol}))
}
