use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;

use stable_op_core::dirichlet::DomainSpec;
use stable_op_core::regularity::{
    boundary_coefficient, boundary_ratio, exponent_fit, holder_seminorm, DifferenceOrder,
};

use crate::artifacts::{Artifacts, Table};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_grid_field, load_json, parse_list};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Difference-quotient exponent at `--center`.
    Interior,
    /// Hölder seminorm of u/d^s over a boundary band.
    Boundary,
    /// Coefficient Q of the expansion u ≈ Q((x - z)·ν)_+^s.
    Coefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Grid CSV with header `x1,...,xn,value`.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Interior: evaluation point (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// Interior: scales (default: h, 2h, 4h, 8h).
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long, value_enum, default_value_t = Order::Second)]
    pub order: Order,
    /// Boundary: domain JSON.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Boundary and coefficient: order s of the operator.
    #[arg(long)]
    pub s: Option<f64>,
    /// Hölder exponent (default: s - 0.1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Boundary: distance band `lo,hi` (default: 8h,0.5).
    #[arg(long)]
    pub band: Option<String>,
    /// Coefficient: boundary point.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Coefficient: inner unit normal.
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<String>,
    /// Coefficient: increasing dyadic radii (default: 2h, 4h, 8h, 16h).
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn need<'a, T>(v: &'a Option<T>, flag: &str, mode: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::config(format!("--mode {mode} requires {flag}")))
}

fn dyadic(h: f64, from: i32, count: i32) -> Vec<f64> {
    (from..from + count).map(|k| h * 2f64.powi(k)).collect()
}

pub fn run(a: &MeasureArgs, out: &mut Artifacts) -> CliResult<serde_json::Value> {
    let u = load_grid_field(&a.field)?;
    let h = u.geom.h;
    let n = u.dim();
    let mut config = json!({"field": a.field.display().to_string(), "mode": format!("{:?}", a.mode).to_lowercase()});
    let report = match a.mode {
        Mode::Interior => {
            let center = match &a.center {
                Some(c) => parse_list(c, "--center")?,
                None => vec![0.0; n],
            };
            let scales = match &a.scales {
                Some(t) => parse_list(t, "--scales")?,
                None => dyadic(h, 0, 4),
            };
            let order = match a.order {
                Order::First => DifferenceOrder::First,
                Order::Second => DifferenceOrder::Second,
            };
            let fit = exponent_fit(&u, &center, &scales, order)?;
            config["center"] = json!(center);
            config["scales"] = json!(scales);
            config["order"] = json!(order);
            json!({
                "scales": fit.scales,
                "profile": fit.profile,
                "exponent": fit.exponent,
                "residual": fit.residual,
                "seminorm": null,
                "flagged": fit.flagged,
                "center": fit.center,
                "order": fit.order,
            })
        }
        Mode::Boundary => {
            let path = need(&a.domain, "--domain", "boundary")?;
            let (domain, domain_raw): (DomainSpec, _) = load_json(path, &format!("domain {}", path.display()))?;
            let s = *need(&a.s, "--s", "boundary")?;
            let beta = a.beta.unwrap_or(s - 0.1);
            let band = match &a.band {
                Some(t) => parse_list(t, "--band")?,
                None => vec![8.0 * h, 0.5],
            };
            if band.len() != 2 {
                return Err(CliError::config("--band takes two numbers lo,hi"));
            }
            let (ratio, mask) = boundary_ratio(&u, &domain, (band[0], band[1]), s)?;
            let r = holder_seminorm(&ratio, &mask, beta)?;
            config["domain"] = domain_raw;
            config["s"] = json!(s);
            config["beta"] = json!(beta);
            config["band"] = json!(band);
            out.write_text("ratio.csv", &ratio.to_csv())?;
            json!({
                "scales": r.scales,
                "profile": r.profile,
                "exponent": r.fitted_exponent,
                "residual": r.residual,
                "seminorm": r.seminorm_estimate,
                "flagged": r.flagged,
                "beta": r.beta,
                "order": r.order,
                "window": r.window,
            })
        }
        Mode::Coefficient => {
            let z = parse_list(need(&a.z, "--z", "coefficient")?, "--z")?;
            let nu = parse_list(need(&a.nu, "--nu", "coefficient")?, "--nu")?;
            let s = *need(&a.s, "--s", "coefficient")?;
            let beta = a.beta.unwrap_or(s + 0.5 * (1.0 - s));
            let radii = match &a.radii {
                Some(t) => parse_list(t, "--radii")?,
                None => dyadic(h, 1, 4),
            };
            let e = boundary_coefficient(&u, &z, &nu, s, &radii, beta)?;
            config["z"] = json!(z);
            config["nu"] = json!(nu);
            config["s"] = json!(s);
            config["beta"] = json!(beta);
            config["radii"] = json!(radii);
            let fit = e.remainder_fit;
            json!({
                "scales": e.radii,
                "profile": e.remainder,
                "exponent": fit.map(|f| f.slope),
                "residual": fit.map(|f| f.residual),
                "seminorm": null,
                "q": e.q,
                "q_error": e.q_error,
                "q_star": e.q_star,
            })
        }
    };
    let mut table = Table::new(["scale", "profile"]);
    let scales = report["scales"].as_array().cloned().unwrap_or_default();
    let profile = report["profile"].as_array().cloned().unwrap_or_default();
    for (sc, pr) in scales.iter().zip(&profile) {
        table.push_numbers([sc.as_f64().unwrap_or(f64::NAN), pr.as_f64().unwrap_or(f64::NAN)]);
    }
    out.write_table("profile.csv", &table)?;
    out.write_json("report.json", &report)?;
    Ok(config)
}
