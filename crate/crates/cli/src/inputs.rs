//! Reading configuration files and command-line lists.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use stable_op_core::dirichlet::{BoundaryCell, DomainSpec, Rhs};
use stable_op_core::grid::GridFunction;
use stable_op_core::nonlocal_apply::{EvaluableField, FarField};
use stable_op_core::spectral_measure::{OperatorSpec, StableOperator};

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

/// Parses `text` as `T`; the message names the file and serde's field path.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::config(format!("{what}: {e}")))
}

pub fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<(T, serde_json::Value)> {
    let text = read_text(path)?;
    let raw: serde_json::Value = parse_json(&text, what)?;
    let typed = parse_json(&text, what)?;
    Ok((typed, raw))
}

pub fn load_operator(path: &Path) -> CliResult<(StableOperator, serde_json::Value)> {
    let (spec, raw): (OperatorSpec, _) = load_json(path, &format!("operator {}", path.display()))?;
    Ok((spec.build()?, raw))
}

/// Clap value parser for tolerances.
pub fn positive_tol(text: &str) -> Result<f64, String> {
    match text.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// `"1,2.5,-3"` into numbers.
pub fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config(format!("{what}: `{}` is not a number ({e})", t.trim())))
        })
        .collect()
}

/// `"1,0;0,1"` into points of equal dimension.
pub fn parse_points(text: &str, what: &str) -> CliResult<Vec<Vec<f64>>> {
    let pts = text
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_list(p, what))
        .collect::<CliResult<Vec<_>>>()?;
    check_points(pts, what)
}

fn check_points(pts: Vec<Vec<f64>>, what: &str) -> CliResult<Vec<Vec<f64>>> {
    match pts.first() {
        None => Err(CliError::config(format!("{what}: no points given"))),
        Some(p0) if pts.iter().any(|p| p.len() != p0.len()) => {
            Err(CliError::config(format!("{what}: points have different dimensions")))
        }
        _ => Ok(pts),
    }
}

/// A points CSV: one header row, then one point per row.
pub fn parse_points_csv(text: &str, what: &str) -> CliResult<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::config(format!("{what}: empty file")))?;
    let cols = header.split(',').count();
    let pts = lines
        .enumerate()
        .map(|(i, l)| {
            let p = parse_list(l, &format!("{what} row {}", i + 2))?;
            if p.len() != cols {
                return Err(CliError::config(format!("{what} row {}: expected {cols} columns", i + 2)));
            }
            Ok(p)
        })
        .collect::<CliResult<Vec<_>>>()?;
    check_points(pts, what)
}

/// Closed-form fields for `apply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticField {
    /// `amplitude · exp(-|x - center|² / width²)`.
    Gaussian { center: Vec<f64>, width: f64, #[serde(default = "one")] amplitude: f64 },
    /// `amplitude · exp(1 - 1/(1 - |x - center|²/radius²))` inside the ball, 0 outside.
    Bump { center: Vec<f64>, radius: f64, #[serde(default = "one")] amplitude: f64 },
    /// `(x_n)_+^exponent`; the exponent must stay below 2s.
    HalfspacePower { dim: usize, exponent: f64 },
}

fn one() -> f64 {
    1.0
}

impl AnalyticField {
    pub fn build(&self) -> CliResult<EvaluableField> {
        Ok(match self.clone() {
            AnalyticField::Gaussian { center, width, amplitude } => {
                positive(width, "field.width")?;
                let n = center.len();
                let c = center.clone();
                EvaluableField::closure(
                    n,
                    move |x| {
                        let q: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                        amplitude * (-q / (width * width)).exp()
                    },
                    FarField::Bounded { sup: amplitude.abs() },
                )
            }
            AnalyticField::Bump { center, radius, amplitude } => {
                positive(radius, "field.radius")?;
                let n = center.len();
                let c = center.clone();
                EvaluableField::closure(
                    n,
                    move |x| {
                        let q: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (radius * radius);
                        if q >= 1.0 {
                            0.0
                        } else {
                            amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
                        }
                    },
                    FarField::CompactSupport { center, radius },
                )
            }
            AnalyticField::HalfspacePower { dim, exponent } => {
                if dim == 0 || !(exponent >= 0.0) {
                    return Err(CliError::config("field: halfspace_power needs dim >= 1 and exponent >= 0"));
                }
                EvaluableField::closure(
                    dim,
                    move |x| x[dim - 1].max(0.0).powf(exponent),
                    FarField::Growth { c: 1.0, beta: exponent },
                )
            }
        })
    }
}

fn positive(v: f64, what: &str) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} must be positive, got {v}")))
    }
}

/// `max |second difference| / h²` along the axes: the local C² bound used
/// for the inner cutoff of a grid field.
pub fn grid_c2_bound(u: &GridFunction) -> f64 {
    let g = &u.geom;
    let h = g.h;
    let mut m2: f64 = 0.0;
    for k in 0..g.len() {
        let m = g.multi(k);
        for ax in 0..g.dim() {
            if m[ax] >= 1 && m[ax] + 1 < g.shape[ax] {
                let mut a = m.clone();
                let mut b = m.clone();
                a[ax] -= 1;
                b[ax] += 1;
                let d2 = u.values[g.flat(&a)] + u.values[g.flat(&b)] - 2.0 * u.values[k];
                m2 = m2.max(d2.abs() / (h * h));
            }
        }
    }
    m2
}

/// Field file for `apply` and `measure`: `.csv` is a grid dump, anything
/// else is an [`AnalyticField`] JSON.
pub enum FieldInput {
    Grid(GridFunction),
    Analytic(AnalyticField),
}

pub fn load_field(path: &Path) -> CliResult<(FieldInput, serde_json::Value)> {
    let text = read_text(path)?;
    let what = format!("field {}", path.display());
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let u = GridFunction::from_csv(&text)?;
        let desc = serde_json::json!({
            "kind": "grid_csv",
            "path": path.display().to_string(),
            "origin": u.geom.origin,
            "h": u.geom.h,
            "shape": u.geom.shape,
        });
        Ok((FieldInput::Grid(u), desc))
    } else {
        let raw: serde_json::Value = parse_json(&text, &what)?;
        Ok((FieldInput::Analytic(parse_json(&text, &what)?), raw))
    }
}

pub fn load_grid_field(path: &Path) -> CliResult<GridFunction> {
    match load_field(path)?.0 {
        FieldInput::Grid(u) => Ok(u),
        FieldInput::Analytic(_) => Err(CliError::config(format!(
            "field {}: a grid CSV with header x1,...,xn,value is required here",
            path.display()
        ))),
    }
}

/// Problem file for `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub operator: OperatorSpec,
    pub domain: DomainSpec,
    pub f: Rhs,
    pub h: f64,
    #[serde(default)]
    pub boundary_cell: Option<BoundaryCell>,
    /// Direction count for uniform measures.
    #[serde(default)]
    pub directions: Option<usize>,
    /// Points at which the pointwise residual is checked.
    #[serde(default)]
    pub residual_probes: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_points() {
        assert_eq!(parse_list("1, -2.5,3e-1", "xs").unwrap(), vec![1.0, -2.5, 0.3]);
        assert!(parse_list("1,a", "xs").is_err());
        assert_eq!(parse_points("1,0; 0,1", "xi").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_points("1,0;1", "xi").is_err());
        let csv = "x1,x2\n0,0.5\n1,2\n";
        assert_eq!(parse_points_csv(csv, "pts").unwrap(), vec![vec![0.0, 0.5], vec![1.0, 2.0]]);
        assert!(parse_points_csv("x1,x2\n0\n", "pts").is_err());
    }

    #[test]
    fn analytic_fields_parse_and_evaluate() {
        let f: AnalyticField = parse_json(r#"{"kind":"gaussian","center":[0,0],"width":2}"#, "f").unwrap();
        let e = f.build().unwrap();
        assert!((e.eval(&[2.0, 0.0]) - (-1.0f64).exp()).abs() < 1e-15);
        let b: AnalyticField = parse_json(r#"{"kind":"bump","center":[1],"radius":0.5,"amplitude":2}"#, "f").unwrap();
        assert_eq!(b.build().unwrap().eval(&[1.6]), 0.0);
        assert!((b.build().unwrap().eval(&[1.0]) - 2.0).abs() < 1e-15);
        let err = parse_json::<AnalyticField>(r#"{"kind":"gaussian","center":[0],"widht":1}"#, "f").unwrap_err();
        assert!(err.to_string().contains("widht"), "{err}");
    }

    #[test]
    fn problem_file_names_missing_fields() {
        let text = r#"{"operator":{"s":0.5,"dim":1,"canonical":"fractional_laplacian"},
                       "domain":{"kind":"interval","a":-1,"b":1},"f":{"kind":"constant","value":1}}"#;
        let err = parse_json::<ProblemFile>(text, "problem").unwrap_err().to_string();
        assert!(err.contains("missing field `h`"), "{err}");
    }
}
