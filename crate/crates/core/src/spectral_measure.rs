//! Spectral measures on the unit sphere and the stable operators they define.
//!
//! An operator is evaluated as
//!
//! ```text
//! L u(x) = ∫_{S^{n-1}} ∫_0^∞ (u(x + rθ) + u(x - rθ) - 2u(x)) r^{-1-2s} dr dμ̃(θ)
//! ```
//!
//! where μ̃ is the symmetrization ½(μ(θ) + μ(-θ)). With this convention the
//! Fourier multiplier of `L` is `-c_s A(ξ)`, `A(ξ) = ∫ |ξ·θ|^{2s} dμ(θ)`, and
//! `c_s = 2∫_0^∞ (1 - cos t) t^{-1-2s} dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{LabError, Result};
use crate::quadrature::{adaptive, GaussRule};

const UNIT_TOL: f64 = 1e-12;
const DEGENERACY_RATIO: f64 = 1e-10;

/// Weighted Dirac mass at a unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub theta: Vec<f64>,
    pub weight: f64,
}

/// Sample of an absolutely continuous measure with its quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityNode {
    pub theta: Vec<f64>,
    pub value: f64,
    pub qweight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Atomic(Vec<Atom>),
    Density(Vec<DensityNode>),
    /// dμ = level dθ (surface measure).
    Uniform { level: f64 },
}

/// Finite nonnegative measure on S^{n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    dim: usize,
    kind: MeasureKind,
}

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(LabError::InvalidMeasure(format!(
            "direction {v:?} cannot be normalized"
        )));
    }
    Ok(v.iter().map(|c| c / norm).collect())
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(LabError::InvalidMeasure(format!(
            "{what} must be finite and nonnegative, got {w}"
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// |ξ·θ| with products below the rounding error of the dot product set to zero.
fn abs_dot(xi: &[f64], theta: &[f64]) -> f64 {
    let d = dot(xi, theta).abs();
    let scale: f64 = xi.iter().map(|c| c.abs()).sum();
    if d <= 4.0 * f64::EPSILON * scale {
        0.0
    } else {
        d
    }
}

fn same_direction(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= UNIT_TOL)
}

/// Surface measure of S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// ∫_{S^{n-1}} |θ_1|^p dθ.
pub fn sphere_power_moment(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    2.0 * PI.powf((nf - 1.0) / 2.0) * gamma((p + 1.0) / 2.0) / gamma((nf + p) / 2.0)
}

impl SpectralMeasure {
    /// Atoms are stored as given (after normalizing the directions).
    pub fn atomic(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidMeasure("dimension must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(atoms.len());
        for (theta, w) in atoms {
            if theta.len() != dim {
                return Err(LabError::InvalidMeasure(format!(
                    "atom direction has {} coordinates, expected {dim}",
                    theta.len()
                )));
            }
            check_weight(w, "atom weight")?;
            out.push(Atom {
                theta: normalize(&theta)?,
                weight: w,
            });
        }
        Ok(Self {
            dim,
            kind: MeasureKind::Atomic(out),
        })
    }

    pub fn uniform(dim: usize, level: f64) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidMeasure("dimension must be >= 1".into()));
        }
        check_weight(level, "uniform level")?;
        Ok(Self {
            dim,
            kind: MeasureKind::Uniform { level },
        })
    }

    /// Density given by samples; the quadrature is the trapezoid rule on S^1,
    /// Gauss–Legendre (in cos of the polar angle) × trapezoid on S^2, and the
    /// counting measure on S^0.
    pub fn density(dim: usize, values: Vec<f64>, n_polar: Option<usize>) -> Result<Self> {
        for &v in &values {
            check_weight(v, "density value")?;
        }
        let nodes = match dim {
            1 => {
                if values.len() != 2 {
                    return Err(LabError::InvalidMeasure(
                        "a density on S^0 needs exactly two values (at +1 and -1)".into(),
                    ));
                }
                vec![
                    DensityNode { theta: vec![1.0], value: values[0], qweight: 1.0 },
                    DensityNode { theta: vec![-1.0], value: values[1], qweight: 1.0 },
                ]
            }
            2 => {
                let n = values.len();
                if n < 2 || !n.is_multiple_of(2) {
                    return Err(LabError::InvalidMeasure(format!(
                        "density on S^1 needs an even node count >= 2, got {n}"
                    )));
                }
                let dphi = 2.0 * PI / n as f64;
                values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let phi = j as f64 * dphi;
                        DensityNode { theta: vec![phi.cos(), phi.sin()], value: v, qweight: dphi }
                    })
                    .collect()
            }
            3 => {
                let np = n_polar.ok_or_else(|| {
                    LabError::InvalidMeasure("density on S^2 needs n_polar".into())
                })?;
                if np == 0 || !values.len().is_multiple_of(np) {
                    return Err(LabError::InvalidMeasure(format!(
                        "{} values do not split into {np} polar rows",
                        values.len()
                    )));
                }
                let naz = values.len() / np;
                if naz < 2 || !naz.is_multiple_of(2) {
                    return Err(LabError::InvalidMeasure(
                        "azimuthal node count must be even".into(),
                    ));
                }
                let gl = GaussRule::legendre(np);
                let dphi = 2.0 * PI / naz as f64;
                let mut nodes = Vec::with_capacity(values.len());
                for (i, (&z, &wz)) in gl.nodes.iter().zip(&gl.weights).enumerate() {
                    let rho = (1.0 - z * z).sqrt();
                    for j in 0..naz {
                        let phi = j as f64 * dphi;
                        nodes.push(DensityNode {
                            theta: vec![rho * phi.cos(), rho * phi.sin(), z],
                            value: values[i * naz + j],
                            qweight: wz * dphi,
                        });
                    }
                }
                nodes
            }
            _ => {
                return Err(LabError::InvalidMeasure(format!(
                    "density measures are supported for n in {{1,2,3}}, got {dim}"
                )))
            }
        };
        Ok(Self {
            dim,
            kind: MeasureKind::Density(nodes),
        })
    }

    /// Samples `a(θ)` on the standard node set for `dim` (see [`Self::density`]).
    pub fn density_from_fn<F: Fn(&[f64]) -> f64>(
        dim: usize,
        n_nodes: usize,
        n_polar: Option<usize>,
        a: F,
    ) -> Result<Self> {
        let template = match dim {
            1 => Self::density(1, vec![0.0, 0.0], None)?,
            2 => Self::density(2, vec![0.0; n_nodes], None)?,
            3 => Self::density(3, vec![0.0; n_nodes], n_polar)?,
            _ => return Self::density(dim, vec![], None),
        };
        let values = match &template.kind {
            MeasureKind::Density(nodes) => nodes.iter().map(|nd| a(&nd.theta)).collect(),
            _ => unreachable!(),
        };
        Self::density(dim, values, n_polar)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// ½(μ(θ) + μ(-θ)). Coincident atoms are merged, so this is idempotent.
    pub fn symmetrized(&self) -> Self {
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => {
                let mut out: Vec<Atom> = Vec::with_capacity(2 * atoms.len());
                let mut push = |theta: Vec<f64>, w: f64| {
                    if let Some(a) = out.iter_mut().find(|a| same_direction(&a.theta, &theta)) {
                        a.weight += w;
                    } else {
                        out.push(Atom { theta, weight: w });
                    }
                };
                for a in atoms {
                    push(a.theta.clone(), 0.5 * a.weight);
                    push(a.theta.iter().map(|c| -c).collect(), 0.5 * a.weight);
                }
                MeasureKind::Atomic(out)
            }
            MeasureKind::Density(nodes) => {
                let mirrored: Vec<DensityNode> = nodes
                    .iter()
                    .map(|nd| {
                        let anti: Vec<f64> = nd.theta.iter().map(|c| -c).collect();
                        let opposite = nodes
                            .iter()
                            .min_by(|a, b| {
                                let da: f64 = a.theta.iter().zip(&anti).map(|(x, y)| (x - y).powi(2)).sum();
                                let db: f64 = b.theta.iter().zip(&anti).map(|(x, y)| (x - y).powi(2)).sum();
                                da.total_cmp(&db)
                            })
                            .map(|o| o.value)
                            .unwrap_or(nd.value);
                        DensityNode {
                            theta: nd.theta.clone(),
                            value: 0.5 * (nd.value + opposite),
                            qweight: nd.qweight,
                        }
                    })
                    .collect();
                MeasureKind::Density(mirrored)
            }
            MeasureKind::Uniform { level } => MeasureKind::Uniform { level: *level },
        };
        Self { dim: self.dim, kind }
    }

    /// Rotates every direction by the (row-major) matrix `rot`.
    pub fn rotated(&self, rot: &[Vec<f64>]) -> Self {
        let apply = |t: &[f64]| -> Vec<f64> { rot.iter().map(|row| dot(row, t)).collect() };
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => MeasureKind::Atomic(
                atoms
                    .iter()
                    .map(|a| Atom { theta: apply(&a.theta), weight: a.weight })
                    .collect(),
            ),
            MeasureKind::Density(nodes) => MeasureKind::Density(
                nodes
                    .iter()
                    .map(|n| DensityNode { theta: apply(&n.theta), value: n.value, qweight: n.qweight })
                    .collect(),
            ),
            MeasureKind::Uniform { level } => MeasureKind::Uniform { level: *level },
        };
        Self { dim: self.dim, kind }
    }

    /// Concatenates two atomic measures.
    pub fn join_atomic(&self, other: &Self) -> Result<Self> {
        match (&self.kind, &other.kind) {
            (MeasureKind::Atomic(a), MeasureKind::Atomic(b)) if self.dim == other.dim => {
                let mut atoms = a.clone();
                atoms.extend(b.iter().cloned());
                Ok(Self { dim: self.dim, kind: MeasureKind::Atomic(atoms) })
            }
            _ => Err(LabError::InvalidMeasure(
                "only atomic measures of equal dimension can be joined".into(),
            )),
        }
    }

    /// ∫ |ξ·θ|^{p} dμ(θ).
    pub fn power_moment(&self, xi: &[f64], p: f64) -> f64 {
        match &self.kind {
            MeasureKind::Atomic(atoms) => atoms
                .iter()
                .map(|a| a.weight * abs_dot(xi, &a.theta).powf(p))
                .sum(),
            MeasureKind::Density(nodes) => nodes
                .iter()
                .map(|n| n.value * n.qweight * abs_dot(xi, &n.theta).powf(p))
                .sum(),
            MeasureKind::Uniform { level } => {
                let norm = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    level * norm.powf(p) * sphere_power_moment(self.dim, p)
                }
            }
        }
    }
}

/// ∫ dμ.
pub fn total_mass(m: &SpectralMeasure) -> f64 {
    match &m.kind {
        MeasureKind::Atomic(atoms) => atoms.iter().map(|a| a.weight).sum(),
        MeasureKind::Density(nodes) => nodes.iter().map(|n| n.value * n.qweight).sum(),
        MeasureKind::Uniform { level } => level * sphere_area(m.dim),
    }
}

fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidOrder(s))
    }
}

/// Golden-section minimization of a unimodal-near-the-bracket function.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn sphere_dir(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Minimum over unit ν of ∫|ν·θ|^{2s} dμ, by a direction grid of
/// `search_resolution` points followed by local golden-section refinement.
pub fn ellipticity_lambda(m: &SpectralMeasure, s: f64, search_resolution: usize) -> Result<f64> {
    check_order(s)?;
    let p = 2.0 * s;
    let res = search_resolution.max(4);
    let lambda = match m.dim {
        1 => m.power_moment(&[1.0], p),
        2 => {
            let f = |phi: f64| m.power_moment(&[phi.cos(), phi.sin()], p);
            let dphi = PI / res as f64;
            let (jbest, vbest) = (0..res)
                .map(|j| (j, f(j as f64 * dphi)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let c = jbest as f64 * dphi;
            let (_, refined) = golden_min(f, c - dphi, c + dphi, 80);
            vbest.min(refined)
        }
        3 => {
            // Fibonacci points on the upper hemisphere.
            let f = |t: f64, ph: f64| m.power_moment(&sphere_dir(t, ph), p);
            let golden = PI * (3.0 - 5f64.sqrt());
            let mut best = (0.0, 0.0, f64::INFINITY);
            for k in 0..res {
                let z = 1.0 - (k as f64 + 0.5) / res as f64;
                let t = z.acos();
                let ph = k as f64 * golden;
                let v = f(t, ph);
                if v < best.2 {
                    best = (t, ph, v);
                }
            }
            let step = (4.0 * PI / res as f64).sqrt() * 2.0;
            let (mut t, mut ph, mut v) = best;
            for _ in 0..6 {
                let (tt, vt) = golden_min(|x| f(x, ph), t - step, t + step, 50);
                if vt < v {
                    t = tt;
                    v = vt;
                }
                let (pp, vp) = golden_min(|y| f(t, y), ph - step, ph + step, 50);
                if vp < v {
                    ph = pp;
                    v = vp;
                }
            }
            v
        }
        n => {
            return Err(LabError::InvalidMeasure(format!(
                "ellipticity search is implemented for n <= 3, got {n}"
            )))
        }
    };
    let mass = total_mass(m);
    if lambda < DEGENERACY_RATIO * mass || mass == 0.0 {
        return Err(LabError::DegenerateMeasure { lambda, mass });
    }
    Ok(lambda)
}

/// Default direction-grid size for [`ellipticity_lambda`].
pub fn default_search_resolution(dim: usize) -> usize {
    match dim {
        1 => 1,
        2 => 720,
        _ => 5000,
    }
}

/// c_s = 2∫_0^∞ (1 - cos t) t^{-1-2s} dt.
///
/// [0,1] by the Taylor series of 1 - cos, [1, 128π] by adaptive
/// Gauss–Legendre, and the remaining tail by repeated integration by parts.
pub fn normalization_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    let a = 1.0 + 2.0 * s;

    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 1..40 {
        let k2 = 2 * k;
        fact *= (k2 - 1) as f64 * k2 as f64;
        let term = 1.0 / (fact * (k2 as f64 - 2.0 * s));
        head += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }

    let periods = 64usize;
    let t_end = 2.0 * PI * periods as f64;
    let mut middle = 0.0;
    let mut lo = 1.0;
    let step = PI / 2.0;
    while lo < t_end {
        let hi = (lo + step).min(t_end);
        middle += adaptive(|t: f64| (1.0 - t.cos()) * t.powf(-a), lo, hi, 1e-17, 30).value;
        lo = hi;
    }

    // ∫_T^∞ cos t t^{-a} dt with cos T = 1, sin T = 0, by parts:
    // Σ_k (-1)^k a(a+1)...(a+2k) T^{-a-2k-1}.
    let mut cos_tail = 0.0;
    let mut prod = a;
    for k in 0..6 {
        let term = prod * t_end.powf(-a - 2.0 * k as f64 - 1.0);
        cos_tail += if k % 2 == 0 { term } else { -term };
        let kk = 2.0 * k as f64;
        prod *= (a + kk + 1.0) * (a + kk + 2.0);
    }
    let tail = t_end.powf(1.0 - a) / (a - 1.0) - cos_tail;

    Ok(2.0 * (head + middle + tail))
}

/// A symmetric stable operator with cached ellipticity data.
#[derive(Debug, Clone, PartialEq)]
pub struct StableOperator {
    pub s: f64,
    pub measure: SpectralMeasure,
    pub c_s: f64,
    pub lambda: f64,
    pub big_lambda: f64,
}

impl StableOperator {
    /// Fails with `DegenerateMeasure` when μ is supported on a hyperplane.
    pub fn new(s: f64, measure: SpectralMeasure) -> Result<Self> {
        check_order(s)?;
        let c_s = normalization_constant(s)?;
        let lambda = ellipticity_lambda(&measure, s, default_search_resolution(measure.dim()))?;
        let big_lambda = total_mass(&measure);
        Ok(Self { s, measure, c_s, lambda, big_lambda })
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    /// A(ξ) = ∫ |ξ·θ|^{2s} dμ.
    pub fn symbol(&self, xi: &[f64]) -> f64 {
        self.measure.power_moment(xi, 2.0 * self.s)
    }

    /// c_s A(ξ); the multiplier of `L` is its negative.
    pub fn multiplier(&self, xi: &[f64]) -> f64 {
        self.c_s * self.symbol(xi)
    }
}

/// Named operators with unit multiplier normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Canonical {
    /// `-(-Δ)^s`: c_s A(ξ) = |ξ|^{2s}.
    FractionalLaplacian,
    /// `-Σ(-∂_ii)^s`: c_s A(ξ) = Σ|ξ_i|^{2s}.
    AxisSum,
}

pub fn canonical(name: Canonical, n: usize, s: f64) -> Result<StableOperator> {
    check_order(s)?;
    let c_s = normalization_constant(s)?;
    let measure = match name {
        Canonical::FractionalLaplacian => {
            SpectralMeasure::uniform(n, 1.0 / (c_s * sphere_power_moment(n, 2.0 * s)))?
        }
        Canonical::AxisSum => SpectralMeasure::atomic(n, axis_atoms(n, 0.5 / c_s))?,
    };
    StableOperator::new(s, measure)
}

/// The 2n atoms ±e_i with a common weight.
pub fn axis_atoms(n: usize, weight: f64) -> Vec<(Vec<f64>, f64)> {
    let mut atoms = Vec::with_capacity(2 * n);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sign;
            atoms.push((e, weight));
        }
    }
    atoms
}

// --- JSON ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub theta: Vec<f64>,
    pub w: f64,
}

/// Wire format for measures; directions are normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Atomic {
        atoms: Vec<AtomSpec>,
    },
    Uniform {
        level: f64,
    },
    Density {
        n_nodes: usize,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_polar: Option<usize>,
    },
}

impl MeasureSpec {
    pub fn build(&self, dim: usize) -> Result<SpectralMeasure> {
        match self {
            MeasureSpec::Atomic { atoms } => SpectralMeasure::atomic(
                dim,
                atoms.iter().map(|a| (a.theta.clone(), a.w)).collect(),
            ),
            MeasureSpec::Uniform { level } => SpectralMeasure::uniform(dim, *level),
            MeasureSpec::Density { n_nodes, values, n_polar } => {
                if *n_nodes != values.len() {
                    return Err(LabError::ConfigError(format!(
                        "measure.n_nodes = {n_nodes} but measure.values has {} entries",
                        values.len()
                    )));
                }
                SpectralMeasure::density(dim, values.clone(), *n_polar)
            }
        }
    }
}

/// Wire format for operators: either a canonical name or an explicit measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub s: f64,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<Canonical>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<StableOperator> {
        match (&self.canonical, &self.measure) {
            (Some(c), None) => canonical(*c, self.dim, self.s),
            (None, Some(m)) => StableOperator::new(self.s, m.build(self.dim)?),
            (Some(_), Some(_)) => Err(LabError::ConfigError(
                "operator: give either `canonical` or `measure`, not both".into(),
            )),
            (None, None) => Err(LabError::ConfigError(
                "operator: missing field `canonical` or `measure`".into(),
            )),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::ConfigError(format!("operator JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_examples() {
        let m = SpectralMeasure::atomic(2, axis_atoms(2, 1.0)).unwrap();
        assert_eq!(total_mass(&m), 4.0);
        let u = SpectralMeasure::uniform(2, 1.0).unwrap();
        assert!((total_mass(&u) - 2.0 * PI).abs() < 1e-12);
        // The kinks of |cos| limit the trapezoid rule to O(h²).
        let d = SpectralMeasure::density_from_fn(2, 512, None, |t| t[0].abs()).unwrap();
        assert!((total_mass(&d) - 4.0).abs() < 1e-4, "{}", total_mass(&d));
        let d = SpectralMeasure::density_from_fn(2, 4096, None, |t| t[0].abs()).unwrap();
        assert!((total_mass(&d) - 4.0).abs() < 1e-6, "{}", total_mass(&d));
    }

    #[test]
    fn total_mass_is_additive_over_atom_lists() {
        let a = SpectralMeasure::atomic(2, vec![(vec![1.0, 2.0], 0.3)]).unwrap();
        let b = SpectralMeasure::atomic(2, vec![(vec![-1.0, 0.5], 1.7), (vec![0.0, 1.0], 0.2)]).unwrap();
        let j = a.join_atomic(&b).unwrap();
        assert!((total_mass(&j) - total_mass(&a) - total_mass(&b)).abs() < 1e-15);
    }

    #[test]
    fn lambda_axis_atoms() {
        let m = SpectralMeasure::atomic(2, axis_atoms(2, 1.0)).unwrap();
        let l = ellipticity_lambda(&m, 0.5, 720).unwrap();
        assert!((l - 2.0).abs() < 1e-12, "{l}");
    }

    #[test]
    fn lambda_single_pair_is_degenerate() {
        let m = SpectralMeasure::atomic(2, vec![(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], 1.0)]).unwrap();
        for s in [0.2, 0.5, 0.9] {
            match ellipticity_lambda(&m, s, 720) {
                Err(LabError::DegenerateMeasure { lambda, .. }) => assert!(lambda < 1e-10),
                other => panic!("expected degenerate, got {other:?}"),
            }
        }
    }

    #[test]
    fn lambda_uniform_circle() {
        let u = SpectralMeasure::uniform(2, 1.0).unwrap();
        let l = ellipticity_lambda(&u, 0.5, 720).unwrap();
        assert!((l - 4.0).abs() < 1e-3);
    }

    #[test]
    fn normalization_constant_half_is_pi() {
        let c = normalization_constant(0.5).unwrap();
        assert!((c - PI).abs() < 1e-10 * PI, "{c}");
    }

    #[test]
    fn normalization_constant_matches_gamma_closed_form() {
        // 2∫(1-cos t)t^{-1-a} = -2Γ(-a)cos(πa/2), a = 2s ≠ 1
        for s in [0.05, 0.25, 0.4, 0.6, 0.75, 0.9, 0.99] {
            let a = 2.0 * s;
            let exact = -2.0 * gamma(-a) * (PI * a / 2.0).cos();
            let c = normalization_constant(s).unwrap();
            assert!(((c - exact) / exact).abs() < 1e-10, "s={s} c={c} exact={exact}");
        }
    }

    #[test]
    fn normalization_constant_near_one_stays_controlled() {
        let a = normalization_constant(0.99).unwrap() * 0.01;
        let b = normalization_constant(0.999).unwrap() * 0.001;
        assert!(a.is_finite() && b.is_finite());
        assert!((a - b).abs() < 0.05 * a, "{a} {b}");
        assert!((b - 0.5).abs() < 0.01, "(1-s)c_s -> 1/2, got {b}");
    }

    #[test]
    fn normalization_constant_rejects_bad_order() {
        for s in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(matches!(normalization_constant(s), Err(LabError::InvalidOrder(_))));
        }
    }

    #[test]
    fn canonical_multipliers() {
        let a = canonical(Canonical::AxisSum, 2, 0.5).unwrap();
        assert!((a.multiplier(&[1.0, 1.0]) - 2.0).abs() < 1e-12);
        let f = canonical(Canonical::FractionalLaplacian, 1, 0.5).unwrap();
        assert!((f.multiplier(&[3.0]) - 3.0).abs() < 1e-12);
        let f2 = canonical(Canonical::FractionalLaplacian, 2, 0.3).unwrap();
        assert!((f2.multiplier(&[3.0, 4.0]) - 5f64.powf(0.6)).abs() < 1e-12);
        let f3 = canonical(Canonical::FractionalLaplacian, 3, 0.7).unwrap();
        assert!((f3.multiplier(&[0.0, 0.0, 2.0]) - 2f64.powf(1.4)).abs() < 1e-12);
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let m = SpectralMeasure::atomic(2, vec![(vec![1.0, 0.3], 0.4), (vec![0.0, 1.0], 2.0), (vec![0.0, -1.0], 1.0)]).unwrap();
        let once = m.symmetrized();
        let twice = once.symmetrized();
        match (once.kind(), twice.kind()) {
            (MeasureKind::Atomic(a), MeasureKind::Atomic(b)) => {
                assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(b) {
                    assert!(same_direction(&x.theta, &y.theta));
                    assert!((x.weight - y.weight).abs() < 1e-15);
                }
            }
            _ => unreachable!(),
        }
        let d = SpectralMeasure::density_from_fn(2, 64, None, |t| (1.0 + t[0]).max(0.0)).unwrap();
        assert_eq!(d.symmetrized(), d.symmetrized().symmetrized());
    }

    #[test]
    fn operator_json_roundtrip_and_errors() {
        let spec = OperatorSpec::from_json(
            r#"{"s":0.5,"dim":2,"measure":{"kind":"atomic","atoms":[{"theta":[2,0],"w":1},{"theta":[0,3],"w":1}]}}"#,
        )
        .unwrap();
        let op = spec.build().unwrap();
        assert!((op.big_lambda - 2.0).abs() < 1e-15);
        let err = OperatorSpec::from_json(r#"{"dim":2,"canonical":"axis_sum"}"#).unwrap_err();
        assert!(err.to_string().contains("`s`"), "{err}");
        let err = OperatorSpec::from_json(r#"{"s":0.5,"dim":2,"measure":{"kind":"atomic","atoms":[{"theta":[1,0]}]}}"#).unwrap_err();
        assert!(err.to_string().contains("`w`"), "{err}");
    }
}
