//! Dense collocation for `Lu = f` in Ω, `u = 0` outside Ω.
//!
//! Each row samples the rays of the direction rule at multiples of `h`.
//! On `[0, h]` the second difference is modelled as `δ²u(h)(r/h)²`; beyond
//! `h` each side of the ray is interpolated linearly between samples and
//! integrated exactly against `r^{-1-2s}`. Exterior samples are zero.

use std::sync::Arc;
use std::time::Instant;

use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Extension, GridFunction, GridGeometry};
use crate::nonlocal_apply::{
    apply_pointwise, boundary_cell_weight, direction_rule, inner_cell_weight, linear_piece, outer_mass,
    EvaluableField, QuadratureBudget,
};
use crate::spectral_measure::StableOperator;

/// Test domains with exact signed distance (positive inside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{|x| > radius} ∩ box`.
    ComplementBallInBox { radius: f64, lo: Vec<f64>, hi: Vec<f64> },
}

fn box_distance(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut inside = f64::INFINITY;
    let mut outside = 0.0;
    for i in 0..x.len() {
        let below = lo[i] - x[i];
        let above = x[i] - hi[i];
        inside = inside.min(-below).min(-above);
        let gap = below.max(above).max(0.0);
        outside += gap * gap;
    }
    if outside > 0.0 {
        -outside.sqrt()
    } else {
        inside
    }
}

impl DomainSpec {
    pub fn unit_ball(dim: usize) -> Self {
        DomainSpec::Ball { center: vec![0.0; dim], radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Box { lo, .. } | DomainSpec::ComplementBallInBox { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::DomainError(m.to_string()));
        match self {
            DomainSpec::Interval { a, b } if !(a < b) => bad("interval needs a < b"),
            DomainSpec::Ball { radius, .. } if !(*radius > 0.0) => bad("ball radius must be positive"),
            DomainSpec::Box { lo, hi } | DomainSpec::ComplementBallInBox { lo, hi, .. }
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l < h)) =>
            {
                bad("box needs lo < hi on every axis")
            }
            DomainSpec::ComplementBallInBox { radius, .. } if !(*radius > 0.0) => {
                bad("excluded ball radius must be positive")
            }
            _ if !(1..=2).contains(&self.dim()) => bad("Dirichlet domains are supported in 1 or 2 dimensions"),
            _ => Ok(()),
        }
    }

    /// Distance to the boundary, positive inside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => (x[0] - a).min(b - x[0]),
            DomainSpec::Ball { center, radius } => {
                let r = x.iter().zip(center).map(|(p, c)| (p - c).powi(2)).sum::<f64>().sqrt();
                radius - r
            }
            DomainSpec::Box { lo, hi } => box_distance(lo, hi, x),
            DomainSpec::ComplementBallInBox { radius, lo, hi } => {
                let r = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                (r - radius).min(box_distance(lo, hi, x))
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Interval { a, b } => (vec![*a], vec![*b]),
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainSpec::Box { lo, hi } | DomainSpec::ComplementBallInBox { lo, hi, .. } => (lo.clone(), hi.clone()),
        }
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => 0.5 * (b - a),
            DomainSpec::Ball { radius, .. } => *radius,
            DomainSpec::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min),
            DomainSpec::ComplementBallInBox { radius, lo, hi } => {
                // A crude but safe lower bound: half the gap between sphere and box.
                let half = lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min);
                let far = lo.iter().zip(hi).map(|(l, h)| l.abs().max(h.abs())).fold(0.0, f64::max);
                (0.5 * (far - radius)).min(half)
            }
        }
    }
}

/// Right-hand sides that can be named in a problem file.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rhs {
    Constant { value: f64 },
    /// `value · sign(x_1)`.
    SignX1 { value: f64 },
    /// Node values looked up by nearest tabulated point.
    CustomTable { points: Vec<Vec<f64>>, values: Vec<f64> },
    #[serde(skip)]
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rhs::Constant { value } => write!(f, "Constant({value})"),
            Rhs::SignX1 { value } => write!(f, "SignX1({value})"),
            Rhs::CustomTable { points, .. } => write!(f, "CustomTable({} points)", points.len()),
            Rhs::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Rhs {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Rhs::Constant { value } => *value,
            Rhs::SignX1 { value } => {
                if x[0] > 0.0 {
                    *value
                } else if x[0] < 0.0 {
                    -value
                } else {
                    0.0
                }
            }
            Rhs::CustomTable { points, values } => {
                if points.len() != values.len() || points.is_empty() {
                    return Err(LabError::ConfigError("custom_table needs matching, nonempty points and values".into()));
                }
                let (k, _) = points
                    .iter()
                    .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                values[k]
            }
            Rhs::Function(f) => f(x),
        })
    }
}

/// Treatment of the last cell of a ray before it leaves Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCell {
    /// Linear interpolation to the zero exterior node.
    Linear,
    /// On grid-aligned rays, `u_k ((ℓ - t)/ℓ)^s` up to the boundary crossing
    /// at distance `ℓ ≤ h`.
    PowerProfile,
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub op: StableOperator,
    pub domain: DomainSpec,
    pub f: Rhs,
    pub h: f64,
    pub boundary_cell: BoundaryCell,
    /// Direction count for uniform measures.
    pub directions: usize,
}

impl DirichletProblem {
    pub fn new(op: StableOperator, domain: DomainSpec, f: Rhs, h: f64) -> Result<Self> {
        domain.validate()?;
        if domain.dim() != op.dim() {
            return Err(LabError::DomainError(format!(
                "domain dimension {} differs from operator dimension {}",
                domain.dim(),
                op.dim()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(LabError::ResolutionError(format!("grid spacing must be positive, got {h}")));
        }
        if h > domain.inradius() / 4.0 {
            return Err(LabError::ResolutionError(format!(
                "h = {h} is too coarse: at least four nodes are needed between the boundary and the deepest point"
            )));
        }
        Ok(Self { op, domain, f, h, boundary_cell: BoundaryCell::PowerProfile, directions: 64 })
    }

    pub fn with_boundary_cell(mut self, bc: BoundaryCell) -> Self {
        self.boundary_cell = bc;
        self
    }

    /// Grid over the bounding box plus one exterior layer; the box corner
    /// is a node.
    pub fn geometry(&self) -> GridGeometry {
        let (lo, hi) = self.domain.bounding_box();
        let h = self.h;
        let origin: Vec<f64> = lo.iter().map(|l| l - h).collect();
        let shape = lo
            .iter()
            .zip(&hi)
            .map(|(l, u)| ((u - l) / h - 1e-9).ceil() as usize + 3)
            .collect();
        GridGeometry { origin, h, shape }
    }
}

/// The collocation system `A u = f` on the interior nodes.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub geom: GridGeometry,
    /// Flat grid index of every unknown.
    pub nodes: Vec<usize>,
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// max |A_ij - A_ji| / max |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(self.matrix[(i, j)].abs());
                if j > i {
                    worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
                }
            }
        }
        worst / scale
    }
}

fn along(x: &[f64], theta: &[f64], r: f64) -> Vec<f64> {
    x.iter().zip(theta).map(|(a, b)| a + r * b).collect()
}

/// Grid axis of a direction that is ±e_i, if any.
fn axis_of(theta: &[f64]) -> Option<usize> {
    let mut found = None;
    for (i, c) in theta.iter().enumerate() {
        if (c.abs() - 1.0).abs() < 1e-12 {
            found = Some(i);
        } else if c.abs() > 1e-12 {
            return None;
        }
    }
    found
}

struct RowBuilder<'a> {
    p: &'a DirichletProblem,
    geom: &'a GridGeometry,
    unknown: &'a [Option<usize>],
}

impl RowBuilder<'_> {
    /// Sample at `y` as (unknown, weight) pairs; exterior nodes drop out.
    fn sample(&self, y: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        if let Some(st) = self.geom.stencil(y) {
            for (k, w) in st {
                if let Some(j) = self.unknown[k] {
                    out.push((j, w));
                }
            }
        }
    }

    /// Distance from the sample at `r_in` (inside) towards `r_out` to the
    /// boundary crossing, capped at h.
    fn crossing(&self, x: &[f64], theta: &[f64], r_in: f64, r_out: f64) -> f64 {
        let d = |r: f64| self.p.domain.signed_distance(&along(x, theta, r));
        if d(r_out) > 0.0 {
            return self.p.h;
        }
        let (mut a, mut b) = (r_in, r_out);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if d(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        (0.5 * (a + b) - r_in).abs().min(self.p.h)
    }

    fn side(&self, x: &[f64], theta: &[f64], w: f64, row: &mut Vec<(usize, f64)>) {
        let h = self.p.h;
        let s = self.p.op.s;
        let (lo, hi) = self.p.domain.bounding_box();
        let reach = lo.iter().zip(&hi).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt() + 2.0 * h;
        let k_max = (reach / h).ceil() as usize + 1;
        let aligned = axis_of(theta).is_some() && self.geom.node_at(x).is_some();
        let profile = aligned && self.p.boundary_cell == BoundaryCell::PowerProfile;

        let mut cur = Vec::new();
        let mut next = Vec::new();
        self.sample(&along(x, theta, h), &mut cur);
        for &(j, c) in &cur {
            row.push((j, w * c * inner_cell_weight(h, s)));
        }
        for k in 1..k_max {
            let a = k as f64 * h;
            let b = a + h;
            self.sample(&along(x, theta, b), &mut next);
            if cur.is_empty() && next.is_empty() {
                std::mem::swap(&mut cur, &mut next);
                continue;
            }
            if profile && next.is_empty() {
                // Leaving Ω between samples k and k+1.
                let ell = self.crossing(x, theta, a, b);
                let wt = boundary_cell_weight(a, ell, s, 1.0);
                for &(j, c) in &cur {
                    row.push((j, w * c * wt));
                }
            } else if profile && cur.is_empty() {
                // Re-entering Ω between samples k and k+1.
                let ell = self.crossing(x, theta, b, a);
                let wt = boundary_cell_weight(b, ell, s, -1.0);
                for &(j, c) in &next {
                    row.push((j, w * c * wt));
                }
            } else {
                let (wa, wb) = linear_piece(a, b, s);
                for &(j, c) in &cur {
                    row.push((j, w * c * wa));
                }
                for &(j, c) in &next {
                    row.push((j, w * c * wb));
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
    }

    fn row(&self, i: usize, node: usize, rule: &[(Vec<f64>, f64)]) -> Vec<(usize, f64)> {
        let x = self.geom.point(node);
        let h = self.p.h;
        let s = self.p.op.s;
        let mut row = Vec::new();
        let mut diag = 0.0;
        for (theta, w) in rule {
            diag -= 2.0 * w * (inner_cell_weight(h, s) + outer_mass(h, s));
            self.side(&x, theta, *w, &mut row);
            let neg: Vec<f64> = theta.iter().map(|c| -c).collect();
            self.side(&x, &neg, *w, &mut row);
        }
        row.push((i, diag));
        row
    }
}

/// Assembles the dense collocation system.
pub fn assemble(p: &DirichletProblem) -> Result<DiscreteSystem> {
    let geom = p.geometry();
    let cut = 0.1 * p.h;
    let mut unknown = vec![None; geom.len()];
    let mut nodes = Vec::new();
    for (k, slot) in unknown.iter_mut().enumerate() {
        if p.domain.signed_distance(&geom.point(k)) > cut {
            *slot = Some(nodes.len());
            nodes.push(k);
        }
    }
    if nodes.is_empty() {
        return Err(LabError::ResolutionError("no interior nodes".into()));
    }
    let rule = direction_rule(&p.op.measure, p.directions);
    let builder = RowBuilder { p, geom: &geom, unknown: &unknown };
    let rows: Vec<Vec<(usize, f64)>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &node)| builder.row(i, node, &rule))
        .collect();
    let n = nodes.len();
    let mut matrix = Mat::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            matrix[(i, j)] += v;
        }
    }
    let rhs = nodes
        .iter()
        .map(|&k| p.f.eval(&geom.point(k)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DiscreteSystem { geom, nodes, matrix, rhs })
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: GridFunction,
    pub unknowns: usize,
    /// max |A u - f| / max(|f|, 1).
    pub algebraic_residual: f64,
    pub assemble_secs: f64,
    pub solve_secs: f64,
}

/// Dense LU solve of the collocation system.
pub fn solve(p: &DirichletProblem) -> Result<DirichletSolution> {
    let t0 = Instant::now();
    let sys = assemble(p)?;
    let assemble_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let n = sys.len();
    let b = Mat::<f64>::from_fn(n, 1, |i, _| sys.rhs[i]);
    let lu = sys.matrix.partial_piv_lu();
    let x = lu.solve(&b);
    let solve_secs = t1.elapsed().as_secs_f64();
    let sol: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(LabError::SingularSystem("LU produced non-finite values".into()));
    }
    let ax = &sys.matrix * &x;
    let fmax = sys.rhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let residual = (0..n).map(|i| (ax[(i, 0)] - sys.rhs[i]).abs()).fold(0.0, f64::max) / fmax;
    if residual > 1e-6 {
        return Err(LabError::SingularSystem(format!(
            "relative algebraic residual {residual:e} after LU"
        )));
    }
    let mut values = vec![0.0; sys.geom.len()];
    for (i, &k) in sys.nodes.iter().enumerate() {
        values[k] = sol[i];
    }
    Ok(DirichletSolution {
        u: GridFunction { geom: sys.geom, values, extension: Extension::Zero },
        unknowns: n,
        algebraic_residual: residual,
        assemble_secs,
        solve_secs,
    })
}

/// Max over probes of `|Lu(x) - f(x)|`, with `Lu` evaluated by the pointwise
/// quadrature on the interpolated solution (inner cutoff `h`).
pub fn residual_check(p: &DirichletProblem, u: &GridFunction, probes: &[Vec<f64>]) -> Result<f64> {
    let h = u.geom.h;
    let mut m2: f64 = 0.0;
    let g = &u.geom;
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
    let field = EvaluableField::grid(u.clone(), None)?.with_c2_bound(m2);
    let budget = QuadratureBudget { r0: h, tol: f64::INFINITY, directions: Some(p.directions), ..Default::default() };
    let mut worst: f64 = 0.0;
    for x in probes {
        let e = apply_pointwise(&p.op, &field, x, &budget)?;
        worst = worst.max((e.value - p.f.eval(x)?).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_measure::{canonical, Canonical};

    fn getoor(h: f64) -> DirichletProblem {
        let op = canonical(Canonical::FractionalLaplacian, 1, 0.5).unwrap();
        DirichletProblem::new(op, DomainSpec::Interval { a: -1.0, b: 1.0 }, Rhs::Constant { value: -1.0 }, h).unwrap()
    }

    #[test]
    fn signed_distances() {
        let b = DomainSpec::unit_ball(2);
        assert!((b.signed_distance(&[0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!((b.signed_distance(&[0.0, 2.0]) + 1.0).abs() < 1e-15);
        let c = DomainSpec::ComplementBallInBox { radius: 1.0, lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] };
        assert!((c.signed_distance(&[1.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!(c.signed_distance(&[0.5, 0.0]) < 0.0);
        let bx = DomainSpec::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 2.0] };
        assert!((bx.signed_distance(&[0.25, 1.0]) - 0.25).abs() < 1e-15);
        assert!((bx.signed_distance(&[2.0, 3.0]) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn getoor_solution_at_128() {
        let p = getoor(1.0 / 128.0);
        let sol = solve(&p).unwrap();
        let u0 = sol.u.eval(&[0.0]);
        assert!((u0 - 1.0).abs() < 0.02, "{u0}");
        let r = residual_check(&p, &sol.u, &[vec![0.0]]).unwrap();
        assert!(r <= 0.02, "{r}");
    }

    #[test]
    fn zero_source_gives_zero() {
        let mut p = getoor(1.0 / 32.0);
        p.f = Rhs::Constant { value: 0.0 };
        let sol = solve(&p).unwrap();
        assert!(sol.u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sign_pattern_and_symmetry() {
        let p = getoor(1.0 / 32.0).with_boundary_cell(BoundaryCell::Linear);
        let sys = assemble(&p).unwrap();
        assert!(sys.asymmetry() < 1e-10);
        for i in 0..sys.len() {
            assert!(sys.matrix[(i, i)] < 0.0);
            for j in 0..sys.len() {
                if i != j {
                    assert!(sys.matrix[(i, j)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn residual_of_zero_field_is_source() {
        let p = getoor(1.0 / 32.0);
        let g = p.geometry();
        let r = residual_check(&p, &GridFunction::zeros(g), &[vec![0.0], vec![0.5]]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_json() {
        let r: Rhs = serde_json::from_str(r#"{"kind":"sign_x1","value":2.0}"#).unwrap();
        assert_eq!(r.eval(&[-0.3]).unwrap(), -2.0);
        assert!(serde_json::from_str::<Rhs>(r#"{"kind":"constant","valu":1}"#).is_err());
    }
}
