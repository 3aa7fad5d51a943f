//! Scripted experiments: barrier inequalities, the half-space profile,
//! the heat-kernel fixed point, and the two counterexample constructions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Extension, GridFunction};
use crate::nonlocal_apply::{apply_pointwise, radial_sd_integral, Estimate, EvaluableField, FarField, QuadratureBudget};
use crate::quadrature::{adaptive, power_integral};
use crate::regularity::{log_fit, LogFit};
use crate::spectral_measure::{canonical, Canonical, StableOperator};
use crate::symbol_heat::{heat_convolve, heat_kernel, GridSpec};

/// `1 - S((r - a)/(b - a))` with the quintic smoothstep `S`: equal to 1 for
/// `r ≤ a`, to 0 for `r ≥ b`, and C² in between.
pub fn smooth_cutoff(r: f64, a: f64, b: f64) -> f64 {
    let t = ((r - a) / (b - a)).clamp(0.0, 1.0);
    1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// --- barriers -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    /// `dist(x, B_1)^s`, probed outside the ball.
    Phi1DistOutS,
    /// `dist(x, ℝⁿ∖B_1)^s`, probed inside.
    Phi2DistInS,
    /// `dist(x, B_1)^{3s/2}`, probed outside.
    Phi3DistOut3s2,
    /// `dist(x, ℝⁿ∖B_1)^{3s/2}`, probed inside.
    Phi4DistIn3s2,
    Supersol,
    Subsol,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 6] = [
        BarrierKind::Phi1DistOutS,
        BarrierKind::Phi2DistInS,
        BarrierKind::Phi3DistOut3s2,
        BarrierKind::Phi4DistIn3s2,
        BarrierKind::Supersol,
        BarrierKind::Subsol,
    ];

    fn outside(self) -> bool {
        matches!(self, BarrierKind::Phi1DistOutS | BarrierKind::Phi3DistOut3s2 | BarrierKind::Supersol)
    }
}

/// Constants of the two composite barriers.
///
/// Supersolution: `φ₁ = g(min(d, d*)) / g(d*)` with `d = dist(x, B_1)`,
/// `g(d) = d^s - a d^{3s/2}` and `d*` the maximiser of `g`, so `φ₁ ≥ 1`
/// beyond `ε = d*`.
///
/// Subsolution: `φ₂ = (d^s + d^{3s/2} + m η) / (2 + m)` with
/// `d = dist(x, ℝⁿ∖B_1)` and `η` a radial cutoff equal to 1 on
/// `B_{bump_inner}` and 0 outside `B_{bump_outer}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConstants {
    pub a: f64,
    pub m: f64,
    pub bump_inner: f64,
    pub bump_outer: f64,
}

impl Default for BarrierConstants {
    fn default() -> Self {
        Self { a: 1.0, m: 20.0, bump_inner: 0.2, bump_outer: 0.45 }
    }
}

impl BarrierConstants {
    /// Width `ε` of the annulus on which the supersolution inequality holds.
    pub fn supersol_epsilon(&self, s: f64) -> f64 {
        (2.0 / (3.0 * self.a)).powf(2.0 / s)
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub which: BarrierKind,
    pub op: StableOperator,
    /// Probe offsets: the probe is `(0, …, 0, 1 ± ρ)`.
    pub rhos: Vec<f64>,
    pub constants: BarrierConstants,
    pub budget: QuadratureBudget,
}

impl BarrierSpec {
    pub fn new(which: BarrierKind, op: StableOperator, rhos: Vec<f64>) -> Self {
        Self {
            which,
            op,
            rhos,
            constants: BarrierConstants::default(),
            budget: QuadratureBudget { tol: 1e-4, max_shells: 400, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierProbe {
    pub rho: f64,
    pub x: Vec<f64>,
    /// `None` when the quadrature could not certify the value.
    pub value: Option<f64>,
    pub error_bound: Option<f64>,
    pub sign_ok: Option<bool>,
}

/// Fit of `v(ρ) ≈ a ρ^p + b`, the form in which the power barriers are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub offset: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierReport {
    pub which: BarrierKind,
    pub s: f64,
    pub condition: String,
    pub probes: Vec<BarrierProbe>,
    pub smallest_certified_rho: Option<f64>,
    /// Power barriers only.
    pub fit: Option<PowerFit>,
    pub expected_exponent: Option<f64>,
    /// `max |Lφ| / (1 + |log ρ|)` over certified probes, for the log barriers.
    pub log_growth_constant: Option<f64>,
    /// Supersolution only.
    pub epsilon: Option<f64>,
    pub sign_ok: bool,
    pub exponent_ok: Option<bool>,
    pub passed: bool,
}

/// Tolerance on fitted barrier exponents.
pub const BARRIER_EXPONENT_TOL: f64 = 0.1;

/// Least squares for `a ρ^p + b` with `p` scanned over `[-1.5, 0)`.
pub fn power_offset_fit(rho: &[f64], v: &[f64]) -> Option<PowerFit> {
    if rho.len() < 4 || rho.len() != v.len() {
        return None;
    }
    let ln: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let solve = |p: f64| {
        let x: Vec<f64> = ln.iter().map(|l| (p * l).exp()).collect();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = v.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(v).map(|(a, b)| (a - mx) * (b - my)).sum();
        let a = sxy / sxx;
        let b = my - a * mx;
        let res = (x.iter().zip(v).map(|(xx, y)| (y - a * xx - b).powi(2)).sum::<f64>() / n).sqrt();
        (res, a, b)
    };
    let mut best_p = -1.5;
    let mut best = solve(best_p);
    let mut p = -1.5;
    while p < -1e-3 {
        let cand = solve(p);
        if cand.0 < best.0 {
            best = cand;
            best_p = p;
        }
        p += 1e-3;
    }
    // Golden-section refinement around the best grid value.
    let (mut lo, mut hi) = (best_p - 1e-3, (best_p + 1e-3).min(-1e-6));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if solve(m1).0 < solve(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let p = 0.5 * (lo + hi);
    let (residual, coefficient, offset) = solve(p);
    Some(PowerFit { exponent: p, coefficient, offset, residual })
}

fn barrier_field(which: BarrierKind, s: f64, n: usize, c: BarrierConstants) -> EvaluableField {
    let d_out = |x: &[f64]| (norm(x) - 1.0).max(0.0);
    let d_in = |x: &[f64]| (1.0 - norm(x)).max(0.0);
    match which {
        BarrierKind::Phi1DistOutS => {
            EvaluableField::closure(n, move |x| d_out(x).powf(s), FarField::Growth { c: 1.0, beta: s })
        }
        BarrierKind::Phi2DistInS => EvaluableField::closure(n, move |x| d_in(x).powf(s), unit_support(n)),
        BarrierKind::Phi3DistOut3s2 => EvaluableField::closure(
            n,
            move |x| d_out(x).powf(1.5 * s),
            FarField::Growth { c: 1.0, beta: 1.5 * s },
        ),
        BarrierKind::Phi4DistIn3s2 => EvaluableField::closure(n, move |x| d_in(x).powf(1.5 * s), unit_support(n)),
        BarrierKind::Supersol => {
            let dstar = c.supersol_epsilon(s);
            let g = move |d: f64| d.powf(s) - c.a * d.powf(1.5 * s);
            let top = g(dstar);
            EvaluableField::closure(n, move |x| g(d_out(x).min(dstar)) / top, FarField::Bounded { sup: 1.0 })
        }
        BarrierKind::Subsol => EvaluableField::closure(
            n,
            move |x| {
                let d = d_in(x);
                (d.powf(s) + d.powf(1.5 * s) + c.m * smooth_cutoff(norm(x), c.bump_inner, c.bump_outer))
                    / (2.0 + c.m)
            },
            unit_support(n),
        ),
    }
}

fn unit_support(n: usize) -> FarField {
    FarField::CompactSupport { center: vec![0.0; n], radius: 1.0 }
}

/// Evaluates `Lφ` at `(0, …, 0, 1 ± ρ)` and checks the barrier's inequality.
pub fn barrier_check(spec: &BarrierSpec) -> Result<BarrierReport> {
    let op = &spec.op;
    let s = op.s;
    let n = op.dim();
    let which = spec.which;
    let c = spec.constants;
    if n < 2 {
        return Err(LabError::DomainError("barrier checks need dimension at least 2".into()));
    }
    let epsilon = (which == BarrierKind::Supersol).then(|| c.supersol_epsilon(s));
    let max_rho = match which {
        BarrierKind::Phi1DistOutS | BarrierKind::Phi3DistOut3s2 => 1.0,
        BarrierKind::Supersol => epsilon.unwrap_or(0.0),
        _ => 0.5,
    };
    if spec.rhos.is_empty() {
        return Err(LabError::DomainError("no probe offsets given".into()));
    }
    for &rho in &spec.rhos {
        if !(rho > 0.0 && rho < max_rho) {
            return Err(LabError::DomainError(format!(
                "probe offset {rho} leaves the annulus of width {max_rho} for {which:?}"
            )));
        }
    }
    let field = barrier_field(which, s, n, c);
    let condition = match which {
        BarrierKind::Phi1DistOutS => "Lφ ≥ 0",
        BarrierKind::Phi2DistInS => "Lφ ≤ 0",
        BarrierKind::Phi3DistOut3s2 => "Lφ > 0, Lφ ≈ cρ^(-s/2) - C",
        BarrierKind::Phi4DistIn3s2 => "Lφ ≈ cρ^(-s/2) - C",
        BarrierKind::Supersol => "Lφ ≤ -1",
        BarrierKind::Subsol => "Lφ ≥ c > 0",
    }
    .to_string();
    let mut probes = Vec::with_capacity(spec.rhos.len());
    for &rho in &spec.rhos {
        let mut x = vec![0.0; n];
        x[n - 1] = if which.outside() { 1.0 + rho } else { 1.0 - rho };
        match apply_pointwise(op, &field, &x, &spec.budget) {
            Ok(e) => {
                let (v, err) = (e.value, e.error_bound);
                let sign_ok = match which {
                    BarrierKind::Phi1DistOutS => Some(v + err >= 0.0),
                    BarrierKind::Phi2DistInS => Some(v - err <= 0.0),
                    BarrierKind::Phi3DistOut3s2 => Some(v - err > 0.0),
                    BarrierKind::Phi4DistIn3s2 => None,
                    BarrierKind::Supersol => Some(v - err <= -1.0),
                    BarrierKind::Subsol => Some(v - err > 0.0),
                };
                probes.push(BarrierProbe { rho, x, value: Some(v), error_bound: Some(err), sign_ok });
            }
            Err(LabError::QuadratureBudgetExceeded { .. }) => {
                probes.push(BarrierProbe { rho, x, value: None, error_bound: None, sign_ok: None });
            }
            Err(e) => return Err(e),
        }
    }
    let certified: Vec<&BarrierProbe> = probes.iter().filter(|p| p.value.is_some()).collect();
    let smallest_certified_rho = certified.iter().map(|p| p.rho).fold(None, |m: Option<f64>, r| {
        Some(m.map_or(r, |m| m.min(r)))
    });
    let sign_ok = !certified.is_empty() && certified.iter().all(|p| p.sign_ok.unwrap_or(true));
    let power = matches!(which, BarrierKind::Phi3DistOut3s2 | BarrierKind::Phi4DistIn3s2);
    let (fit, expected_exponent, exponent_ok) = if power {
        let rho: Vec<f64> = certified.iter().map(|p| p.rho).collect();
        let v: Vec<f64> = certified.iter().map(|p| p.value.unwrap()).collect();
        let fit = power_offset_fit(&rho, &v);
        let expected = -0.5 * s;
        let ok = fit.map(|f| (f.exponent - expected).abs() <= BARRIER_EXPONENT_TOL && f.coefficient > 0.0);
        (fit, Some(expected), Some(ok.unwrap_or(false)))
    } else {
        (None, None, None)
    };
    let log_growth_constant = matches!(which, BarrierKind::Phi1DistOutS | BarrierKind::Phi2DistInS).then(|| {
        certified
            .iter()
            .map(|p| p.value.unwrap().abs() / (1.0 + p.rho.ln().abs()))
            .fold(0.0, f64::max)
    });
    let passed = sign_ok && exponent_ok.unwrap_or(true) && certified.len() == probes.len();
    Ok(BarrierReport {
        which,
        s,
        condition,
        probes,
        smallest_certified_rho,
        fit,
        expected_exponent,
        log_growth_constant,
        epsilon,
        sign_ok,
        exponent_ok,
        passed,
    })
}

// --- half-space profile ---------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfspacePoint {
    pub x: Vec<f64>,
    pub residual: Estimate,
    /// `L` at `2x`; homogeneity makes it `2^{-s}` times the value at `x`.
    pub dilated_residual: Estimate,
    /// `c · (one-dimensional operator of t_+^s)` at `t = x_n`.
    pub reduced_residual: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfspaceReport {
    pub s: f64,
    /// `c = ∫ |θ_n|^{2s} dμ`.
    pub reduction_constant: f64,
    pub points: Vec<HalfspacePoint>,
    pub max_residual: f64,
    pub max_error_bound: f64,
}

/// `|L[(x_n)_+^s]|` at the given points, with the one-dimensional reduction.
pub fn halfspace_profile_residual(
    op: &StableOperator,
    points: &[Vec<f64>],
    budget: &QuadratureBudget,
) -> Result<HalfspaceReport> {
    let n = op.dim();
    let s = op.s;
    for p in points {
        if p.len() != n || !(p[n - 1] > 0.0) {
            return Err(LabError::DomainError(format!("probe {p:?} must lie in the open upper half space")));
        }
    }
    let field = EvaluableField::closure(n, move |x| x[n - 1].max(0.0).powf(s), FarField::Growth { c: 1.0, beta: s });
    let line = EvaluableField::closure(1, move |t| t[0].max(0.0).powf(s), FarField::Growth { c: 1.0, beta: s });
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    let reduction_constant = op.symbol(&e_n);
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let residual = apply_pointwise(op, &field, p, budget)?;
        let twice: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let dilated_residual = apply_pointwise(op, &field, &twice, budget)?;
        // The symmetrized measure folds both half-lines into one radial integral.
        let one_d = radial_sd_integral(&line, &[p[n - 1]], &[1.0], s, budget)?;
        let reduced_residual = Estimate {
            value: reduction_constant * one_d.value,
            error_bound: reduction_constant * one_d.error_bound,
            ..one_d
        };
        out.push(HalfspacePoint { x: p.clone(), residual, dilated_residual, reduced_residual });
    }
    let max_residual = out
        .iter()
        .flat_map(|p| [p.residual.value.abs(), p.dilated_residual.value.abs()])
        .fold(0.0, f64::max);
    let max_error_bound = out.iter().map(|p| p.residual.error_bound).fold(0.0, f64::max);
    Ok(HalfspaceReport { s, reduction_constant, points: out, max_residual, max_error_bound })
}

// --- convolution fixed point ----------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointField {
    Constant,
    /// `v(x) = x_1`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub kind: FixedPointField,
    pub s: f64,
    pub half_width: f64,
    pub points: usize,
    /// `max |p(1,·) ∗ v - v|` over nodes with `|x_i| ≤ half_width / 2`.
    pub deviation: f64,
}

/// Deviation of `p(1,·) ∗ v` from `v` on the inner half of the grid.
pub fn convolution_fixed_point_check(
    op: &StableOperator,
    kind: FixedPointField,
    grid: Option<GridSpec>,
) -> Result<FixedPointReport> {
    if kind == FixedPointField::Linear && op.s <= 0.5 {
        return Err(LabError::InvalidOrder(op.s));
    }
    let spec = match grid {
        Some(g) => g,
        None => GridSpec::default_for(op.dim())?,
    };
    let p = heat_kernel(op, 1.0, &spec)?;
    let v: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = match kind {
        FixedPointField::Constant => Arc::new(|_| 1.0),
        FixedPointField::Linear => Arc::new(|x| x[0]),
    };
    let geom = spec.geometry();
    let field = GridFunction::from_fn(geom.clone(), |x| v(x), Extension::Function(v.clone()));
    let conv = heat_convolve(&p, &field)?;
    let inner = 0.5 * spec.half_width;
    let mut deviation: f64 = 0.0;
    for k in 0..geom.len() {
        let x = geom.point(k);
        if x.iter().all(|c| c.abs() <= inner + 1e-12) {
            deviation = deviation.max((conv.values[k] - v(&x)).abs());
        }
    }
    Ok(FixedPointReport { kind, s: op.s, half_width: spec.half_width, points: spec.points, deviation })
}

// --- interior counterexample ----------------------------------------------

/// `u(x) = (x_1)_+^{α-ε} η(x)` with `η` a C² cutoff equal to 1 on
/// `B_{inner}(center)` and 0 outside `B_{outer}(center)`, scaled by `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteriorCounterexample {
    pub s: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub center: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub deltas: Vec<f64>,
    pub amplitude: f64,
}

impl Default for InteriorCounterexample {
    fn default() -> Self {
        Self {
            s: 0.5,
            alpha: 0.5,
            epsilon: 0.05,
            center: vec![0.0, 4.0],
            inner_radius: 1.0,
            outer_radius: 2.0,
            deltas: vec![1e-1, 1e-2, 1e-3],
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorRow {
    pub delta: f64,
    /// `∫ u(δ, t) |t|^{-1-2s} dt`.
    pub d: f64,
    /// `c_s (Lu(δ, 0) - Lu(0, 0))` for the axis-sum operator.
    pub d_from_operator: f64,
    pub operator_error: f64,
    /// `δ^{α-ε} ∫ t^{-1-2s} dt` over the part of the axis where `η = 1` is guaranteed.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorReport {
    pub config: InteriorCounterexample,
    pub rows: Vec<InteriorRow>,
    /// `None` when `D` vanishes identically.
    pub fit: Option<LogFit>,
    pub expected_exponent: f64,
    pub positive: bool,
    pub above_lower_bound: bool,
}

impl InteriorCounterexample {
    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(LabError::InvalidOrder(self.s));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.s) {
            return Err(LabError::ConfigError(format!("α = {} must lie in (0, s]", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.alpha) {
            return Err(LabError::ConfigError(format!("ε = {} must lie in (0, α)", self.epsilon)));
        }
        if self.center.len() != 2 || self.center[0] != 0.0 {
            return Err(LabError::ConfigError("the cutoff center must be (0, p) on the x_2 axis".into()));
        }
        if !(self.inner_radius > 0.0 && self.outer_radius > self.inner_radius) {
            return Err(LabError::ConfigError("cutoff radii must satisfy 0 < inner < outer".into()));
        }
        if self.center[1] - self.outer_radius <= 0.0 {
            return Err(LabError::ConfigError("the cutoff support must stay away from the origin".into()));
        }
        if self.deltas.is_empty() || self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::ConfigError("δ values must be a decreasing sequence".into()));
        }
        if !(self.deltas[self.deltas.len() - 1] > 0.0 && self.deltas[0] <= 0.6 * self.inner_radius) {
            return Err(LabError::ConfigError(format!(
                "δ values must lie in (0, {}]",
                0.6 * self.inner_radius
            )));
        }
        Ok(())
    }
}

/// Tabulates `D(δ)` and fits its exponent in δ.
pub fn counterexample_interior(cfg: &InteriorCounterexample) -> Result<InteriorReport> {
    cfg.validate()?;
    let s = cfg.s;
    let pow = cfg.alpha - cfg.epsilon;
    let (p, ri, ro, amp) = (cfg.center[1], cfg.inner_radius, cfg.outer_radius, cfg.amplitude);
    let u = move |x: &[f64]| {
        let r = (x[0] * x[0] + (x[1] - p) * (x[1] - p)).sqrt();
        amp * x[0].max(0.0).powf(pow) * smooth_cutoff(r, ri, ro)
    };
    let op = canonical(Canonical::AxisSum, 2, s)?;
    let field = EvaluableField::closure(2, u, FarField::CompactSupport { center: cfg.center.clone(), radius: ro });
    let budget = QuadratureBudget { tol: 1e-9, ..Default::default() };
    let at_origin = apply_pointwise(&op, &field, &[0.0, 0.0], &budget)?;
    let (lo, hi) = (p - 0.8 * ri, p + 0.8 * ri);
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for &delta in &cfg.deltas {
        let integral = adaptive(|t| u(&[delta, t]) * t.abs().powf(-1.0 - 2.0 * s), p - ro, p + ro, 1e-13, 50);
        let at_delta = apply_pointwise(&op, &field, &[delta, 0.0], &budget)?;
        rows.push(InteriorRow {
            delta,
            d: integral.value,
            d_from_operator: op.c_s * (at_delta.value - at_origin.value),
            operator_error: op.c_s * (at_delta.error_bound + at_origin.error_bound),
            lower_bound: amp * delta.powf(pow) * power_integral(-1.0 - 2.0 * s, lo, hi),
        });
    }
    let fit = if rows.iter().all(|r| r.d == 0.0) {
        None
    } else {
        let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
        if rows.len() >= 2 {
            Some(log_fit(&cfg.deltas, &d)?)
        } else {
            None
        }
    };
    let positive = rows.iter().all(|r| r.d > 0.0);
    let above_lower_bound = rows.iter().all(|r| r.d >= r.lower_bound);
    Ok(InteriorReport { config: cfg.clone(), rows, fit, expected_exponent: pow, positive, above_lower_bound })
}

// --- boundary counterexample ----------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryCounterexample {
    pub s: f64,
    pub n: usize,
    pub rs: Vec<f64>,
    /// `η = 1` on `B_δ(e_1)` and `η = 0` outside `B_{2δ}(e_1)`.
    pub cutoff_radius: f64,
    /// Truncation radius of the fixed-cutoff control.
    pub control_radius: f64,
}

impl Default for BoundaryCounterexample {
    fn default() -> Self {
        Self { s: 0.5, n: 2, rs: vec![1e-1, 1e-2, 1e-3], cutoff_radius: 0.5, control_radius: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub r: f64,
    /// `L_1 ṽ^{(r)}(0)` with `ṽ^{(r)}(y) = (2 + r + |y|²)^s η(1 + r, √r y)`.
    pub scaled: Estimate,
    /// `L_1 v^{(r)}(0)` evaluated on the unscaled restriction of `u` to `x_1 = 1 + r`.
    pub unscaled: Estimate,
    /// `L_1` of `(2 + r + |y|²)^s 1_{|y| ≤ control_radius}` at 0.
    pub control: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub config: BoundaryCounterexample,
    pub rows: Vec<BoundaryRow>,
    pub strictly_increasing: bool,
    /// Least-squares slope of the scaled values against `log(1/r)`.
    pub growth_slope: f64,
    /// Slopes between consecutive r values.
    pub decade_slopes: Vec<f64>,
    /// Total mass of the (n-1)-dimensional measure, the slope of the log-divergence.
    pub predicted_slope: f64,
    pub slopes_stable: bool,
    /// Successive control differences shrink.
    pub control_converges: bool,
}

/// Tolerance on consecutive growth slopes.
pub const SLOPE_STABILITY: f64 = 0.2;

/// `L_1 ṽ^{(r)}(0)` over r, with the fixed-cutoff control.
pub fn counterexample_boundary(cfg: &BoundaryCounterexample) -> Result<BoundaryReport> {
    let s = cfg.s;
    if !(s > 0.0 && s < 1.0) {
        return Err(LabError::InvalidOrder(s));
    }
    if !(2..=4).contains(&cfg.n) {
        return Err(LabError::ConfigError(format!("dimension {} is not supported (2 to 4)", cfg.n)));
    }
    let dc = cfg.cutoff_radius;
    if !(dc > 0.0 && cfg.control_radius > 0.0) {
        return Err(LabError::ConfigError("cutoff radii must be positive".into()));
    }
    if cfg.rs.len() < 2 || cfg.rs.windows(2).any(|w| w[1] >= w[0]) || !(cfg.rs[0] < dc) || !(cfg.rs[cfg.rs.len() - 1] > 0.0) {
        return Err(LabError::ConfigError(format!("r values must decrease within (0, {dc})")));
    }
    let m = cfg.n - 1;
    let op = canonical(Canonical::FractionalLaplacian, m, s)?;
    let budget = QuadratureBudget { tol: 1e-7, ..Default::default() };
    let origin = vec![0.0; m];
    let mut rows = Vec::with_capacity(cfg.rs.len());
    for &r in &cfg.rs {
        let support = ((4.0 * dc * dc - r * r) / r).sqrt();
        let scaled_field = EvaluableField::closure(
            m,
            move |y| {
                let y2: f64 = y.iter().map(|v| v * v).sum();
                (2.0 + r + y2).powf(s) * smooth_cutoff((r * r + r * y2).sqrt(), dc, 2.0 * dc)
            },
            FarField::CompactSupport { center: vec![0.0; m], radius: support },
        );
        let unscaled_field = EvaluableField::closure(
            m,
            move |x| {
                let x2: f64 = x.iter().map(|v| v * v).sum();
                r.powf(s) * (2.0 + r + x2 / r).powf(s) * smooth_cutoff((r * r + x2).sqrt(), dc, 2.0 * dc)
            },
            FarField::CompactSupport { center: vec![0.0; m], radius: (4.0 * dc * dc - r * r).sqrt() },
        );
        let rc = cfg.control_radius;
        let control_field = EvaluableField::closure(
            m,
            move |y| {
                let y2: f64 = y.iter().map(|v| v * v).sum();
                if y2.sqrt() <= rc {
                    (2.0 + r + y2).powf(s)
                } else {
                    0.0
                }
            },
            FarField::CompactSupport { center: vec![0.0; m], radius: rc },
        );
        rows.push(BoundaryRow {
            r,
            scaled: apply_pointwise(&op, &scaled_field, &origin, &budget)?,
            unscaled: apply_pointwise(&op, &unscaled_field, &origin, &budget)?,
            control: apply_pointwise(&op, &control_field, &origin, &budget)?,
        });
    }
    let v: Vec<f64> = rows.iter().map(|r| r.scaled.value).collect();
    let logs: Vec<f64> = cfg.rs.iter().map(|r| -r.ln()).collect();
    let strictly_increasing = v.windows(2).all(|w| w[1] > w[0]);
    let k = logs.len() as f64;
    let ml = logs.iter().sum::<f64>() / k;
    let mv = v.iter().sum::<f64>() / k;
    let growth_slope = logs.iter().zip(&v).map(|(l, x)| (l - ml) * (x - mv)).sum::<f64>()
        / logs.iter().map(|l| (l - ml).powi(2)).sum::<f64>();
    let decade_slopes: Vec<f64> = (1..v.len()).map(|i| (v[i] - v[i - 1]) / (logs[i] - logs[i - 1])).collect();
    let slopes_stable = decade_slopes.iter().all(|&d| d > 0.0)
        && decade_slopes.windows(2).all(|w| (w[1] / w[0] - 1.0).abs() <= SLOPE_STABILITY);
    let c: Vec<f64> = rows.iter().map(|r| r.control.value).collect();
    let diffs: Vec<f64> = c.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let control_converges = diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(BoundaryReport {
        config: cfg.clone(),
        rows,
        strictly_increasing,
        growth_slope,
        decade_slopes,
        predicted_slope: crate::spectral_measure::total_mass(&op.measure),
        slopes_stable,
        control_converges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_measure::SpectralMeasure;

    #[test]
    fn phi3_slope_for_the_fractional_laplacian() {
        let op = canonical(Canonical::FractionalLaplacian, 2, 0.5).unwrap();
        let spec = BarrierSpec::new(BarrierKind::Phi3DistOut3s2, op, vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3]);
        let r = barrier_check(&spec).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!((r.fit.unwrap().exponent + 0.25).abs() < 0.05, "{:?}", r.fit);
    }

    #[test]
    fn log_barrier_signs() {
        let op = canonical(Canonical::FractionalLaplacian, 2, 0.5).unwrap();
        let r = barrier_check(&BarrierSpec::new(BarrierKind::Phi1DistOutS, op.clone(), vec![0.5])).unwrap();
        assert!(r.probes[0].value.unwrap() >= 0.0 && r.passed);
        let r = barrier_check(&BarrierSpec::new(BarrierKind::Phi2DistInS, op.clone(), vec![0.3, 0.01])).unwrap();
        assert!(r.passed && r.probes.iter().all(|p| p.value.unwrap() < 0.0));
        let bad = barrier_check(&BarrierSpec::new(BarrierKind::Phi2DistInS, op, vec![0.7]));
        assert!(matches!(bad, Err(LabError::DomainError(_))));
    }

    #[test]
    fn composite_barriers_for_the_axis_sum() {
        let op = canonical(Canonical::AxisSum, 2, 0.75).unwrap();
        let rhos = vec![1e-1, 3e-2, 1e-2, 3e-3];
        for which in [BarrierKind::Supersol, BarrierKind::Subsol] {
            let r = barrier_check(&BarrierSpec::new(which, op.clone(), rhos.clone())).unwrap();
            assert!(r.passed, "{r:#?}");
        }
    }

    #[test]
    fn power_offset_fit_recovers_exponent() {
        let rho = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
        let v: Vec<f64> = rho.iter().map(|r: &f64| 0.7 * r.powf(-0.3) - 2.0).collect();
        let f = power_offset_fit(&rho, &v).unwrap();
        assert!((f.exponent + 0.3).abs() < 1e-6 && (f.offset + 2.0).abs() < 1e-5, "{f:?}");
        assert!(power_offset_fit(&rho[..3], &v[..3]).is_none());
    }

    #[test]
    fn halfspace_profile_is_annihilated() {
        let pts: Vec<Vec<f64>> = [0.25, 0.5, 1.0].iter().map(|&t| vec![0.1, t]).collect();
        let budget = QuadratureBudget::with_tol(1e-4);
        let op = canonical(Canonical::AxisSum, 2, 0.75).unwrap();
        let r = halfspace_profile_residual(&op, &pts, &budget).unwrap();
        assert!(r.max_residual <= 1e-3, "{r:?}");
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let m = SpectralMeasure::atomic(2, vec![(vec![c, c], 0.3), (vec![-c, c], 0.2)]).unwrap();
        let op = StableOperator::new(0.5, m).unwrap();
        let r = halfspace_profile_residual(&op, &pts, &budget).unwrap();
        assert!(r.max_residual <= 1e-3, "{r:?}");
        for p in &r.points {
            assert!((p.residual.value - p.reduced_residual.value).abs() <= 1e-3);
        }
        let near = halfspace_profile_residual(&op, &[vec![0.0, 0.01]], &budget).unwrap();
        assert!(near.max_error_bound > 0.0 && near.max_error_bound <= budget.tol);
        assert!(halfspace_profile_residual(&op, &[vec![0.0, -0.1]], &budget).is_err());
    }

    #[test]
    fn fixed_point_of_the_heat_kernel() {
        let op = canonical(Canonical::AxisSum, 2, 0.75).unwrap();
        let c = convolution_fixed_point_check(&op, FixedPointField::Constant, None).unwrap();
        assert!(c.deviation <= 1e-6);
        let l = convolution_fixed_point_check(&op, FixedPointField::Linear, None).unwrap();
        assert!(l.deviation <= 1e-4, "{l:?}");
        let half = canonical(Canonical::AxisSum, 2, 0.5).unwrap();
        assert!(matches!(
            convolution_fixed_point_check(&half, FixedPointField::Linear, None),
            Err(LabError::InvalidOrder(_))
        ));
    }

    #[test]
    fn interior_counterexample_exponent() {
        let r = counterexample_interior(&InteriorCounterexample::default()).unwrap();
        let fit = r.fit.unwrap();
        assert!((fit.slope - 0.45).abs() < 0.03, "{fit:?}");
        assert!(r.positive && r.above_lower_bound);
        for row in &r.rows {
            assert!((row.d - row.d_from_operator).abs() < 1e-8, "{row:?}");
        }
        let zero = counterexample_interior(&InteriorCounterexample { amplitude: 0.0, ..Default::default() }).unwrap();
        assert!(zero.rows.iter().all(|row| row.d == 0.0) && zero.fit.is_none());
        let bad = InteriorCounterexample { alpha: 0.6, ..Default::default() };
        assert!(counterexample_interior(&bad).is_err());
    }

    #[test]
    fn boundary_counterexample_diverges_while_control_converges() {
        for n in [2, 3] {
            let r = counterexample_boundary(&BoundaryCounterexample { n, ..Default::default() }).unwrap();
            assert!(r.strictly_increasing && r.growth_slope > 0.0, "{r:#?}");
            assert!(r.slopes_stable && r.control_converges, "{r:#?}");
            for row in &r.rows {
                assert!((row.scaled.value - row.unscaled.value).abs() < 1e-5, "{row:?}");
            }
        }
    }
}
