//! Fourier symbol, heat kernels by inverse FFT and the diagnostics built on them.
//!
//! Fourier convention: `û(ξ) = ∫ u(x) e^{-ix·ξ} dx`, inverse with `(2π)^{-n}`.
//! The heat kernel is `p(t,·) = F^{-1}[exp(-c_s A(ξ) t)]`, so `∂_t p = L p`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{Extension, GridFunction, GridGeometry};
use crate::spectral_measure::{MeasureKind, StableOperator};

/// A(ξ) = ∫ |ξ·θ|^{2s} dμ(θ), without the normalization constant.
pub fn symbol_eval(op: &StableOperator, xi: &[f64]) -> f64 {
    op.symbol(xi)
}

/// c_s A(ξ); the Fourier multiplier of `L` is its negative.
pub fn multiplier_eval(op: &StableOperator, xi: &[f64]) -> f64 {
    op.multiplier(xi)
}

/// Periodic cube grid `[-L, L)^n` with `points` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    /// Largest admissible value of `exp(-c_s A t)` on the Nyquist faces.
    pub nyquist_tol: f64,
    /// Set by [`GridSpec::default_for`]; such grids refuse orders below 1/4.
    pub is_default: bool,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(LabError::ResolutionError(format!("heat grids support 1 to 3 dimensions, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(LabError::ResolutionError(format!("half width must be positive, got {half_width}")));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(LabError::ResolutionError(format!("points per axis must be even and >= 4, got {points}")));
        }
        Ok(Self { dim, half_width, points, nyquist_tol: 1e-12, is_default: false })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        let (l, n) = match dim {
            1 => (200.0, 1 << 16),
            2 => (50.0, 1 << 10),
            3 => (20.0, 1 << 7),
            _ => return Err(LabError::ResolutionError(format!("no default heat grid in dimension {dim}"))),
        };
        let mut g = Self::new(dim, l, n)?;
        g.is_default = true;
        Ok(g)
    }

    pub fn with_nyquist_tol(mut self, tol: f64) -> Self {
        self.nyquist_tol = tol;
        self
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            origin: vec![-self.half_width; self.dim],
            h: self.h(),
            shape: vec![self.points; self.dim],
        }
    }

    /// Same node count, every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { half_width: self.half_width * factor, ..self.clone() }
    }

    fn frequency(&self, k: usize) -> f64 {
        let n = self.points as i64;
        let kk = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        2.0 * PI * kk as f64 / (n as f64 * self.h())
    }
}

/// Heat kernel samples on a [`GridSpec`] grid.
#[derive(Debug, Clone)]
pub struct HeatKernelGrid {
    pub t: f64,
    pub s: f64,
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Largest multiplier value on the Nyquist faces.
    pub nyquist_damping: f64,
    /// Estimated probability mass outside the grid cube.
    pub tail_bound: f64,
    mass_of_measure: f64,
    /// `c` in a jump density `c |y|^{-n-2s}`, when the Lévy measure has one
    /// that is radial (n = 1, or a uniform spectral measure).
    jump_coeff: Option<f64>,
}

impl HeatKernelGrid {
    pub fn geometry(&self) -> GridGeometry {
        self.spec.geometry()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.h().powi(self.dim() as i32)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::MAX, f64::min)
    }

    /// Value at the node nearest to `x` (exact when `x` is a node).
    pub fn at(&self, x: &[f64]) -> Option<f64> {
        self.geometry().node_at(x).map(|k| self.values[k])
    }

    pub fn to_grid_function(&self) -> GridFunction {
        GridFunction {
            geom: self.geometry(),
            values: self.values.clone(),
            extension: Extension::Zero,
        }
    }

    /// max |p(x) - p(-x)| over nodes whose reflection is a node.
    pub fn symmetry_defect(&self) -> f64 {
        let g = self.geometry();
        let n = self.spec.points;
        let mut worst: f64 = 0.0;
        for k in 0..g.len() {
            let m = g.multi(k);
            if m.contains(&0) {
                continue;
            }
            let r: Vec<usize> = m.iter().map(|&i| n - i).collect();
            worst = worst.max((self.values[k] - self.values[g.flat(&r)]).abs());
        }
        worst
    }

    /// Rough probability that the process leaves the cube by time t:
    /// the jump rate above radius R is `mass R^{-2s} / s`.
    fn tail_probability(&self, radius: f64) -> f64 {
        self.t * self.mass_of_measure * radius.powf(-2.0 * self.s) / self.s
    }
}

/// In-place n-dimensional FFT of a row-major array (last axis fastest).
pub(crate) fn fftn(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, data.len());
    for ax in 0..shape.len() {
        let n = shape[ax];
        if n == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = shape[ax + 1..].iter().product();
        let outer = total / (n * stride);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (j, c) in line.iter_mut().enumerate() {
                    *c = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, c) in line.iter().enumerate() {
                    data[base + j * stride] = *c;
                }
            }
        }
    }
}

fn nyquist_damping(op: &StableOperator, t: f64, spec: &GridSpec) -> f64 {
    let n = spec.points;
    let dim = spec.dim;
    let nyq = PI / spec.h();
    let mut worst: f64 = 0.0;
    let face_nodes = n.pow(dim as u32 - 1);
    let mut xi = vec![0.0; dim];
    for face in 0..dim {
        for k in 0..face_nodes {
            let mut rest = k;
            for ax in 0..dim {
                if ax == face {
                    xi[ax] = nyq;
                } else {
                    xi[ax] = spec.frequency(rest % n);
                    rest /= n;
                }
            }
            worst = worst.max((-op.multiplier(&xi) * t).exp());
        }
    }
    worst
}

fn radial_jump_coeff(op: &StableOperator) -> Option<f64> {
    if op.dim() == 1 {
        return Some(op.big_lambda);
    }
    match op.measure.kind() {
        MeasureKind::Uniform { level } => Some(2.0 * level),
        _ => None,
    }
}

/// `p(t,·)` on the periodic grid. Fails when the multiplier is not damped
/// below `grid.nyquist_tol` at the Nyquist faces.
pub fn heat_kernel(op: &StableOperator, t: f64, grid: &GridSpec) -> Result<HeatKernelGrid> {
    if !(t.is_finite() && t > 0.0) {
        return Err(LabError::DomainError(format!("heat kernel time must be positive, got {t}")));
    }
    if grid.dim != op.dim() {
        return Err(LabError::ResolutionError(format!(
            "grid dimension {} does not match operator dimension {}",
            grid.dim,
            op.dim()
        )));
    }
    if grid.is_default && op.s < 0.25 {
        return Err(LabError::ResolutionError(format!(
            "order s = {} < 1/4 needs an explicit grid extent",
            op.s
        )));
    }
    let damping = nyquist_damping(op, t, grid);
    if damping > grid.nyquist_tol {
        return Err(LabError::ResolutionError(format!(
            "multiplier at the Nyquist frequency is {damping:e} > {:e}; refine the grid",
            grid.nyquist_tol
        )));
    }
    let geom = grid.geometry();
    let n = grid.points;
    let dim = grid.dim;
    let mut data = vec![Complex64::new(0.0, 0.0); geom.len()];
    let mut xi = vec![0.0; dim];
    for (k, c) in data.iter_mut().enumerate() {
        let m = geom.multi(k);
        let mut parity = 0usize;
        for ax in 0..dim {
            xi[ax] = grid.frequency(m[ax]);
            // exp(-iξ·origin) with origin = -L on each axis is (-1)^k.
            parity += m[ax];
        }
        let sign = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
        *c = Complex64::new(sign * (-op.multiplier(&xi) * t).exp(), 0.0);
    }
    fftn(&mut data, &geom.shape, true);
    let scale = (n as f64 * grid.h()).powi(dim as i32).recip();
    let values = data.iter().map(|c| c.re * scale).collect();
    let mut out = HeatKernelGrid {
        t,
        s: op.s,
        spec: grid.clone(),
        values,
        nyquist_damping: damping,
        tail_bound: 0.0,
        mass_of_measure: op.big_lambda,
        jump_coeff: radial_jump_coeff(op),
    };
    out.tail_bound = out.tail_probability(grid.half_width);
    Ok(out)
}

/// Max over nodes of `|p(t2,x) - τ^{-n/2s} p(t1, x τ^{-1/2s})| / max p(t2)`
/// with `τ = t2/t1`. The second kernel is computed on the grid scaled by
/// `τ^{-1/2s}`, so every node of one grid maps to a node of the other.
pub fn heat_selfsimilarity_check(op: &StableOperator, t1: f64, t2: f64, grid: &GridSpec) -> Result<f64> {
    let tau = t2 / t1;
    let p2 = heat_kernel(op, t2, grid)?;
    if tau == 1.0 {
        return Ok(0.0);
    }
    let factor = tau.powf(-0.5 / op.s);
    let p1 = heat_kernel(op, t1, &grid.scaled(factor))?;
    let amp = tau.powf(-(grid.dim as f64) / (2.0 * op.s));
    let peak = p2.max();
    let worst = p2
        .values
        .iter()
        .zip(&p1.values)
        .map(|(a, b)| (a - amp * b).abs())
        .fold(0.0, f64::max);
    Ok(worst / peak)
}

/// Moment `∫(1 + |x|^{2s-δ}) p(t,x) dx`.
///
/// `raw` is the trapezoid sum over the periodic grid. In one dimension the
/// far field is known (`p(t,x) ≈ t c |x|^{-1-2s}`), so `value` removes the
/// periodic images from the grid sum and adds the analytic tail outside the
/// box; elsewhere `value == raw`. `tail_bound` estimates what lies outside
/// the box and is infinite when the weight is not integrable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub value: f64,
    pub raw: f64,
    pub tail_bound: f64,
    pub corrected: bool,
}

/// `delta` may be negative for heavy-tail controls.
pub fn moment_integral(p: &HeatKernelGrid, delta: f64) -> MomentReport {
    let gamma = 2.0 * p.s - delta;
    let g = p.geometry();
    let cell = g.h.powi(g.dim() as i32);
    let weight = |r: f64| 1.0 + r.powf(gamma);
    let mut raw = 0.0;
    for (k, &v) in p.values.iter().enumerate() {
        let r = g.point(k).iter().map(|c| c * c).sum::<f64>().sqrt();
        raw += weight(r) * v;
    }
    raw *= cell;
    let l = p.spec.half_width;
    let two_s = 2.0 * p.s;
    let tail_bound = if delta > 0.0 {
        // ∫_{|x|>L} (1+|x|^γ) dP ≤ P(>L) + L^γ P(>L) 2s/(2s-γ) by parts.
        let pl = p.tail_probability(l);
        pl + pl * l.powf(gamma) * two_s / delta
    } else {
        f64::INFINITY
    };
    let mut out = MomentReport { value: raw, raw, tail_bound, corrected: false };
    if let (1, Some(c), true) = (g.dim(), p.jump_coeff, delta > 0.0) {
        let q = 1.0 + two_s;
        let period = 2.0 * l;
        let far = 64;
        let mut images = 0.0;
        for k in 0..g.len() {
            let x = g.coord(0, k);
            let mut sum = 0.0;
            for m in 1..=far {
                let mf = m as f64 * period;
                sum += (mf + x).powf(-q) + (mf - x).powf(-q);
            }
            let edge = (far as f64 + 0.5) * period;
            sum += ((edge + x).powf(1.0 - q) + (edge - x).powf(1.0 - q)) / (period * (q - 1.0));
            images += weight(x.abs()) * sum;
        }
        images *= cell * p.t * c;
        let tail = 2.0 * p.t * c * (l.powf(-two_s) / two_s + l.powf(gamma - two_s) / delta);
        out.value = raw - images + tail;
        out.corrected = true;
    }
    out
}

/// Max over adjacent node pairs of |Δp| / h.
pub fn lipschitz_seminorm(p: &HeatKernelGrid) -> f64 {
    let g = p.geometry();
    let h = g.h;
    let mut worst: f64 = 0.0;
    for k in 0..g.len() {
        let m = g.multi(k);
        for ax in 0..g.dim() {
            if m[ax] + 1 < g.shape[ax] {
                let mut up = m.clone();
                up[ax] += 1;
                worst = worst.max((p.values[g.flat(&up)] - p.values[k]).abs() / h);
            }
        }
    }
    worst
}

/// Discrete linear convolution `(p ∗ f)(x_i) = h^n Σ_k p(y_k) f(x_i - y_k)`
/// on the grid of `f`. Samples of `f` outside its box come from its
/// extension rule, so no periodic wrap-around occurs.
pub fn heat_convolve(p: &HeatKernelGrid, f: &GridFunction) -> Result<GridFunction> {
    let pg = p.geometry();
    let fg = &f.geom;
    if fg.dim() != pg.dim() || (fg.h - pg.h).abs() > 1e-12 * pg.h {
        return Err(LabError::ResolutionError(format!(
            "convolution needs equal spacing and dimension: kernel h = {}, field h = {}",
            pg.h, fg.h
        )));
    }
    let dim = pg.dim();
    // The periodic kernel box [-L, L) has no node at +L. Splitting each
    // value on a -L face evenly with its periodic copy at +L keeps the
    // discrete kernel exactly symmetric, so odd moments vanish.
    let nk = p.spec.points + 1;
    // Extended samples z_m = origin_f + L - (nk-1)h + m h, m < nf + nk - 1.
    let ext_shape: Vec<usize> = fg.shape.iter().map(|&nf| nf + nk - 1).collect();
    let ext_origin: Vec<f64> = fg
        .origin
        .iter()
        .map(|&o| o + p.spec.half_width - (nk - 1) as f64 * pg.h)
        .collect();
    let ext = GridGeometry { origin: ext_origin, h: pg.h, shape: ext_shape.clone() };
    let fft_shape: Vec<usize> = ext_shape.iter().map(|&m| m.next_power_of_two()).collect();
    let fft_geom = GridGeometry { origin: vec![0.0; dim], h: 1.0, shape: fft_shape.clone() };
    let total = fft_geom.len();

    let mut a = vec![Complex64::new(0.0, 0.0); total];
    for k in 0..ext.len() {
        let m = ext.multi(k);
        a[fft_geom.flat(&m)] = Complex64::new(f.eval(&ext.point(k)), 0.0);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); total];
    for k in 0..pg.len() {
        let m = pg.multi(k);
        let faces: Vec<usize> = (0..dim).filter(|&ax| m[ax] == 0).collect();
        let copies = 1usize << faces.len();
        let share = p.values[k] / copies as f64;
        for mask in 0..copies {
            let mut mm = m.clone();
            for (bit, &ax) in faces.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    mm[ax] = nk - 1;
                }
            }
            b[fft_geom.flat(&mm)] += Complex64::new(share, 0.0);
        }
    }
    fftn(&mut a, &fft_shape, false);
    fftn(&mut b, &fft_shape, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    fftn(&mut a, &fft_shape, true);
    let scale = pg.h.powi(dim as i32) / total as f64;
    let mut values = Vec::with_capacity(fg.len());
    for k in 0..fg.len() {
        let m: Vec<usize> = fg.multi(k).iter().map(|&i| i + nk - 1).collect();
        values.push(a[fft_geom.flat(&m)].re * scale);
    }
    Ok(GridFunction { geom: fg.clone(), values, extension: f.extension.clone() })
}

/// Applies the multiplier `-c_s A(ξ)` to `u` by periodic FFT on its own box.
/// Accurate for smooth fields that vanish well inside the box.
pub fn multiplier_apply(op: &StableOperator, u: &GridFunction) -> Result<GridFunction> {
    let g = &u.geom;
    if g.dim() != op.dim() {
        return Err(LabError::ResolutionError("field and operator dimensions differ".into()));
    }
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fftn(&mut data, &g.shape, false);
    let mut xi = vec![0.0; g.dim()];
    for (k, c) in data.iter_mut().enumerate() {
        let m = g.multi(k);
        for ax in 0..g.dim() {
            let n = g.shape[ax] as i64;
            let i = m[ax] as i64;
            let kk = if i < n / 2 { i } else { i - n };
            xi[ax] = 2.0 * PI * kk as f64 / (n as f64 * g.h);
        }
        *c *= -op.multiplier(&xi);
    }
    fftn(&mut data, &g.shape, true);
    let scale = 1.0 / g.len() as f64;
    Ok(GridFunction {
        geom: g.clone(),
        values: data.iter().map(|c| c.re * scale).collect(),
        extension: Extension::Zero,
    })
}
