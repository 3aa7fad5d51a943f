//! Hölder seminorms, dyadic exponent fits and boundary quantities from grid data.

use serde::Serialize;

use crate::dirichlet::DomainSpec;
use crate::error::{LabError, Result};
use crate::grid::{Extension, GridFunction, GridGeometry};

/// Residual above which a log-log fit is flagged as unreliable.
pub const FIT_RESIDUAL_FLAG: f64 = 0.15;

/// First differences `u(x+y) - u(x)` or second differences `δ²u(x; y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceOrder {
    First,
    Second,
}

impl DifferenceOrder {
    pub fn for_beta(beta: f64) -> Self {
        if beta < 1.0 {
            DifferenceOrder::First
        } else {
            DifferenceOrder::Second
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub flagged: bool,
}

pub fn log_fit(x: &[f64], y: &[f64]) -> Result<LogFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(LabError::ResolutionError(format!(
            "log fit needs two positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LogFit { slope, intercept, residual, flagged: residual > FIT_RESIDUAL_FLAG })
}

/// Dyadic-scale difference profile of a field over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub beta: f64,
    pub order: DifferenceOrder,
    pub scales: Vec<f64>,
    /// Sup of the difference over increments at each scale.
    pub profile: Vec<f64>,
    /// `None` when the profile vanishes identically.
    pub fitted_exponent: Option<f64>,
    pub residual: Option<f64>,
    pub flagged: bool,
    /// Sup over all increments of |difference| / |y|^β.
    pub seminorm_estimate: f64,
    /// Number of window nodes.
    pub window: usize,
}

/// Axis-aligned and diagonal lattice steps of unit size.
fn lattice_steps(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut e = vec![0; dim];
        e[i] = 1;
        out.push(e);
        for j in i + 1..dim {
            for sj in [1, -1] {
                let mut d = vec![0; dim];
                d[i] = 1;
                d[j] = sj;
                out.push(d);
            }
        }
    }
    out
}

fn shifted(g: &GridGeometry, k: usize, step: &[i64], mult: i64) -> Option<usize> {
    let m = g.multi(k);
    let mut out = Vec::with_capacity(m.len());
    for (ax, (&i, &d)) in m.iter().zip(step).enumerate() {
        let j = i as i64 + mult * d;
        if j < 0 || j as usize >= g.shape[ax] {
            return None;
        }
        out.push(j as usize);
    }
    Some(g.flat(&out))
}

/// Hölder profile of `u` over the nodes where `window` is true. Increments
/// are lattice axis and diagonal steps of dyadic multiples of h; every
/// point used must lie in the window.
pub fn holder_seminorm(u: &GridFunction, window: &[bool], beta: f64) -> Result<HolderReport> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(LabError::DomainError(format!("β must lie in (0, 2), got {beta}")));
    }
    let g = &u.geom;
    if window.len() != g.len() {
        return Err(LabError::ResolutionError("window mask does not match the grid".into()));
    }
    let order = DifferenceOrder::for_beta(beta);
    let steps = lattice_steps(g.dim());
    let max_extent = *g.shape.iter().max().unwrap() as i64;
    let mut scales = Vec::new();
    let mut profile = Vec::new();
    let mut seminorm: f64 = 0.0;
    let nodes: Vec<usize> = (0..g.len()).filter(|&k| window[k]).collect();
    let mut mult = 1i64;
    while mult < max_extent {
        let mut sup: f64 = 0.0;
        let mut used = false;
        for &k in &nodes {
            for st in &steps {
                let len = g.h * mult as f64 * (st.iter().map(|d| (d * d) as f64).sum::<f64>()).sqrt();
                let diff = match order {
                    DifferenceOrder::First => match shifted(g, k, st, mult) {
                        Some(j) if window[j] => (u.values[j] - u.values[k]).abs(),
                        _ => continue,
                    },
                    DifferenceOrder::Second => match (shifted(g, k, st, mult), shifted(g, k, st, -mult)) {
                        (Some(a), Some(b)) if window[a] && window[b] => {
                            (u.values[a] + u.values[b] - 2.0 * u.values[k]).abs()
                        }
                        _ => continue,
                    },
                };
                used = true;
                sup = sup.max(diff);
                seminorm = seminorm.max(diff / len.powf(beta));
            }
        }
        if !used {
            break;
        }
        scales.push(g.h * mult as f64);
        profile.push(sup);
        mult *= 2;
    }
    if scales.len() < 4 {
        return Err(LabError::ResolutionError(format!(
            "only {} dyadic scales fit in the window; at least 4 are needed",
            scales.len()
        )));
    }
    let (fitted_exponent, residual, flagged) = if profile.iter().all(|&p| p == 0.0) {
        (None, None, false)
    } else {
        let fit = log_fit(&scales, &profile)?;
        (Some(fit.slope), Some(fit.residual), fit.flagged)
    };
    Ok(HolderReport {
        beta,
        order,
        scales,
        profile,
        fitted_exponent,
        residual,
        flagged,
        seminorm_estimate: seminorm,
        window: nodes.len(),
    })
}

/// Mask of nodes within the ball `B_radius(center)`.
pub fn ball_window(g: &GridGeometry, center: &[f64], radius: f64) -> Vec<bool> {
    (0..g.len())
        .map(|k| {
            let p = g.point(k);
            p.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= radius + 1e-12
        })
        .collect()
}

/// Exponent fit at a single point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub center: Vec<f64>,
    pub order: DifferenceOrder,
    pub scales: Vec<f64>,
    pub profile: Vec<f64>,
    pub exponent: f64,
    pub residual: f64,
    pub flagged: bool,
}

/// Slope of `log sup_y |Δ_y u(center)|` against `log ρ`, the sup taken over
/// axis and diagonal increments `y` of length ρ (both signs for first
/// differences). Values off the grid come from interpolation.
pub fn exponent_fit(u: &GridFunction, center: &[f64], scales: &[f64], order: DifferenceOrder) -> Result<ExponentFit> {
    if scales.len() < 4 {
        return Err(LabError::ResolutionError(format!(
            "exponent fit needs at least 4 scales, got {}",
            scales.len()
        )));
    }
    let dim = u.dim();
    let dirs: Vec<Vec<f64>> = lattice_steps(dim)
        .iter()
        .map(|st| {
            let n = (st.iter().map(|d| (d * d) as f64).sum::<f64>()).sqrt();
            st.iter().map(|&d| d as f64 / n).collect()
        })
        .collect();
    let uc = u.eval(center);
    let mut profile = Vec::with_capacity(scales.len());
    for &rho in scales {
        let mut sup: f64 = 0.0;
        for d in &dirs {
            let plus: Vec<f64> = center.iter().zip(d).map(|(c, e)| c + rho * e).collect();
            let minus: Vec<f64> = center.iter().zip(d).map(|(c, e)| c - rho * e).collect();
            let (up, um) = (u.eval(&plus), u.eval(&minus));
            let v = match order {
                DifferenceOrder::First => (up - uc).abs().max((um - uc).abs()),
                DifferenceOrder::Second => (up + um - 2.0 * uc).abs(),
            };
            sup = sup.max(v);
        }
        profile.push(sup);
    }
    let fit = log_fit(scales, &profile)?;
    Ok(ExponentFit {
        center: center.to_vec(),
        order,
        scales: scales.to_vec(),
        profile,
        exponent: fit.slope,
        residual: fit.residual,
        flagged: fit.flagged,
    })
}

/// `u / d^s` on the nodes with `d_min ≤ d ≤ d_max`, and the band mask.
pub fn boundary_ratio(
    u: &GridFunction,
    domain: &DomainSpec,
    band: (f64, f64),
    s: f64,
) -> Result<(GridFunction, Vec<bool>)> {
    let (d_min, d_max) = band;
    let h = u.geom.h;
    if !(d_min > 0.1 * h) || !(d_max > d_min) {
        return Err(LabError::DomainError(format!(
            "band [{d_min}, {d_max}] must satisfy h/10 < d_min < d_max (h = {h})"
        )));
    }
    let g = &u.geom;
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    for k in 0..g.len() {
        let d = domain.signed_distance(&g.point(k));
        if d >= d_min && d <= d_max {
            values[k] = u.values[k] / d.powf(s);
            mask[k] = true;
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(LabError::DomainError(format!("no nodes in the band [{d_min}, {d_max}]")));
    }
    Ok((GridFunction { geom: g.clone(), values, extension: Extension::Zero }, mask))
}

/// Boundary expansion `u ≈ Q ((x - z)·ν)_+^s` near a boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryExpansion {
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
    pub radii: Vec<f64>,
    /// Discrete least-squares coefficient on each ball `B_r(z)`.
    pub q_star: Vec<f64>,
    /// Mean of `Q_*` over the two smallest radii.
    pub q: f64,
    /// `|Q_*(2r_min) - Q_*(r_min)| / (1 - 2^{-(β-s)})`.
    pub q_error: f64,
    /// `sup_{B_r(z)} |u - Q ((x-z)·ν)_+^s|` per radius.
    pub remainder: Vec<f64>,
    pub remainder_fit: Option<LogFit>,
}

/// Least-squares coefficients `Q_*(r)` on grid nodes of `B_r(z)`.
/// `radii` must be increasing and dyadic; `beta` sets the error bar.
pub fn boundary_coefficient(
    u: &GridFunction,
    z: &[f64],
    nu: &[f64],
    s: f64,
    radii: &[f64],
    beta: f64,
) -> Result<BoundaryExpansion> {
    if radii.len() < 4 {
        return Err(LabError::ResolutionError(format!("need at least 4 radii, got {}", radii.len())));
    }
    if radii.windows(2).any(|w| ((w[1] / w[0]) - 2.0).abs() > 1e-9) {
        return Err(LabError::ResolutionError("radii must be increasing dyadic".into()));
    }
    let g = &u.geom;
    let lin = |p: &[f64]| p.iter().zip(z).zip(nu).map(|((a, b), n)| (a - b) * n).sum::<f64>().max(0.0);
    let mut q_star = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut count = 0;
        for k in 0..g.len() {
            let p = g.point(k);
            if p.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= r {
                let l = lin(&p).powf(s);
                num += u.values[k] * l;
                den += l * l;
                count += 1;
            }
        }
        if count < 2 || den == 0.0 {
            return Err(LabError::ResolutionError(format!("ball of radius {r} holds too few nodes")));
        }
        q_star.push(num / den);
    }
    let q = 0.5 * (q_star[0] + q_star[1]);
    let q_error = (q_star[1] - q_star[0]).abs() / (1.0 - 2f64.powf(-(beta - s)));
    let mut remainder = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup: f64 = 0.0;
        for k in 0..g.len() {
            let p = g.point(k);
            if p.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= r {
                sup = sup.max((u.values[k] - q * lin(&p).powf(s)).abs());
            }
        }
        remainder.push(sup);
    }
    let remainder_fit = if remainder.iter().all(|&v| v == 0.0) { None } else { log_fit(radii, &remainder).ok() };
    Ok(BoundaryExpansion {
        z: z.to_vec(),
        nu: nu.to_vec(),
        radii: radii.to_vec(),
        q_star,
        q,
        q_error,
        remainder,
        remainder_fit,
    })
}

/// Gap between `((x - z)·ν)_+^s` and `d^s` over balls `B_r(x_0(r))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationGap {
    pub radii: Vec<f64>,
    pub sup_gap: Vec<f64>,
    pub sup_exponent: Option<f64>,
    pub seminorm_gap: Vec<f64>,
    pub seminorm_exponent: Option<f64>,
    pub epsilon: f64,
}

fn orthonormal_frame(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut frame = vec![nu.iter().map(|v| v / norm).collect::<Vec<f64>>()];
    for axis in 0..n {
        if frame.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for e in &frame {
            let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            for (vk, ek) in v.iter_mut().zip(e) {
                *vk -= d * ek;
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            frame.push(v.iter().map(|x| x / len).collect());
        }
    }
    frame
}

/// Where the measuring ball sits relative to the boundary point `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPlacement {
    /// `x_0 = z`.
    Centered,
    /// `x_0 = z + 2rν`, so that `dist(x_0, ∂Ω) = 2r`.
    Interior,
}

/// Sup and `C^{s-ε}` seminorm of `((x - z)·ν)_+^s - d_+^s` over `B_r(x_0)`,
/// sampled on a 41^n lattice covering the ball, with fitted exponents in r.
pub fn distance_linearization_gap(
    domain: &DomainSpec,
    z: &[f64],
    nu: &[f64],
    s: f64,
    epsilon: f64,
    radii: &[f64],
    placement: GapPlacement,
) -> Result<LinearizationGap> {
    let dim = domain.dim();
    if z.len() != dim || nu.len() != dim {
        return Err(LabError::DomainError("z and ν must match the domain dimension".into()));
    }
    if domain.signed_distance(z).abs() > 1e-9 {
        return Err(LabError::DomainError(format!("{z:?} is not on the boundary")));
    }
    let nu_len = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nu_len > 0.0) {
        return Err(LabError::DomainError("ν must be nonzero".into()));
    }
    let nu: &[f64] = &nu.iter().map(|v| v / nu_len).collect::<Vec<f64>>();
    let gamma = s - epsilon;
    if !(gamma > 0.0) {
        return Err(LabError::DomainError(format!("s - ε must be positive, got {gamma}")));
    }
    let gap = |x: &[f64]| {
        let lin = x.iter().zip(z).zip(nu).map(|((a, b), n)| (a - b) * n).sum::<f64>().max(0.0);
        lin.powf(s) - domain.signed_distance(x).max(0.0).powf(s)
    };
    let per_axis: usize = match dim {
        1 => 401,
        2 => 41,
        _ => 15,
    };
    let frame = orthonormal_frame(nu);
    let lin_of = |x: &[f64]| x.iter().zip(z).zip(nu).map(|((a, b), n)| (a - b) * n).sum::<f64>();
    let mut sup_gap = Vec::new();
    let mut seminorm_gap = Vec::new();
    for &r in radii {
        let x0: Vec<f64> = match placement {
            GapPlacement::Centered => z.to_vec(),
            GapPlacement::Interior => z.iter().zip(&frame[0]).map(|(a, n)| a + 2.0 * r * n).collect(),
        };
        let at = |c: &[f64]| -> Vec<f64> {
            let mut p = x0.clone();
            for (ci, e) in c.iter().zip(&frame) {
                for (pk, ek) in p.iter_mut().zip(e) {
                    *pk += ci * ek;
                }
            }
            p
        };
        let node = |i: usize| -r + 2.0 * r * i as f64 / (per_axis - 1) as f64;
        let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
        let lines = per_axis.pow(dim as u32 - 1);
        for k in 0..lines {
            let mut rest = k;
            let mut c = vec![0.0; dim];
            for ci in c.iter_mut().skip(1) {
                *ci = node(rest % per_axis);
                rest /= per_axis;
            }
            let transverse: f64 = c[1..].iter().map(|v| v * v).sum();
            if transverse > r * r {
                continue;
            }
            let half = (r * r - transverse).sqrt();
            let mut taus: Vec<f64> = (0..per_axis).map(node).filter(|t| t.abs() <= half).collect();
            // Sign changes of d or of the linearization along the line are
            // where both profiles have unbounded slope; sample them exactly.
            let mut extra = Vec::new();
            for w in taus.windows(2) {
                for which in 0..2 {
                    let f = |t: f64| {
                        let mut q = c.clone();
                        q[0] = t;
                        let p = at(&q);
                        if which == 0 { domain.signed_distance(&p) } else { lin_of(&p) }
                    };
                    let (mut lo, mut hi) = (w[0], w[1]);
                    let (flo, fhi) = (f(lo), f(hi));
                    if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
                        continue;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if f(mid).signum() == flo.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    extra.push(lo);
                    extra.push(hi);
                }
            }
            taus.extend(extra);
            for t in taus {
                c[0] = t;
                let p = at(&c);
                let v = gap(&p);
                pts.push((p, v));
            }
        }
        let sup = pts.iter().fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
        let mut semi: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let dist = pts[i].0.iter().zip(&pts[j].0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                semi = semi.max((pts[i].1 - pts[j].1).abs() / dist.powf(gamma));
            }
        }
        sup_gap.push(sup);
        seminorm_gap.push(semi);
    }
    let fit = |v: &[f64]| {
        if v.iter().all(|&x| x == 0.0) {
            None
        } else {
            log_fit(radii, v).ok().map(|f| f.slope)
        }
    };
    Ok(LinearizationGap {
        radii: radii.to_vec(),
        sup_exponent: fit(&sup_gap),
        seminorm_exponent: fit(&seminorm_gap),
        sup_gap,
        seminorm_gap,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> GridFunction {
        let g = GridGeometry::cube(1, lo, hi, n).unwrap();
        GridFunction::from_fn(g, |x| f(x[0]), Extension::Zero)
    }

    #[test]
    fn half_root_seminorm_is_one() {
        let u = line(2049, -1.0, 1.0, |x| x.max(0.0).sqrt());
        let all = vec![true; u.geom.len()];
        let r = holder_seminorm(&u, &all, 0.5).unwrap();
        assert!((r.seminorm_estimate - 1.0).abs() < 0.02, "{r:?}");
    }

    #[test]
    fn constant_has_zero_profile() {
        let u = line(257, -1.0, 1.0, |_| 3.0);
        let all = vec![true; u.geom.len()];
        let r = holder_seminorm(&u, &all, 0.7).unwrap();
        assert!(r.profile.iter().all(|&p| p == 0.0));
        assert_eq!(r.fitted_exponent, None);
        assert_eq!(r.seminorm_estimate, 0.0);
    }

    #[test]
    fn getoor_profile_is_half_holder_at_boundary() {
        let u = line(4097, -1.0, 1.0, |x| (1.0 - x * x).max(0.0).sqrt());
        let h = u.geom.h;
        let scales: Vec<f64> = (0..6).map(|k| h * 2f64.powi(k)).collect();
        let f = exponent_fit(&u, &[1.0], &scales, DifferenceOrder::First).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05, "{f:?}");
        let window = ball_window(&u.geom, &[0.75], 0.25);
        let r = holder_seminorm(&u, &window, 0.5).unwrap();
        assert!((r.fitted_exponent.unwrap() - 0.5).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn exponent_fits() {
        let u = line(4097, -1.0, 1.0, |x| x.abs().powf(1.5));
        let h = u.geom.h;
        let scales: Vec<f64> = (0..6).map(|k| h * 2f64.powi(k)).collect();
        let f = exponent_fit(&u, &[0.0], &scales, DifferenceOrder::Second).unwrap();
        assert!((f.exponent - 1.5).abs() < 0.05, "{f:?}");
        let gauss = line(4097, -4.0, 4.0, |x| (-x * x).exp());
        let scales: Vec<f64> = (2..8).map(|k| gauss.geom.h * 2f64.powi(k)).collect();
        let f = exponent_fit(&gauss, &[0.3], &scales, DifferenceOrder::Second).unwrap();
        assert!((f.exponent - 2.0).abs() < 0.05, "{f:?}");
        let shifted = line(4097, -4.0, 4.0, |x| (-x * x).exp() + 3.0 * x - 1.0);
        let g2 = exponent_fit(&shifted, &[0.3], &scales, DifferenceOrder::Second).unwrap();
        assert!((g2.exponent - f.exponent).abs() < 1e-9);
    }

    #[test]
    fn boundary_ratio_of_getoor_profile() {
        let u = line(2049, -1.0, 1.0, |x| (1.0 - x * x).max(0.0).sqrt());
        let dom = DomainSpec::Interval { a: -1.0, b: 1.0 };
        let (ratio, mask) = boundary_ratio(&u, &dom, (0.05, 0.5), 0.5).unwrap();
        let r = holder_seminorm(&ratio, &mask, 0.4).unwrap();
        assert!(r.seminorm_estimate <= 1.1, "{r:?}");
        assert!(boundary_ratio(&u, &dom, (0.0, 0.5), 0.5).is_err());
        let d = line(2049, -1.0, 1.0, |x| (1.0 - x.abs()).max(0.0).sqrt());
        let (ratio, mask) = boundary_ratio(&d, &dom, (0.05, 0.5), 0.5).unwrap();
        let r = holder_seminorm(&ratio, &mask, 0.4).unwrap();
        assert!(r.seminorm_estimate < 1e-12);
    }

    #[test]
    fn seminorm_is_scale_covariant() {
        let rho = 0.5;
        let u = line(4097, -1.0, 1.0, |x| (x + 0.3).abs().powf(0.6));
        let v = line(4097, -1.0, 1.0, |x| (rho * x + 0.3).abs().powf(0.6));
        let wu = ball_window(&u.geom, &[-0.3], 0.25);
        let wv = ball_window(&v.geom, &[-0.3 / rho], 0.25 / rho);
        let a = holder_seminorm(&u, &wu, 0.6).unwrap().seminorm_estimate;
        let b = holder_seminorm(&v, &wv, 0.6).unwrap().seminorm_estimate;
        assert!((b / a / rho.powf(0.6) - 1.0).abs() < 0.03, "{a} {b}");
    }

    #[test]
    fn boundary_coefficient_is_linear() {
        let radii = [0.0625, 0.125, 0.25, 0.5];
        let a = line(1025, -1.0, 1.0, |x| (1.0 - x * x).max(0.0).sqrt());
        let b = line(1025, -1.0, 1.0, |x| (1.0 - x).max(0.0).powf(1.2));
        let mut c = a.clone();
        for (cv, bv) in c.values.iter_mut().zip(&b.values) {
            *cv = 3.0 * *cv - 2.0 * bv;
        }
        let q = |u: &GridFunction| boundary_coefficient(u, &[1.0], &[-1.0], 0.5, &radii, 0.75).unwrap().q_star;
        let (qa, qb, qc) = (q(&a), q(&b), q(&c));
        for k in 0..4 {
            assert!((qc[k] - 3.0 * qa[k] + 2.0 * qb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_coefficient_of_exact_multiple() {
        let u = line(2049, -1.0, 1.0, |x| 2.0 * (1.0 - x).max(0.0).sqrt());
        let radii = [0.0625, 0.125, 0.25, 0.5];
        let e = boundary_coefficient(&u, &[1.0], &[-1.0], 0.5, &radii, 0.75).unwrap();
        assert!(e.q_star.iter().all(|q| (q - 2.0).abs() < 1e-12));
        assert!(e.remainder.iter().all(|r| *r < 1e-12));
        let zero = line(2049, -1.0, 1.0, |_| 0.0);
        let e = boundary_coefficient(&zero, &[1.0], &[-1.0], 0.5, &radii, 0.75).unwrap();
        assert!(e.q_star.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn linearization_gap_flat_and_ball() {
        let slab = DomainSpec::Box { lo: vec![-1.0, -5.0], hi: vec![1.0, 5.0] };
        let radii = [0.2, 0.1, 0.05, 0.025];
        let flat = distance_linearization_gap(&slab, &[1.0, 0.0], &[-1.0, 0.0], 0.5, 0.1, &radii, GapPlacement::Centered)
            .unwrap();
        assert!(flat.sup_gap.iter().all(|g| *g < 1e-15));
        let ball = DomainSpec::unit_ball(2);
        let c = distance_linearization_gap(&ball, &[1.0, 0.0], &[-1.0, 0.0], 0.5, 0.1, &radii, GapPlacement::Centered)
            .unwrap();
        assert!((c.sup_exponent.unwrap() - 1.0).abs() < 0.1, "{c:?}");
        let i = distance_linearization_gap(&ball, &[1.0, 0.0], &[-1.0, 0.0], 0.5, 0.1, &radii, GapPlacement::Interior)
            .unwrap();
        assert!((c.seminorm_exponent.unwrap() - 0.2).abs() < 0.05, "{c:?}");
        assert!(i.sup_exponent.unwrap() >= 1.0 - 0.1, "{i:?}");
        assert!(i.seminorm_exponent.unwrap() >= 0.5 - 0.1, "{i:?}");
    }
}
