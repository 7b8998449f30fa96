//! Experiment harnesses: kernel sup-norms over point grids, power-law decay fits in t, and
//! scaling studies in N, τ₀ and α.

use crate::error::{Error, Result};
use crate::kernels::free_propagator_kernel;
use crate::profiles::{Profile, ProfileFamily};
use crate::propagator::{KernelEngine, KernelSample, QuadratureConfig};
use crate::spectral::{cross_term_decay_probe, ls_slope};
use crate::Branch;

/// Finite set of (x, y) evaluation points with the indices that lie on the grid boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct XYGrid {
    pub d: usize,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub x_boundary: Vec<bool>,
    pub y_boundary: Vec<bool>,
}

fn boundary_flags(pts: &[Vec<f64>]) -> Vec<bool> {
    let d = pts.first().map(|p| p.len()).unwrap_or(0);
    let lo: Vec<f64> = (0..d).map(|a| pts.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|a| pts.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
    pts.iter()
        .map(|p| (0..d).any(|a| hi[a] > lo[a] && (p[a] == lo[a] || p[a] == hi[a])))
        .collect()
}

impl XYGrid {
    pub fn from_points(d: usize, xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>) -> Result<XYGrid> {
        if xs.is_empty() || ys.is_empty() || xs.iter().chain(&ys).any(|p| p.len() != d) {
            return Err(Error::Invalid(format!("grid points must be non-empty and {d}-dimensional")));
        }
        let x_boundary = boundary_flags(&xs);
        let y_boundary = boundary_flags(&ys);
        Ok(XYGrid { d, xs, ys, x_boundary, y_boundary })
    }

    /// n equispaced points s·e₁, s ∈ [−r, r], used for both x and y.
    pub fn axis(d: usize, r: f64, n: usize) -> Result<XYGrid> {
        if n < 2 || !(r > 0.0) {
            return Err(Error::Invalid("axis grid needs n ≥ 2 and r > 0".into()));
        }
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut p = vec![0.0; d];
                p[0] = -r + 2.0 * r * i as f64 / (n - 1) as f64;
                p
            })
            .collect();
        XYGrid::from_points(d, pts.clone(), pts)
    }

    /// Points s·e₁ for s in centers + offsets (e.g. around each member of a translated family).
    pub fn around(d: usize, centers: &[f64], offsets: &[f64]) -> Result<XYGrid> {
        let mut s: Vec<f64> = centers.iter().flat_map(|c| offsets.iter().map(move |o| c + o)).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        let pts: Vec<Vec<f64>> = s
            .iter()
            .map(|v| {
                let mut p = vec![0.0; d];
                p[0] = *v;
                p
            })
            .collect();
        XYGrid::from_points(d, pts.clone(), pts)
    }
}

pub enum KernelSource<'a> {
    /// kernel of e^{itΔ}
    Free { d: usize },
    /// kernel of e^{−itH} − e^{−itH₀}
    Difference(&'a KernelEngine),
    /// kernel of e^{−itH}
    Full(&'a KernelEngine),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupNorm {
    pub t: f64,
    pub value: f64,
    pub argmax: (usize, usize),
    /// maximum attained on the grid boundary: the grid may not cover the peak
    pub on_boundary: bool,
}

fn sup_of(t: f64, grid: &XYGrid, vals: &[f64]) -> SupNorm {
    let nb = grid.ys.len();
    let (mut best, mut arg) = (0.0, (0, 0));
    for (p, v) in vals.iter().enumerate() {
        if *v > best {
            best = *v;
            arg = (p / nb, p % nb);
        }
    }
    let on_boundary = best > 0.0 && (grid.x_boundary[arg.0] || grid.y_boundary[arg.1]);
    SupNorm { t, value: best, argmax: arg, on_boundary }
}

fn engine_matches(e: &KernelEngine, grid: &XYGrid) -> Result<()> {
    if e.xs != grid.xs || e.ys != grid.ys {
        return Err(Error::Invalid("engine was built for a different point grid".into()));
    }
    Ok(())
}

/// sup over the grid of the kernel modulus, for each t.
pub fn sup_kernel_norms(source: &KernelSource<'_>, times: &[f64], grid: &XYGrid) -> Result<Vec<SupNorm>> {
    match source {
        KernelSource::Free { d } => times
            .iter()
            .map(|&t| {
                let mut vals = vec![];
                for x in &grid.xs {
                    for y in &grid.ys {
                        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                        vals.push(free_propagator_kernel(*d, t, r)?.norm());
                    }
                }
                // every point attains the same modulus: report the first, never a boundary flag
                let mut s = sup_of(t, grid, &vals);
                s.argmax = (0, 0);
                s.on_boundary = false;
                Ok(s)
            })
            .collect(),
        KernelSource::Difference(e) | KernelSource::Full(e) => {
            engine_matches(e, grid)?;
            let full = matches!(source, KernelSource::Full(_));
            let rows = e.kernel_many(times)?;
            Ok(rows
                .iter()
                .zip(times)
                .map(|(r, &t)| {
                    let vals: Vec<f64> =
                        r.iter().map(|s: &KernelSample| if full { s.full_value().norm() } else { s.diff_value.norm() }).collect();
                    sup_of(t, grid, &vals)
                })
                .collect())
        }
    }
}

pub fn sup_kernel_norm(source: &KernelSource<'_>, t: f64, grid: &XYGrid) -> Result<SupNorm> {
    Ok(sup_kernel_norms(source, &[t], grid)?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFitReport {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// max relative deviation of the norms from the fitted power law
    pub residual: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Least-squares fit of log norm = intercept + slope·log t.
pub fn fit_decay_exponent(times: &[f64], norms: &[f64], target: f64, tolerance: f64) -> Result<DecayFitReport> {
    if times.len() < 5 || times.len() != norms.len() {
        return Err(Error::Invalid("a decay fit needs ≥ 5 matched ladder points".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
        return Err(Error::Invalid("times must be positive and strictly increasing".into()));
    }
    if norms.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("sup norms must be positive".into()));
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    let residual = xs.iter().zip(&ys).map(|(x, y)| ((y - intercept - slope * x).exp() - 1.0).abs()).fold(0.0, f64::max);
    Ok(DecayFitReport {
        times: times.to_vec(),
        sup_norms: norms.to_vec(),
        slope,
        stderr,
        intercept,
        residual,
        target,
        tolerance,
        pass: (slope - target).abs() <= tolerance,
    })
}

/// Geometric ladder t_k = t0·ratio^k, k < count.
pub fn geometric_ladder(t0: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t0 * ratio.powi(k as i32)).collect()
}

/// sup-norms of a source on a ladder followed by a −d/2 fit.
pub fn decay_experiment(source: &KernelSource<'_>, times: &[f64], grid: &XYGrid, tolerance: f64) -> Result<(DecayFitReport, Vec<SupNorm>)> {
    let sups = sup_kernel_norms(source, times, grid)?;
    let norms: Vec<f64> = sups.iter().map(|s| s.value).collect();
    let target = -(grid.d as f64) / 2.0;
    Ok((fit_decay_exponent(times, &norms, target, tolerance)?, sups))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub parameter: String,
    pub values: Vec<f64>,
    pub constants: Vec<f64>,
    pub exponent: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check_increasing(v: &[f64]) -> Result<()> {
    if v.len() < 2 || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("parameter values must be ≥ 2 and strictly increasing".into()));
    }
    Ok(())
}

/// C_est(N) = sup|K_N(t_ref)|·t_ref^{d/2} for generated families; pass when the log-log growth
/// exponent is ≤ `max_exponent`.
pub fn n_scaling_experiment(
    generator: &dyn Fn(usize) -> Result<(ProfileFamily, XYGrid)>,
    n_list: &[usize],
    t_ref: f64,
    cfg: &QuadratureConfig,
    max_exponent: f64,
) -> Result<ScalingReport> {
    let values: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    check_increasing(&values)?;
    let mut constants = vec![];
    for &n in n_list {
        let (fam, grid) = generator(n)?;
        if fam.len() != n {
            return Err(Error::Invalid(format!("generator returned {} members for N = {n}", fam.len())));
        }
        let eng = KernelEngine::new(&fam, &grid.xs, &grid.ys, cfg)?;
        let s = sup_kernel_norm(&KernelSource::Difference(&eng), t_ref, &grid)?;
        constants.push(s.value * t_ref.powf(grid.d as f64 / 2.0));
    }
    let pts: Vec<(f64, f64)> = values.iter().zip(&constants).map(|(n, c)| (n.ln(), c.ln())).collect();
    let exponent = ls_slope(&pts);
    Ok(ScalingReport { parameter: "N".into(), values, constants, exponent, threshold: max_exponent, pass: exponent <= max_exponent })
}

/// |f₁₂(τ₀)| decay of a translated pair, fitted in log-log; pass when the exponent is
/// ≤ `max_exponent`.
pub fn tau_scaling_experiment(phi: &Profile, tau0_list: &[f64], lambda: f64, max_exponent: f64) -> Result<ScalingReport> {
    check_increasing(tau0_list)?;
    let rep = cross_term_decay_probe(phi, tau0_list, lambda, Branch::Plus)?;
    Ok(ScalingReport {
        parameter: "tau0".into(),
        values: tau0_list.to_vec(),
        constants: rep.values.clone(),
        exponent: rep.slope,
        threshold: max_exponent,
        pass: rep.slope <= max_exponent,
    })
}

/// sup|K_α(t_ref)|/α for small α; pass when all ratios agree with the smallest-α ratio within
/// `rel_tol`. The exponent field is the log-log slope of the norm in α (1 in the linear regime).
pub fn alpha_scaling_experiment(
    phi: &Profile,
    alpha_list: &[f64],
    t_ref: f64,
    grid: &XYGrid,
    cfg: &QuadratureConfig,
    rel_tol: f64,
) -> Result<ScalingReport> {
    check_increasing(alpha_list)?;
    if alpha_list[0] <= 0.0 || *alpha_list.last().unwrap() >= 1.0 {
        return Err(Error::Invalid("α values must lie in (0, 1)".into()));
    }
    let mut constants = vec![];
    let mut norms = vec![];
    for &a in alpha_list {
        let fam = ProfileFamily::single(phi.clone(), a)?;
        let eng = KernelEngine::new(&fam, &grid.xs, &grid.ys, cfg)?;
        let s = sup_kernel_norm(&KernelSource::Difference(&eng), t_ref, grid)?;
        norms.push(s.value);
        constants.push(s.value / a);
    }
    let pts: Vec<(f64, f64)> = alpha_list.iter().zip(&norms).map(|(a, n)| (a.ln(), n.ln())).collect();
    let base = constants[0];
    let spread = constants.iter().map(|c| (c / base - 1.0).abs()).fold(0.0, f64::max);
    Ok(ScalingReport {
        parameter: "alpha".into(),
        values: alpha_list.to_vec(),
        constants,
        exponent: ls_slope(&pts),
        threshold: rel_tol,
        pass: spread <= rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::*;
    use std::f64::consts::PI;

    #[test]
    fn free_baseline_exact() {
        for d in 1..=3 {
            let grid = XYGrid::axis(d, 2.0, 5).unwrap();
            let times = geometric_ladder(1.0, 2.0, 7);
            let (fit, sups) = decay_experiment(&KernelSource::Free { d }, &times, &grid, 1e-6).unwrap();
            assert!((fit.slope + d as f64 / 2.0).abs() < 1e-6 && fit.pass);
            for s in sups {
                assert!((s.value - (4.0 * PI * s.t).powf(-(d as f64) / 2.0)).abs() < 1e-10);
                assert!(!s.on_boundary);
            }
        }
    }

    #[test]
    fn fit_examples() {
        let t = geometric_ladder(1.0, 2.0, 6);
        let c: Vec<f64> = t.iter().map(|_| 0.3).collect();
        let r = fit_decay_exponent(&t, &c, 0.0, 1e-12).unwrap();
        assert!(r.slope.abs() < 1e-14 && r.pass);
        assert!(fit_decay_exponent(&t[..4], &c[..4], 0.0, 1.0).is_err());
    }

    #[test]
    fn empty_family_norm_zero_and_grid_mismatch() {
        let grid = XYGrid::axis(1, 2.0, 5).unwrap();
        let eng = KernelEngine::new(&ProfileFamily::empty(), &grid.xs, &grid.ys, &QuadratureConfig::default()).unwrap();
        let s = sup_kernel_norm(&KernelSource::Difference(&eng), 1.0, &grid).unwrap();
        assert_eq!(s.value, 0.0);
        let other = XYGrid::axis(1, 3.0, 5).unwrap();
        assert!(sup_kernel_norm(&KernelSource::Difference(&eng), 1.0, &other).is_err());
    }

    #[test]
    fn rank_one_d1_decay_and_refinement() {
        let p = make_gaussian_profile(1, 1.0).unwrap();
        let fam = ProfileFamily::single(p, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let grid = XYGrid::axis(1, 4.0, 17).unwrap();
        let eng = KernelEngine::new(&fam, &grid.xs, &grid.ys, &cfg).unwrap();
        let times = geometric_ladder(1.0, 2.0, 7);
        let (fit, _) = decay_experiment(&KernelSource::Difference(&eng), &times, &grid, 0.15).unwrap();
        assert!(fit.pass, "{fit:?}");
        let fine = XYGrid::axis(1, 4.0, 33).unwrap();
        let e2 = KernelEngine::new(&fam, &fine.xs, &fine.ys, &cfg).unwrap();
        let a = sup_kernel_norm(&KernelSource::Difference(&eng), 4.0, &grid).unwrap().value;
        let b = sup_kernel_norm(&KernelSource::Difference(&e2), 4.0, &fine).unwrap().value;
        assert!((a - b).abs() <= 0.02 * b);
    }
}
