//! Kernel synthesis of e^{−itH} − e^{−itH₀} from Stone's formula and the Aronszajn–Krein
//! resolvent formula, on top of a shared oscillatory λ-quadrature engine.
//!
//! The λ-dependent factors (G±, h±) are sampled once on a t-independent adaptive Chebyshev
//! panel grid; every (t, x, y) evaluation is then a weighted sum over the cached nodes, with
//! weights obtained by integrating the panel interpolants against e^{i(aλ² + bλ)} on
//! phase-budgeted Gauss–Legendre sub-panels.

use crate::error::{Error, Result};
use crate::kernels::{free_propagator_kernel, free_resolvent_kernel, plateau, SpectralPoint};
use crate::profiles::{BaseKind, Profile, ProfileFamily, ProfileKind};
use crate::quadrature::{adaptive, chebyshev_bary_weights, chebyshev_nodes, gauss_legendre, AdaptiveOptions};
use crate::special::hankel_h0;
use crate::spectral::{ak_system_from_raw, borel_matrix_raw, radial_pv, sphere_integral, sphere_plane_wave};
use crate::{c, Branch, C64, I};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct QuadratureConfig {
    pub lambda0: f64,
    pub lambda_max: f64,
    pub phase_budget: f64,
    pub tol: f64,
    pub epsilon_schedule: Vec<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            lambda0: 0.5,
            lambda_max: 64.0,
            phase_budget: PI / 4.0,
            tol: 1e-8,
            epsilon_schedule: vec![1e-6, 5e-7, 2.5e-7],
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0 < 1.0) {
            return Err(Error::Invalid(format!("lambda0 must lie in (0, 1), got {}", self.lambda0)));
        }
        if !(self.lambda_max >= 1.0) {
            return Err(Error::Invalid(format!("lambda_max must be ≥ 1, got {}", self.lambda_max)));
        }
        if !(self.phase_budget > 0.0 && self.phase_budget <= PI / 2.0) {
            return Err(Error::Invalid(format!("phase_budget must lie in (0, π/2], got {}", self.phase_budget)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid("tol must be positive".into()));
        }
        let e = &self.epsilon_schedule;
        if e.len() < 2 || e.iter().any(|v| !(*v > 0.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid("epsilon_schedule must be ≥ 2 positive, strictly decreasing values".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub diff_value: C64,
    pub free_value: C64,
    pub err_est: f64,
}

impl KernelSample {
    pub fn full_value(&self) -> C64 {
        self.free_value + self.diff_value
    }
}

fn pad3(v: &[f64]) -> [f64; 3] {
    let mut o = [0.0; 3];
    o[..v.len()].copy_from_slice(v);
    o
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------------------------
// convolution h±(λ, x) = (R₀±(λ²)φ)(x)

/// h±(λ, x); band-limited profiles use the Fourier route (their spatial tails are long), all
/// others the spatial route.
pub fn convolved_profile(phi: &Profile, branch: Branch, lambda: f64, x: &[f64]) -> Result<C64> {
    match phi.kind() {
        ProfileKind::BandLimited => convolved_profile_spectral(phi, branch, lambda, x),
        _ => convolved_profile_spatial(phi, branch, lambda, x),
    }
}

fn conv_opts(lambda: f64) -> AdaptiveOptions {
    AdaptiveOptions { abs_tol: 1e-15 / lambda.min(1.0), rel_tol: 1e-12, max_intervals: 8000 }
}

/// Spatial route: ∫ R₀±(λ², |x − x₁|) φ(x₁) dx₁, in coordinates centered at x for d ≥ 2 so the
/// kernel singularity sits at the origin of the radial variable.
pub fn convolved_profile_spatial(phi: &Profile, branch: Branch, lambda: f64, x: &[f64]) -> Result<C64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let d = phi.d;
    let rad = phi.spatial_radius(1e-16);
    let s = dist(x, &phi.tau);
    let sg = branch.sign();
    match d {
        1 => {
            let t = phi.tau[0];
            let pref = I * (sg / (2.0 * lambda));
            // (i/2λ)[∫(e^{iλr} − 1)φ + ∫φ]: no cancellation as λ → 0 when ∫φ is small
            let (v, _) = adaptive(
                |x1| {
                    let th = sg * lambda * (x[0] - x1).abs();
                    c(-2.0 * (0.5 * th).sin().powi(2), th.sin()) * phi.eval(&[x1])
                },
                t - rad,
                t + rad,
                &[x[0], t],
                AdaptiveOptions { abs_tol: 1e-15 * lambda.min(1.0), rel_tol: 1e-12, max_intervals: 8000 },
            )?;
            Ok(pref * (v + phi.mean()))
        }
        2 | 3 => {
            let lo = (s - rad).max(0.0);
            let hi = s + rad;
            let kern = |rho: f64| -> C64 {
                if d == 2 {
                    I * (sg * 0.25) * hankel_h0(branch, lambda * rho) * rho
                } else {
                    c(0.0, sg * lambda * rho).exp() * (rho / (4.0 * PI))
                }
            };
            let failure = std::cell::RefCell::new(None);
            let shell = |rho: f64| -> C64 {
                match shell_average(phi, x, s, rho) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        c(0.0, 0.0)
                    }
                }
            };
            let (v, _) = adaptive(
                |rho| if rho == 0.0 { c(0.0, 0.0) } else { kern(rho) * shell(rho) },
                lo,
                hi,
                &[s],
                conv_opts(lambda),
            )?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(v)
        }
        _ => Err(Error::Invalid(format!("convolution supports d ≤ 3, got {d}"))),
    }
}

/// ∫_{S^{d−1}} φ(x + ρω) dω, with closed or one-dimensional forms for radial bases.
fn shell_average(phi: &Profile, x: &[f64], s: f64, rho: f64) -> Result<C64> {
    let d = phi.d;
    if d == 3 && phi.radial_center().is_some() {
        if let BaseKind::Gaussian { width } = phi.base {
            let w2 = width * width;
            let n = (PI * w2).powf(-0.75);
            let z = s * rho / w2;
            let v = if z < 1e-3 {
                let shz = 1.0 + z * z / 6.0 + z.powi(4) / 120.0;
                4.0 * PI * n * (-(s * s + rho * rho) / (2.0 * w2)).exp() * shz
            } else {
                let diff = (-(s - rho).powi(2) / (2.0 * w2)).exp() - (-(s + rho).powi(2) / (2.0 * w2)).exp();
                2.0 * PI * n * w2 * diff / (s * rho)
            };
            return Ok(phi.phase * v);
        }
        if s < 1e-12 {
            return Ok(phi.phase * (4.0 * PI * phi.base_radial(rho)));
        }
        let (v, _) = crate::quadrature::adaptive_real(
            |u| phi.base_radial(u) * u,
            (s - rho).abs(),
            s + rho,
            &[],
            AdaptiveOptions::new(1e-16, 1e-12),
        )?;
        return Ok(phi.phase * (2.0 * PI * v / (s * rho)));
    }
    let f = |om: &[f64]| {
        let p: Vec<f64> = (0..d).map(|j| x[j] + rho * om[j]).collect();
        phi.eval(&p)
    };
    sphere_integral(d, &f)
}

/// Fourier route: (2π)^{−d/2}[P.V.∫ q(ρ)/(ρ² − λ²) dρ ± iπ q(λ)/(2λ)] with
/// q(ρ) = ρ^{d−1}∫_{S^{d−1}} e^{iρω·x} φ̂(ρω) dω.
pub fn convolved_profile_spectral(phi: &Profile, branch: Branch, lambda: f64, x: &[f64]) -> Result<C64> {
    let d = phi.d;
    let kn = phi.k.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rmax = kn + phi.spectral_radius(1e-34);
    let failure = std::cell::RefCell::new(None);
    let q = |rho: f64| -> C64 {
        let jac = rho.powi(d as i32 - 1);
        if let Some(tau) = phi.radial_center() {
            let s = dist(x, tau);
            return phi.phase * (jac * phi.base_fourier_radial(rho) * sphere_plane_wave(d, rho * s));
        }
        let f = |om: &[f64]| {
            let xi: Vec<f64> = om.iter().map(|o| o * rho).collect();
            let ph: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
            c(0.0, ph).exp() * phi.fourier_transform(&xi)
        };
        match sphere_integral(d, &f) {
            Ok(v) => v * jac,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                c(0.0, 0.0)
            }
        }
    };
    let mut bps = vec![];
    if let Some(r) = phi.fourier_radius() {
        bps.push(kn + r);
        if kn > r {
            bps.push(kn - r);
        }
    }
    let v = radial_pv(&q, lambda, rmax, branch, &bps)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(v * (2.0 * PI).powf(-(d as f64) / 2.0))
}

/// d = 1 band-limited φ at many points at once, through the shared compact-support P.V. rule
/// applied to q(ρ) = φ̂(ρ)e^{iρx} + φ̂(−ρ)e^{−iρx}.
pub fn convolved_profile_spectral_d1_many(phi: &Profile, branch: Branch, lambda: f64, xs: &[f64]) -> Result<Vec<C64>> {
    let r = match (phi.d, phi.fourier_radius()) {
        (1, Some(r)) => r,
        _ => return Err(Error::Invalid("batched spectral convolution needs a d = 1 band-limited profile".into())),
    };
    let k = phi.k[0].abs();
    let xmax = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rule = PvRule::new(lambda, ((k - r).max(0.0), k + r), (r / 16.0).min(4.0 / xmax.max(1e-300)))?;
    let fp: Vec<(C64, C64)> = rule.nodes.iter().map(|&(rho, _)| (phi.fourier_transform(&[rho]), phi.fourier_transform(&[-rho]))).collect();
    let fl = (phi.fourier_transform(&[lambda]), phi.fourier_transform(&[-lambda]));
    let norm = (2.0 * PI).powf(-0.5);
    Ok(xs
        .iter()
        .map(|&x| {
            let q = |rho: f64, (fpos, fneg): (C64, C64)| fpos * c(0.0, rho * x).exp() + fneg * c(0.0, -rho * x).exp();
            rule.apply(branch, q(lambda, fl), fp.iter().zip(&rule.nodes).map(|(f, &(rho, _))| q(rho, *f))) * norm
        })
        .collect())
}

/// P.V.∫_a^b q(ρ)/(ρ² − λ²) dρ ± iπ q(λ)/(2λ) for q supported in [a, b] ⊂ [0, ∞): with
/// g = q/(ρ + λ), P.V.∫ g/(ρ − λ) = ∫ (g − g(λ))/(ρ − λ) + g(λ) ln((b − λ)/(λ − a)), on one
/// composite Gauss–Legendre rule (graded towards 0, where 1/(ρ + λ) varies on the scale λ).
pub struct PvRule {
    pub lambda: f64,
    pub nodes: Vec<(f64, f64)>,
    inside: bool,
    log: f64,
}

impl PvRule {
    pub fn new(lambda: f64, (a, b): (f64, f64), hmax: f64) -> Result<PvRule> {
        if !(lambda > 0.0) {
            return Err(Error::Domain("lambda must be positive".into()));
        }
        if !(b > a && a >= 0.0 && hmax > 0.0) {
            return Err(Error::Invalid("P.V. rule needs 0 ≤ a < b and a positive panel width".into()));
        }
        let inside = lambda > a && lambda < b;
        let mut cuts = vec![a, b];
        if inside {
            let delta = 0.5 * (lambda - a).min(b - lambda).min(hmax);
            cuts.extend([lambda - delta, lambda + delta]);
        }
        let mut g = 2.0 * lambda;
        while a == 0.0 && g < b && g < hmax {
            cuts.push(g);
            g *= 2.0;
        }
        cuts.sort_by(f64::total_cmp);
        let gl = gauss_legendre(16);
        let mut nodes = vec![];
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let m = (len / hmax).ceil().max(1.0) as usize;
            let h = len / m as f64;
            for j in 0..m {
                let u = w[0] + j as f64 * h;
                nodes.extend(gl.iter().map(|&(xg, wg)| (u + 0.5 * h * (xg + 1.0), 0.5 * h * wg)));
            }
        }
        let log = if inside { ((b - lambda) / (lambda - a)).ln() } else { 0.0 };
        Ok(PvRule { lambda, nodes, inside, log })
    }

    /// `q_nodes` lists q at `self.nodes` in order; `q_lambda` = q(λ).
    pub fn apply(&self, branch: Branch, q_lambda: C64, q_nodes: impl Iterator<Item = C64>) -> C64 {
        let l = self.lambda;
        let gl = q_lambda / (2.0 * l);
        let sub = if self.inside { gl } else { c(0.0, 0.0) };
        let mut acc = c(0.0, 0.0);
        for (&(rho, w), q) in self.nodes.iter().zip(q_nodes) {
            acc += (q / (rho + l) - sub) / (rho - l) * w;
        }
        acc + sub * self.log + I * (branch.sign() * PI) * gl
    }
}

// ---------------------------------------------------------------------------------------------
// node cache and oscillatory weights

#[derive(Clone, Debug)]
pub struct CacheOptions {
    pub degree: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_width: f64,
    pub min_width: f64,
    pub max_panels: usize,
}

impl Default for CacheOptions {
    fn default() -> Self {
        CacheOptions { degree: 8, rel_tol: 1e-10, abs_tol: 1e-300, max_width: 0.5, min_width: 1e-9, max_panels: 4000 }
    }
}

/// Piecewise Chebyshev interpolant of a vector-valued function of λ on an adaptive panel grid.
#[derive(Clone, Debug)]
pub struct NodeCache {
    pub degree: usize,
    pub panels: Vec<(f64, f64)>,
    pub nodes: Vec<f64>,
    pub values: Vec<Vec<C64>>,
    ref_nodes: Vec<f64>,
    bary: Vec<f64>,
}

type Sampler<'a> = dyn Fn(f64) -> Result<Vec<C64>> + Sync + 'a;

impl NodeCache {
    pub fn build(sample: &Sampler<'_>, breakpoints: &[f64], opts: &CacheOptions) -> Result<NodeCache> {
        let n = opts.degree;
        let ref_nodes = chebyshev_nodes(n);
        let bary = chebyshev_bary_weights(n);
        let map = |a: f64, b: f64| -> Vec<f64> { ref_nodes.iter().map(|x| 0.5 * (a + b) + 0.5 * (b - a) * x).collect() };
        let mut bps: Vec<f64> = breakpoints.to_vec();
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
        if bps.len() < 2 {
            return Err(Error::Invalid("node cache needs an interval".into()));
        }
        let mut initial = vec![];
        for w in bps.windows(2) {
            let m = ((w[1] - w[0]) / opts.max_width).ceil().max(1.0) as usize;
            for j in 0..m {
                let a = w[0] + (w[1] - w[0]) * j as f64 / m as f64;
                let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / m as f64;
                initial.push((a, b));
            }
        }
        let sample_panel = |(a, b): (f64, f64)| -> Result<Vec<Vec<C64>>> { map(a, b).into_iter().map(sample).collect() };
        let mut pending: Vec<((f64, f64), Vec<Vec<C64>>)> = initial
            .par_iter()
            .map(|&p| Ok((p, sample_panel(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let ncomp = pending.first().map(|p| p.1[0].len()).unwrap_or(0);
        let mut scale = vec![0.0f64; ncomp];
        let update = |scale: &mut Vec<f64>, vals: &[Vec<C64>]| {
            for v in vals {
                for (s, z) in scale.iter_mut().zip(v) {
                    *s = s.max(z.norm());
                }
            }
        };
        for p in &pending {
            update(&mut scale, &p.1);
        }
        let mut done: Vec<((f64, f64), Vec<Vec<C64>>)> = vec![];
        while !pending.is_empty() {
            if done.len() + pending.len() > opts.max_panels {
                return Err(Error::BudgetExceeded(format!(
                    "node cache exceeded {} panels (tolerance {:e})",
                    opts.max_panels, opts.rel_tol
                )));
            }
            // identically-vanishing components (e.g. odd profiles at symmetric points) are
            // measured against a floor tied to the largest component
            let top = scale.iter().cloned().fold(0.0, f64::max);
            let sc: Vec<f64> = scale.iter().map(|s| s.max(1e-4 * top)).collect();
            let results: Vec<Result<Vec<((f64, f64), Vec<Vec<C64>>, bool)>>> = pending
                .par_iter()
                .map(|((a, b), vals)| {
                    let (a, b) = (*a, *b);
                    if b - a <= opts.min_width {
                        return Ok(vec![((a, b), vals.clone(), true)]);
                    }
                    let m = 0.5 * (a + b);
                    let left = sample_panel((a, m))?;
                    let right = sample_panel((m, b))?;
                    let parent_nodes = map(a, b);
                    let mut worst: f64 = 0.0;
                    for (pts, vs) in [(map(a, m), &left), (map(m, b), &right)] {
                        for (s, v) in pts.iter().zip(vs.iter()) {
                            for comp in 0..ncomp {
                                let col: Vec<C64> = vals.iter().map(|r| r[comp]).collect();
                                let ip = crate::quadrature::barycentric(&parent_nodes, &bary, &col, *s);
                                let tol = opts.abs_tol + opts.rel_tol * sc[comp];
                                worst = worst.max((ip - v[comp]).norm() / tol);
                            }
                        }
                    }
                    let ok = worst <= 1.0;
                    Ok(vec![((a, m), left, ok), ((m, b), right, ok)])
                })
                .collect();
            let mut next = vec![];
            for r in results {
                for (p, vals, ok) in r? {
                    update(&mut scale, &vals);
                    if ok {
                        done.push((p, vals));
                    } else {
                        next.push((p, vals));
                    }
                }
            }
            pending = next;
        }
        done.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
        let mut panels = vec![];
        let mut nodes = vec![];
        let mut values = vec![];
        for ((a, b), vals) in done {
            panels.push((a, b));
            nodes.extend(map(a, b));
            values.extend(vals);
        }
        Ok(NodeCache { degree: n, panels, nodes, values, ref_nodes, bary })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.panels.first().map(|p| p.0).unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.panels.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Interpolated component vector at λ.
    pub fn interpolate(&self, lambda: f64) -> Vec<C64> {
        let idx = match self.panels.binary_search_by(|p| {
            if lambda < p.0 {
                std::cmp::Ordering::Greater
            } else if lambda > p.1 {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => i,
            Err(i) => i.min(self.panels.len() - 1),
        };
        let n = self.degree;
        let (a, b) = self.panels[idx];
        let pts: Vec<f64> = self.ref_nodes.iter().map(|x| 0.5 * (a + b) + 0.5 * (b - a) * x).collect();
        let ncomp = self.values[0].len();
        (0..ncomp)
            .map(|comp| {
                let col: Vec<C64> = (0..n).map(|k| self.values[idx * n + k][comp]).collect();
                crate::quadrature::barycentric(&pts, &self.bary, &col, lambda)
            })
            .collect()
    }

    /// Quadrature weights W[e][k] with ∫ P(λ) e^{i(aλ² + bλ)} window(λ) reg_e(λ) dλ ≈ Σ_k W[e][k] P(λ_k)
    /// for the panel interpolant P, one weight vector per regularization in `spec.regs`.
    pub fn weights(&self, spec: &PhaseSpec<'_>) -> Vec<Vec<C64>> {
        let n = self.degree;
        let gl = gauss_legendre(spec.gl_nodes);
        let stationary = if spec.a2 != 0.0 { Some(-spec.b1 / (2.0 * spec.a2)) } else { None };
        let per_panel: Vec<Vec<Vec<C64>>> = self
            .panels
            .par_iter()
            .map(|&(a, b)| {
                let mut w = vec![vec![c(0.0, 0.0); n]; spec.regs.len()];
                if b <= spec.range.0 || a >= spec.range.1 {
                    return w;
                }
                let pts: Vec<f64> = self.ref_nodes.iter().map(|x| 0.5 * (a + b) + 0.5 * (b - a) * x).collect();
                let mut cuts = vec![a, b];
                for &s in spec.splits.iter().chain(stationary.iter()) {
                    if s > a && s < b {
                        cuts.push(s);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                let mut basis = vec![0.0; n];
                for seg in cuts.windows(2) {
                    let (u, v) = (seg[0], seg[1]);
                    if v - u <= 0.0 {
                        continue;
                    }
                    let slope = (2.0 * spec.a2 * u + spec.b1).abs().max((2.0 * spec.a2 * v + spec.b1).abs());
                    let m = ((slope * (v - u) / spec.budget).ceil().max(((v - u) / spec.max_sub).ceil())).max(1.0) as usize;
                    let h = (v - u) / m as f64;
                    for j in 0..m {
                        let p = u + j as f64 * h;
                        for &(xg, wg) in gl.iter() {
                            let s = p + 0.5 * h * (xg + 1.0);
                            let win = match spec.window {
                                Some(f) => f(s),
                                None => 1.0,
                            };
                            if win == 0.0 {
                                continue;
                            }
                            // barycentric basis at s
                            let mut den = 0.0;
                            let mut hit = None;
                            for k in 0..n {
                                let dx = s - pts[k];
                                if dx == 0.0 {
                                    hit = Some(k);
                                    break;
                                }
                                basis[k] = self.bary[k] / dx;
                                den += basis[k];
                            }
                            if let Some(k) = hit {
                                basis.iter_mut().for_each(|v| *v = 0.0);
                                basis[k] = 1.0;
                                den = 1.0;
                            }
                            let e = c(0.0, spec.a2 * s * s + spec.b1 * s).exp() * (0.5 * h * wg * win / den);
                            for (r, reg) in spec.regs.iter().enumerate() {
                                let ef = e * reg.factor(s);
                                for k in 0..n {
                                    w[r][k] += ef * basis[k];
                                }
                            }
                        }
                    }
                }
                w
            })
            .collect();
        let mut out = vec![Vec::with_capacity(self.nodes.len()); spec.regs.len()];
        for pw in per_panel {
            for (r, v) in pw.into_iter().enumerate() {
                out[r].extend(v);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    None,
    /// e^{−ελ²}
    Gaussian(f64),
    /// e^{−ελ}
    Exponential(f64),
}

impl Regularizer {
    pub fn factor(&self, s: f64) -> f64 {
        match *self {
            Regularizer::None => 1.0,
            Regularizer::Gaussian(e) => (-e * s * s).exp(),
            Regularizer::Exponential(e) => (-e * s).exp(),
        }
    }

    pub fn factor_complex(&self, s: C64) -> C64 {
        match *self {
            Regularizer::None => c(1.0, 0.0),
            Regularizer::Gaussian(e) => (-e * s * s).exp(),
            Regularizer::Exponential(e) => (-e * s).exp(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::Gaussian(e) | Regularizer::Exponential(e) => e,
        }
    }
}

pub struct PhaseSpec<'a> {
    /// phase aλ² + bλ
    pub a2: f64,
    pub b1: f64,
    pub budget: f64,
    pub gl_nodes: usize,
    pub splits: Vec<f64>,
    pub max_sub: f64,
    pub window: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    pub range: (f64, f64),
    pub regs: Vec<Regularizer>,
}

impl<'a> PhaseSpec<'a> {
    pub fn new(a2: f64, b1: f64, budget: f64) -> Self {
        PhaseSpec {
            a2,
            b1,
            budget,
            gl_nodes: 12,
            splits: vec![],
            max_sub: f64::INFINITY,
            window: None,
            range: (f64::NEG_INFINITY, f64::INFINITY),
            regs: vec![Regularizer::None],
        }
    }
}

/// Polynomial (Neville) extrapolation of I(ε) to ε = 0 over a decreasing schedule; requires the
/// successive differences to shrink (up to a noise floor).
pub fn richardson_to_zero(eps: &[f64], vals: &[C64], floor: f64) -> Result<(C64, f64)> {
    let m = eps.len();
    if m != vals.len() || m < 2 {
        return Err(Error::Invalid("extrapolation needs ≥ 2 matched samples".into()));
    }
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    for w in diffs.windows(2) {
        if w[1] > 1.05 * w[0] + floor {
            return Err(Error::ExtrapolationInstability(format!(
                "ε-sequence differences grow: {:e} → {:e}",
                w[0], w[1]
            )));
        }
    }
    let mut p: Vec<C64> = vals.to_vec();
    let mut prev_top = p[m - 1];
    let mut top = p[m - 1];
    for level in 1..m {
        for i in 0..m - level {
            let (e0, e1) = (eps[i], eps[i + level]);
            p[i] = (p[i + 1] * e0 - p[i] * e1) / (e0 - e1);
        }
        prev_top = top;
        top = p[0];
    }
    Ok((top, (top - prev_top).norm()))
}

/// ∫_Ω f(λ) e^{i(aλ² + bλ)} dλ on a finite Ω = (lo, hi), with e^{−ελ²} regularization over
/// `cfg.epsilon_schedule` extrapolated to ε = 0 and a phase-budget halving check.
pub fn oscillatory_lambda_quadrature(
    f: &(dyn Fn(f64) -> C64 + Sync),
    a2: f64,
    b1: f64,
    omega: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<(C64, f64)> {
    cfg.validate()?;
    let (lo, hi) = omega;
    if !(hi > lo) || !hi.is_finite() {
        return Err(Error::Invalid("omega must be a finite interval".into()));
    }
    let sampler = |l: f64| -> Result<Vec<C64>> { Ok(vec![f(l)]) };
    let mut bps = vec![lo, hi];
    if a2 != 0.0 {
        let s = -b1 / (2.0 * a2);
        if s > lo && s < hi {
            bps.push(s);
        }
    }
    let opts = CacheOptions { rel_tol: (cfg.tol * 1e-3).max(1e-13), max_width: ((hi - lo) / 8.0).max(1e-3), ..Default::default() };
    let cache = NodeCache::build(&sampler, &bps, &opts)?;
    integrate_cached(&cache, 0, a2, b1, cfg, None, Regularizer::Gaussian)
}

/// Integrate one cached component with regularization extrapolation and budget halving.
pub fn integrate_cached(
    cache: &NodeCache,
    comp: usize,
    a2: f64,
    b1: f64,
    cfg: &QuadratureConfig,
    window: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    reg: fn(f64) -> Regularizer,
) -> Result<(C64, f64)> {
    let col: Vec<C64> = cache.values.iter().map(|v| v[comp]).collect();
    let eval = |budget: f64| -> Result<(C64, f64)> {
        let mut spec = PhaseSpec::new(a2, b1, budget);
        spec.window = window;
        spec.regs = cfg.epsilon_schedule.iter().map(|&e| reg(e)).collect();
        let w = cache.weights(&spec);
        let vals: Vec<C64> = w.iter().map(|wr| wr.iter().zip(&col).map(|(a, b)| a * b).sum()).collect();
        let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        richardson_to_zero(&cfg.epsilon_schedule, &vals, 1e-13 * scale + 1e-300)
    };
    let (v1, e1) = eval(cfg.phase_budget)?;
    let (v2, e2) = eval(0.5 * cfg.phase_budget)?;
    Ok((v2, (v2 - v1).norm() + e1.max(e2) + cache_error(cache, comp)))
}

/// Interpolation-error proxy: rel tolerance × ∫|P| over the cache.
fn cache_error(cache: &NodeCache, comp: usize) -> f64 {
    let n = cache.degree;
    let mut acc = 0.0;
    for (p, (a, b)) in cache.panels.iter().enumerate() {
        let m = (0..n).map(|k| cache.values[p * n + k][comp].norm()).fold(0.0, f64::max);
        acc += m * (b - a);
    }
    acc * 1e-10
}

// ---------------------------------------------------------------------------------------------
// kernel engine

/// Node cache of the Stone/Aronszajn–Krein integrand for a family and fixed point sets.
pub struct KernelEngine {
    pub d: usize,
    pub family: ProfileFamily,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub cfg: QuadratureConfig,
    pub lambda_top: f64,
    cache: Option<NodeCache>,
    points: Vec<Vec<f64>>,
    x_idx: Vec<usize>,
    y_idx: Vec<usize>,
    layout: Layout,
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    n: usize,
    np: usize,
    real: bool,
}

impl Layout {
    fn block(&self) -> usize {
        // M (n²), u (n·np), ũ (n·np, complex families only)
        self.n * self.n + self.n * self.np * if self.real { 1 } else { 2 }
    }
    fn width(&self) -> usize {
        self.block() * if self.real { 1 } else { 2 }
    }
    fn m(&self, br: usize, i: usize, j: usize) -> usize {
        br * self.block() + i * self.n + j
    }
    fn u(&self, br: usize, i: usize, p: usize) -> usize {
        br * self.block() + self.n * self.n + i * self.np + p
    }
    fn ut(&self, br: usize, j: usize, p: usize) -> usize {
        if self.real {
            self.u(br, j, p)
        } else {
            br * self.block() + self.n * self.n + self.n * self.np + j * self.np + p
        }
    }
}

fn same_shape(a: &Profile, b: &Profile) -> bool {
    let base = match (&a.base, &b.base) {
        (BaseKind::Gaussian { width: w1 }, BaseKind::Gaussian { width: w2 }) => w1 == w2,
        (BaseKind::ZeroMean { width: w1 }, BaseKind::ZeroMean { width: w2 }) => w1 == w2,
        (BaseKind::BandLimited { table: t1, .. }, BaseKind::BandLimited { table: t2, .. }) => std::sync::Arc::ptr_eq(t1, t2),
        _ => false,
    };
    base && a.k == b.k && a.phase == b.phase
}

/// Borel matrix with reuse across members that are translates of one another.
fn borel_matrix_translated(f: &ProfileFamily, lambda: f64, branch: Branch) -> Result<(nalgebra::DMatrix<C64>, bool)> {
    let n = f.len();
    let all_same = n > 1 && f.members.iter().all(|m| same_shape(m, &f.members[0]));
    if !all_same || f.fourier_disjoint() {
        return borel_matrix_raw(f, lambda, branch);
    }
    let mut memo: Vec<(Vec<f64>, C64)> = vec![];
    let mut m = nalgebra::DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let dt: Vec<f64> = f.members[j].tau.iter().zip(&f.members[i].tau).map(|(a, b)| a - b).collect();
            let hit = memo.iter().find(|(k, _)| k.iter().zip(&dt).all(|(a, b)| (a - b).abs() < 1e-12));
            let v = match hit {
                Some((_, v)) => *v,
                None => {
                    let v = crate::spectral::borel_transform(&f.members[i], &f.members[j], lambda, branch)?.value;
                    memo.push((dt, v));
                    v
                }
            };
            m[(i, j)] = v;
        }
    }
    Ok((m, false))
}

impl KernelEngine {
    pub fn new(family: &ProfileFamily, xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &QuadratureConfig) -> Result<KernelEngine> {
        cfg.validate()?;
        let d = family.dimension().or_else(|| xs.first().map(|x| x.len())).unwrap_or(1);
        if xs.iter().chain(ys).any(|p| p.len() != d) {
            return Err(Error::Invalid("point dimension differs from the family dimension".into()));
        }
        if d > 3 {
            return Err(Error::Invalid("propagator synthesis supports d ≤ 3".into()));
        }
        let mut points: Vec<Vec<f64>> = vec![];
        let mut index_of = |p: &Vec<f64>| -> usize {
            if let Some(i) = points.iter().position(|q| q == p) {
                i
            } else {
                points.push(p.clone());
                points.len() - 1
            }
        };
        let x_idx: Vec<usize> = xs.iter().map(&mut index_of).collect();
        let y_idx: Vec<usize> = ys.iter().map(&mut index_of).collect();
        let active = !family.is_empty() && family.weights.iter().any(|w| *w > 0.0);
        let layout = Layout { n: family.len(), np: points.len(), real: family.is_real() };
        let mut eng = KernelEngine {
            d,
            family: family.clone(),
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            cfg: cfg.clone(),
            lambda_top: 0.0,
            cache: None,
            points,
            x_idx,
            y_idx,
            layout,
        };
        if active {
            eng.build()?;
        }
        Ok(eng)
    }

    fn build(&mut self) -> Result<()> {
        let fam = &self.family;
        let top = fam
            .members
            .iter()
            .map(|m| m.k.iter().map(|v| v * v).sum::<f64>().sqrt() + m.spectral_radius(1e-32))
            .fold(0.0, f64::max)
            .min(self.cfg.lambda_max);
        self.lambda_top = top;
        let l0 = self.cfg.lambda0.min(0.5 * top);
        let mut bps = vec![0.0, top, l0, 0.5 * l0];
        let grade = if self.d == 2 { 24 } else { 8 };
        for k in 2..grade {
            bps.push(l0 * 0.5f64.powi(k));
        }
        for m in &fam.members {
            let kn = m.k.iter().map(|v| v * v).sum::<f64>().sqrt();
            if let Some(r) = m.fourier_radius() {
                for b in [kn - r, kn + r] {
                    if b > 0.0 && b < top {
                        bps.push(b);
                    }
                }
            }
        }
        let layout = self.layout;
        let d = self.d;
        let points = &self.points;
        let sampler = |l: f64| -> Result<Vec<C64>> { sample_integrand(fam, d, points, layout, l) };
        let opts = CacheOptions {
            rel_tol: (self.cfg.tol * 1e-2).clamp(1e-12, 1e-6),
            max_width: 0.5,
            min_width: 1e-10,
            ..Default::default()
        };
        self.cache = Some(NodeCache::build(&sampler, &bps, &opts)?);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.cache.as_ref().map(|c| c.len()).unwrap_or(0)
    }

    /// Integrand of the λ-integral at cached node k for the pair (x_a, y_b), without e^{−itλ²}.
    fn pair_value(&self, vals: &[C64], a: usize, b: usize) -> C64 {
        let l = self.layout;
        let (pa, pb) = (self.x_idx[a], self.y_idx[b]);
        let branch_sum = |br: usize| -> C64 {
            let mut acc = c(0.0, 0.0);
            for i in 0..l.n {
                let ui = vals[l.u(br, i, pa)];
                if ui == c(0.0, 0.0) {
                    continue;
                }
                let mut inner = c(0.0, 0.0);
                for j in 0..l.n {
                    inner += vals[l.m(br, i, j)] * vals[l.ut(br, j, pb)];
                }
                acc += ui * inner;
            }
            acc
        };
        let plus = branch_sum(0);
        let minus = if l.real { plus.conj() } else { branch_sum(1) };
        // −(1/πi)(plus − minus)
        (plus - minus) * c(0.0, 1.0 / PI)
    }

    /// All pair integrands at every node: [pair][node].
    fn pair_table(&self) -> Vec<Vec<C64>> {
        let cache = self.cache.as_ref().unwrap();
        let na = self.xs.len();
        let nb = self.ys.len();
        (0..na * nb)
            .into_par_iter()
            .map(|p| cache.values.iter().map(|v| self.pair_value(v, p / nb, p % nb)).collect())
            .collect()
    }

    /// Kernel samples for every (x, y) pair at time t (row-major in xs × ys).
    pub fn kernel_all(&self, t: f64) -> Result<Vec<KernelSample>> {
        Ok(self.kernel_many(&[t])?.pop().unwrap())
    }

    /// Kernel samples at several times, sharing the pair table.
    pub fn kernel_many(&self, times: &[f64]) -> Result<Vec<Vec<KernelSample>>> {
        if times.iter().any(|t| *t == 0.0 || !t.is_finite()) {
            return Err(Error::Domain("t must be non-zero and finite".into()));
        }
        let na = self.xs.len();
        let nb = self.ys.len();
        let d = self.d;
        // e^{−itH₀} at t < 0 is the adjoint of e^{−i|t|H₀}; its kernel is symmetric
        let free = |t: f64, a: usize, b: usize| -> Result<C64> {
            let v = free_propagator_kernel(d, t.abs(), dist(&self.xs[a], &self.ys[b]))?;
            Ok(if t < 0.0 { v.conj() } else { v })
        };
        let cache = match &self.cache {
            None => {
                return times
                    .iter()
                    .map(|&t| {
                        (0..na * nb)
                            .map(|p| {
                                let (a, b) = (p / nb, p % nb);
                                Ok(KernelSample {
                                    t,
                                    x: pad3(&self.xs[a]),
                                    y: pad3(&self.ys[b]),
                                    diff_value: c(0.0, 0.0),
                                    free_value: free(t, a, b)?,
                                    err_est: 0.0,
                                })
                            })
                            .collect()
                    })
                    .collect()
            }
            Some(c) => c,
        };
        let table = self.pair_table();
        let eps = &self.cfg.epsilon_schedule;
        let l0 = self.cfg.lambda0.min(0.5 * self.lambda_top);
        let chi = move |l: f64| plateau(l / l0);
        let one_minus_chi = move |l: f64| 1.0 - plateau(l / l0);
        let mut out = vec![];
        for &t in times {
            let weight_sets = |budget: f64| -> Vec<Vec<C64>> {
                let mut total: Option<Vec<Vec<C64>>> = None;
                for (win, range) in [
                    (&chi as &(dyn Fn(f64) -> f64 + Sync), (0.0, l0)),
                    (&one_minus_chi as &(dyn Fn(f64) -> f64 + Sync), (0.5 * l0, f64::INFINITY)),
                ] {
                    let mut spec = PhaseSpec::new(-t, 0.0, budget);
                    spec.window = Some(win);
                    spec.range = range;
                    spec.splits = vec![0.5 * l0, l0];
                    spec.regs = eps.iter().map(|&e| Regularizer::Gaussian(e)).collect();
                    let w = cache.weights(&spec);
                    total = Some(match total {
                        None => w,
                        Some(mut acc) => {
                            for (ar, wr) in acc.iter_mut().zip(w) {
                                for (x, y) in ar.iter_mut().zip(wr) {
                                    *x += y;
                                }
                            }
                            acc
                        }
                    });
                }
                total.unwrap()
            };
            let w_coarse = weight_sets(self.cfg.phase_budget);
            let w_fine = weight_sets(0.5 * self.cfg.phase_budget);
            let top = cache.upper();
            let rows: Vec<Result<KernelSample>> = (0..na * nb)
                .into_par_iter()
                .map(|p| {
                    let (a, b) = (p / nb, p % nb);
                    let col = &table[p];
                    let dot = |w: &Vec<Vec<C64>>| -> Vec<C64> {
                        w.iter().map(|wr| wr.iter().zip(col).map(|(x, y)| x * y).sum()).collect()
                    };
                    let vc = dot(&w_coarse);
                    let vf = dot(&w_fine);
                    let scale = vf.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    let floor = 1e-12 * scale + 1e-15 * col.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    let (ic, ec) = richardson_to_zero(eps, &vc, floor)?;
                    let (iv, ef) = richardson_to_zero(eps, &vf, floor)?;
                    let tail_val = col.last().map(|v| v.norm()).unwrap_or(0.0);
                    let tail = tail_val / (2.0 * t.abs() * top);
                    let interp = cache_error_col(cache, col, self.cfg.tol * 1e-2);
                    Ok(KernelSample {
                        t,
                        x: pad3(&self.xs[a]),
                        y: pad3(&self.ys[b]),
                        diff_value: iv,
                        free_value: free(t, a, b)?,
                        err_est: (iv - ic).norm() + ec.max(ef) + tail + interp,
                    })
                })
                .collect();
            out.push(rows.into_iter().collect::<Result<Vec<_>>>()?);
        }
        Ok(out)
    }
}

fn cache_error_col(cache: &NodeCache, col: &[C64], rel: f64) -> f64 {
    let n = cache.degree;
    let mut acc = 0.0;
    for (p, (a, b)) in cache.panels.iter().enumerate() {
        let m = (0..n).map(|k| col[p * n + k].norm()).fold(0.0, f64::max);
        acc += m * (b - a);
    }
    acc * rel.max(1e-12)
}

/// Component vector of the λ-integrand at one node (see [`Layout`]).
fn sample_integrand(fam: &ProfileFamily, d: usize, points: &[Vec<f64>], l: Layout, lambda: f64) -> Result<Vec<C64>> {
    let mut out = vec![c(0.0, 0.0); l.width()];
    let branches: &[Branch] = if l.real { &[Branch::Plus] } else { &[Branch::Plus, Branch::Minus] };
    // d = 1 members with non-zero mean have h ~ 1/λ and G ~ λ near 0: carry s_i = λ on those
    // rows so that λ·G·h·h̃ = Σ (s_i h_i)(λ G_ij/(s_i s_j))(s_j h̃_j) has bounded factors
    let s: Vec<f64> = fam
        .members
        .iter()
        .map(|m| if d == 1 && m.mean().norm_sqr() > 1e-20 { lambda } else { 1.0 })
        .collect();
    for (bi, &br) in branches.iter().enumerate() {
        let (raw, disjoint) = borel_matrix_translated(fam, lambda, br)?;
        // λA for d = 1 keeps the low-energy grouping finite; A otherwise
        let sys = ak_system_from_raw(lambda, br, raw, &fam.weights, disjoint).map_err(|e| match e {
            Error::SingularMatrix { det, .. } => Error::SpectralMargin { lambda, margin: det },
            other => other,
        })?;
        let n = l.n;
        for i in 0..n {
            for j in 0..n {
                let wij = (fam.weights[i] * fam.weights[j]).sqrt();
                // d = 1: (λA)^{−1} = G/λ; d ≥ 2: λG
                let m = sys.g[(i, j)] * (lambda / (s[i] * s[j]));
                out[l.m(bi, i, j)] = m * wij;
            }
        }
        // translates of one shape: h_i(x) = h_0(x − τ_i + τ_0), shared by displacement
        let translates = l.real && n > 1 && fam.members.iter().all(|m| same_shape(m, &fam.members[0]));
        let mut memo: Vec<(Vec<f64>, C64)> = vec![];
        for (i, phi) in fam.members.iter().enumerate() {
            let conj_phi = if l.real { None } else { Some(phi.conj()) };
            if d == 1 && phi.kind() == ProfileKind::BandLimited {
                let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
                let h = convolved_profile_spectral_d1_many(phi, br, lambda, &xs)?;
                let ht = match &conj_phi {
                    Some(cp) => Some(convolved_profile_spectral_d1_many(cp, br, lambda, &xs)?),
                    None => None,
                };
                for p in 0..points.len() {
                    out[l.u(bi, i, p)] = h[p] * s[i];
                    if let Some(ht) = &ht {
                        out[l.ut(bi, i, p)] = ht[p] * s[i];
                    }
                }
                continue;
            }
            for (p, x) in points.iter().enumerate() {
                if translates {
                    let disp: Vec<f64> = x.iter().zip(&phi.tau).map(|(a, b)| a - b).collect();
                    let hit = memo.iter().find(|(k, _)| k.iter().zip(&disp).all(|(a, b)| (a - b).abs() < 1e-12)).map(|e| e.1);
                    let v = match hit {
                        Some(v) => v,
                        None => {
                            let v = convolved_profile(phi, br, lambda, x)?;
                            memo.push((disp, v));
                            v
                        }
                    };
                    out[l.u(bi, i, p)] = v * s[i];
                    continue;
                }
                out[l.u(bi, i, p)] = convolved_profile(phi, br, lambda, x)? * s[i];
                if let Some(cp) = &conj_phi {
                    out[l.ut(bi, i, p)] = convolved_profile(cp, br, lambda, x)? * s[i];
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// public kernels

fn single_sample(f: &ProfileFamily, t: f64, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<KernelSample> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain("t must be non-zero and finite".into()));
    }
    let eng = KernelEngine::new(f, &[x.to_vec()], &[y.to_vec()], cfg)?;
    Ok(eng.kernel_all(t)?.remove(0))
}

pub fn rank_one_difference_kernel(
    phi: &Profile,
    alpha: f64,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &QuadratureConfig,
) -> Result<KernelSample> {
    if !(alpha >= 0.0) {
        return Err(Error::Invalid("alpha must be non-negative".into()));
    }
    single_sample(&ProfileFamily::single(phi.clone(), alpha)?, t, x, y, cfg)
}

pub fn finite_rank_difference_kernel(
    f: &ProfileFamily,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &QuadratureConfig,
) -> Result<KernelSample> {
    single_sample(f, t, x, y, cfg)
}

#[derive(Clone, Debug)]
pub struct TraceClassResult {
    pub sample: KernelSample,
    pub partial_sums: Vec<C64>,
    pub tail_bound: f64,
    pub calibrated_constant: f64,
}

/// Σ_{j ≤ J_max} of rank-one kernels for a Fourier-disjoint family with its tail bound
/// C·Σ_{j > J_max} λ_j (1 + λ_j)^{⌊d/2⌋+1} M_j^{2⌊d/2⌋+6}, M_j = M (L + 2j)^{⌊d/2⌋+1}, where C is
/// calibrated on the computed members.
pub fn trace_class_difference_kernel(
    f: &ProfileFamily,
    t: f64,
    x: &[f64],
    y: &[f64],
    j_max: usize,
    cfg: &QuadratureConfig,
) -> Result<TraceClassResult> {
    if j_max < 1 || j_max > f.len() {
        return Err(Error::Invalid(format!("J_max must lie in 1..={}", f.len())));
    }
    if f.len() > 1 && !f.fourier_disjoint() {
        return Err(Error::Hypothesis("trace-class synthesis needs a Fourier-disjoint family".into()));
    }
    let d = f.dimension().unwrap();
    let hd = (d / 2) as i32;
    let m_base = f.members[0].m_decay;
    let knorm = |j: usize| f.members[j].k.iter().map(|v| v * v).sum::<f64>().sqrt();
    // modulation of schema member j (0-based), continuing the family's spacing past its end
    let step = if f.len() >= 2 { knorm(1) - knorm(0) } else { 2.0 };
    let kj = |j: usize| if j < f.len() { knorm(j) } else { knorm(f.len() - 1) + step * (j + 1 - f.len()) as f64 };
    let mj = |j: usize| m_base * kj(j).max(1.0).powi(hd + 1);
    let size = |lam: f64, j: usize| lam * (1.0 + lam).powi(hd + 1) * mj(j).powi(2 * hd + 6);
    let mut partial = vec![];
    let mut acc = c(0.0, 0.0);
    let mut err = 0.0;
    let mut cal: f64 = 0.0;
    let mut free = c(0.0, 0.0);
    for j in 0..j_max {
        let s = rank_one_difference_kernel(&f.members[j], f.weights[j], t, x, y, cfg)?;
        acc += s.diff_value;
        err += s.err_est;
        free = s.free_value;
        partial.push(acc);
        cal = cal.max(s.diff_value.norm() * t.abs().powf(d as f64 / 2.0) / size(f.weights[j], j));
    }
    // tail of the schema: weights continue as the family's last ratio (2^{−j} for Remark 5.2)
    let ratio = if f.len() >= 2 { f.weights[1] / f.weights[0] } else { 0.5 };
    let mut tail = 0.0;
    let mut j = j_max;
    let mut lam = f.weights[j_max - 1] * ratio;
    loop {
        let term = size(lam, j);
        tail += term;
        if term < 1e-16 * tail || j > j_max + 10_000 {
            break;
        }
        j += 1;
        lam *= ratio;
    }
    let tail_bound = cal * tail * t.abs().powf(-(d as f64) / 2.0);
    Ok(TraceClassResult {
        sample: KernelSample { t, x: pad3(x), y: pad3(y), diff_value: acc, free_value: free, err_est: err },
        partial_sums: partial,
        tail_bound,
        calibrated_constant: cal,
    })
}

/// Free kernel plus the difference kernel.
pub fn full_propagator_kernel(f: &ProfileFamily, t: f64, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<C64> {
    Ok(finite_rank_difference_kernel(f, t, x, y, cfg)?.full_value())
}

/// Free kernel at (t, |x − y|) (re-exported here for callers of the synthesis API).
pub fn free_kernel(d: usize, t: f64, x: &[f64], y: &[f64]) -> Result<C64> {
    free_propagator_kernel(d, t, dist(x, y))
}

/// Free resolvent kernel used by the spatial route (exposed for tests).
pub fn resolvent_kernel(d: usize, branch: Branch, lambda: f64, r: f64) -> Result<C64> {
    free_resolvent_kernel(SpectralPoint::new(d, branch, lambda, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_d1_spectral_convolution_matches_adaptive() {
        let b = crate::profiles::make_band_limited_profile(1, 1.0).unwrap();
        let m = crate::profiles::modulate(&crate::profiles::translate(&b, &[0.4]), &[3.25]);
        let xs = [-4.0, -0.5, 0.0, 1.5, 4.0];
        for p in [&b, &m] {
            for l in [1e-4, 0.3, 1.0, 2.6, 3.25, 4.2, 6.0] {
                for br in Branch::BOTH {
                    let many = convolved_profile_spectral_d1_many(p, br, l, &xs).unwrap();
                    for (x, v) in xs.iter().zip(&many) {
                        let one = convolved_profile_spectral(p, br, l, &[*x]).unwrap();
                        assert!((one - v).norm() <= 1e-10 * one.norm().max(1.0), "{l} {x} {one} {v}");
                    }
                }
            }
        }
    }
    use crate::profiles::*;
    use errorfunctions::ComplexErrorFunctions;

    #[test]
    fn convolution_d1_bound_and_routes() {
        let p = make_gaussian_profile(1, 1.0).unwrap();
        let l1 = p.l1_norm().unwrap();
        for &l in &[0.05, 0.5, 3.0] {
            for &x in &[-2.0, 0.0, 0.7] {
                let a = convolved_profile_spatial(&p, Branch::Plus, l, &[x]).unwrap();
                let b = convolved_profile_spectral(&p, Branch::Plus, l, &[x]).unwrap();
                assert!(a.norm() <= l1 / (2.0 * l) * (1.0 + 1e-12));
                assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()), "{a} {b}");
            }
        }
    }

    #[test]
    fn zero_mean_convolution_bounded_near_zero() {
        let p = make_zero_mean_profile(1, 1.0).unwrap();
        let vals: Vec<f64> =
            [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|&l| convolved_profile(&p, Branch::Plus, l, &[0.3]).unwrap().norm()).collect();
        assert!(vals.iter().all(|v| *v < 2.0), "{vals:?}");
        assert!((vals[3] - vals[2]).abs() < 1e-2);
    }

    #[test]
    fn convolution_d3_gaussian_against_erfc_closed_form() {
        // h(s) = (N w²/(2s)) ∫_0^∞ e^{iλρ}(e^{−(ρ−s)²/2w²} − e^{−(ρ+s)²/2w²}) dρ and
        // ∫_0^∞ e^{iλρ − (ρ−s)²/2w²} dρ = w√(π/2) e^{iλs − λ²w²/2} erfc(−(s + iλw²)/(√2 w)).
        let w: f64 = 1.0;
        let p = make_gaussian_profile(3, w).unwrap();
        let n = (PI * w * w).powf(-0.75);
        for &l in &[0.3, 1.7] {
            for &s in &[0.4, 2.5] {
                let part = |s0: f64| {
                    let z = -c(s0, l * w * w) / (2f64.sqrt() * w);
                    w * (PI / 2.0).sqrt() * c(-l * l * w * w / 2.0, l * s0).exp() * z.erfc()
                };
                let want = (part(s) - part(-s)) * (n * w * w / (2.0 * s));
                let got = convolved_profile_spatial(&p, Branch::Plus, l, &[s, 0.0, 0.0]).unwrap();
                assert!((got - want).norm() < 1e-10, "{got} {want}");
                let spec = convolved_profile_spectral(&p, Branch::Plus, l, &[0.0, s, 0.0]).unwrap();
                assert!((spec - want).norm() < 1e-8, "{spec} {want}");
            }
        }
    }

    #[test]
    fn quadrature_gaussian_fresnel_and_unit() {
        // ∫_0^Λ e^{−λ²} e^{−itλ²} dλ = (√π/2) erf(√(1+it) Λ)/√(1+it)
        let cfg = QuadratureConfig::default();
        let t = 3.0;
        let (v, err) = oscillatory_lambda_quadrature(&|l| c((-l * l).exp(), 0.0), -t, 0.0, (0.0, 8.0), &cfg).unwrap();
        let a = c(1.0, t).sqrt();
        let want = (a * 8.0).erf() / a * (PI.sqrt() / 2.0);
        assert!((v - want).norm() < 1e-10, "{v} {want} {err}");
        // ∫_0^Λ e^{i(−tλ² + rλ)} dλ via erf of complex argument
        let (t, r, cap) = (2.0, 1.5, 6.0);
        let (v, _) = oscillatory_lambda_quadrature(&|_| c(1.0, 0.0), -t, r, (0.0, cap), &cfg).unwrap();
        // −tλ² + rλ = −t(λ − r/2t)² + r²/4t; ∫ e^{−it u²} du = √π/(2√(it)) erf(√(it) u)
        let s = c(0.0, t).sqrt();
        let shift = r / (2.0 * t);
        let want = c(0.0, r * r / (4.0 * t)).exp() * (PI.sqrt() / (2.0 * s)) * ((s * (cap - shift)).erf() - (s * (-shift)).erf());
        assert!((v - want).norm() < 1e-10, "{v} {want}");
        let mut half = cfg.clone();
        half.phase_budget /= 2.0;
        let (v2, _) = oscillatory_lambda_quadrature(&|_| c(1.0, 0.0), -t, r, (0.0, cap), &half).unwrap();
        assert!((v - v2).norm() < 1e-8);
    }

    #[test]
    fn richardson_examples() {
        let eps = [4e-4, 2e-4, 1e-4];
        let vals: Vec<C64> = eps.iter().map(|e| c(1.0 + 3.0 * e + 5.0 * e * e, 0.0)).collect();
        let (v, _) = richardson_to_zero(&eps, &vals, 0.0).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
        let bad = [c(1.0, 0.0), c(1.1, 0.0), c(0.5, 0.0)];
        assert!(matches!(richardson_to_zero(&eps, &bad, 0.0), Err(Error::ExtrapolationInstability(_))));
    }

    #[test]
    fn empty_and_zero_alpha_give_zero() {
        let p = make_gaussian_profile(1, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let s = rank_one_difference_kernel(&p, 0.0, 1.0, &[0.5], &[-0.5], &cfg).unwrap();
        assert_eq!(s.diff_value, c(0.0, 0.0));
        let s = finite_rank_difference_kernel(&ProfileFamily::empty(), 1.0, &[0.5], &[-0.5], &cfg).unwrap();
        assert_eq!(s.diff_value, c(0.0, 0.0));
        assert_eq!(s.full_value(), free_kernel(1, 1.0, &[0.5], &[-0.5]).unwrap());
    }

    #[test]
    fn rank_one_symmetry_and_self_consistency() {
        let p = make_gaussian_profile(1, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let fam = ProfileFamily::single(p, 1.0).unwrap();
        let xs = vec![vec![0.5], vec![-0.5]];
        let eng = KernelEngine::new(&fam, &xs, &xs, &cfg).unwrap();
        let k = eng.kernel_all(2.0).unwrap();
        assert!((k[1].diff_value - k[2].diff_value).norm() < 1e-9);
        assert!(k.iter().all(|s| s.err_est < 1e-6 * s.diff_value.norm().max(1e-3)));
        let mut wide = cfg.clone();
        wide.lambda_max = 128.0;
        wide.phase_budget /= 2.0;
        let e2 = KernelEngine::new(&fam, &xs, &xs, &wide).unwrap();
        let k2 = e2.kernel_all(2.0).unwrap();
        for (a, b) in k.iter().zip(&k2) {
            assert!((a.diff_value - b.diff_value).norm() <= a.err_est.max(1e-10) + b.err_est);
        }
    }
}
