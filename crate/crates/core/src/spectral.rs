//! Borel transforms F±(λ²), the Aronszajn–Krein matrix system A± = I + F, its inverses,
//! spectral-condition scans, cross-term probes and resolvent application.

use crate::error::{Error, Result};
use crate::kernels::free_resolvent_kernel_complex;
use crate::profiles::{Profile, ProfileFamily};
use crate::propagator::convolved_profile_spatial;
use crate::quadrature::{adaptive, gauss_legendre, AdaptiveOptions};
use crate::special::bessel_j;
use crate::{c, Branch, C64, I};
use nalgebra::DMatrix;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BorelMethod {
    RadialPv,
    PositionSpace,
}

#[derive(Clone, Copy, Debug)]
pub struct BorelValue {
    pub lambda: f64,
    pub branch: Branch,
    pub value: C64,
    pub method: BorelMethod,
}

/// ∫_{S^{d−1}} e^{−iρω·v} dω as a function of z = ρ|v|.
pub fn sphere_plane_wave(d: usize, z: f64) -> f64 {
    match d {
        1 => 2.0 * z.cos(),
        2 => 2.0 * PI * bessel_j(0.0, z),
        _ => 4.0 * PI * if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z },
    }
}

/// ∫_{S^{d−1}} f(ω) dω: two points (d = 1), trapezoid on the circle (d = 2), Gauss–Legendre in
/// cos θ × trapezoid in the azimuth (d = 3); resolution doubled until stable.
pub fn sphere_integral(d: usize, f: &dyn Fn(&[f64]) -> C64) -> Result<C64> {
    match d {
        1 => Ok(f(&[1.0]) + f(&[-1.0])),
        2 => {
            let rule = |n: usize| -> C64 {
                let mut acc = c(0.0, 0.0);
                for k in 0..n {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    acc += f(&[th.cos(), th.sin()]);
                }
                acc * (2.0 * PI / n as f64)
            };
            converge_doubling(rule, 32, 16384)
        }
        3 => {
            let rule = |m: usize| -> C64 {
                let gl = gauss_legendre(m);
                let na = 2 * m;
                let mut acc = c(0.0, 0.0);
                for &(u, w) in gl.iter() {
                    let s = (1.0 - u * u).sqrt();
                    let mut ring = c(0.0, 0.0);
                    for k in 0..na {
                        let ph = 2.0 * PI * k as f64 / na as f64;
                        ring += f(&[s * ph.cos(), s * ph.sin(), u]);
                    }
                    acc += ring * (w * 2.0 * PI / na as f64);
                }
                acc
            };
            converge_doubling(rule, 12, 768)
        }
        _ => Err(Error::Invalid(format!("sphere quadrature supports d ≤ 3, got {d}"))),
    }
}

fn converge_doubling(rule: impl Fn(usize) -> C64, start: usize, max: usize) -> Result<C64> {
    let mut n = start;
    let mut prev = rule(n);
    while n < max {
        n *= 2;
        let next = rule(n);
        let diff = (next - prev).norm();
        if diff <= 1e-14 * next.norm().max(1e-300) || diff < 1e-300 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonconvergence {
        a: 0.0,
        b: 0.0,
        estimate: prev.norm(),
        tol: 1e-14,
        evaluations: n,
    })
}

fn pv_opts() -> AdaptiveOptions {
    AdaptiveOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 6000 }
}

/// P.V.∫₀^R g(ρ)/(ρ² − λ²) dρ ± iπ g(λ)/(2λ), with g supported (numerically) in [0, R].
/// The pole is removed by subtracting g(λ) and adding the closed-form log term.
pub fn radial_pv(
    g: &dyn Fn(f64) -> C64,
    lambda: f64,
    rmax: f64,
    branch: Branch,
    breakpoints: &[f64],
) -> Result<C64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let mut bps: Vec<f64> = breakpoints.iter().cloned().filter(|b| *b > 0.0 && *b < rmax).collect();
    let gl = if lambda < rmax { g(lambda) } else { c(0.0, 0.0) };
    if lambda >= rmax {
        let (v, _) = adaptive(|r| g(r) / (r * r - lambda * lambda), 0.0, rmax, &bps, pv_opts())?;
        return Ok(v);
    }
    bps.push(lambda);
    bps.sort_by(f64::total_cmp);
    let l2 = lambda * lambda;
    let (smooth, err) = adaptive(
        |r| {
            let dr = r - lambda;
            if dr == 0.0 {
                return c(0.0, 0.0);
            }
            (g(r) - gl) / (dr * (r + lambda))
        },
        0.0,
        rmax,
        &bps,
        AdaptiveOptions { abs_tol: pv_opts().abs_tol.max(1e-13 * PI * gl.norm() / (2.0 * lambda)), ..pv_opts() },
    )
    .map_err(|e| match e {
        Error::QuadratureNonconvergence { estimate, .. } => Error::PrincipalValue {
            lambda,
            detail: format!("subtracted integrand did not converge (estimate {estimate:e})"),
        },
        other => other,
    })?;
    if !err.is_finite() {
        return Err(Error::PrincipalValue { lambda, detail: "non-finite error estimate".into() });
    }
    let log_term = ((rmax - lambda) / (rmax + lambda)).abs().ln() / (2.0 * lambda);
    let _ = l2;
    Ok(smooth + gl * log_term + branch.sign() * I * PI * gl / (2.0 * lambda))
}

/// Radius beyond which the product φ̂_j·conj(φ̂_i) is negligible.
fn product_radius(a: &Profile, b: &Profile) -> f64 {
    let ra = norm(&a.k) + a.spectral_radius(1e-34);
    let rb = norm(&b.k) + b.spectral_radius(1e-34);
    ra.min(rb)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn support_breakpoints(ps: &[&Profile]) -> Vec<f64> {
    let mut out = vec![];
    for p in ps {
        let k = norm(&p.k);
        if let Some(r) = p.fourier_radius() {
            out.push(k + r);
            if k > r {
                out.push(k - r);
            }
        } else if k > 0.0 {
            out.push(k);
        }
    }
    out
}

/// ρ^{d−1} ∫_{S^{d−1}} φ̂_j(ρω) conj(φ̂_i(ρω)) dω.
fn spectral_density(phi_i: &Profile, phi_j: &Profile, rho: f64) -> Result<C64> {
    let d = phi_i.d;
    let jac = rho.powi(d as i32 - 1);
    if let (Some(ti), Some(tj)) = (phi_i.radial_center(), phi_j.radial_center()) {
        let dt: Vec<f64> = tj.iter().zip(ti).map(|(a, b)| a - b).collect();
        let w = sphere_plane_wave(d, rho * norm(&dt));
        let amp = phi_j.base_fourier_radial(rho) * phi_i.base_fourier_radial(rho);
        return Ok(phi_j.phase * phi_i.phase.conj() * (jac * amp * w));
    }
    let f = |om: &[f64]| {
        let xi: Vec<f64> = om.iter().map(|o| o * rho).collect();
        phi_j.fourier_transform(&xi) * phi_i.fourier_transform(&xi).conj()
    };
    Ok(sphere_integral(d, &f)? * jac)
}

/// Unmodulated d = 3 Gaussians of one width w: conj φ_i ⋆ φ_j is the Gaussian
/// e^{−|z − δ|²/4w²} (δ the center offset), so F is a single radial convolution evaluated at 0,
/// free of the sin(ρ|δ|) oscillation of the spectral route.
fn gaussian_pair_d3(phi_i: &Profile, phi_j: &Profile, lambda: f64, branch: Branch) -> Option<Result<C64>> {
    let (crate::profiles::BaseKind::Gaussian { width: wi }, crate::profiles::BaseKind::Gaussian { width: wj }) = (&phi_i.base, &phi_j.base) else {
        return None;
    };
    if phi_i.d != 3 || wi != wj || phi_i.radial_center().is_none() || phi_j.radial_center().is_none() {
        return None;
    }
    let w = *wi;
    let delta: Vec<f64> = phi_i.tau.iter().zip(&phi_j.tau).map(|(a, b)| a - b).collect();
    let g = match crate::profiles::make_gaussian_profile(3, 2f64.sqrt() * w) {
        Ok(g) => crate::profiles::translate(&g, &delta),
        Err(e) => return Some(Err(e)),
    };
    let amp = phi_i.phase.conj() * phi_j.phase * (2.0 * PI * w * w).powf(0.75);
    Some(convolved_profile_spatial(&g, branch, lambda, &[0.0; 3]).map(|v| v * amp))
}

/// ⟨R₀±(λ²)φ_j, φ_i⟩ by the radial principal-value route.
pub fn borel_transform(phi_i: &Profile, phi_j: &Profile, lambda: f64, branch: Branch) -> Result<BorelValue> {
    if phi_i.d != phi_j.d {
        return Err(Error::Invalid("profiles of different dimension".into()));
    }
    if let Some(value) = gaussian_pair_d3(phi_i, phi_j, lambda, branch) {
        return Ok(BorelValue { lambda, branch, value: value?, method: BorelMethod::RadialPv });
    }
    if let Some(value) = band_limited_pair_d1(phi_i, phi_j, lambda, branch) {
        return Ok(BorelValue { lambda, branch, value: value?, method: BorelMethod::RadialPv });
    }
    borel_transform_pv(phi_i, phi_j, lambda, branch)
}

/// d = 1 band-limited pairs: G(ρ) = Σ± φ̂_j(±ρ) conj φ̂_i(±ρ) has compact support, so one shared
/// composite rule replaces adaptive refinement.
fn band_limited_pair_d1(phi_i: &Profile, phi_j: &Profile, lambda: f64, branch: Branch) -> Option<Result<C64>> {
    let (1, Some(ri), Some(rj)) = (phi_i.d, phi_i.fourier_radius(), phi_j.fourier_radius()) else {
        return None;
    };
    let (ki, kj) = (phi_i.k[0].abs(), phi_j.k[0].abs());
    let a = (ki - ri).max(kj - rj).max(0.0);
    let b = (ki + ri).min(kj + rj);
    if !(b > a) {
        return Some(Ok(c(0.0, 0.0)));
    }
    let shift = (phi_i.tau[0] - phi_j.tau[0]).abs();
    let rule = match crate::propagator::PvRule::new(lambda, (a, b), (ri.min(rj) / 16.0).min(4.0 / shift.max(1e-300))) {
        Ok(r) => r,
        Err(e) => return Some(Err(e)),
    };
    let g = |rho: f64| phi_j.fourier_transform(&[rho]) * phi_i.fourier_transform(&[rho]).conj() + phi_j.fourier_transform(&[-rho]) * phi_i.fourier_transform(&[-rho]).conj();
    Some(Ok(rule.apply(branch, g(lambda), rule.nodes.iter().map(|&(rho, _)| g(rho)))))
}

/// The radial principal-value route for any pair.
pub fn borel_transform_pv(phi_i: &Profile, phi_j: &Profile, lambda: f64, branch: Branch) -> Result<BorelValue> {
    let rmax = product_radius(phi_i, phi_j);
    let failure = std::cell::RefCell::new(None);
    let g = |r: f64| match spectral_density(phi_i, phi_j, r) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            c(0.0, 0.0)
        }
    };
    let bps = support_breakpoints(&[phi_i, phi_j]);
    let value = radial_pv(&g, lambda, rmax, branch, &bps)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(BorelValue { lambda, branch, value, method: BorelMethod::RadialPv })
}

/// Independent position-space route ∬ R₀±(λ², |x − y|) φ_j(y) conj(φ_i(x)) dy dx.
/// Supports d = 1 and concentric radial profiles in d = 2, 3.
pub fn borel_transform_position(
    phi_i: &Profile,
    phi_j: &Profile,
    lambda: f64,
    branch: Branch,
) -> Result<BorelValue> {
    let d = phi_i.d;
    let opts = AdaptiveOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 };
    let failure = std::cell::RefCell::new(None);
    let h = |x: &[f64]| match convolved_profile_spatial(phi_j, branch, lambda, x) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            c(0.0, 0.0)
        }
    };
    let value = if d == 1 {
        let r = phi_i.spatial_radius(1e-14);
        let t = phi_i.tau[0];
        adaptive(|x| h(&[x]) * phi_i.eval(&[x]).conj(), t - r, t + r, &[t], opts)?.0
    } else {
        let (ti, tj) = match (phi_i.radial_center(), phi_j.radial_center()) {
            (Some(a), Some(b)) if a == b => (a.to_vec(), b),
            _ => {
                return Err(Error::Invalid(
                    "position-space route needs d = 1 or concentric radial profiles".into(),
                ))
            }
        };
        let _ = tj;
        let r = phi_i.spatial_radius(1e-14);
        let area = if d == 2 { 2.0 * PI } else { 4.0 * PI };
        adaptive(
            |s| {
                let mut x = ti.clone();
                x[0] += s;
                h(&x) * phi_i.eval(&x).conj() * (area * s.powi(d as i32 - 1))
            },
            0.0,
            r,
            &[],
            opts,
        )?
        .0
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(BorelValue { lambda, branch, value, method: BorelMethod::PositionSpace })
}

#[derive(Clone, Debug)]
pub struct AKSystem {
    pub lambda: f64,
    pub branch: Branch,
    /// Raw Borel matrix f_ij = ⟨R₀±φ_j, φ_i⟩.
    pub f_raw: DMatrix<C64>,
    /// Weighted matrix √α_i √α_j f_ij.
    pub f: DMatrix<C64>,
    pub a: DMatrix<C64>,
    pub g: DMatrix<C64>,
    pub det_a: C64,
    pub margin: f64,
    pub dominance_margin: f64,
    pub diagonal_fast_path: bool,
}

impl AKSystem {
    /// ‖G·A − I‖_∞ (max row sum).
    pub fn inverse_residual(&self) -> f64 {
        let n = self.a.nrows();
        let r = &self.g * &self.a - DMatrix::<C64>::identity(n, n);
        row_sum_norm(&r)
    }
}

pub fn row_sum_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Assemble and invert A = I + W^{1/2} F W^{1/2} from a raw Borel matrix.
pub fn ak_system_from_raw(
    lambda: f64,
    branch: Branch,
    f_raw: DMatrix<C64>,
    weights: &[f64],
    diagonal_fast_path: bool,
) -> Result<AKSystem> {
    let n = f_raw.nrows();
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let f = DMatrix::from_fn(n, n, |i, j| f_raw[(i, j)] * (sw[i] * sw[j]));
    let a = DMatrix::<C64>::identity(n, n) + &f;
    let det_a = if n == 0 { c(1.0, 0.0) } else { a.clone().lu().determinant() };
    let margin = det_a.norm();
    let dominance_margin = (0..n)
        .map(|i| a[(i, i)].norm() - (0..n).filter(|&j| j != i).map(|j| f[(i, j)].norm()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let dominance_margin = if n == 0 { 1.0 } else { dominance_margin };
    if margin < 1e-12 {
        return Err(Error::SingularMatrix { lambda, det: margin, minor: worst_minor(&a) });
    }
    let g = if diagonal_fast_path {
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / a[(i, i)] } else { c(0.0, 0.0) })
    } else {
        a.clone().try_inverse().ok_or(Error::SingularMatrix { lambda, det: margin, minor: worst_minor(&a) })?
    };
    Ok(AKSystem { lambda, branch, f_raw, f, a, g, det_a, margin, dominance_margin, diagonal_fast_path })
}

/// Indices of the leading principal minor with the smallest |det|.
fn worst_minor(a: &DMatrix<C64>) -> Vec<usize> {
    let n = a.nrows();
    let mut best = (f64::INFINITY, 0);
    for k in 1..=n {
        let m = a.view((0, 0), (k, k)).clone_owned();
        let d = m.lu().determinant().norm();
        if d < best.0 {
            best = (d, k);
        }
    }
    (0..best.1).collect()
}

/// Raw Borel matrix of a family at (λ, branch); off-diagonals are exact zeros when the family
/// carries a Fourier-disjointness certificate.
pub fn borel_matrix_raw(f: &ProfileFamily, lambda: f64, branch: Branch) -> Result<(DMatrix<C64>, bool)> {
    let n = f.len();
    let disjoint = f.fourier_disjoint();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if disjoint && i != j {
                continue;
            }
            m[(i, j)] = borel_transform(&f.members[i], &f.members[j], lambda, branch)?.value;
        }
    }
    Ok((m, disjoint))
}

pub fn borel_matrix(f: &ProfileFamily, lambda: f64, branch: Branch) -> Result<AKSystem> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let (raw, disjoint) = borel_matrix_raw(f, lambda, branch)?;
    ak_system_from_raw(lambda, branch, raw, &f.weights, disjoint)
}

#[derive(Clone, Debug)]
pub struct NeumannExpansion {
    pub g_phi: C64,
    pub f_tau0: DMatrix<C64>,
    pub terms_used: usize,
    pub radius_bound: f64,
    pub inverse: DMatrix<C64>,
}

/// G = g_φ Σ_n (−g_φ F_{τ0})^n for a system whose diagonal entries coincide.
pub fn ak_inverse_neumann(sys: &AKSystem) -> Result<NeumannExpansion> {
    let n = sys.a.nrows();
    if n == 0 {
        return Err(Error::Invalid("empty system".into()));
    }
    let a11 = sys.a[(0, 0)];
    for i in 1..n {
        if (sys.a[(i, i)] - a11).norm() > 1e-8 * a11.norm() {
            return Err(Error::Invalid("diagonal entries differ; not a translated family".into()));
        }
    }
    let g_phi = 1.0 / a11;
    let f_tau0 = DMatrix::from_fn(n, n, |i, j| if i == j { c(0.0, 0.0) } else { sys.f[(i, j)] });
    let step = &f_tau0 * (-g_phi);
    let radius_bound = row_sum_norm(&step);
    if radius_bound >= 1.0 {
        return Err(Error::Divergence { radius: radius_bound });
    }
    let mut term = DMatrix::<C64>::identity(n, n) * g_phi;
    let mut sum = term.clone();
    let mut terms_used = 1;
    while terms_used < 10_000 {
        term = &term * &step;
        if row_sum_norm(&term) <= 1e-12 * g_phi.norm().min(1.0) {
            break;
        }
        sum += &term;
        terms_used += 1;
    }
    Ok(NeumannExpansion { g_phi, f_tau0, terms_used, radius_bound, inverse: sum })
}

#[derive(Clone, Debug)]
pub struct ScanRow {
    pub lambda: f64,
    pub branch: Branch,
    pub margin: f64,
    pub dominance_margin: f64,
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub c0_est: f64,
    pub argmin_lambda: f64,
    pub argmin_branch: Branch,
    pub rows: Vec<ScanRow>,
}

/// min over the grid and both branches of |det(I + F̃±)|.
pub fn spectral_condition_scan(f: &ProfileFamily, lambda_grid: &[f64]) -> Result<ScanReport> {
    if lambda_grid.iter().any(|l| !(*l > 0.0)) || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("lambda grid must be positive and strictly increasing".into()));
    }
    let mut rows = vec![];
    let mut best = (f64::INFINITY, lambda_grid.first().cloned().unwrap_or(0.0), Branch::Plus);
    for &l in lambda_grid {
        for br in Branch::BOTH {
            let (margin, dominance_margin) = if f.is_empty() || f.weights.iter().all(|w| *w == 0.0) {
                (1.0, 1.0)
            } else {
                let (raw, disjoint) = borel_matrix_raw(f, l, br)?;
                match ak_system_from_raw(l, br, raw, &f.weights, disjoint) {
                    Ok(s) => (s.margin, s.dominance_margin),
                    Err(Error::SingularMatrix { det, .. }) => (det, f64::NEG_INFINITY),
                    Err(e) => return Err(e),
                }
            };
            if margin < best.0 {
                best = (margin, l, br);
            }
            rows.push(ScanRow { lambda: l, branch: br, margin, dominance_margin });
        }
    }
    Ok(ScanReport { c0_est: best.0, argmin_lambda: best.1, argmin_branch: best.2, rows })
}

/// Per-member rank-one margins min_λ |1 + α_j f_jj±(λ²)|.
pub fn member_margins(f: &ProfileFamily, lambda_grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![f64::INFINITY; f.len()];
    for (j, p) in f.members.iter().enumerate() {
        for &l in lambda_grid {
            for br in Branch::BOTH {
                let v = borel_transform(p, p, l, br)?.value;
                out[j] = out[j].min((1.0 + f.weights[j] * v).norm());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CrossTermReport {
    pub tau0: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
}

/// |⟨R₀±(λ²)φ(· − τ0 e₁), φ⟩| for each τ0 and the log-log slope (over τ0 > 0).
pub fn cross_term_decay_probe(phi: &Profile, tau0_list: &[f64], lambda: f64, branch: Branch) -> Result<CrossTermReport> {
    if tau0_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("tau0 list must be increasing".into()));
    }
    let mut values = vec![];
    for &t in tau0_list {
        let mut shift = vec![0.0; phi.d];
        shift[0] = t;
        let moved = crate::profiles::translate(phi, &shift);
        values.push(borel_transform(phi, &moved, lambda, branch)?.value.norm());
    }
    let pts: Vec<(f64, f64)> =
        tau0_list.iter().zip(&values).filter(|(t, v)| **t > 0.0 && **v > 0.0).map(|(t, v)| (t.ln(), v.ln())).collect();
    Ok(CrossTermReport { tau0: tau0_list.to_vec(), values, slope: ls_slope(&pts) })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Largest λ0 = 2^{−k} (k ≥ 1) below which the leading low-energy behaviour of F± is attained
/// within 25% on a dyadic sub-scan down to λ0/64.
pub fn select_lambda0(phi: &Profile) -> Result<f64> {
    let d = phi.d;
    let m = phi.mean();
    let msq = m.norm_sqr();
    let zero_mean = msq < 1e-20;
    let holds = |l: f64| -> Result<bool> {
        let f = borel_transform(phi, phi, l, Branch::Plus)?.value;
        Ok(match (d, zero_mean) {
            (1, false) => ((f * l * 2.0 / (I * msq)) - 1.0).norm() <= 0.25,
            (2, false) => {
                let r = f.re / (msq / (2.0 * PI) * (1.0 / l).ln());
                (0.75..=1.25).contains(&r)
            }
            _ => {
                let f0 = borel_transform(phi, phi, l / 64.0, Branch::Plus)?.value;
                (f - f0).norm() <= 0.25 * f0.norm() && f0.re > 0.0
            }
        })
    };
    let mut l0 = 0.5;
    while l0 > 1e-4 {
        let mut ok = true;
        let mut s = l0;
        while s >= l0 / 64.0 {
            if !holds(s)? {
                ok = false;
                break;
            }
            s /= 2.0;
        }
        if ok {
            return Ok(l0);
        }
        l0 /= 2.0;
    }
    Ok(l0)
}

/// Empirical spreading threshold: the smallest τ0 with (N − 1)·α·max_λ|f₁₂(τ0)| ≤ c0/2, using
/// |f₁₂(τ)| ≈ |f₁₂(τ_ref)|·(τ_ref/τ)^{(d−1)/2} from a measurement at τ_ref.
pub fn tau0_threshold(phi: &Profile, alpha: f64, n: usize, lambda_grid: &[f64], tau_ref: f64) -> Result<f64> {
    let d = phi.d;
    if d < 2 {
        return Err(Error::Invalid("cross terms do not decay in d = 1".into()));
    }
    let fam = ProfileFamily::single(phi.clone(), alpha)?;
    let c0 = spectral_condition_scan(&fam, lambda_grid)?.c0_est;
    let mut shift = vec![0.0; d];
    shift[0] = tau_ref;
    let moved = crate::profiles::translate(phi, &shift);
    let mut f12: f64 = 0.0;
    for &l in lambda_grid {
        for br in Branch::BOTH {
            f12 = f12.max(borel_transform(phi, &moved, l, br)?.value.norm());
        }
    }
    let need = 2.0 * (n.saturating_sub(1)) as f64 * alpha * f12 / c0;
    if need <= 1.0 {
        return Ok(tau_ref);
    }
    Ok(tau_ref * need.powf(2.0 / (d as f64 - 1.0)))
}

/// Smallest L on a quarter-step ladder from 1 with |F±(λ²)| < 1/2 for every sampled λ ∈ (L, L + 40].
pub fn remark52_offset(phi: &Profile) -> Result<f64> {
    let mut l = 1.0;
    while l <= 64.0 {
        let mut ok = true;
        'scan: for i in 1..=160 {
            let lam = l + 0.25 * i as f64;
            for br in Branch::BOTH {
                if borel_transform(phi, phi, lam, br)?.value.norm() >= 0.5 {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if ok {
            return Ok(l);
        }
        l += 0.25;
    }
    Err(Error::Hypothesis("no offset L ≤ 64 keeps |F±| below 1/2".into()))
}

/// φ_j = e^{i(L+2j)x₁}φ with weights 2^{−j}, j = 1..=n, for a real φ with Fourier support in the
/// unit ball.
pub fn remark52_family(phi: &Profile, n: usize) -> Result<ProfileFamily> {
    if !phi.is_real() || phi.fourier_radius().map(|r| r > 1.0 + 1e-12).unwrap_or(true) {
        return Err(Error::Hypothesis("needs a real profile with Fourier support in B(0, 1)".into()));
    }
    let l = remark52_offset(phi)?;
    ProfileFamily::modulated(phi, l, 1, n, (1..=n).map(|j| 0.5f64.powi(j as i32)).collect())
}

/// A function sampled on the uniform d = 1 grid x_m = x0 + m h.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn sample(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> C64) -> GridFunction {
        GridFunction { x0, h, values: (0..n).map(|m| f(x0 + m as f64 * h)).collect() }
    }

    pub fn x(&self, m: usize) -> f64 {
        self.x0 + m as f64 * self.h
    }

    pub fn dot(&self, other: &GridFunction) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<C64>() * self.h
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).re.sqrt()
    }
}

fn free_apply_1d(z: C64, g: &GridFunction) -> Result<Vec<C64>> {
    let n = g.values.len();
    let kern: Vec<C64> =
        (0..n).map(|m| free_resolvent_kernel_complex(1, z, m as f64 * g.h)).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|m| {
            let mut acc = c(0.0, 0.0);
            for (j, v) in g.values.iter().enumerate() {
                acc += kern[m.abs_diff(j)] * v;
            }
            acc * g.h
        })
        .collect())
}

/// R(z)g = R₀(z)g − Σ √α_i√α_j G_ij(z) R₀(z)φ_i ⟨R₀(z)g, φ_j⟩ on a d = 1 grid, with every inner
/// product taken as the grid sum so that the identity holds for the discretized operator.
pub fn resolvent_apply(f: &ProfileFamily, z: C64, g: &GridFunction) -> Result<GridFunction> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::Domain("z must lie off [0, ∞)".into()));
    }
    if f.dimension().unwrap_or(1) != 1 {
        return Err(Error::Invalid("resolvent_apply is implemented on d = 1 grids".into()));
    }
    let n = g.values.len();
    let r0g = free_apply_1d(z, g)?;
    if f.is_empty() {
        return Ok(GridFunction { x0: g.x0, h: g.h, values: r0g });
    }
    let samples: Vec<GridFunction> =
        f.members.iter().map(|p| GridFunction::sample(g.x0, g.h, n, |x| p.eval(&[x]))).collect();
    let r0phi: Vec<GridFunction> = samples
        .iter()
        .map(|s| Ok(GridFunction { x0: g.x0, h: g.h, values: free_apply_1d(z, s)? }))
        .collect::<Result<_>>()?;
    let nn = f.len();
    let raw = DMatrix::from_fn(nn, nn, |i, j| r0phi[j].dot(&samples[i]));
    let sys = ak_system_from_raw(0.0, Branch::Plus, raw, &f.weights, false)
        .map_err(|e| match e {
            Error::SingularMatrix { det, minor, .. } => Error::SingularMatrix { lambda: z.norm().sqrt(), det, minor },
            other => other,
        })?;
    let u = GridFunction { x0: g.x0, h: g.h, values: r0g };
    let proj: Vec<C64> = samples.iter().map(|s| u.dot(s)).collect();
    let mut out = u.values.clone();
    for i in 0..nn {
        for j in 0..nn {
            let coef = sys.g[(i, j)] * (f.weights[i] * f.weights[j]).sqrt() * proj[j];
            for (o, v) in out.iter_mut().zip(&r0phi[i].values) {
                *o -= coef * v;
            }
        }
    }
    Ok(GridFunction { x0: g.x0, h: g.h, values: out })
}

/// Relative residual ‖(H − z)u − g‖/‖g‖ at interior nodes, with −Δ by second differences and
/// the projections as grid sums.
pub fn resolvent_residual(f: &ProfileFamily, z: C64, g: &GridFunction, u: &GridFunction) -> f64 {
    let n = g.values.len();
    let h = g.h;
    let samples: Vec<Vec<C64>> = f.members.iter().map(|p| (0..n).map(|m| p.eval(&[g.x(m)])).collect()).collect();
    let proj: Vec<C64> =
        samples.iter().map(|s| u.values.iter().zip(s).map(|(a, b)| a * b.conj()).sum::<C64>() * h).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for m in 1..n - 1 {
        let lap = (u.values[m + 1] - 2.0 * u.values[m] + u.values[m - 1]) / (h * h);
        let mut hv = -lap - z * u.values[m];
        for (j, s) in samples.iter().enumerate() {
            hv += f.weights[j] * proj[j] * s[m];
        }
        num += (hv - g.values[m]).norm_sqr();
        den += g.values[m].norm_sqr();
    }
    (num / den).sqrt()
}
