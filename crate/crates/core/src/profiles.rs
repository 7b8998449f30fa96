//! Perturbation profiles φ: normalized Gaussian, zero-mean (odd Gaussian derivative) and
//! band-limited (smooth Fourier bump) bases, with translation and modulation, plus families.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, adaptive_box, gauss_legendre, AdaptiveOptions};
use crate::special::bessel_j;
use crate::{c, C64, I};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::sync::Arc;

/// Radial inverse-transform table of the band-limited bump.
#[derive(Debug)]
pub struct BandTable {
    d: usize,
    radius: f64,
    norm: f64,
    step: f64,
    values: Vec<f64>,
}

fn unit_bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d),
    }
}

fn gamma_half(d: usize) -> f64 {
    // Γ(d/2)
    let mut g = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

impl BandTable {
    const PANELS: usize = 24;
    const NODES: usize = 32;

    fn new(d: usize, radius: f64) -> BandTable {
        // normalization: ∫|φ̂|² = |S^{d−1}| ρ^d ∫_0^1 s^{d−1} e^{−2/(1−s²)} ds = 1
        let mut acc = 0.0;
        for (s, w) in Self::composite(Self::PANELS) {
            let b = unit_bump(s * s);
            acc += w * s.powi(d as i32 - 1) * b * b;
        }
        let norm = 1.0 / (sphere_area(d) * radius.powi(d as i32) * acc).sqrt();
        let step = 0.04 / radius;
        let rmax = 160.0 / radius;
        let n = (rmax / step).ceil() as usize + 8;
        let mut table = BandTable { d, radius, norm, step, values: Vec::new() };
        table.values = (0..n).map(|j| table.direct(j as f64 * step)).collect();
        table
    }

    /// Composite Gauss–Legendre nodes on [0, 1].
    fn composite(panels: usize) -> Vec<(f64, f64)> {
        let rule = gauss_legendre(Self::NODES);
        let mut out = Vec::with_capacity(panels * Self::NODES);
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let h = 0.5 / panels as f64;
            for &(x, w) in rule.iter() {
                out.push((a + h * (x + 1.0), w * h));
            }
        }
        out
    }

    fn fourier(&self, rho: f64) -> f64 {
        let s = rho / self.radius;
        self.norm * unit_bump(s * s)
    }

    /// Inverse transform at radius r by direct quadrature.
    fn direct(&self, r: f64) -> f64 {
        let panels = Self::PANELS + (r * self.radius / 2.0).ceil() as usize;
        let rho = self.radius;
        let mut acc = 0.0;
        for (s, w) in Self::composite(panels) {
            let xi = rho * s;
            let b = self.fourier(xi);
            if b == 0.0 {
                continue;
            }
            let z = xi * r;
            let kern = match self.d {
                1 => 2.0 * z.cos(),
                2 => 2.0 * PI * bessel_j(0.0, z) * xi,
                3 => 4.0 * PI * xi * xi * if z < 1e-8 { 1.0 } else { z.sin() / z },
                _ => unreachable!(),
            };
            acc += w * rho * b * kern;
        }
        acc * (2.0 * PI).powf(-(self.d as f64) / 2.0)
    }

    fn eval(&self, r: f64) -> f64 {
        let x = r / self.step;
        let n = self.values.len();
        if x >= (n - 4) as f64 {
            return self.direct(r);
        }
        // six-point Lagrange interpolation; even symmetry handles the left edge
        let j0 = x.floor() as isize - 2;
        let mut acc = 0.0;
        for a in 0..6isize {
            let ja = j0 + a;
            let mut l = 1.0;
            for b in 0..6isize {
                if a != b {
                    let jb = (j0 + b) as f64;
                    l *= (x - jb) / (ja as f64 - jb);
                }
            }
            acc += l * self.values[ja.unsigned_abs()];
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub enum BaseKind {
    Gaussian { width: f64 },
    ZeroMean { width: f64 },
    BandLimited { radius: f64, table: Arc<BandTable> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    Gaussian,
    ZeroMean,
    BandLimited,
}

/// A profile `φ(x) = phase · e^{ik·x} · b(x − τ)` for a real base `b`.
#[derive(Clone, Debug)]
pub struct Profile {
    pub d: usize,
    pub base: BaseKind,
    pub m_decay: f64,
    pub delta: f64,
    pub tau: Vec<f64>,
    pub k: Vec<f64>,
    pub phase: C64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_d(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::Invalid(format!("profiles support d in 1..=3, got {d}")));
    }
    Ok(())
}

pub fn make_gaussian_profile(d: usize, width: f64) -> Result<Profile> {
    check_d(d)?;
    if !(width > 0.0) {
        return Err(Error::Invalid("width must be positive".into()));
    }
    Profile::from_base(d, BaseKind::Gaussian { width })
}

pub fn make_zero_mean_profile(d: usize, width: f64) -> Result<Profile> {
    check_d(d)?;
    if !(width > 0.0) {
        return Err(Error::Invalid("width must be positive".into()));
    }
    Profile::from_base(d, BaseKind::ZeroMean { width })
}

pub fn make_band_limited_profile(d: usize, fourier_radius: f64) -> Result<Profile> {
    check_d(d)?;
    if !(fourier_radius > 0.0) {
        return Err(Error::Invalid("fourier_radius must be positive".into()));
    }
    let table = Arc::new(BandTable::new(d, fourier_radius));
    Profile::from_base(d, BaseKind::BandLimited { radius: fourier_radius, table })
}

pub fn translate(p: &Profile, tau: &[f64]) -> Profile {
    let mut q = p.clone();
    let dot: f64 = p.k.iter().zip(tau).map(|(a, b)| a * b).sum();
    q.phase = p.phase * c(0.0, -dot).exp();
    for (a, b) in q.tau.iter_mut().zip(tau) {
        *a += b;
    }
    q
}

pub fn modulate(p: &Profile, k: &[f64]) -> Profile {
    let mut q = p.clone();
    for (a, b) in q.k.iter_mut().zip(k) {
        *a += b;
    }
    q
}

/// Multiply a profile by a scalar; breaks normalization (used for negative checks).
pub fn scale(p: &Profile, factor: C64) -> Profile {
    let mut q = p.clone();
    q.phase *= factor;
    q
}

impl Profile {
    fn from_base(d: usize, base: BaseKind) -> Result<Profile> {
        let mut p = Profile {
            d,
            base,
            m_decay: 0.0,
            delta: d as f64 + 2.0,
            tau: vec![0.0; d],
            k: vec![0.0; d],
            phase: c(1.0, 0.0),
        };
        p.m_decay = 1.05 * p.radial_decay_sup(p.delta);
        Ok(p)
    }

    pub fn kind(&self) -> ProfileKind {
        match self.base {
            BaseKind::Gaussian { .. } => ProfileKind::Gaussian,
            BaseKind::ZeroMean { .. } => ProfileKind::ZeroMean,
            BaseKind::BandLimited { .. } => ProfileKind::BandLimited,
        }
    }

    /// Replace the decay exponent (must exceed d + 3/2) and recompute M.
    pub fn with_delta(mut self, delta: f64) -> Result<Profile> {
        if !(delta > self.d as f64 + 1.5) {
            return Err(Error::Invalid(format!("delta must exceed d + 3/2, got {delta}")));
        }
        self.delta = delta;
        self.m_decay = 1.05 * self.radial_decay_sup(delta);
        Ok(self)
    }

    fn radial_decay_sup(&self, delta: f64) -> f64 {
        let scale = self.length_scale();
        let mut best: f64 = 0.0;
        for i in 0..4000 {
            let r = scale * (10f64.powf(-3.0 + 7.0 * i as f64 / 4000.0) - 1e-3);
            let v = self.base_envelope(r);
            best = best.max(v * (1.0 + r * r).powf(0.5 * delta));
        }
        best * self.phase.norm()
    }

    /// Upper envelope of |b| at distance r from the center (exact for radial bases; along
    /// the x₁-axis for the odd base, which is where it is largest).
    fn base_envelope(&self, r: f64) -> f64 {
        match &self.base {
            BaseKind::ZeroMean { .. } => {
                let mut x = vec![0.0; self.d];
                x[0] = r;
                self.base_eval(&x).abs()
            }
            _ => self.base_radial(r).abs(),
        }
    }

    pub fn length_scale(&self) -> f64 {
        match &self.base {
            BaseKind::Gaussian { width } | BaseKind::ZeroMean { width } => *width,
            BaseKind::BandLimited { radius, .. } => 1.0 / radius,
        }
    }

    /// Radial value of a radial base (Gaussian or band-limited).
    pub fn base_radial(&self, r: f64) -> f64 {
        let d = self.d as f64;
        match &self.base {
            BaseKind::Gaussian { width } => {
                (PI * width * width).powf(-d / 4.0) * (-r * r / (2.0 * width * width)).exp()
            }
            BaseKind::BandLimited { table, .. } => table.eval(r),
            BaseKind::ZeroMean { .. } => f64::NAN,
        }
    }

    fn base_eval(&self, x: &[f64]) -> f64 {
        let d = self.d as f64;
        match &self.base {
            BaseKind::ZeroMean { width } => {
                let w = *width;
                let cst = (PI * w * w).powf(-d / 4.0) * 2f64.sqrt() / w;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                cst * x[0] * (-r2 / (2.0 * w * w)).exp()
            }
            _ => self.base_radial(norm2(x)),
        }
    }

    fn base_fourier(&self, xi: &[f64]) -> C64 {
        let d = self.d as f64;
        let rho2: f64 = xi.iter().map(|v| v * v).sum();
        match &self.base {
            BaseKind::Gaussian { width } => {
                let w = *width;
                c((w * w / PI).powf(d / 4.0) * (-w * w * rho2 / 2.0).exp(), 0.0)
            }
            BaseKind::ZeroMean { width } => {
                let w = *width;
                let cst = (PI * w * w).powf(-d / 4.0) * 2f64.sqrt() / w;
                c(0.0, -cst * w * w * xi[0] * w.powf(d) * (-w * w * rho2 / 2.0).exp())
            }
            BaseKind::BandLimited { table, .. } => c(table.fourier(rho2.sqrt()), 0.0),
        }
    }

    /// Radial Fourier transform of a radial base.
    pub fn base_fourier_radial(&self, rho: f64) -> f64 {
        match &self.base {
            BaseKind::ZeroMean { .. } => f64::NAN,
            _ => {
                let mut xi = vec![0.0; self.d];
                xi[0] = rho;
                self.base_fourier(&xi).re
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let mut y = [0.0; 3];
        let mut dot = 0.0;
        for j in 0..self.d {
            y[j] = x[j] - self.tau[j];
            dot += self.k[j] * x[j];
        }
        let b = self.base_eval(&y[..self.d]);
        if dot == 0.0 {
            self.phase * b
        } else {
            self.phase * c(0.0, dot).exp() * b
        }
    }

    /// Unitary-convention transform φ̂(ξ) = (2π)^{−d/2} ∫ e^{−iξ·x} φ(x) dx (closed form).
    pub fn fourier_transform(&self, xi: &[f64]) -> C64 {
        let mut eta = [0.0; 3];
        let mut dot = 0.0;
        for j in 0..self.d {
            eta[j] = xi[j] - self.k[j];
            dot += eta[j] * self.tau[j];
        }
        self.phase * c(0.0, -dot).exp() * self.base_fourier(&eta[..self.d])
    }

    /// ∫ φ = (2π)^{d/2} φ̂(0).
    pub fn mean(&self) -> C64 {
        let zero = vec![0.0; self.d];
        self.fourier_transform(&zero) * (2.0 * PI).powf(self.d as f64 / 2.0)
    }

    pub fn fourier_radius(&self) -> Option<f64> {
        match &self.base {
            BaseKind::BandLimited { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Center of the Fourier support/concentration (the modulation vector).
    pub fn fourier_center(&self) -> &[f64] {
        &self.k
    }

    pub fn is_real(&self) -> bool {
        self.k.iter().all(|&v| v == 0.0) && self.phase.im == 0.0
    }

    /// Some(center) when |φ| depends only on |x − τ| and φ carries no modulation.
    pub fn radial_center(&self) -> Option<&[f64]> {
        match self.base {
            BaseKind::ZeroMean { .. } => None,
            _ if self.k.iter().all(|&v| v == 0.0) => Some(&self.tau),
            _ => None,
        }
    }

    pub fn conj(&self) -> Profile {
        let mut q = self.clone();
        q.phase = self.phase.conj();
        for v in q.k.iter_mut() {
            *v = -*v;
        }
        q
    }

    /// Radius about τ beyond which ∫|φ|² < tol.
    pub fn spatial_radius(&self, tol: f64) -> f64 {
        let s = self.length_scale();
        match &self.base {
            BaseKind::Gaussian { .. } | BaseKind::ZeroMean { .. } => {
                s * (2.0 * (1.0 / tol).ln() + 4.0 * self.d as f64).sqrt()
            }
            BaseKind::BandLimited { .. } => {
                // tail ∝ exp(−2√(2r/s))-ish; scan the table envelope
                let mut r = 10.0 * s;
                while r < 1e4 * s {
                    let v = self.base_radial(r);
                    let tail = v * v * r.powi(self.d as i32) * 50.0;
                    if tail < tol && self.base_radial(1.3 * r).abs() < v.abs().max(1e-300) * 10.0 {
                        return r;
                    }
                    r *= 1.15;
                }
                r
            }
        }
    }

    /// Radius about k beyond which |φ̂|² is below tol (exact for band-limited).
    pub fn spectral_radius(&self, tol: f64) -> f64 {
        match &self.base {
            BaseKind::Gaussian { width } | BaseKind::ZeroMean { width } => {
                ((1.0 / tol).ln() + 4.0).sqrt() / width
            }
            BaseKind::BandLimited { radius, .. } => *radius,
        }
    }

    /// ∫|φ| by quadrature (spatial).
    pub fn l1_norm(&self) -> Result<f64> {
        let r = self.spatial_radius(1e-14);
        let lo: Vec<f64> = self.tau.iter().map(|t| t - r).collect();
        let hi: Vec<f64> = self.tau.iter().map(|t| t + r).collect();
        let f = |x: &[f64]| c(self.eval(x).norm(), 0.0);
        Ok(adaptive_box(&f, &lo, &hi, AdaptiveOptions::new(1e-11, 1e-9))?.0.re)
    }

    /// ∫|φ|² by spatial quadrature.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        Ok(inner_product(self, self)?.re)
    }

    /// ∫|φ̂|² by spectral quadrature (independent of the spatial route).
    pub fn fourier_l2_norm_sq(&self) -> Result<f64> {
        let r = self.spectral_radius(1e-30);
        let lo: Vec<f64> = self.k.iter().map(|t| t - r).collect();
        let hi: Vec<f64> = self.k.iter().map(|t| t + r).collect();
        let f = |xi: &[f64]| c(self.fourier_transform(xi).norm_sqr(), 0.0);
        Ok(adaptive_box(&f, &lo, &hi, AdaptiveOptions::new(1e-12, 1e-10))?.0.re)
    }
}

/// Sweep the decay bound |φ(x)| ≤ M⟨x − τ⟩^{−δ}; returns (M_est, M_est ≤ p.M).
pub fn verify_decay(p: &Profile, sample_count: usize) -> Result<(f64, bool)> {
    if sample_count < 100 {
        return Err(Error::Invalid("sample_count must be at least 100".into()));
    }
    let s = p.length_scale();
    let dirs: Vec<Vec<f64>> = match p.d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8)
            .map(|j| {
                let a = j as f64 * PI / 4.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut v = vec![];
            for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                v.push(e.to_vec());
                v.push(e.iter().map(|x| -x).collect());
            }
            let q = 1.0 / 3f64.sqrt();
            v.push(vec![q, q, q]);
            v.push(vec![-q, q, -q]);
            v
        }
    };
    let mut best: f64 = 0.0;
    for i in 0..sample_count {
        let u = i as f64 / (sample_count - 1) as f64;
        let r = s * (10f64.powf(-2.0 + 5.0 * u) - 1e-2);
        let dir = &dirs[i % dirs.len()];
        let x: Vec<f64> = (0..p.d).map(|j| p.tau[j] + r * dir[j]).collect();
        let v = p.eval(&x).norm();
        best = best.max(v * (1.0 + r * r).powf(0.5 * p.delta));
    }
    Ok((best, best <= p.m_decay))
}

/// Sesquilinear ⟨φ, ψ⟩ = ∫ φ conj(ψ) by adaptive spatial quadrature on the intersection of
/// the two effective supports.
pub fn inner_product(phi: &Profile, psi: &Profile) -> Result<C64> {
    if phi.d != psi.d {
        return Err(Error::Invalid("profiles of different dimension".into()));
    }
    let d = phi.d;
    let r1 = phi.spatial_radius(1e-13);
    let r2 = psi.spatial_radius(1e-13);
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for j in 0..d {
        lo[j] = (phi.tau[j] - r1).max(psi.tau[j] - r2);
        hi[j] = (phi.tau[j] + r1).min(psi.tau[j] + r2);
        if lo[j] >= hi[j] {
            return Ok(c(0.0, 0.0));
        }
    }
    let opts = AdaptiveOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_intervals: 20000,
    };
    if d == 1 {
        let mut bps = vec![phi.tau[0], psi.tau[0]];
        bps.retain(|b| *b > lo[0] && *b < hi[0]);
        return Ok(adaptive(|x| phi.eval(&[x]) * psi.eval(&[x]).conj(), lo[0], hi[0], &bps, opts)?.0);
    }
    let f = |x: &[f64]| phi.eval(x) * psi.eval(x).conj();
    Ok(adaptive_box(&f, &lo, &hi, AdaptiveOptions::new(1e-11, 1e-10))?.0)
}

#[derive(Clone, Debug)]
pub struct ProfileFamily {
    pub members: Vec<Profile>,
    pub weights: Vec<f64>,
    pub tau0: Option<f64>,
    pub modulation_offset: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GramReport {
    pub matrix: DMatrix<C64>,
    pub singular: bool,
    pub min_eigenvalue: f64,
}

impl ProfileFamily {
    pub fn new(members: Vec<Profile>, weights: Vec<f64>) -> Result<ProfileFamily> {
        if members.len() != weights.len() {
            return Err(Error::Invalid("members and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Invalid("weights must be non-negative".into()));
        }
        if let Some(first) = members.first() {
            if members.iter().any(|m| m.d != first.d) {
                return Err(Error::Invalid("members must share the dimension".into()));
            }
        }
        let tau0 = min_pairwise_distance(&members);
        Ok(ProfileFamily { members, weights, tau0, modulation_offset: None })
    }

    pub fn empty() -> ProfileFamily {
        ProfileFamily { members: vec![], weights: vec![], tau0: None, modulation_offset: None }
    }

    pub fn single(p: Profile, alpha: f64) -> Result<ProfileFamily> {
        ProfileFamily::new(vec![p], vec![alpha])
    }

    /// Translates φ(· − j τ0 e₁), j = 0..N−1, all with weight `weight`.
    pub fn translated(p: &Profile, n: usize, tau0: f64, weight: f64) -> Result<ProfileFamily> {
        let members = (0..n)
            .map(|j| {
                let mut t = vec![0.0; p.d];
                t[0] = j as f64 * tau0;
                translate(p, &t)
            })
            .collect();
        ProfileFamily::new(members, vec![weight; n])
    }

    /// Modulated copies e^{i(L+2j)x₁}φ, j = first..first+n−1 (φ band-limited with radius 1).
    pub fn modulated(p: &Profile, l: f64, first: usize, n: usize, weights: Vec<f64>) -> Result<ProfileFamily> {
        let members = (first..first + n)
            .map(|j| {
                let mut k = vec![0.0; p.d];
                k[0] = l + 2.0 * j as f64;
                modulate(p, &k)
            })
            .collect();
        let mut fam = ProfileFamily::new(members, weights)?;
        fam.modulation_offset = Some(l);
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.members.first().map(|m| m.d)
    }

    pub fn is_real(&self) -> bool {
        self.members.iter().all(|m| m.is_real())
    }

    /// Exact certificate: every member has a Fourier support ball and the balls have
    /// pairwise disjoint interiors (|k_i − k_j| ≥ ρ_i + ρ_j).
    pub fn fourier_disjoint(&self) -> bool {
        let n = self.members.len();
        for i in 0..n {
            let ri = match self.members[i].fourier_radius() {
                Some(r) => r,
                None => return false,
            };
            for j in i + 1..n {
                let rj = match self.members[j].fourier_radius() {
                    Some(r) => r,
                    None => return false,
                };
                let dk: Vec<f64> = self.members[i].k.iter().zip(&self.members[j].k).map(|(a, b)| a - b).collect();
                if norm2(&dk) < ri + rj {
                    return false;
                }
            }
        }
        n > 1
    }
}

fn min_pairwise_distance(members: &[Profile]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let dt: Vec<f64> = members[i].tau.iter().zip(&members[j].tau).map(|(a, b)| a - b).collect();
            let v = norm2(&dt);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Gram matrix ⟨φ_i, φ_j⟩; hermitian by construction; flags (near-)singularity.
pub fn gram_matrix(f: &ProfileFamily) -> Result<GramReport> {
    let n = f.len();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_product(&f.members[i], &f.members[j])?;
            if i == j {
                g[(i, i)] = c(v.re, 0.0);
            } else {
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
    }
    let min_eigenvalue = if n == 0 {
        1.0
    } else {
        g.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(GramReport { matrix: g, singular: min_eigenvalue < 1e-8, min_eigenvalue })
}

/// Convenience: e^{iθ} as used for explicit phases in tests and configs.
pub fn unit(theta: f64) -> C64 {
    (I * theta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_all_kinds() {
        for d in 1..=3 {
            for p in [
                make_gaussian_profile(d, 1.3).unwrap(),
                make_zero_mean_profile(d, 0.8).unwrap(),
            ] {
                assert!((p.l2_norm_sq().unwrap() - 1.0).abs() < 1e-10, "{:?} d={d}", p.kind());
                assert!((p.fourier_l2_norm_sq().unwrap() - 1.0).abs() < 1e-8);
            }
        }
        let b = make_band_limited_profile(1, 1.0).unwrap();
        assert!((b.l2_norm_sq().unwrap() - 1.0).abs() < 1e-10);
        assert!((b.fourier_l2_norm_sq().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn band_limited_table_matches_adaptive_inverse_transform() {
        // table (composite GL + Lagrange) vs an adaptive radial inverse transform
        for d in 1..=3 {
            let b = make_band_limited_profile(d, 1.0).unwrap();
            for &r in &[0.0, 0.013, 0.5, 3.21, 17.3, 90.07, 170.0] {
                let (v, _) = crate::quadrature::adaptive_real(
                    |xi| {
                        let z = xi * r;
                        let k = match d {
                            1 => 2.0 * z.cos(),
                            2 => 2.0 * PI * xi * bessel_j(0.0, z),
                            _ => 4.0 * PI * xi * xi * if z == 0.0 { 1.0 } else { z.sin() / z },
                        };
                        k * b.base_fourier_radial(xi)
                    },
                    0.0,
                    1.0,
                    &[],
                    AdaptiveOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 20000 },
                )
                .unwrap();
                let want = v * (2.0 * PI).powf(-(d as f64) / 2.0);
                let got = b.base_radial(r);
                assert!((got - want).abs() < 1e-11, "d={d} r={r} got {got} want {want}");
            }
        }
    }

    #[test]
    fn band_limited_spatial_transform_round_trip() {
        // the spatial integral is truncated at |x| = 150; the slow stretched-exponential
        // tail of a compactly supported transform leaves an error of a few 1e-7 there
        let b = make_band_limited_profile(1, 1.0).unwrap();
        for &xi in &[0.0, 0.3, 0.7] {
            let (v, _) = adaptive(
                |x| b.eval(&[x]) * c(0.0, -xi * x).exp(),
                -150.0,
                150.0,
                &[0.0],
                AdaptiveOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 20000 },
            )
            .unwrap();
            let v = v / (2.0 * PI).sqrt();
            assert!((v - b.fourier_transform(&[xi])).norm() < 1e-6, "xi={xi}");
        }
        assert_eq!(b.fourier_transform(&[1.0]), c(0.0, 0.0));
        assert_eq!(b.fourier_transform(&[1.5]), c(0.0, 0.0));
    }

    #[test]
    fn band_limited_d3_normalized() {
        let b = make_band_limited_profile(3, 1.0).unwrap();
        // radial spatial norm: ∫ 4πr² φ(r)² dr
        let (v, _) = crate::quadrature::adaptive_real(
            |r| 4.0 * PI * r * r * b.base_radial(r).powi(2),
            0.0,
            150.0,
            &[],
            AdaptiveOptions::new(1e-12, 1e-11),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mean_values() {
        let g = make_gaussian_profile(1, 1.0).unwrap();
        assert!(g.mean().norm() > 0.1);
        // ∫ gaussian = (πw²)^{-1/4} √(2π) w
        assert!((g.mean().re - PI.powf(-0.25) * (2.0 * PI).sqrt()).abs() < 1e-14);
        let z = make_zero_mean_profile(2, 1.0).unwrap();
        assert!(z.mean().norm() <= 1e-12);
        assert_eq!(z.fourier_transform(&[0.0, 0.0]).norm(), 0.0);
    }

    #[test]
    fn translate_and_modulate_theorems() {
        let g = make_gaussian_profile(2, 1.0).unwrap();
        let tau = [1.5, -0.5];
        let t = translate(&g, &tau);
        let xi = [0.4, 1.1];
        let lhs = t.fourier_transform(&xi);
        let rhs = c(0.0, -(xi[0] * tau[0] + xi[1] * tau[1])).exp() * g.fourier_transform(&xi);
        assert!((lhs - rhs).norm() < 1e-15);
        let k = [2.0, 0.0];
        let m = modulate(&g, &k);
        assert!((m.fourier_transform(&xi) - g.fourier_transform(&[xi[0] - 2.0, xi[1]])).norm() < 1e-15);
        let same = translate(&g, &[0.0, 0.0]);
        assert_eq!(same.eval(&[0.3, 0.2]), g.eval(&[0.3, 0.2]));
        // order: translate then modulate vs pointwise definitions
        let tm = modulate(&translate(&g, &tau), &k);
        let x = [0.7, -0.1];
        let want = c(0.0, k[0] * x[0]).exp() * g.eval(&[x[0] - tau[0], x[1] - tau[1]]);
        assert!((tm.eval(&x) - want).norm() < 1e-15);
        let mt = translate(&modulate(&g, &k), &tau);
        let want = c(0.0, k[0] * (x[0] - tau[0])).exp() * g.eval(&[x[0] - tau[0], x[1] - tau[1]]);
        assert!((mt.eval(&x) - want).norm() < 1e-15);
    }

    #[test]
    fn norm_preserved_by_unitary_ops() {
        let g = make_gaussian_profile(1, 1.0).unwrap();
        let q = modulate(&translate(&g, &[3.0]), &[5.0]);
        assert!((q.l2_norm_sq().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_checks() {
        let g = make_gaussian_profile(3, 1.0).unwrap();
        assert!(verify_decay(&g, 500).unwrap().1);
        let big = scale(&g, c(10.0, 0.0));
        assert!(!verify_decay(&big, 500).unwrap().1);
        let b = make_band_limited_profile(1, 1.0).unwrap();
        let (m, ok) = verify_decay(&b, 400).unwrap();
        assert!(m.is_finite() && ok);
        assert!(make_gaussian_profile(1, 1.0).unwrap().with_delta(2.0).is_err());
    }

    #[test]
    fn gram_examples() {
        let g = make_gaussian_profile(1, 1.0).unwrap();
        let one = gram_matrix(&ProfileFamily::single(g.clone(), 1.0).unwrap()).unwrap();
        assert!((one.matrix[(0, 0)].re - 1.0).abs() < 1e-10);
        let dup = gram_matrix(&ProfileFamily::new(vec![g.clone(), g.clone()], vec![1.0, 1.0]).unwrap()).unwrap();
        assert!(dup.singular);
        assert!((dup.matrix[(0, 1)] - c(1.0, 0.0)).norm() < 1e-10);
        let b = make_band_limited_profile(1, 1.0).unwrap();
        let fam = ProfileFamily::modulated(&b, 2.0, 0, 3, vec![1.0; 3]).unwrap();
        assert!(fam.fourier_disjoint());
        let gm = gram_matrix(&fam).unwrap();
        let err = (gm.matrix - DMatrix::<C64>::identity(3, 3)).map(|z| z.norm()).max();
        assert!(err < 1e-8, "gram deviation {err}");
    }
}
