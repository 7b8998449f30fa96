//! Brute-force reference propagator: H = −Δ + Σ α_j⟨·, φ_j⟩φ_j on a periodic box with a
//! Fourier Laplacian, diagonalized densely.

use crate::error::{Error, Result};
use crate::profiles::ProfileFamily;
use crate::{c, C64};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    /// box half-width
    pub l: f64,
    /// points per axis
    pub n: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(d: usize, l: f64, n: usize) -> Result<GridSpec> {
        if !(d == 1 || d == 2) {
            return Err(Error::Invalid(format!("grid oracle supports d ∈ {{1, 2}}, got {d}")));
        }
        if n < 64 && d == 1 || n < 16 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!("n must be a power of two ≥ 64 (d = 1) or ≥ 16 (d = 2), got {n}")));
        }
        let cap = if d == 1 { 4096 } else { 64 };
        if n > cap {
            return Err(Error::Invalid(format!("n = {n} exceeds the dense limit {cap} per axis")));
        }
        if !(l > 0.0) {
            return Err(Error::Invalid("box half-width must be positive".into()));
        }
        Ok(GridSpec { d, l, n, h: 2.0 * l / n as f64 })
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    /// Position of flat index p (last axis fastest).
    pub fn point(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let mut r = p;
        for a in (0..self.d).rev() {
            out[a] = self.coord(r % self.n);
            r /= self.n;
        }
        out
    }

    /// Angular frequency of DFT index m.
    pub fn frequency(&self, m: usize) -> f64 {
        let mm = if m < self.n / 2 { m as f64 } else { m as f64 - self.n as f64 };
        PI * mm / self.l
    }

    fn axis_index(&self, x: f64) -> Option<usize> {
        let s = (x + self.l) / self.h;
        let i = s.round();
        if (s - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.n {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Flat index of a grid node, if x is one.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let mut p = 0;
        for &v in x {
            p = p * self.n + self.axis_index(v)?;
        }
        Some(p)
    }

    /// Anti-wraparound budget: max|x|, |y| + max(4k√t, 2kt) ≤ L, k the largest retained
    /// frequency of the perturbation.
    pub fn budget_ok(&self, t: f64, extent: f64, k_eff: f64) -> bool {
        let t = t.abs();
        extent + (4.0 * k_eff * t.sqrt()).max(2.0 * k_eff * t) <= self.l
    }
}

#[derive(Clone, Debug)]
pub struct GridOperator {
    pub grid: GridSpec,
    pub h_mat: DMatrix<C64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<C64>,
    pub k_eff: f64,
}

/// Dense DFT along one axis of a d-dimensional array (sign −1 forward, +1 inverse, unnormalized).
fn dft_axis(g: &GridSpec, v: &mut [C64], axis: usize, sign: f64) {
    let n = g.n;
    let stride = n.pow((g.d - 1 - axis) as u32);
    let tw: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64)).collect();
    let mut buf = vec![c(0.0, 0.0); n];
    for start in 0..v.len() {
        if (start / stride) % n != 0 {
            continue;
        }
        for (m, b) in buf.iter_mut().enumerate() {
            let mut acc = c(0.0, 0.0);
            for j in 0..n {
                acc += v[start + j * stride] * tw[(m * j) % n];
            }
            *b = acc;
        }
        for m in 0..n {
            v[start + m * stride] = buf[m];
        }
    }
}

fn multi_index(g: &GridSpec, p: usize) -> Vec<usize> {
    let mut out = vec![0; g.d];
    let mut r = p;
    for a in (0..g.d).rev() {
        out[a] = r % g.n;
        r /= g.n;
    }
    out
}

/// Apply a Fourier multiplier m(|k|²) to grid values.
pub fn fourier_multiplier(g: &GridSpec, v: &[C64], m: impl Fn(f64) -> C64) -> Vec<C64> {
    let mut w = v.to_vec();
    for a in 0..g.d {
        dft_axis(g, &mut w, a, -1.0);
    }
    for (p, z) in w.iter_mut().enumerate() {
        let k2: f64 = multi_index(g, p).iter().map(|&i| g.frequency(i).powi(2)).sum();
        *z *= m(k2) / g.size() as f64;
    }
    for a in 0..g.d {
        dft_axis(g, &mut w, a, 1.0);
    }
    w
}

/// Position-space spectral Laplacian −Δ (real symmetric).
fn laplacian_matrix(g: &GridSpec) -> DMatrix<f64> {
    let n = g.n;
    // 1-D kernel: (1/n) Σ_m k_m² cos(k_m (i − j) h)
    let row: Vec<f64> = (0..n)
        .map(|dj| (0..n).map(|m| g.frequency(m).powi(2) * (g.frequency(m) * dj as f64 * g.h).cos()).sum::<f64>() / n as f64)
        .collect();
    let one = DMatrix::from_fn(n, n, |i, j| row[(i as isize - j as isize).unsigned_abs()]);
    if g.d == 1 {
        return one;
    }
    let id = DMatrix::<f64>::identity(n, n);
    one.kronecker(&id) + id.kronecker(&one)
}

pub fn discretize_hamiltonian(f: &ProfileFamily, g: &GridSpec) -> Result<GridOperator> {
    if let Some(d) = f.dimension() {
        if d != g.d {
            return Err(Error::Invalid(format!("family dimension {d} differs from grid dimension {}", g.d)));
        }
    }
    let size = g.size();
    let pts: Vec<Vec<f64>> = (0..size).map(|p| g.point(p)).collect();
    let mut k_eff: f64 = 0.0;
    let mut samples = vec![];
    for m in &f.members {
        let kn = m.k.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ke = kn + m.spectral_radius(1e-10);
        k_eff = k_eff.max(ke);
        if ke > 0.8 * PI / g.h {
            return Err(Error::BoxTooSmall(format!("profile frequency {ke:.3} unresolved by spacing {}", g.h)));
        }
        let vals: Vec<C64> = pts.iter().map(|x| m.eval(x)).collect();
        let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        // boundary shell of the box
        let edge = pts
            .iter()
            .zip(&vals)
            .filter(|(x, _)| x.iter().any(|v| (v.abs() - g.l).abs() < 1.5 * g.h))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        if edge > 1e-10 * peak.max(1e-300) {
            return Err(Error::BoxTooSmall(format!("profile tail {edge:.2e} at the box edge exceeds 1e-10")));
        }
        samples.push(vals);
    }
    let lap = laplacian_matrix(g);
    let cell = g.h.powi(g.d as i32);
    let real = f.is_real();
    let mut hm = lap.map(|v| c(v, 0.0));
    for (s, &a) in samples.iter().zip(&f.weights) {
        for i in 0..size {
            if s[i] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..size {
                hm[(i, j)] += s[i] * s[j].conj() * (a * cell);
            }
        }
    }
    let hm = (&hm + hm.adjoint()) * c(0.5, 0.0);
    let (eigenvalues, eigenvectors) = if real {
        let e = hm.map(|z| z.re).symmetric_eigen();
        (e.eigenvalues, e.eigenvectors.map(|v| c(v, 0.0)))
    } else {
        let e = hm.clone().symmetric_eigen();
        (e.eigenvalues, e.eigenvectors)
    };
    Ok(GridOperator { grid: g.clone(), h_mat: hm, eigenvalues, eigenvectors, k_eff })
}

impl GridOperator {
    pub fn hermiticity_error(&self) -> f64 {
        (&self.h_mat - self.h_mat.adjoint()).map(|z| z.norm()).max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.min()
    }

    /// e^{−itH} applied to grid values.
    pub fn apply(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let vm = DVector::from_column_slice(v);
        let coef = self.eigenvectors.adjoint() * vm;
        let coef = DVector::from_fn(coef.len(), |m, _| coef[m] * C64::from_polar(1.0, -t * self.eigenvalues[m]));
        (&self.eigenvectors * coef).iter().copied().collect()
    }

    fn check_budget(&self, t: f64, extent: f64) -> Result<()> {
        if !self.grid.budget_ok(t, extent, self.k_eff) {
            return Err(Error::BudgetExceeded(format!(
                "t = {t} with extent {extent} breaks the anti-wraparound budget of L = {}",
                self.grid.l
            )));
        }
        Ok(())
    }

    /// Column y of the kernel of e^{−itH}, i.e. e^{−itH}δ_y/h^d.
    pub fn column(&self, t: f64, y_index: usize) -> Result<Vec<C64>> {
        if y_index >= self.grid.size() {
            return Err(Error::Invalid("grid index out of range".into()));
        }
        let ext = self.grid.point(y_index).iter().map(|v| v.abs()).fold(0.0, f64::max);
        self.check_budget(t, ext)?;
        let cell = self.grid.h.powi(self.grid.d as i32);
        let mut e = vec![c(0.0, 0.0); self.grid.size()];
        e[y_index] = c(1.0 / cell, 0.0);
        Ok(self.apply(t, &e))
    }

    /// Column y of the kernel of e^{−itH} − e^{−itH₀}.
    pub fn difference_column(&self, t: f64, y_index: usize) -> Result<Vec<C64>> {
        let full = self.column(t, y_index)?;
        let free = free_grid_column(&self.grid, t, y_index);
        Ok(full.iter().zip(&free).map(|(a, b)| a - b).collect())
    }

    /// (e^{−itH} − e^{−itH₀})(x, y), linearly interpolated off-grid (d = 1) and exact at nodes.
    pub fn difference_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<C64> {
        let g = &self.grid;
        if x.len() != g.d || y.len() != g.d {
            return Err(Error::Invalid("point dimension mismatch".into()));
        }
        let ext = x.iter().chain(y).map(|v| v.abs()).fold(0.0, f64::max);
        self.check_budget(t, ext)?;
        let stencil = |p: &[f64]| -> Result<Vec<(usize, f64)>> {
            if let Some(i) = g.index_of(p) {
                return Ok(vec![(i, 1.0)]);
            }
            if g.d != 1 {
                return Err(Error::Invalid("off-grid evaluation is supported for d = 1 only".into()));
            }
            let s = (p[0] + g.l) / g.h;
            let i = s.floor() as usize;
            let w = s - i as f64;
            Ok(vec![(i, 1.0 - w), ((i + 1) % g.n, w)])
        };
        let mut acc = c(0.0, 0.0);
        for (jy, wy) in stencil(y)? {
            let col = self.difference_column(t, jy)?;
            for (ix, wx) in stencil(x)? {
                acc += col[ix] * (wx * wy);
            }
        }
        Ok(acc)
    }
}

/// Column y of e^{−itH₀} on the grid, via the discrete Fourier transform.
pub fn free_grid_column(g: &GridSpec, t: f64, y_index: usize) -> Vec<C64> {
    let cell = g.h.powi(g.d as i32);
    let mut e = vec![c(0.0, 0.0); g.size()];
    e[y_index] = c(1.0 / cell, 0.0);
    fourier_multiplier(g, &e, |k2| C64::from_polar(1.0, -t * k2))
}

pub fn grid_propagator(op: &GridOperator, t: f64, y_index: usize) -> Result<Vec<C64>> {
    op.column(t, y_index)
}

pub fn oracle_difference_kernel(f: &ProfileFamily, g: &GridSpec, t: f64, x: &[f64], y: &[f64]) -> Result<C64> {
    if f.is_empty() || f.weights.iter().all(|w| *w == 0.0) {
        return Ok(c(0.0, 0.0));
    }
    discretize_hamiltonian(f, g)?.difference_kernel(t, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::*;

    fn norm(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn empty_family_spectrum_is_grid_frequencies() {
        let g = GridSpec::new(1, 16.0, 64).unwrap();
        let op = discretize_hamiltonian(&ProfileFamily::empty(), &g).unwrap();
        let mut want: Vec<f64> = (0..64).map(|m| g.frequency(m).powi(2)).collect();
        want.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = op.eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * b.max(1.0), "{a} {b}");
        }
        assert_eq!(oracle_difference_kernel(&ProfileFamily::empty(), &g, 1.0, &[0.0], &[0.0]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn hermitian_nonnegative_unitary_semigroup() {
        let g = GridSpec::new(1, 16.0, 128).unwrap();
        let p = modulate(&make_gaussian_profile(1, 1.0).unwrap(), &[1.5]);
        let f = ProfileFamily::new(vec![p, make_gaussian_profile(1, 0.8).unwrap()], vec![1.0, 0.5]).unwrap();
        let op = discretize_hamiltonian(&f, &g).unwrap();
        assert!(op.hermiticity_error() <= 1e-12);
        assert!(op.min_eigenvalue() >= -1e-10);
        let v: Vec<C64> = (0..g.n).map(|i| c((-(g.coord(i) - 1.0).powi(2)).exp(), 0.3 * g.coord(i).sin())).collect();
        let u1 = op.apply(0.7, &v);
        assert!((norm(&u1) - norm(&v)).abs() < 1e-10 * norm(&v));
        let u12 = op.apply(0.5, &u1);
        let u = op.apply(1.2, &v);
        assert!(u12.iter().zip(&u).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn free_grid_evolution_matches_gaussian_packet() {
        // e^{itΔ} e^{−x²/2} = (1 + 2it)^{−1/2} e^{−x²/(2(1 + 2it))}
        let g = GridSpec::new(1, 32.0, 256).unwrap();
        let v: Vec<C64> = (0..g.n).map(|i| c((-g.coord(i).powi(2) / 2.0).exp(), 0.0)).collect();
        let t = 2.0;
        let u = fourier_multiplier(&g, &v, |k2| C64::from_polar(1.0, -t * k2));
        let op = discretize_hamiltonian(&ProfileFamily::empty(), &g).unwrap();
        let u2 = op.apply(t, &v);
        for i in (g.n / 4..3 * g.n / 4).step_by(8) {
            let x = g.coord(i);
            let a = c(1.0, 2.0 * t);
            let want = a.powf(-0.5) * (-(x * x) / (a * 2.0)).exp();
            assert!((u[i] - want).norm() < 1e-10, "{} {}", u[i], want);
            assert!((u2[i] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn interlacing_and_budget() {
        let g = GridSpec::new(1, 16.0, 128).unwrap();
        let p = make_gaussian_profile(1, 1.0).unwrap();
        let base = discretize_hamiltonian(&ProfileFamily::single(p.clone(), 1.0).unwrap(), &g).unwrap();
        let two = ProfileFamily::new(vec![p.clone(), translate(&p, &[2.0])], vec![1.0, 0.3]).unwrap();
        let op = discretize_hamiltonian(&two, &g).unwrap();
        let mut a: Vec<f64> = base.eigenvalues.iter().copied().collect();
        let mut b: Vec<f64> = op.eigenvalues.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let shift = a.iter().zip(&b).filter(|(x, y)| (*y - *x).abs() > 1e-8).count();
        assert!(a.iter().zip(&b).all(|(x, y)| y - x >= -1e-9 && y - x <= 0.3 * 1.0 + 1e-9));
        assert!(shift >= 1);
        for w in a.windows(2).zip(b.iter().skip(0)) {
            // b_k ≤ a_{k+1}: a rank-one positive perturbation interlaces
            assert!(*w.1 <= w.0[1] + 1e-9);
        }
        assert!(matches!(op.column(50.0, 64), Err(Error::BudgetExceeded(_))));
        assert!(matches!(
            discretize_hamiltonian(&ProfileFamily::single(translate(&p, &[14.0]), 1.0).unwrap(), &g),
            Err(Error::BoxTooSmall(_))
        ));
    }
}
