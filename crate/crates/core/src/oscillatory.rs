//! Oscillatory integrals I(t, x) = ∫_Ω e^{i(tλ² + xλ)} ψ(λ) dλ over Ω = (0, r₀) or (r₀, ∞),
//! their decay bounds, and the stationary-phase partition used to prove them.

use crate::error::{Error, Result};
use crate::kernels::plateau;
use crate::propagator::{richardson_to_zero, CacheOptions, NodeCache, PhaseSpec, Regularizer};
use crate::quadrature::{adaptive, AdaptiveOptions};
use crate::{c, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Truncated Taylor series: c[k] = f^{(k)}(λ₀)/k!.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; Jet::N],
}

impl Jet {
    pub const N: usize = 8;

    pub fn constant(v: f64) -> Jet {
        let mut c = [0.0; Jet::N];
        c[0] = v;
        Jet { c }
    }

    pub fn variable(x0: f64) -> Jet {
        let mut j = Jet::constant(x0);
        j.c[1] = 1.0;
        j
    }

    /// j-th derivative.
    pub fn derivative(&self, j: usize) -> f64 {
        self.c[j] * (1..=j).map(|k| k as f64).product::<f64>()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut c = self.c;
        c.iter_mut().zip(&o.c).for_each(|(a, b)| *a += b);
        Jet { c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut c = self.c;
        c.iter_mut().for_each(|a| *a *= s);
        Jet { c }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut c = [0.0; Jet::N];
        for k in 0..Jet::N {
            c[k] = (0..=k).map(|i| self.c[i] * o.c[k - i]).sum();
        }
        Jet { c }
    }

    pub fn recip(&self) -> Jet {
        let mut b = [0.0; Jet::N];
        b[0] = 1.0 / self.c[0];
        for k in 1..Jet::N {
            b[k] = -(1..=k).map(|i| self.c[i] * b[k - i]).sum::<f64>() / self.c[0];
        }
        Jet { c: b }
    }

    pub fn exp(&self) -> Jet {
        let mut e = [0.0; Jet::N];
        e[0] = self.c[0].exp();
        for k in 1..Jet::N {
            e[k] = (1..=k).map(|i| i as f64 * self.c[i] * e[k - i]).sum::<f64>() / k as f64;
        }
        Jet { c: e }
    }

    /// self^p for a positive leading coefficient.
    pub fn powf(&self, p: f64) -> Jet {
        let a0 = self.c[0];
        let mut y = [0.0; Jet::N];
        y[0] = a0.powf(p);
        for k in 1..Jet::N {
            y[k] = (1..=k).map(|i| (p * i as f64 - (k - i) as f64) * self.c[i] * y[k - i]).sum::<f64>() / (k as f64 * a0);
        }
        Jet { c: y }
    }
}

/// Jet of the plateau bump at a positive argument.
pub fn plateau_jet(z: &Jet) -> Jet {
    let z0 = z.c[0].abs();
    if z0 <= 0.5 {
        return Jet::constant(1.0);
    }
    if z0 >= 1.0 {
        return Jet::constant(0.0);
    }
    let sgn = z.c[0].signum();
    let s = z.scale(2.0 * sgn).add(&Jet::constant(-1.0));
    let f = |u: &Jet| u.recip().scale(-1.0).exp();
    let a = f(&s.scale(-1.0).add(&Jet::constant(1.0)));
    let b = f(&s);
    a.mul(&a.add(&b).recip())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Omega {
    /// (0, r₀)
    Low,
    /// (r₀, ∞)
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolShape {
    /// λ^b·plateau(λ/r₀) on (0, r₀); λ^b·(1 − plateau(λ/2r₀)) on (r₀, ∞)
    Model,
    /// λ^b itself on Ω (sharp at the finite endpoint)
    Power,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSpec {
    pub b: f64,
    pub k: usize,
    pub omega: Omega,
    pub r0: f64,
    /// sup over a sample sweep of |ψ^{(j)}(λ)|·λ^{j−b}, j = 0..=K
    pub deriv_constants: Vec<f64>,
    pub shape: SymbolShape,
    pub amplitude: f64,
}

fn check_hypothesis(b: f64, k: usize) -> Result<()> {
    if !(b > -1.0 && b < 2.0 * k as f64 - 1.0) {
        return Err(Error::Hypothesis(format!("need −1 < b < 2K − 1, got b = {b}, K = {k}")));
    }
    if k + 1 > Jet::N {
        return Err(Error::Invalid(format!("K ≤ {} supported", Jet::N - 1)));
    }
    Ok(())
}

pub fn model_symbol(b: f64, k: usize, omega: Omega) -> Result<SymbolSpec> {
    symbol_with(b, k, omega, 1.0, SymbolShape::Model)
}

pub fn symbol_with(b: f64, k: usize, omega: Omega, r0: f64, shape: SymbolShape) -> Result<SymbolSpec> {
    check_hypothesis(b, k)?;
    if !(r0 > 0.0) {
        return Err(Error::Invalid("r0 must be positive".into()));
    }
    let mut s = SymbolSpec { b, k, omega, r0, deriv_constants: vec![], shape, amplitude: 1.0 };
    s.deriv_constants = s.measure_constants();
    Ok(s)
}

impl SymbolSpec {
    pub fn scaled(&self, factor: f64) -> SymbolSpec {
        let mut s = self.clone();
        s.amplitude *= factor;
        s.deriv_constants.iter_mut().for_each(|c| *c *= factor.abs());
        s
    }

    pub fn jet(&self, lambda: f64) -> Jet {
        let l = Jet::variable(lambda);
        let p = l.powf(self.b);
        let w = match (self.shape, self.omega) {
            (SymbolShape::Power, _) => Jet::constant(1.0),
            (SymbolShape::Model, Omega::Low) => plateau_jet(&l.scale(1.0 / self.r0)),
            (SymbolShape::Model, Omega::High) => plateau_jet(&l.scale(0.5 / self.r0)).scale(-1.0).add(&Jet::constant(1.0)),
        };
        p.mul(&w).scale(self.amplitude)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        if !self.contains(lambda) {
            return 0.0;
        }
        let w = match (self.shape, self.omega) {
            (SymbolShape::Power, _) => 1.0,
            (SymbolShape::Model, Omega::Low) => plateau(lambda / self.r0),
            (SymbolShape::Model, Omega::High) => 1.0 - plateau(0.5 * lambda / self.r0),
        };
        self.amplitude * lambda.powf(self.b) * w
    }

    /// ψ on the complex ray beyond every cut-off (where ψ = amplitude·λ^b).
    fn eval_complex(&self, lambda: C64) -> C64 {
        (lambda.ln() * self.b).exp() * self.amplitude
    }

    pub fn contains(&self, lambda: f64) -> bool {
        match self.omega {
            Omega::Low => lambda > 0.0 && lambda < self.r0,
            Omega::High => lambda > self.r0,
        }
    }

    /// Where the symbol is exactly amplitude·λ^b from here on (high Ω).
    fn pure_from(&self) -> f64 {
        match self.shape {
            SymbolShape::Model => 2.0 * self.r0,
            SymbolShape::Power => self.r0,
        }
    }

    fn sweep(&self) -> Vec<f64> {
        let (lo, hi) = match self.omega {
            Omega::Low => (self.r0 * 1e-6, self.r0),
            Omega::High => (self.r0, self.r0 * 1e3),
        };
        let n = 4000;
        (1..n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
    }

    fn measure_constants(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.k + 1];
        for l in self.sweep() {
            let j = self.jet(l);
            for (q, o) in out.iter_mut().enumerate() {
                *o = o.max(j.derivative(q).abs() * l.powf(q as f64 - self.b));
            }
        }
        out
    }

    /// Check |ψ^{(j)}| ≤ C_j λ^{b−j} on the sweep (with rounding slack).
    pub fn satisfies_class(&self) -> bool {
        self.sweep().iter().all(|&l| {
            let j = self.jet(l);
            (0..=self.k).all(|q| j.derivative(q).abs() <= self.deriv_constants[q] * l.powf(self.b - q as f64) * (1.0 + 1e-12))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// |t|^{−1/2}|x| ≤ 1
    Near,
    Far,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatoryResult {
    pub t: f64,
    pub x: f64,
    pub value: C64,
    pub err_est: f64,
    pub regime: Regime,
    pub bound: f64,
    pub ratio: f64,
}

pub fn regime(t: f64, x: f64) -> Regime {
    if x.abs() <= t.abs().sqrt() {
        Regime::Near
    } else {
        Regime::Far
    }
}

/// Right side of the near/far decay bound with unit constant.
pub fn bound_232(t: f64, x: f64, b: f64) -> f64 {
    let ta = t.abs();
    match regime(t, x) {
        Regime::Near => ta.powf(-(1.0 + b) / 2.0),
        Regime::Far => ta.powf(-0.5 - b) * x.abs().powf(b),
    }
}

pub fn bound_233(t: f64, x: f64, b: f64) -> f64 {
    t.abs().powf(-(1.0 + b) / 2.0) * (1.0 + x.abs()).powf(b / 2.0)
}

pub fn bound_234(t: f64, x: f64, d: usize) -> f64 {
    t.abs().powf(-(d as f64) / 2.0) * (1.0 + x.abs()).powf((d as f64 - 1.0) / 2.0)
}

#[derive(Clone, Debug)]
pub struct LabConfig {
    pub phase_budget: f64,
    pub tol: f64,
    /// e^{−ελ} regularization for Ω = (r₀, ∞)
    pub epsilon_schedule: Vec<f64>,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig { phase_budget: PI / 4.0, tol: 1e-10, epsilon_schedule: vec![1e-6, 5e-7, 2.5e-7] }
    }
}

type Window<'a> = Option<&'a (dyn Fn(f64) -> f64 + Sync)>;

/// ∫_Ω e^{i(tλ² + xλ)} window(λ) ψ(λ) dλ.
fn lab_integral(t: f64, x: f64, psi: &SymbolSpec, window: Window<'_>, cfg: &LabConfig) -> Result<(C64, f64)> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain("t must be non-zero".into()));
    }
    let r0 = psi.r0;
    let win = |l: f64| window.map(|w| w(l)).unwrap_or(1.0);
    let phase = |l: f64| t * l * l + x * l;
    let stat = -x / (2.0 * t);
    let mut splits = vec![];
    if x != 0.0 {
        let q = (x / t).abs();
        for f in [-1.0, -0.5, 0.5, 1.0] {
            splits.push((-x / t + f * 0.5 * q) / 2.0);
        }
        splits.push(stat);
    }
    // pieces: [0, λs] by substitution (low), cached middle, contour tail (high)
    let (lo, hi, tail_from) = match psi.omega {
        Omega::Low => {
            let ls = (0.25 * r0).min(0.05 / t.abs().sqrt()).min(0.05 / (1.0 + x.abs()));
            (ls, r0, None)
        }
        Omega::High => {
            // past λ* = −x/2t (ray decay) and past the Φ₁ support (≤ 3|x/t|/4)
            let q = x / t;
            let start = if q < 0.0 { psi.pure_from().max(0.8 * q.abs() + 0.5) } else { psi.pure_from() };
            (r0, start, Some(start))
        }
    };
    let mut head = c(0.0, 0.0);
    let mut head_err = 0.0;
    if psi.omega == Omega::Low {
        let (v, e) = adaptive(
            |u| {
                let l = lo * u * u;
                if l <= 0.0 {
                    return c(0.0, 0.0);
                }
                c(0.0, phase(l)).exp() * (psi.eval(l) * win(l) * 2.0 * lo * u)
            },
            0.0,
            1.0,
            &[],
            AdaptiveOptions::new(1e-15, 1e-12),
        )?;
        head = v;
        head_err = e;
    }
    // middle: cache of ψ (t-independent) integrated against the phase
    let mut bps = vec![lo, hi];
    let mut g = lo;
    while g < hi {
        bps.push(g);
        g *= 2.0;
    }
    for s in [0.5 * r0, r0, 2.0 * r0].iter().chain(splits.iter()) {
        if *s > lo && *s < hi {
            bps.push(*s);
        }
    }
    let sampler = |l: f64| -> Result<Vec<C64>> { Ok(vec![c(psi.eval(l), 0.0)]) };
    let opts = CacheOptions { rel_tol: 1e-12, max_width: (hi - lo) / 4.0 + 1e-300, min_width: 1e-12, ..Default::default() };
    let cache = if hi > lo { Some(NodeCache::build(&sampler, &bps, &opts)?) } else { None };
    let col: Vec<C64> = cache.iter().flat_map(|c| c.values.iter().map(|v| v[0])).collect();
    let regs: Vec<Regularizer> = match psi.omega {
        Omega::Low => vec![Regularizer::None],
        Omega::High => cfg.epsilon_schedule.iter().map(|&e| Regularizer::Exponential(e)).collect(),
    };
    let scale_q = (hi - lo) / 64.0;
    let middle = |budget: f64| -> Vec<C64> {
        let Some(cache) = &cache else {
            return vec![c(0.0, 0.0); regs.len()];
        };
        let mut spec = PhaseSpec::new(t, x, budget);
        spec.window = window;
        spec.splits = splits.clone();
        spec.max_sub = if x != 0.0 { ((x / t).abs() / 16.0).max(1e-6).min(scale_q.max(1e-6)) } else { scale_q.max(1e-6) };
        spec.regs = regs.clone();
        cache.weights(&spec).iter().map(|w| w.iter().zip(&col).map(|(a, b)| a * b).sum()).collect()
    };
    let coarse = middle(cfg.phase_budget);
    let fine = middle(0.5 * cfg.phase_budget);
    let tails: Vec<C64> = match tail_from {
        None => vec![c(0.0, 0.0); regs.len()],
        Some(l1) => regs
            .iter()
            .map(|r| {
                let w1 = win(l1);
                if w1 == 0.0 {
                    return Ok(c(0.0, 0.0));
                }
                Ok(contour_tail(t, x, psi, l1, *r)? * w1)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let total = |mid: &[C64]| -> Vec<C64> { mid.iter().zip(&tails).map(|(m, tl)| m + tl + head).collect() };
    let (vc, vf) = (total(&coarse), total(&fine));
    let (value, err) = if psi.omega == Omega::High {
        let floor = 1e-12 * vf.iter().map(|v| v.norm()).fold(0.0, f64::max) + 1e-14;
        let (a, ea) = richardson_to_zero(&cfg.epsilon_schedule, &vc, floor)?;
        let (b, eb) = richardson_to_zero(&cfg.epsilon_schedule, &vf, floor)?;
        (b, (a - b).norm() + ea.max(eb))
    } else {
        (vf[0], (vf[0] - vc[0]).norm())
    };
    Ok((value, err + head_err))
}

/// ∫_{Λ₁}^∞ e^{i(tλ² + xλ)} λ^b reg(λ) dλ along λ = Λ₁ + s e^{±iπ/4} (sign of t), where the
/// integrand decays like a Gaussian; requires the window to be constant beyond Λ₁.
fn contour_tail(t: f64, x: f64, psi: &SymbolSpec, l1: f64, reg: Regularizer) -> Result<C64> {
    let dir = C64::from_polar(1.0, t.signum() * PI / 4.0);
    let decay = (2.0 * t.abs() * l1 + x * t.signum()) / 2f64.sqrt();
    // |e^{...}| ≤ exp(−|t|s² − decay·s); integrate until the exponent passes −50
    let smax = if decay > 0.0 {
        let a = t.abs();
        (-decay + (decay * decay + 200.0 * a).sqrt()) / (2.0 * a)
    } else {
        (50.0 / t.abs()).sqrt() * 2.0
    };
    let f = |s: f64| {
        let l = C64::new(l1, 0.0) + dir * s;
        (I_UNIT * (l * l * t + l * x)).exp() * psi.eval_complex(l) * reg.factor_complex(l) * dir
    };
    let (v, _) = adaptive(f, 0.0, smax, &[], AdaptiveOptions::new(1e-14, 1e-11))?;
    Ok(v)
}

const I_UNIT: C64 = C64::new(0.0, 1.0);

pub fn oscillatory_integral(t: f64, x: f64, psi: &SymbolSpec) -> Result<OscillatoryResult> {
    oscillatory_integral_with(t, x, psi, &LabConfig::default())
}

pub fn oscillatory_integral_with(t: f64, x: f64, psi: &SymbolSpec, cfg: &LabConfig) -> Result<OscillatoryResult> {
    let (value, err_est) = lab_integral(t, x, psi, None, cfg)?;
    let bound = bound_232(t, x, psi.b);
    Ok(OscillatoryResult { t, x, value, err_est, regime: regime(t, x), bound, ratio: value.norm() / bound })
}

/// (I₁, I₂) with I₁ carrying Φ₁(λ) = Φ((2λ + x/t)/(|x/t|/2)) around the stationary point.
pub fn stationary_phase_split(t: f64, x: f64, psi: &SymbolSpec) -> Result<(C64, C64)> {
    stationary_phase_split_with(t, x, psi, &LabConfig::default())
}

pub fn stationary_phase_split_with(t: f64, x: f64, psi: &SymbolSpec, cfg: &LabConfig) -> Result<(C64, C64)> {
    let q = x / t;
    let lambda_star = -q / 2.0;
    // Ω₁ ⊂ {λ ∈ Ω : |2λ + x/t| < |x/t|/2} is empty unless λ* > 0 (and meets Ω)
    let reach = (lambda_star - 0.25 * q.abs(), lambda_star + 0.25 * q.abs());
    let meets = x != 0.0
        && lambda_star > 0.0
        && match psi.omega {
            Omega::Low => reach.0 < psi.r0,
            Omega::High => reach.1 > psi.r0,
        };
    if !meets {
        let (v, _) = lab_integral(t, x, psi, None, cfg)?;
        return Ok((c(0.0, 0.0), v));
    }
    let half = 0.5 * q.abs();
    let phi1 = move |l: f64| plateau((2.0 * l + q) / half);
    let phi2 = move |l: f64| 1.0 - plateau((2.0 * l + q) / half);
    let (i1, _) = lab_integral(t, x, psi, Some(&phi1), cfg)?;
    let (i2, _) = lab_integral(t, x, psi, Some(&phi2), cfg)?;
    Ok((i1, i2))
}

/// max |I₁ + I₂ − I| over the given (t, x) points.
pub fn recombination_error(psi: &SymbolSpec, points: &[(f64, f64)]) -> Result<f64> {
    let errs = points
        .par_iter()
        .map(|&(t, x)| {
            let whole = oscillatory_integral(t, x, psi)?.value;
            let (i1, i2) = stationary_phase_split(t, x, psi)?;
            Ok((i1 + i2 - whole).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// 10 × 10 (t, x) points with t ∈ [1, 512] and x of both signs, most placing λ* = −x/2t inside Ω.
pub fn recombination_lattice() -> Vec<(f64, f64)> {
    let xs = [-40.0, -20.0, -10.0, -5.0, -2.0, -1.0, -0.5, 0.0, 1.0, 8.0];
    (0..10).flat_map(|k| xs.iter().map(move |&x| (2f64.powi(k), x))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundId {
    /// near/far bound of Lemma 2.5
    B232,
    /// low-frequency bound
    B233,
    /// high-frequency factorized bound in dimension d
    B234 { d: usize },
}

impl BoundId {
    pub fn eval(&self, t: f64, x: f64, b: f64) -> f64 {
        match *self {
            BoundId::B232 => bound_232(t, x, b),
            BoundId::B233 => bound_233(t, x, b),
            BoundId::B234 { d } => bound_234(t, x, d),
        }
    }

    pub fn name(&self) -> String {
        match self {
            BoundId::B232 => "2.32".into(),
            BoundId::B233 => "2.33".into(),
            BoundId::B234 { d } => format!("2.34(d={d})"),
        }
    }
}

/// Symbol of the form ψ₁ψ₂ admissible for the factorized high-frequency bound in dimension d:
/// ψ₁ = 1 − plateau(λ/2r₀), ψ₂ = λ^{⌊(d−1)/2⌋} ∈ S^{⌊(d−1)/2⌋}_{⌊d/2⌋+1}.
pub fn factorized_symbol(d: usize) -> Result<SymbolSpec> {
    let b = ((d - 1) / 2) as f64;
    symbol_with(b, d / 2 + 1, Omega::High, 1.0, SymbolShape::Model)
}

/// Geometric (t, x) lattice: t = t0·2^{k/p}, k ≤ p·t_octaves, and x ∈ {0} ∪ ±x0·2^{k/p},
/// k ≤ p·x_octaves, with p points per octave.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub t0: f64,
    pub t_octaves: usize,
    pub x0: f64,
    pub x_octaves: usize,
    pub per_octave: usize,
}

impl Lattice {
    pub fn new(t0: f64, t_octaves: usize, x0: f64, x_octaves: usize, per_octave: usize) -> Result<Lattice> {
        if !(t0 > 0.0 && x0 > 0.0) || per_octave == 0 {
            return Err(Error::Invalid("lattice needs t0, x0 > 0 and per_octave ≥ 1".into()));
        }
        Ok(Lattice { t0, t_octaves, x0, x_octaves, per_octave })
    }

    pub fn ts(&self) -> Vec<f64> {
        let p = self.per_octave;
        (0..=p * self.t_octaves).map(|k| self.t0 * 2f64.powf(k as f64 / p as f64)).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        let p = self.per_octave;
        let mut xs = vec![0.0];
        for k in 0..=p * self.x_octaves {
            let v = self.x0 * 2f64.powf(k as f64 / p as f64);
            xs.push(v);
            xs.push(-v);
        }
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// One more octave in both t and |x|, at twice the density.
    pub fn doubled(&self) -> Lattice {
        Lattice { t_octaves: self.t_octaves + 1, x_octaves: self.x_octaves + 1, per_octave: 2 * self.per_octave, ..*self }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let xs = self.xs();
        self.ts().into_iter().flat_map(|t| xs.iter().map(move |&x| (t, x))).collect()
    }

    /// Whether both the near (|x| ≤ √t) and far regimes are sampled.
    pub fn covers_both_regimes(&self) -> bool {
        let pts = self.points();
        pts.iter().any(|&(t, x)| regime(t, x) == Regime::Near) && pts.iter().any(|&(t, x)| regime(t, x) == Regime::Far)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub x: f64,
    pub regime: Regime,
    pub modulus: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundSweepReport {
    pub bound: String,
    pub max_ratio: f64,
    pub max_ratio_doubled: f64,
    pub pass: bool,
    pub rows: Vec<SweepRow>,
}

fn sweep_rows(bound: BoundId, symbols: &[SymbolSpec], lattice: &Lattice, cfg: &LabConfig) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, f64, f64)> =
        (0..symbols.len()).flat_map(|s| lattice.points().into_iter().map(move |(t, x)| (s, t, x))).collect();
    jobs.par_iter()
        .map(|&(s, t, x)| {
            let psi = &symbols[s];
            let (v, _) = lab_integral(t, x, psi, None, cfg)?;
            let b = bound.eval(t, x, psi.b);
            Ok(SweepRow { t, x, regime: regime(t, x), modulus: v.norm(), bound: b, ratio: v.norm() / b })
        })
        .collect()
}

/// max |I|/bound over a lattice and over its doubling; passes when the doubled maximum exceeds
/// the original by at most 10%.
pub fn verify_bound_sweep(bound: BoundId, symbols: &[SymbolSpec], lattice: &Lattice) -> Result<BoundSweepReport> {
    let cfg = LabConfig::default();
    if !lattice.covers_both_regimes() {
        return Err(Error::Invalid("lattice must cover both the near and far regimes".into()));
    }
    for s in symbols {
        match bound {
            BoundId::B233 if s.omega != Omega::Low => {
                return Err(Error::Hypothesis("the low-frequency bound needs Ω = (0, r₀)".into()))
            }
            BoundId::B234 { .. } if s.omega != Omega::High => {
                return Err(Error::Hypothesis("the factorized bound needs Ω = (r₀, ∞)".into()))
            }
            _ => {}
        }
    }
    let rows = sweep_rows(bound, symbols, lattice, &cfg)?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let dense = sweep_rows(bound, symbols, &lattice.doubled(), &cfg)?;
    let max_ratio_doubled = dense.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(BoundSweepReport {
        bound: bound.name(),
        max_ratio,
        max_ratio_doubled,
        pass: max_ratio.is_finite() && max_ratio_doubled <= 1.1 * max_ratio,
        rows,
    })
}
