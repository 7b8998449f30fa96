//! Bessel functions of half-integer order and the order-zero Hankel functions.
//!
//! Evaluation zones (documented crossover):
//! * `z < 8`: ascending power series (cancellation bounded by ~e^{z}/z terms, ~1e-14 absolute).
//! * `z >= 8`, half-odd-integer order: the Hankel expansion terminates, so it is exact.
//! * `8 <= z < 30`, integer order: Miller backward recurrence, and for `Y_0` the Neumann
//!   series in even-order `J`. The Hankel expansion alone is only good to ~1e-8 at z = 8.
//! * `z >= 30`, integer order: Hankel asymptotic expansion, truncated at its smallest term.

use crate::{Branch, C64};
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const SERIES_CROSSOVER: f64 = 8.0;
pub const ASYMPTOTIC_CROSSOVER: f64 = 30.0;

fn twice_order(nu: f64) -> u32 {
    let m = (2.0 * nu).round();
    debug_assert!(m >= 0.0 && (2.0 * nu - m).abs() < 1e-12, "order must be a non-negative half-integer");
    m as u32
}

/// Γ(ν + 1) for half-integer ν ≥ 0.
fn gamma_half_plus_one(m: u32) -> f64 {
    // ν = m / 2
    if m % 2 == 0 {
        (1..=m / 2).fold(1.0, |acc, k| acc * k as f64)
    } else {
        // Γ(1/2 + j + 1) = Γ(3/2) * (3/2)(5/2)...(j + 1/2)
        let mut g = 0.5 * PI.sqrt();
        let mut x = 1.5;
        while x < 0.5 * m as f64 + 1.0 - 1e-9 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

fn series_j(m: u32, z: f64) -> f64 {
    let nu = 0.5 * m as f64;
    if z == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let q = -0.25 * z * z;
    let mut term = (0.5 * z).powf(nu) / gamma_half_plus_one(m);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel asymptotic amplitudes (P, Q) for order ν; exact when 2ν is odd.
fn hankel_pq(nu: f64, z: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_k / z^k
    let mut prev = f64::INFINITY;
    for k in 1..80 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * z);
        let mag = a.abs();
        if mag == 0.0 {
            break;
        }
        if mag > prev {
            break;
        }
        prev = mag;
        // signs: P = a0 - a2 + a4 ..., Q = a1 - a3 + ...
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if mag < 1e-17 {
            break;
        }
    }
    (p, q)
}

fn asymptotic_jy(nu: f64, z: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, z);
    let chi = z - (0.5 * nu + 0.25) * PI;
    let amp = (2.0 / (PI * z)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// J_0, J_1, ..., J_{nmax} by Miller's backward recurrence, normalized with J_0 + 2ΣJ_{2k} = 1.
fn miller(nmax: usize, z: f64) -> Vec<f64> {
    let start = (nmax.max(z as usize) + 20 + (40.0 * z).sqrt() as usize) | 1;
    let start = start + 1; // even start
    let mut out = vec![0.0; nmax + 1];
    let mut jp1 = 0.0;
    let mut j = 1e-30;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / z * j - jp1;
        jp1 = j;
        j = jm1;
        let idx = k - 1;
        if idx <= nmax {
            out[idx] = j;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            let s = 1e-250;
            j *= s;
            jp1 *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// J_ν(z) for half-integer ν ≥ 0 and z ≥ 0.
pub fn bessel_j(nu: f64, z: f64) -> f64 {
    let m = twice_order(nu);
    let z = z.abs();
    if z < SERIES_CROSSOVER {
        return series_j(m, z);
    }
    if m % 2 == 1 || z >= ASYMPTOTIC_CROSSOVER {
        return asymptotic_jy(0.5 * m as f64, z).0;
    }
    let n = (m / 2) as usize;
    miller(n, z)[n]
}

/// Y_0(z) for z > 0.
pub fn bessel_y0(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if z < SERIES_CROSSOVER {
        let q = 0.25 * z * z;
        let j0 = series_j(0, z);
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            harmonic += 1.0 / kf;
            let add = -term * harmonic;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        return 2.0 / PI * (((0.5 * z).ln() + EULER_GAMMA) * j0 + sum);
    }
    if z >= ASYMPTOTIC_CROSSOVER {
        return asymptotic_jy(0.0, z).1;
    }
    let nmax = 2 * (z as usize + 40);
    let j = miller(nmax, z);
    let mut s = 0.0;
    for k in 1..=nmax / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * j[2 * k] / k as f64;
    }
    2.0 / PI * (((0.5 * z).ln() + EULER_GAMMA) * j[0] - 2.0 * s)
}

/// H_0^{(1)} (plus) or H_0^{(2)} (minus) = J_0 ± iY_0.
pub fn hankel_h0(branch: Branch, z: f64) -> C64 {
    let j = bessel_j(0.0, z);
    let y = bessel_y0(z);
    C64::new(j, branch.sign() * y)
}
