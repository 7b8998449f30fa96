use akprop::oscillatory::*;
use proptest::prelude::*;

/// Γ(3/4)
const GAMMA_3_4: f64 = 1.225_416_702_465_177_6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn doubling_the_symbol_doubles_the_integral(t in 1.0f64..200.0, x in -20.0f64..20.0) {
        let s = model_symbol(0.5, 1, Omega::Low).unwrap();
        let a = oscillatory_integral(t, x, &s).unwrap().value;
        let b = oscillatory_integral(t, x, &s.scaled(2.0)).unwrap().value;
        prop_assert!((b - 2.0 * a).norm() <= 1e-14 * a.norm().max(1e-300));
    }

    #[test]
    fn split_recombines(t in 1.0f64..300.0, x in -60.0f64..10.0, sym in 0usize..3) {
        let s = match sym {
            0 => model_symbol(0.5, 1, Omega::Low),
            1 => model_symbol(1.0, 2, Omega::Low),
            _ => model_symbol(-0.5, 1, Omega::High),
        }
        .unwrap();
        let whole = oscillatory_integral(t, x, &s).unwrap().value;
        let (i1, i2) = stationary_phase_split(t, x, &s).unwrap();
        prop_assert!((i1 + i2 - whole).norm() <= 1e-8);
    }

    #[test]
    fn no_stationary_point_for_positive_x(t in 1.0f64..100.0, x in 0.01f64..30.0) {
        let s = model_symbol(0.0, 1, Omega::Low).unwrap();
        let (i1, _) = stationary_phase_split(t, x, &s).unwrap();
        prop_assert_eq!(i1.norm(), 0.0);
    }
}

fn max_ratio(points: &[(f64, f64)], f: impl Fn(f64, f64) -> f64) -> f64 {
    points.iter().map(|&(t, x)| f(t, x)).fold(0.0, f64::max)
}

#[test]
fn far_regime_stationary_piece_has_stable_constant() {
    // where the plateau is 1, |I₁|/(t^{−1/2−b}|x|^b) depends on s = x²/t only; sample s over
    // four decades at λ* = 1/4 (t = 4s, x = −2s) and require the sup to settle
    let b = 0.5;
    let sym = model_symbol(b, 1, Omega::Low).unwrap();
    let c = |t: f64, x: f64| {
        let (i1, _) = stationary_phase_split(t, x, &sym).unwrap();
        i1.norm() / (t.powf(-0.5 - b) * x.abs().powf(b))
    };
    let pts = |smax: f64| {
        let mut v = vec![];
        let mut s = 1.5;
        while s <= smax {
            v.push((4.0 * s, -2.0 * s));
            s *= 2f64.powf(0.25);
        }
        v
    };
    let base = max_ratio(&pts(1e3), c);
    let extended = max_ratio(&pts(1e4), c);
    assert!(base > 0.0 && extended <= 1.1 * base, "{base} {extended}");
    // scale invariance at fixed s
    assert!((c(256.0, -128.0) - c(4096.0, -512.0)).abs() <= 1e-8);
}

#[test]
fn factorized_d3_ratio_stable_over_three_decades() {
    let s = factorized_symbol(3).unwrap();
    let ratio = |t: f64, x: f64| oscillatory_integral(t, x, &s).unwrap().value.norm() / bound_234(t, x, 3);
    let grid = |tmax: f64| {
        let mut v = vec![];
        let mut t = 1.0;
        while t <= tmax * 1.0001 {
            for x in [-8.0, -2.0, 0.0, 3.0] {
                v.push((t, x));
            }
            t *= 10f64.sqrt();
        }
        v
    };
    let base = max_ratio(&grid(100.0), ratio);
    let extended = max_ratio(&grid(1000.0), ratio);
    assert!(extended <= 1.1 * base, "{base} {extended}");
}

#[test]
fn near_regime_scaled_modulus_is_bounded() {
    for s in [model_symbol(0.5, 1, Omega::Low), model_symbol(1.0, 2, Omega::Low), model_symbol(-0.5, 1, Omega::High)] {
        let s = s.unwrap();
        let scaled = |t: f64| oscillatory_integral(t, 0.0, &s).unwrap().value.norm() * t.powf((1.0 + s.b) / 2.0);
        let ts = [1.0, 10.0, 100.0, 1000.0, 10000.0];
        let base = ts[..4].iter().map(|&t| scaled(t)).fold(0.0, f64::max);
        let all = ts.iter().map(|&t| scaled(t)).fold(0.0, f64::max);
        assert!(all <= 1.1 * base, "b = {}: {base} {all}", s.b);
    }
}

#[test]
fn large_t_ratio_approaches_the_fresnel_constant() {
    // ∫₀^∞ e^{itλ²}λ^{1/2} dλ has modulus Γ(3/4)/2 · t^{−3/4}
    let s = model_symbol(0.5, 1, Omega::Low).unwrap();
    let r = oscillatory_integral(1e4, 0.0, &s).unwrap().ratio;
    assert!((r / (GAMMA_3_4 / 2.0) - 1.0).abs() < 1e-2, "{r}");
}

#[test]
fn shifting_the_epsilon_schedule_is_harmless() {
    let mut shifted = LabConfig::default();
    shifted.epsilon_schedule = vec![5e-7, 2.5e-7, 1.25e-7];
    for s in [model_symbol(-0.5, 1, Omega::High).unwrap(), factorized_symbol(3).unwrap()] {
        for (t, x) in [(1.0, 0.0), (4.0, -3.0), (16.0, 5.0)] {
            let a = oscillatory_integral(t, x, &s).unwrap().value;
            let b = oscillatory_integral_with(t, x, &s, &shifted).unwrap().value;
            assert!((a - b).norm() <= 1e-8, "{t} {x}: {a} {b}");
        }
    }
}

#[test]
fn hypothesis_violations_are_rejected() {
    assert!(model_symbol(1.0, 1, Omega::Low).is_err());
    assert!(model_symbol(-1.0, 2, Omega::High).is_err());
    assert!(model_symbol(-0.5, 1, Omega::High).is_ok());
}
