use akprop::analysis::XYGrid;
use akprop::profiles::*;
use akprop::propagator::*;
use akprop::C64;
use proptest::prelude::*;

fn engine(fam: &ProfileFamily, x: f64, y: f64, cfg: &QuadratureConfig) -> KernelEngine {
    KernelEngine::new(fam, &[vec![x]], &[vec![y]], cfg).unwrap()
}

fn gaussian(alpha: f64) -> ProfileFamily {
    ProfileFamily::single(make_gaussian_profile(1, 1.0).unwrap(), alpha).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn time_reversal_conjugates_real_kernel(t in 0.3f64..8.0, x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let e = engine(&gaussian(1.0), x, y, &QuadratureConfig::default());
        let fwd = e.kernel_all(t).unwrap()[0].clone();
        let bwd = e.kernel_all(-t).unwrap()[0].clone();
        prop_assert!((bwd.diff_value - fwd.diff_value.conj()).norm() <= 1e-8 * fwd.diff_value.norm().max(1e-6));
        prop_assert!((bwd.free_value - fwd.free_value.conj()).norm() <= 1e-14);
    }

    #[test]
    fn kernel_is_symmetric_in_x_and_y(t in 0.3f64..8.0, x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let fam = gaussian(1.0);
        let pts = vec![vec![x], vec![y]];
        let e = KernelEngine::new(&fam, &pts, &pts, &QuadratureConfig::default()).unwrap();
        let k = e.kernel_all(t).unwrap();
        prop_assert!((k[1].diff_value - k[2].diff_value).norm() <= 1e-9);
    }

    #[test]
    fn small_coupling_is_linear(t in 0.5f64..8.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let cfg = QuadratureConfig::default();
        let ratios: Vec<C64> = [1e-3, 2e-3, 4e-3]
            .iter()
            .map(|&a| engine(&gaussian(a), x, y, &cfg).kernel_all(t).unwrap()[0].diff_value / a)
            .collect();
        for r in &ratios[1..] {
            prop_assert!((r - ratios[0]).norm() <= 0.02 * ratios[0].norm());
        }
    }

    #[test]
    fn refinement_changes_less_than_error_estimate(t in 0.5f64..8.0, x in -1.0f64..1.0) {
        let cfg = QuadratureConfig::default();
        let mut fine = cfg.clone();
        fine.lambda_max *= 2.0;
        fine.phase_budget /= 2.0;
        let fam = gaussian(1.0);
        let a = engine(&fam, x, 0.2, &cfg).kernel_all(t).unwrap()[0].clone();
        let b = engine(&fam, x, 0.2, &fine).kernel_all(t).unwrap()[0].clone();
        prop_assert!((a.diff_value - b.diff_value).norm() <= a.err_est.max(1e-10) + b.err_est);
    }
}

#[test]
fn empty_family_and_zero_coupling_give_the_free_kernel() {
    let cfg = QuadratureConfig::default();
    let zero = rank_one_difference_kernel(&make_gaussian_profile(1, 1.0).unwrap(), 0.0, 1.5, &[0.3], &[-0.2], &cfg).unwrap();
    assert_eq!(zero.diff_value, C64::new(0.0, 0.0));
    let free = full_propagator_kernel(&ProfileFamily::empty(), 1.5, &[0.3], &[-0.2], &cfg).unwrap();
    assert_eq!(free, free_kernel(1, 1.5, &[0.3], &[-0.2]).unwrap());
}

#[test]
fn single_member_family_is_the_rank_one_kernel() {
    let cfg = QuadratureConfig::default();
    let g = make_gaussian_profile(1, 0.8).unwrap();
    let a = finite_rank_difference_kernel(&ProfileFamily::single(g.clone(), 0.7).unwrap(), 2.0, &[0.4], &[0.1], &cfg).unwrap();
    let b = rank_one_difference_kernel(&g, 0.7, 2.0, &[0.4], &[0.1], &cfg).unwrap();
    assert!((a.diff_value - b.diff_value).norm() <= 1e-12);
}

#[test]
fn trace_class_partial_sums_and_tail() {
    let cfg = QuadratureConfig::default();
    let fam = akprop::spectral::remark52_family(&make_band_limited_profile(1, 1.0).unwrap(), 3).unwrap();
    let one = trace_class_difference_kernel(&fam, 1.0, &[0.5], &[0.0], 1, &cfg).unwrap();
    let first = rank_one_difference_kernel(&fam.members[0], fam.weights[0], 1.0, &[0.5], &[0.0], &cfg).unwrap();
    assert_eq!(one.partial_sums.len(), 1);
    assert!((one.sample.diff_value - first.diff_value).norm() <= 1e-14);
    let three = trace_class_difference_kernel(&fam, 1.0, &[0.5], &[0.0], 3, &cfg).unwrap();
    assert!(three.tail_bound < one.tail_bound);
}

#[test]
fn grid_engine_matches_single_point_calls() {
    let cfg = QuadratureConfig::default();
    let fam = gaussian(1.0);
    let grid = XYGrid::axis(1, 1.0, 3).unwrap();
    let e = KernelEngine::new(&fam, &grid.xs, &grid.ys, &cfg).unwrap();
    let all = e.kernel_all(2.0).unwrap();
    let one = finite_rank_difference_kernel(&fam, 2.0, &grid.xs[2], &grid.ys[0], &cfg).unwrap();
    assert!((all[6].diff_value - one.diff_value).norm() <= 1e-10);
}
