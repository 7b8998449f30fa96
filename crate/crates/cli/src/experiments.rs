//! One runner per subcommand. Each returns result tables, a JSON summary and its checks.

use crate::config::{points_grid, FamilySpec, KernelKind, ScalingMode, SymbolConfig, Validated};
use crate::table::{num, point, ResultTable};
use akprop::analysis::{alpha_scaling_experiment, decay_experiment, n_scaling_experiment, tau_scaling_experiment, KernelSource, ScalingReport};
use akprop::kernels::{free_resolvent_kernel, SpectralPoint};
use akprop::oracle::{discretize_hamiltonian, GridSpec};
use akprop::oscillatory::{
    factorized_symbol, model_symbol, oscillatory_integral, recombination_error, recombination_lattice, symbol_with, verify_bound_sweep, BoundId, Lattice,
    Omega, Regime, SymbolShape, SymbolSpec,
};
use akprop::propagator::{trace_class_difference_kernel, KernelEngine, KernelSample};
use akprop::spectral::{borel_transform, member_margins, spectral_condition_scan};
use akprop::{Branch, Error, C64};
use serde_json::json;

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: String,
}

impl Check {
    fn new(name: &str, pass: bool, value: f64, limit: impl Into<String>) -> Check {
        Check { name: name.into(), pass, value, limit: limit.into() }
    }

    pub fn line(&self) -> String {
        format!("CHECK name={} status={} value={} limit={}", self.name, if self.pass { "PASS" } else { "FAIL" }, num(self.value), self.limit)
    }
}

#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<ResultTable>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    /// lines for stdout ahead of the check lines
    pub report: Vec<String>,
}

pub fn fmt_complex(z: C64) -> String {
    let (re, im) = (z.re + 0.0, z.im + 0.0);
    if im.is_sign_negative() {
        format!("{}-{}i", num(re), num(-im))
    } else {
        format!("{}+{}i", num(re), num(im))
    }
}

fn branches(filter: Option<Branch>) -> Vec<Branch> {
    match filter {
        Some(b) => vec![b],
        None => Branch::BOTH.to_vec(),
    }
}

pub fn kernel_eval(v: &Validated) -> akprop::Result<Outcome> {
    let k = v.cfg.kernel_eval.as_ref().expect("validated");
    let branch: Branch = k.branch.into();
    let value = free_resolvent_kernel(SpectralPoint::new(v.cfg.dimension, branch, k.lambda, k.r))?;
    let mut t = ResultTable::new("kernel_eval", &["lambda", "branch", "r", "re", "im"]);
    t.push(vec![num(k.lambda), branch.name().into(), num(k.r), num(value.re + 0.0), num(value.im + 0.0)]);
    Ok(Outcome {
        tables: vec![t],
        summary: json!({"lambda": k.lambda, "branch": branch.name(), "r": k.r, "re": value.re + 0.0, "im": value.im + 0.0}),
        checks: vec![],
        report: vec![fmt_complex(value)],
    })
}

pub fn borel_scan(v: &Validated, branch: Option<Branch>) -> akprop::Result<Outcome> {
    let f = &v.family;
    let mut t = ResultTable::new("borel", &["lambda", "branch", "i", "j", "re", "im"]);
    let mut max_abs: f64 = 0.0;
    for &l in &v.lambda_grid {
        for br in branches(branch) {
            for i in 0..f.len() {
                for j in 0..f.len() {
                    let z = borel_transform(&f.members[i], &f.members[j], l, br)?.value;
                    max_abs = max_abs.max(z.norm());
                    t.push(vec![num(l), br.name().into(), i.to_string(), j.to_string(), num(z.re), num(z.im)]);
                }
            }
        }
    }
    Ok(Outcome {
        summary: json!({"members": f.len(), "lambda_points": v.lambda_grid.len(), "max_abs": max_abs}),
        tables: vec![t],
        ..Default::default()
    })
}

pub fn spectral_check(v: &Validated, branch: Option<Branch>) -> akprop::Result<Outcome> {
    let rep = spectral_condition_scan(&v.family, &v.lambda_grid)?;
    let mut t = ResultTable::new("scan", &["lambda", "branch", "margin"]);
    let keep = branches(branch);
    let mut c0 = f64::INFINITY;
    for r in rep.rows.iter().filter(|r| keep.contains(&r.branch)) {
        c0 = c0.min(r.margin);
        t.push(vec![num(r.lambda), r.branch.name().into(), num(r.margin)]);
    }
    let floor = v.cfg.spectral_floor;
    let (lo, hi) = (v.lambda_grid[0], v.lambda_grid[v.lambda_grid.len() - 1]);
    Ok(Outcome {
        summary: json!({
            "c0_est": c0, "argmin_lambda": rep.argmin_lambda, "argmin_branch": rep.argmin_branch.name(),
            "floor": floor, "scanned_lambda": [lo, hi], "scanned_points": v.lambda_grid.len(),
        }),
        checks: vec![Check::new("spectral-condition", c0 > floor, c0, format!("> {} on λ ∈ [{}, {}]", num(floor), num(lo), num(hi)))],
        report: vec![format!("margin {c0:?}")],
        tables: vec![t],
    })
}

fn kernel_value(s: &KernelSample, kind: KernelKind) -> C64 {
    match kind {
        KernelKind::Free => s.free_value,
        KernelKind::Difference => s.diff_value,
        KernelKind::Full => s.full_value(),
    }
}

fn kernel_row(s: &KernelSample, d: usize, kind: KernelKind) -> Vec<String> {
    let z = kernel_value(s, kind);
    vec![num(s.t), point(&s.x[..d]), point(&s.y[..d]), num(z.re), num(z.im), num(s.err_est)]
}

const KERNEL_COLUMNS: [&str; 6] = ["t", "x", "y", "re", "im", "err_est"];

pub fn propagate(v: &Validated) -> akprop::Result<Outcome> {
    let grid = v.grid.as_ref().expect("validated");
    let kind = v.cfg.propagate.as_ref().map(|p| p.kernel).unwrap_or(KernelKind::Difference);
    let eng = KernelEngine::new(&v.family, &grid.xs, &grid.ys, &v.quad)?;
    let mut t = ResultTable::new("kernel", &KERNEL_COLUMNS);
    let mut max_err: f64 = 0.0;
    for samples in eng.kernel_many(&v.times)? {
        for s in &samples {
            max_err = max_err.max(s.err_est);
            t.push(kernel_row(s, grid.d, kind));
        }
    }
    Ok(Outcome {
        summary: json!({"rows": t.rows.len(), "nodes": eng.node_count(), "max_err_est": max_err}),
        tables: vec![t],
        ..Default::default()
    })
}

pub fn oracle_compare(v: &Validated) -> akprop::Result<Outcome> {
    let grid = v.grid.as_ref().expect("validated");
    let o = v.cfg.oracle.as_ref().expect("validated");
    let spec = GridSpec::new(grid.d, o.l, o.n)?;
    let op = discretize_hamiltonian(&v.family, &spec)?;
    let eng = KernelEngine::new(&v.family, &grid.xs, &grid.ys, &v.quad)?;
    let mut cols = KERNEL_COLUMNS.to_vec();
    cols.extend(["oracle_re", "oracle_im", "rel_err"]);
    let mut t = ResultTable::new("oracle", &cols);
    let mut worst: f64 = 0.0;
    for samples in eng.kernel_many(&v.times)? {
        for s in &samples {
            let reference = op.difference_kernel(s.t, &s.x[..grid.d], &s.y[..grid.d])?;
            let diff = (s.diff_value - reference).norm();
            let rel = if reference.norm() > 1e-14 { diff / reference.norm() } else { diff };
            worst = worst.max(rel);
            let mut row = kernel_row(s, grid.d, KernelKind::Difference);
            row.extend([num(reference.re), num(reference.im), num(rel)]);
            t.push(row);
        }
    }
    Ok(Outcome {
        summary: json!({"rows": t.rows.len(), "max_rel_err": worst, "grid_l": o.l, "grid_n": o.n, "hermiticity_error": op.hermiticity_error()}),
        checks: vec![Check::new("oracle-rel-err", worst <= o.rel_tol, worst, format!("<= {}", num(o.rel_tol)))],
        tables: vec![t],
        ..Default::default()
    })
}

pub fn decay_fit(v: &Validated) -> akprop::Result<Outcome> {
    let grid = v.grid.as_ref().expect("validated");
    let spec = v.cfg.decay.as_ref().expect("validated");
    let eng;
    let source = match spec.kernel {
        KernelKind::Free => KernelSource::Free { d: grid.d },
        kind => {
            eng = KernelEngine::new(&v.family, &grid.xs, &grid.ys, &v.quad)?;
            if kind == KernelKind::Full {
                KernelSource::Full(&eng)
            } else {
                KernelSource::Difference(&eng)
            }
        }
    };
    let (fit, norms) = decay_experiment(&source, &v.times, grid, spec.tolerance)?;
    let mut t = ResultTable::new("fit", &["t", "norm"]);
    for n in &norms {
        t.push(vec![num(n.t), num(n.value)]);
    }
    let boundary = norms.iter().filter(|n| n.on_boundary).count();
    Ok(Outcome {
        summary: json!({
            "slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept, "residual": fit.residual,
            "target": fit.target, "tolerance": fit.tolerance, "boundary_maxima": boundary,
        }),
        checks: vec![Check::new("decay-slope", fit.pass, fit.slope, format!("{} ± {}", num(fit.target), num(fit.tolerance)))],
        tables: vec![t],
        ..Default::default()
    })
}

fn default_symbols(bound: &str, d: Option<usize>) -> akprop::Result<Vec<SymbolSpec>> {
    Ok(match bound {
        "2.32" => vec![model_symbol(0.5, 1, Omega::Low)?, model_symbol(-0.5, 1, Omega::High)?],
        "2.33" => vec![model_symbol(0.0, 1, Omega::Low)?, model_symbol(1.0, 2, Omega::Low)?],
        _ => vec![factorized_symbol(d.unwrap_or(3))?],
    })
}

pub fn oscillatory_verify(v: &Validated) -> akprop::Result<Outcome> {
    let o = v.cfg.oscillatory.as_ref().expect("validated");
    let lc = &o.lattice;
    let lattice = Lattice::new(lc.t0, lc.t_octaves, lc.x0, lc.x_octaves, lc.per_octave)?;
    let mut out = Outcome::default();
    let mut summary = serde_json::Map::new();
    // Fresnel: ψ ≡ 1 on (0, 10), x = 0
    let tf = o.fresnel_t.unwrap_or(400.0);
    let unit = symbol_with(0.0, 1, Omega::Low, 10.0, SymbolShape::Power)?;
    let fv = oscillatory_integral(tf, 0.0, &unit)?.value.norm();
    let want = 0.5 * (std::f64::consts::PI / tf).sqrt();
    let fres = (fv / want - 1.0).abs();
    out.checks.push(Check::new("fresnel", fres <= 0.01, fres, "<= 0.01"));
    summary.insert("fresnel".into(), json!({"t": tf, "modulus": fv, "closed_form": want, "rel_err": fres}));
    let split = match &o.split_symbol {
        Some(s) => s.build()?,
        None => model_symbol(0.5, 1, Omega::Low)?,
    };
    let rec = recombination_error(&split, &recombination_lattice())?;
    out.checks.push(Check::new("recombination", rec <= 1e-8, rec, "<= 1e-8"));
    summary.insert("recombination_max_abs".into(), json!(rec));
    for sw in &o.sweeps {
        let bound = match sw.bound.as_str() {
            "2.32" => BoundId::B232,
            "2.33" => BoundId::B233,
            _ => BoundId::B234 { d: sw.d.expect("validated") },
        };
        let symbols = if sw.symbols.is_empty() {
            default_symbols(&sw.bound, sw.d)?
        } else {
            sw.symbols.iter().map(SymbolConfig::build).collect::<akprop::Result<Vec<_>>>()?
        };
        let rep = verify_bound_sweep(bound, &symbols, &lattice)?;
        let mut t = ResultTable::new(&format!("sweep_{}", rep.bound.replace(['(', ')', '='], "_").trim_end_matches('_')), &["t", "x", "regime", "|I|", "bound", "ratio"]);
        for r in &rep.rows {
            let regime = if r.regime == Regime::Near { "near" } else { "far" };
            t.push(vec![num(r.t), num(r.x), regime.into(), num(r.modulus), num(r.bound), num(r.ratio)]);
        }
        out.tables.push(t);
        let growth = rep.max_ratio_doubled / rep.max_ratio;
        out.checks.push(Check::new(&format!("bound-{}", rep.bound), rep.pass, growth, "<= 1.1"));
        summary.insert(rep.bound.clone(), json!({"max_ratio": rep.max_ratio, "max_ratio_doubled": rep.max_ratio_doubled}));
    }
    out.summary = serde_json::Value::Object(summary);
    Ok(out)
}

fn scaling_table(rep: &ScalingReport) -> ResultTable {
    let mut t = ResultTable::new("scaling", &["value", "constant"]);
    for (a, b) in rep.values.iter().zip(&rep.constants) {
        t.push(vec![num(*a), num(*b)]);
    }
    t
}

fn scaling_outcome(rep: ScalingReport, check: &str) -> Outcome {
    Outcome {
        summary: json!({"parameter": rep.parameter, "exponent": rep.exponent, "threshold": rep.threshold, "constants": rep.constants}),
        checks: vec![Check::new(check, rep.pass, rep.exponent, format!("<= {}", num(rep.threshold)))],
        tables: vec![scaling_table(&rep)],
        ..Default::default()
    }
}

pub fn scaling(v: &Validated) -> akprop::Result<Outcome> {
    let s = v.cfg.scaling.as_ref().expect("validated");
    let d = v.cfg.dimension;
    match s.mode {
        ScalingMode::N => {
            let n_list: Vec<usize> = s.values.iter().map(|x| x.round() as usize).collect();
            let n_max = n_list.iter().copied().max().unwrap_or(1);
            // one translation step for the whole sweep, resolved for the largest N
            let base = match (&v.cfg.family, v.cfg.family.with_n(n_max).tau0(d, &v.lambda_grid)?) {
                (FamilySpec::Translated { profile, weight, .. }, Some(tau)) => {
                    FamilySpec::Translated { profile: profile.clone(), n: n_max, tau0: Some(tau), weight: *weight }
                }
                (f, _) => f.clone(),
            };
            let tau0 = base.tau0(d, &v.lambda_grid)?;
            let points = v.cfg.points.as_ref().expect("validated");
            let gen = |n: usize| {
                let fam = base.with_n(n).build(d, &v.lambda_grid)?;
                Ok((fam, points_grid(points, d, n, tau0)?))
            };
            let rep = n_scaling_experiment(&gen, &n_list, s.t_ref, &v.quad, s.threshold)?;
            let mut out = scaling_outcome(rep, "n-scaling-exponent");
            if let Some(t) = tau0 {
                out.summary["tau0"] = json!(t);
            }
            Ok(out)
        }
        ScalingMode::Tau => {
            let FamilySpec::Translated { profile, .. } = &v.cfg.family else { unreachable!("validated") };
            let rep = tau_scaling_experiment(&profile.build(d)?, &s.values, s.lambda.expect("validated"), s.threshold)?;
            Ok(scaling_outcome(rep, "cross-term-slope"))
        }
        ScalingMode::Alpha => {
            let grid = v.grid.as_ref().expect("validated");
            let rep = alpha_scaling_experiment(&v.family.members[0], &s.values, s.t_ref, grid, &v.quad, s.threshold)?;
            let spread = rep.constants.iter().map(|c| (c / rep.constants[0] - 1.0).abs()).fold(0.0, f64::max);
            let mut out = scaling_outcome(rep.clone(), "alpha-linear");
            out.checks = vec![Check::new("alpha-ratio-spread", rep.pass, spread, format!("<= {}", num(s.threshold)))];
            Ok(out)
        }
        ScalingMode::Trace => {
            let (x, y) = (s.x.as_ref().expect("validated"), s.y.as_ref().expect("validated"));
            let f = &v.family;
            if f.is_empty() {
                return Err(Error::Invalid("trace-class scaling needs a non-empty family".into()));
            }
            let r = trace_class_difference_kernel(f, s.t_ref, x, y, f.len(), &v.quad)?;
            let mut t = ResultTable::new("partial_sums", &["j", "re", "im", "step"]);
            let mut steps = vec![];
            for (j, z) in r.partial_sums.iter().enumerate() {
                let step = if j == 0 { z.norm() } else { (z - r.partial_sums[j - 1]).norm() };
                steps.push(step);
                t.push(vec![(j + 1).to_string(), num(z.re), num(z.im), num(step)]);
            }
            let cauchy = steps.windows(2).skip(1).all(|w| w[1] < w[0]);
            let margins = member_margins(f, &v.lambda_grid)?;
            let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(Outcome {
                summary: json!({"tail_bound": r.tail_bound, "calibrated_constant": r.calibrated_constant, "member_margins": margins, "steps": steps}),
                checks: vec![
                    Check::new("partial-sums-cauchy", cauchy, *steps.last().unwrap_or(&0.0), "successive steps decrease"),
                    Check::new("member-margin", worst > s.threshold, worst, format!("> {}", num(s.threshold))),
                ],
                tables: vec![t],
                ..Default::default()
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_formatting_drops_negative_zero() {
        assert_eq!(fmt_complex(C64::new(-0.0, 0.25)), "0+0.25i");
        assert_eq!(fmt_complex(C64::new(1.5, -2.0)), "1.5-2i");
        assert_eq!(fmt_complex(C64::new(0.0, -0.0)), "0+0i");
    }

    #[test]
    fn check_lines_are_machine_readable() {
        let c = Check::new("x", false, 0.5, "<= 0.1");
        assert_eq!(c.line(), "CHECK name=x status=FAIL value=0.5 limit=<= 0.1");
    }
}
