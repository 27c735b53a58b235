//! Acceptance run over criteria 1 to 10. Prints one line per criterion and exits
//! nonzero if any fails. Tolerances and runtime budgets are pinned below.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anisowf::config::parse_config;
use anisowf::estimator::{estimate_kernel_wf, estimate_wf, tensor_bound};
use anisowf::experiments::*;
use anisowf::geometry::{lambda_residual, lambda_solve, project, scale_point, AnisoIndex, PhasePoint, SphereDirection};
use anisowf::poly::PolynomialData;
use anisowf::propagator::{propagate, EvolutionSpec};
use anisowf::relation::{compose, PointSet, EXACT_TOL};
use anisowf::signal::{AnalyticSignal, SampledSignal};
use anisowf::stft::{istft, moyal_error, stft_grid, stft_point, WindowSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SEED: u64 = 20;

// criterion 1
const LAMBDA_REL_TOL: f64 = 1e-10;
const LAMBDA_RESIDUAL_TOL: f64 = 1e-12;
const GEOMETRY_SAMPLES: usize = 10_000;
// criterion 2
const MOYAL_TOL: f64 = 1e-6;
const INVERSION_TOL: f64 = 1e-6;
const POINT_GRID_TOL: f64 = 1e-8;
// criteria 3 to 8
const QUADRATIC_TOL: f64 = 0.09;
const CUBIC_TOL: f64 = 0.1;
const CUBIC_COVERAGE: f64 = 0.9;
const XI_AXIS_TOL: f64 = 0.1;
const TRANSPORT_TOL: f64 = 0.09;
const CLOSED_FORM_TOL: f64 = 1e-3;
const KERNEL_EPS_ANGLE: f64 = 0.05;
const KERNEL_ORACLE_TOL: f64 = 0.1;
const KERNEL_MAX_DIRECTIONS: usize = 8000;
// criterion 9
const RELATION_INSTANCES: usize = 1000;
const TENSOR_TOL: f64 = 0.1;
// criterion 10
const NORM_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn context(tmp: &Path, name: &str) -> RunContext {
    RunContext::new(tmp.join(name), fixtures(), 0)
}

fn singular_dirs(v: &Value) -> Vec<SphereDirection> {
    v["entries"]
        .as_array()
        .expect("entries")
        .iter()
        .filter(|e| e["singular"] == true)
        .map(|e| {
            let z: Vec<f64> = e["dir"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
            SphereDirection::new(z).unwrap()
        })
        .collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::INFINITY)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_rel, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..GEOMETRY_SAMPLES {
        let d = rng.gen_range(1..=3);
        let idx = AnisoIndex::new(rng.gen_range(0.55..3.0), rng.gen_range(0.55..3.0)).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mu = rng.gen_range(0.1..10.0);
        let p = PhasePoint::new(x, xi).unwrap();
        let lam = lambda_solve(&idx, &p).unwrap();
        let scaled = lambda_solve(&idx, &scale_point(&idx, &p, mu)).unwrap();
        worst_rel = worst_rel.max((scaled - mu * lam).abs() / (mu * lam));
        worst_res = worst_res.max(lambda_residual(&idx, &p, lam));
    }
    Outcome {
        pass: worst_rel <= LAMBDA_REL_TOL && worst_res <= LAMBDA_RESIDUAL_TOL,
        detail: format!("quasi-homogeneity {worst_rel:.1e} <= {LAMBDA_REL_TOL:.0e}, residual {worst_res:.1e} <= {LAMBDA_RESIDUAL_TOL:.0e} over {GEOMETRY_SAMPLES} samples"),
    }
}

fn criterion_2(tmp: &Path) -> Outcome {
    let cfg: StftConfig = parse_config(include_str!("../fixtures/stft_gaussian.json")).unwrap();
    let r = run_stft(&cfg, &mut context(tmp, "c2")).unwrap();
    let (mut moyal, mut inv, mut pg) = (f(&r["moyal_error"]), f(&r["inversion_error"]), f(&r["point_grid_error"]));
    // random wave packets at the reference resolution
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let w = WindowSpec::new(1.0).unwrap();
    for _ in 0..8 {
        let terms: Vec<(Complex64, f64, f64)> = (0..3)
            .map(|_| (Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), rng.gen_range(-6.0..6.0), rng.gen_range(-8.0..8.0)))
            .collect();
        let u = SampledSignal::from_fn(1, 1024, 0.04, |x| {
            terms.iter().map(|(a, c, om)| a * (-(x[0] - c).powi(2) / 2.0).exp() * Complex64::from_polar(1.0, om * x[0])).sum()
        })
        .unwrap();
        let g = stft_grid(&u, &w).unwrap();
        moyal = moyal.max(moyal_error(&u, &g, &w));
        inv = inv.max(istft(&g, &w).unwrap().distance(&u).unwrap() / u.norm());
        let peak = g.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for _ in 0..16 {
            let (i, k) = (rng.gen_range(256..768), rng.gen_range(0..1024));
            let p = stft_point(&u, &w, &PhasePoint::one(g.x[i], g.xi[k])).unwrap();
            pg = pg.max((p - g.at(i, k)).norm() / peak);
        }
    }
    Outcome {
        pass: moyal <= MOYAL_TOL && inv <= INVERSION_TOL && pg <= POINT_GRID_TOL,
        detail: format!("moyal {moyal:.1e} <= {MOYAL_TOL:.0e}, inversion {inv:.1e} <= {INVERSION_TOL:.0e}, point/grid {pg:.1e} <= {POINT_GRID_TOL:.0e}"),
    }
}

fn within(a: &[SphereDirection], b: &[SphereDirection]) -> f64 {
    containment_angle(a, b)
}

fn criterion_3(tmp: &Path) -> Outcome {
    let cfg: ChirpVerifyConfig = parse_config(include_str!("../fixtures/chirp_quadratic.json")).unwrap();
    let mut ctx = context(tmp, "c3");
    let r = run_chirp_verify(&cfg, &mut ctx).unwrap();
    let det = singular_dirs(&read_json(&ctx.out_dir().join("estimate.json")));
    let s5 = 5f64.sqrt();
    let oracle = vec![
        SphereDirection::new(vec![1.0 / s5, 2.0 / s5]).unwrap(),
        SphereDirection::new(vec![-1.0 / s5, -2.0 / s5]).unwrap(),
    ];
    let spurious = within(&det, &oracle);
    let missed = within(&oracle, &det);
    let control = r["control_singular_count"].as_u64().unwrap_or(u64::MAX);
    Outcome {
        pass: !det.is_empty() && spurious <= QUADRATIC_TOL && missed <= QUADRATIC_TOL && control == 0 && r["pass"] == true,
        detail: format!(
            "{} singular, detected-to-±(1,2)/√5 {spurious:.3} and back {missed:.3} <= {QUADRATIC_TOL}, control {control}",
            det.len()
        ),
    }
}

fn criterion_4(tmp: &Path) -> Outcome {
    let cfg: ChirpVerifyConfig = parse_config(include_str!("../fixtures/chirp_cubic.json")).unwrap();
    let mut ctx = context(tmp, "c4");
    let r = run_chirp_verify(&cfg, &mut ctx).unwrap();
    let det = singular_dirs(&read_json(&ctx.out_dir().join("estimate.json")));
    // dense projected graph {(x, 3x²)}
    let idx = cfg.idx;
    let graph: Vec<SphereDirection> = (1..=40_000)
        .flat_map(|k| {
            let x = (k as f64 / 4000.0).powi(2);
            [x, -x]
        })
        .map(|x| project(&idx, &PhasePoint::one(x, 3.0 * x * x)).unwrap())
        .collect();
    let worst = within(&det, &graph);
    let coverage = f(&r["coverage"]);
    Outcome {
        pass: !det.is_empty() && worst <= CUBIC_TOL && coverage >= CUBIC_COVERAGE,
        detail: format!("{} singular, max distance to graph {worst:.3} <= {CUBIC_TOL}, coverage {coverage:.2} >= {CUBIC_COVERAGE}", det.len()),
    }
}

fn criterion_5(tmp: &Path) -> Outcome {
    let a: ChirpVerifyConfig = parse_config(include_str!("../fixtures/chirp_x_axis.json")).unwrap();
    let mut ctx = context(tmp, "c5a");
    run_chirp_verify(&a, &mut ctx).unwrap();
    let est = read_json(&ctx.out_dir().join("estimate.json"));
    let step = f(&est["angular_step"]);
    let det = singular_dirs(&est);
    let x_axis = vec![SphereDirection::from_angle(0.0), SphereDirection::from_angle(std::f64::consts::PI)];
    let (xa, xb) = (within(&det, &x_axis), within(&x_axis, &det));
    let pass_a = xa <= step + ANGLE_SLACK && xb <= step + ANGLE_SLACK;

    let b: ChirpVerifyConfig = parse_config(include_str!("../fixtures/chirp_xi_axis.json")).unwrap();
    let mut ctx = context(tmp, "c5b");
    run_chirp_verify(&b, &mut ctx).unwrap();
    let det_b = singular_dirs(&read_json(&ctx.out_dir().join("estimate.json")));
    let xi_axis = vec![SphereDirection::new(vec![0.0, 1.0]).unwrap(), SphereDirection::new(vec![0.0, -1.0]).unwrap()];
    let yb = within(&det_b, &xi_axis);
    let pass_b = !det_b.is_empty() && yb <= XI_AXIS_TOL;
    Outcome {
        pass: pass_a && pass_b,
        detail: format!(
            "x²: {} singular, {xa:.4}/{xb:.4} <= step {step:.4}; x³: {} singular, max to ±(0,1) {yb:.4} <= {XI_AXIS_TOL}",
            det.len(),
            det_b.len()
        ),
    }
}

fn shear(dirs: &[SphereDirection], idx: &AnisoIndex, c: f64, t: f64) -> Vec<SphereDirection> {
    dirs.iter()
        .map(|z| {
            let (x, xi) = (z.as_slice()[0], z.as_slice()[1]);
            project(idx, &PhasePoint::one(x + 2.0 * c * t * xi, xi)).unwrap()
        })
        .collect()
}

fn criterion_6(tmp: &Path) -> Outcome {
    let cfg: PropagateVerifyConfig = parse_config(include_str!("../fixtures/propagate_free.json")).unwrap();
    let mut ctx = context(tmp, "c6");
    let r = run_propagate_verify(&cfg, &mut ctx).unwrap();
    let before = singular_dirs(&read_json(&ctx.out_dir().join("before.json")));
    let after = singular_dirs(&read_json(&ctx.out_dir().join("after.json")));
    let moved = shear(&before, &cfg.idx, 1.0, cfg.evolution.time);
    let (ab, ba) = (within(&after, &moved), within(&moved, &after));
    let cf = f(&r["closed_form"]["closed_form_error"]);
    let se = f(&r["closed_form"]["slope_error"]);
    Outcome {
        pass: !after.is_empty() && ab <= TRANSPORT_TOL && ba <= TRANSPORT_TOL && cf <= CLOSED_FORM_TOL && se <= CLOSED_FORM_TOL,
        detail: format!(
            "{} before, {} after; after-in-sheared {ab:.3}, sheared-in-after {ba:.3} <= {TRANSPORT_TOL}; closed form {cf:.1e}, slope 1/(1+4t) {se:.1e} <= {CLOSED_FORM_TOL:.0e}",
            before.len(),
            after.len()
        ),
    }
}

fn criterion_7(tmp: &Path) -> Outcome {
    let cfg: PropagateVerifyConfig = parse_config(include_str!("../fixtures/propagate_invariant.json")).unwrap();
    let mut ctx = context(tmp, "c7");
    run_propagate_verify(&cfg, &mut ctx).unwrap();
    let bj = read_json(&ctx.out_dir().join("before.json"));
    let step = f(&bj["angular_step"]);
    let before = singular_dirs(&bj);
    let after = singular_dirs(&read_json(&ctx.out_dir().join("after.json")));
    let (ab, ba) = (within(&after, &before), within(&before, &after));
    Outcome {
        pass: !before.is_empty() && ab <= step + ANGLE_SLACK && ba <= step + ANGLE_SLACK,
        detail: format!("{} before, {} after; {ab:.4}/{ba:.4} <= step {step:.4}", before.len(), after.len()),
    }
}

fn criterion_8(tmp: &Path) -> Outcome {
    let cfg: KernelCheckConfig = parse_config(include_str!("../fixtures/kernel_free.json")).unwrap();
    let r = run_kernel_check(&cfg, &mut context(tmp, "c8")).unwrap();
    let dirs = r["full"]["directions"].as_u64().unwrap_or(u64::MAX) as usize;
    let oracle = f(&r["max_oracle_angle"]);
    let ok = r["wf1_empty"] == true
        && r["wf2_empty"] == true
        && r["cone_stable"] == true
        && r["cone_constant"].is_number()
        && oracle <= KERNEL_ORACLE_TOL
        && dirs <= KERNEL_MAX_DIRECTIONS
        && cfg.eps_angle == KERNEL_EPS_ANGLE;
    Outcome {
        pass: ok && r["pass"] == true,
        detail: format!(
            "wf1 empty {}, wf2 empty {} at eps {KERNEL_EPS_ANGLE}; cone {} / {} under halving; oracle {oracle:.3} <= {KERNEL_ORACLE_TOL}; {dirs} directions",
            r["wf1_empty"], r["wf2_empty"], r["full"]["cone_constant"], r["half"]["cone_constant"]
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..RELATION_INSTANCES {
        let pts = |rng: &mut ChaCha8Rng, dim: usize, k: usize| -> Vec<Vec<i64>> {
            (0..k)
                .map(|_| loop {
                    let p: Vec<i64> = (0..dim).map(|_| rng.gen_range(-3..=3)).collect();
                    if p.iter().any(|v| *v != 0) {
                        break p;
                    }
                })
                .collect()
        };
        let nb = rng.gen_range(0..6);
        let b = pts(&mut rng, 2, nb);
        let na = rng.gen_range(0..10);
        let mut a = pts(&mut rng, 4, na);
        for q in &b {
            a.push(vec![rng.gen_range(-3..=3), q[0], rng.gen_range(-3..=3), -q[1]]);
        }
        let mut want: Vec<Vec<i64>> = Vec::new();
        for p in &a {
            if b.contains(&vec![p[1], -p[3]]) && (p[0], p[2]) != (0, 0) && !want.contains(&vec![p[0], p[2]]) {
                want.push(vec![p[0], p[2]]);
            }
        }
        want.sort();
        let set = |v: &[Vec<i64>], d| PointSet::new(d, v.iter().map(|p| p.iter().map(|c| *c as f64).collect()).collect(), EXACT_TOL).unwrap();
        let mut got: Vec<Vec<i64>> =
            compose(&set(&a, 4), &set(&b, 2)).unwrap().points().iter().map(|p| p.iter().map(|c| *c as i64).collect()).collect();
        got.sort();
        mismatches += usize::from(got != want);
    }

    let cfg: WfConfig = parse_config(include_str!("../fixtures/tensor_one_delta.json")).unwrap();
    let product = cfg.signal.build(None, &fixtures(), "signal").unwrap();
    let prod = estimate_kernel_wf(&product, &cfg.window, &cfg.idx, &cfg.sampling, &cfg.estimator).unwrap();
    let one = AnalyticSignal::ConstantOne { dim: 1 };
    let delta = AnalyticSignal::DiracDelta { dim: 1 };
    let left = estimate_wf(&one, &cfg.window, &cfg.idx, 360, &cfg.estimator).unwrap();
    let right = estimate_wf(&delta, &cfg.window, &cfg.idx, 360, &cfg.estimator).unwrap();
    let tb = tensor_bound(&prod, &left, &right, TENSOR_TOL).unwrap();
    Outcome {
        pass: mismatches == 0 && prod.singular_count() > 0 && tb.holds,
        detail: format!(
            "{mismatches} mismatches in {RELATION_INSTANCES} instances; tensor bound max angle {:.3} <= {TENSOR_TOL} over {} singular",
            tb.max_angle,
            prod.singular_count()
        ),
    }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut norm_err, mut inv_err) = (0.0f64, 0.0f64);
    // reference grid at a time the bin guard allows, then the propagation grid at t = 0.25
    for (n, dx, t) in [(1024, 0.04, 0.1), (1024, 0.1, 0.25)] {
        let spec = EvolutionSpec::new(PolynomialData::monomial(2, 1.0).unwrap(), t).unwrap();
        for _ in 0..10 {
            let terms: Vec<(Complex64, f64, f64)> = (0..3)
                .map(|_| (Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), rng.gen_range(-8.0..8.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let u = SampledSignal::from_fn(1, n, dx, |x| {
                terms.iter().map(|(a, c, om)| a * (-(x[0] - c).powi(2) / 2.0).exp() * Complex64::from_polar(1.0, om * x[0])).sum()
            })
            .unwrap();
            let v = propagate(&u, &spec).unwrap();
            norm_err = norm_err.max((v.norm() / u.norm() - 1.0).abs());
            let back = propagate(&v, &spec.at_time(-t)).unwrap();
            inv_err = inv_err.max(back.distance(&u).unwrap() / u.norm());
        }
    }
    Outcome {
        pass: norm_err <= NORM_TOL && inv_err <= INVERSE_TOL,
        detail: format!("norm ratio {norm_err:.1e} <= {NORM_TOL:.0e}, inverse {inv_err:.1e} <= {INVERSE_TOL:.0e}"),
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let runs: Vec<(u32, u64, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, 5, Box::new(criterion_1)),
        (2, 30, Box::new(|| criterion_2(p))),
        (3, 120, Box::new(|| criterion_3(p))),
        (4, 180, Box::new(|| criterion_4(p))),
        (5, 180, Box::new(|| criterion_5(p))),
        (6, 240, Box::new(|| criterion_6(p))),
        (7, 240, Box::new(|| criterion_7(p))),
        (8, 600, Box::new(|| criterion_8(p))),
        (9, 10, Box::new(criterion_9)),
        (10, 10, Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (n, budget, run) in runs {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_budget = took <= Duration::from_secs(budget);
        let pass = out.pass && in_budget;
        failed += usize::from(!pass);
        println!(
            "criterion {n}: {} {} ({:.1} s, budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
