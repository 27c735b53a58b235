//! The experiments behind each command: config types, runners and output bookkeeping.
//!
//! Every runner writes its files into an output directory through a [`RunContext`]
//! and returns the report that it also stores as `report.json`. Reports embed the
//! resolved config, the seed and the toolkit version.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chirp::{compare_wf, predict_chirp_wf};
use crate::config::{check_index, check_positive, load_config, GridConfig, SignalSpec, Source};
use crate::error::{Error, Result};
use crate::estimator::{
    check_graph_condition, cone_constant, estimate_kernel_wf, estimate_wf_with_profiles, EstimatorSettings,
    S3Sampling, WFEstimate,
};
use crate::geometry::{AnisoIndex, PhasePoint, SphereDirection};
use crate::poly::PolynomialData;
use crate::propagator::{
    angle_to_kernel_relation, chirp_slope_error, evolved_chirp_slope, evolved_gaussian_chirp,
    interior_relative_error, kernel_signal_with, predict_transport, propagate, Demollified, EvolutionSpec,
};
use crate::relation::{compose, proj_13, proj_2neg4, sconic_closure_check, PointSet};
use crate::report::{float_text, write_json};
use crate::signal::AnalyticSignal;
use crate::stft::{istft, moyal_error, stft_grid_strided, stft_point, stft_seminorm_on_grid, classical_seminorm, StftSource, WindowSpec};

pub const TOOLKIT_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slack added to angular comparisons so that a direction exactly one step away still matches.
pub const ANGLE_SLACK: f64 = 1e-9;

/// The seven commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Stft,
    Wf,
    ChirpVerify,
    PropagateVerify,
    KernelCheck,
    Relation,
    Seminorm,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stft => "stft",
            Command::Wf => "wf",
            Command::ChirpVerify => "chirp-verify",
            Command::PropagateVerify => "propagate-verify",
            Command::KernelCheck => "kernel-check",
            Command::Relation => "relation",
            Command::Seminorm => "seminorm",
        }
    }
}

/// Output directory plus the list of files written so far, for cleanup on failure.
#[derive(Debug)]
pub struct RunContext {
    out: PathBuf,
    base: PathBuf,
    seed: u64,
    written: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
}

impl RunContext {
    /// `base` resolves relative paths inside configs.
    pub fn new(out: impl Into<PathBuf>, base: impl Into<PathBuf>, seed: u64) -> Self {
        RunContext {
            out: out.into(),
            base: base.into(),
            seed,
            written: Vec::new(),
            created_dirs: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        for d in missing.into_iter().rev() {
            fs::create_dir(&d)?;
            self.created_dirs.push(d);
        }
        Ok(())
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, v: &Value) -> Result<()> {
        let path = self.target(name)?;
        write_json(&path, v)
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.target(name)?;
        f(BufWriter::new(File::create(path)?))
    }

    /// Removes every file and directory this run created.
    pub fn cleanup(&mut self) {
        for p in self.written.drain(..).rev() {
            let _ = fs::remove_file(p);
        }
        for d in self.created_dirs.drain(..).rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn envelope(cmd: Command, config: &impl Serialize, seed: u64, results: Value) -> Result<Value> {
    let mut v = json!({
        "toolkit": {"name": TOOLKIT_NAME, "version": TOOLKIT_VERSION},
        "command": cmd.name(),
        "seed": seed,
        "config": serde_json::to_value(config)?,
    });
    if let (Value::Object(m), Value::Object(r)) = (&mut v, results) {
        m.extend(r);
    }
    Ok(v)
}

/// Non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn default_sphere_samples() -> usize {
    720
}

fn default_step() -> usize {
    1
}

fn default_check_points() -> usize {
    16
}

fn default_chirp_tol() -> f64 {
    0.09
}

fn one_variable(src: &Source, field: &str) -> Result<()> {
    if src.dim() != 1 {
        return Err(Error::config(field, format!("expected a signal of one variable, got {}", src.dim())));
    }
    Ok(())
}

/// Largest angle from a member of `a` to the nearest member of `b`; `0` for empty `a`, infinite for empty `b`.
pub fn containment_angle(a: &[SphereDirection], b: &[SphereDirection]) -> f64 {
    a.iter()
        .map(|z| b.iter().map(|w| z.angle_to(w)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn singular_owned(e: &WFEstimate) -> Vec<SphereDirection> {
    e.singular().into_iter().cloned().collect()
}

// ---------------------------------------------------------------- stft

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub signal: SignalSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub window: WindowSpec,
    /// Translate stride of the lattice.
    #[serde(default = "default_step")]
    pub step: usize,
    /// Lattice points where quadrature and FFT values are compared.
    #[serde(default = "default_check_points")]
    pub check_points: usize,
}

pub fn run_stft(cfg: &StftConfig, ctx: &mut RunContext) -> Result<Value> {
    check_positive(cfg.window.width, "window.width")?;
    let src = cfg.signal.build(cfg.grid.as_ref(), &ctx.base, "signal")?;
    let u = src
        .sampled()
        .ok_or_else(|| Error::config("signal", "the STFT lattice needs a sampled signal"))?;
    one_variable(&src, "signal")?;
    if cfg.step == 0 || u.n() % cfg.step != 0 {
        return Err(Error::config("step", format!("must divide n = {}", u.n())));
    }
    let grid = stft_grid_strided(u, &cfg.window, cfg.step)?;
    let moyal = moyal_error(u, &grid, &cfg.window);
    let inversion = if cfg.window.normalized {
        let back = istft(&grid, &cfg.window)?;
        Some(back.distance(u)? / u.norm().max(f64::MIN_POSITIVE))
    } else {
        None
    };
    // compare on an interior sub-lattice where quadrature is defined
    let inner: Vec<usize> = (0..grid.x.len()).filter(|i| grid.x[*i].abs() <= 0.5 * u.half_width()).collect();
    let mut agreement = 0.0f64;
    let peak = grid.values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !inner.is_empty() && cfg.check_points > 0 {
        for c in 0..cfg.check_points {
            let i = inner[c * inner.len() / cfg.check_points];
            let k = (c * 7919 + grid.xi.len() / 2) % grid.xi.len();
            let p = PhasePoint::one(grid.x[i], grid.xi[k]);
            let d = (stft_point(u, &cfg.window, &p)? - grid.at(i, k)).norm() / peak;
            agreement = agreement.max(d);
        }
    }
    ctx.write_with("stft.csv", |w| grid.write_csv(w))?;
    let results = json!({
        "n": u.n(),
        "dx": u.dx(),
        "signal_norm": u.norm(),
        "energy": grid.energy(),
        "moyal_error": moyal,
        "inversion_error": inversion.map_or(Value::Null, num),
        "point_grid_error": agreement,
    });
    let report = envelope(Command::Stft, cfg, ctx.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- wf

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileOutput {
    None,
    #[default]
    Singular,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfConfig {
    pub signal: SignalSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub window: WindowSpec,
    pub idx: AnisoIndex,
    #[serde(default = "default_sphere_samples")]
    pub sphere_samples: usize,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    /// Sweep plan for signals of two variables.
    #[serde(default)]
    pub sampling: S3Sampling,
    #[serde(default)]
    pub profiles: ProfileOutput,
}

pub fn run_wf(cfg: &WfConfig, ctx: &mut RunContext) -> Result<Value> {
    check_positive(cfg.window.width, "window.width")?;
    check_index(&cfg.idx, "idx")?;
    let src = cfg.signal.build(cfg.grid.as_ref(), &ctx.base, "signal")?;
    let est = match src.dim() {
        1 => {
            let (est, profiles) = estimate_wf_with_profiles(&src, &cfg.window, &cfg.idx, cfg.sphere_samples, &cfg.estimator)?;
            for (k, (e, p)) in est.entries.iter().zip(&profiles).enumerate() {
                let keep = match cfg.profiles {
                    ProfileOutput::None => false,
                    ProfileOutput::Singular => e.singular,
                    ProfileOutput::All => true,
                };
                if keep {
                    ctx.write_with(&format!("profiles/dir_{k:05}.csv"), |w| p.write_csv(w))?;
                }
            }
            est
        }
        2 => estimate_kernel_wf(&src, &cfg.window, &cfg.idx, &cfg.sampling, &cfg.estimator)?,
        d => return Err(Error::config("signal", format!("direction sweeps support 1 or 2 variables, got {d}"))),
    };
    ctx.write_json("wf.json", &est.to_json())?;
    let results = json!({
        "directions": est.entries.len(),
        "singular_count": est.singular_count(),
        "angular_step": est.angular_step,
        "singular": serde_json::to_value(singular_owned(&est))?,
    });
    let report = envelope(Command::Wf, cfg, cfg.sampling.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- chirp-verify

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpVerifyConfig {
    pub phase: PolynomialData,
    /// Sampling grid; without one the closed-form chirp STFT is used.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub window: WindowSpec,
    pub idx: AnisoIndex,
    #[serde(default = "default_sphere_samples")]
    pub sphere_samples: usize,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default = "default_chirp_tol")]
    pub tol_angle: f64,
    /// Required fraction of predicted directions matched by the estimate.
    #[serde(default)]
    pub min_coverage: f64,
    /// A signal expected to have an empty estimate under the same settings.
    #[serde(default)]
    pub control: Option<SignalSpec>,
}

pub fn run_chirp_verify(cfg: &ChirpVerifyConfig, ctx: &mut RunContext) -> Result<Value> {
    check_positive(cfg.window.width, "window.width")?;
    check_positive(cfg.tol_angle, "tol_angle")?;
    check_index(&cfg.idx, "idx")?;
    if !(0.0..=1.0).contains(&cfg.min_coverage) {
        return Err(Error::config("min_coverage", "must lie in [0, 1]"));
    }
    let prediction = predict_chirp_wf(&cfg.phase, &cfg.idx)?;
    let spec = match cfg.grid {
        Some(_) => SignalSpec::Chirp { phase: cfg.phase.clone() },
        None => SignalSpec::Analytic {
            signal: AnalyticSignal::PolyChirp { phase: cfg.phase.clone() },
        },
    };
    let src = spec.build(cfg.grid.as_ref(), &ctx.base, "phase")?;
    one_variable(&src, "phase")?;
    let (est, _) = estimate_wf_with_profiles(&src, &cfg.window, &cfg.idx, cfg.sphere_samples, &cfg.estimator)?;
    let cmp = compare_wf(&est, &prediction, cfg.tol_angle + ANGLE_SLACK)?;
    let control = match &cfg.control {
        Some(c) => {
            let csrc = c.build(cfg.grid.as_ref(), &ctx.base, "control")?;
            one_variable(&csrc, "control")?;
            let (cest, _) = estimate_wf_with_profiles(&csrc, &cfg.window, &cfg.idx, cfg.sphere_samples, &cfg.estimator)?;
            ctx.write_json("control_estimate.json", &cest.to_json())?;
            Some(cest.singular_count())
        }
        None => None,
    };
    ctx.write_json("prediction.json", &prediction.to_json())?;
    ctx.write_json("estimate.json", &est.to_json())?;
    let pass = cmp.pass && cmp.coverage >= cfg.min_coverage && control.unwrap_or(0) == 0;
    let results = json!({
        "regime": serde_json::to_value(prediction.regime)?,
        "equality": prediction.equality,
        "singular_count": est.singular_count(),
        "comparison": serde_json::to_value(&cmp)?,
        "max_angle_error": cmp.max_angle_error,
        "coverage": cmp.coverage,
        "control_singular_count": control.map_or(Value::Null, |c| json!(c)),
        "pass": pass,
    });
    let report = envelope(Command::ChirpVerify, cfg, ctx.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- propagate-verify

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateVerifyConfig {
    pub initial: SignalSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub evolution: EvolutionSpec,
    pub window: WindowSpec,
    pub idx: AnisoIndex,
    #[serde(default = "default_sphere_samples")]
    pub sphere_samples: usize,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default = "default_chirp_tol")]
    pub tol_angle: f64,
    /// Radius of the interior region for the closed-form comparison.
    #[serde(default)]
    pub interior_radius: Option<f64>,
    /// Bound on both closed-form errors of a windowed quadratic chirp.
    #[serde(default = "default_closed_form_tol")]
    pub closed_form_tol: f64,
    /// Write the evolved signal as CSV.
    #[serde(default)]
    pub write_signal: bool,
}

fn default_closed_form_tol() -> f64 {
    1e-3
}

/// `(a, c)` when `φ = ax²` and `p = cξ²`.
fn quadratic_pair(phase: &PolynomialData, symbol: &PolynomialData) -> Option<(f64, f64)> {
    let single = |p: &PolynomialData| -> Option<f64> {
        let terms: Vec<(&Vec<u32>, f64)> = p.terms().collect();
        match terms.as_slice() {
            [(alpha, c)] if p.dim() == 1 && alpha[0] == 2 => Some(*c),
            _ => None,
        }
    };
    Some((single(phase)?, single(symbol)?))
}

pub fn run_propagate_verify(cfg: &PropagateVerifyConfig, ctx: &mut RunContext) -> Result<Value> {
    check_positive(cfg.window.width, "window.width")?;
    check_positive(cfg.tol_angle, "tol_angle")?;
    check_positive(cfg.closed_form_tol, "closed_form_tol")?;
    check_index(&cfg.idx, "idx")?;
    cfg.evolution.validate().map_err(|e| Error::config("evolution", e.to_string()))?;
    let src = cfg.initial.build(cfg.grid.as_ref(), &ctx.base, "initial")?;
    let u0 = src
        .sampled()
        .ok_or_else(|| Error::config("initial", "propagation needs a sampled signal"))?;
    one_variable(&src, "initial")?;
    let u1 = propagate(u0, &cfg.evolution)?;
    let back = propagate(&u1, &cfg.evolution.at_time(-cfg.evolution.time))?;
    let norm_error = (u1.norm() / u0.norm() - 1.0).abs();
    let inverse_error = back.distance(u0)? / u0.norm();

    let (before, _) = estimate_wf_with_profiles(u0, &cfg.window, &cfg.idx, cfg.sphere_samples, &cfg.estimator)?;
    let (after, _) = estimate_wf_with_profiles(&u1, &cfg.window, &cfg.idx, cfg.sphere_samples, &cfg.estimator)?;
    let before_set = singular_owned(&before);
    let after_set = singular_owned(&after);
    let transported = predict_transport(&before_set, &cfg.evolution, &cfg.idx)?;
    let after_in_pred = containment_angle(&after_set, &transported);
    let pred_in_after = containment_angle(&transported, &after_set);
    let tol = cfg.tol_angle + ANGLE_SLACK;
    let wf_pass = after_in_pred <= tol && pred_in_after <= tol;

    let closed = match &cfg.initial {
        SignalSpec::WindowedChirp { phase, envelope } => quadratic_pair(phase, &cfg.evolution.symbol).map(|(a, c)| {
            let radius = cfg.interior_radius.unwrap_or(*envelope);
            (a, c, *envelope, radius)
        }),
        _ => None,
    };
    let mut closed_ok = true;
    let slope = match closed {
        Some((a, c, env, radius)) => {
            let t = cfg.evolution.time;
            let beta = evolved_chirp_slope(a, c, t);
            let closed_error = interior_relative_error(&u1, |x| evolved_gaussian_chirp(a, env, c, t, x), radius)?;
            let slope_error = chirp_slope_error(&u1, beta, radius)?;
            closed_ok = closed_error <= cfg.closed_form_tol && slope_error <= cfg.closed_form_tol;
            json!({
                "slope": beta,
                "radius": radius,
                "closed_form_error": closed_error,
                "slope_error": slope_error,
            })
        }
        None => Value::Null,
    };

    if cfg.write_signal {
        ctx.write_with("evolved.csv", |w| u1.write_csv(w))?;
    }
    ctx.write_json("before.json", &before.to_json())?;
    ctx.write_json("after.json", &after.to_json())?;
    ctx.write_json("transported.json", &json!({ "directions": serde_json::to_value(&transported)? }))?;
    let results = json!({
        "norm_error": norm_error,
        "inverse_error": inverse_error,
        "before_singular": before_set.len(),
        "after_singular": after_set.len(),
        "after_in_transported": num(after_in_pred),
        "transported_in_after": num(pred_in_after),
        "wf_pass": wf_pass,
        "closed_form": slope,
        "pass": wf_pass && closed_ok,
    });
    let report = envelope(Command::PropagateVerify, cfg, ctx.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- kernel-check

fn default_moll_fraction() -> f64 {
    0.25
}

fn default_eps_angle() -> f64 {
    0.05
}

fn default_oracle_tol() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub evolution: EvolutionSpec,
    pub grid: GridConfig,
    pub window: WindowSpec,
    pub idx: AnisoIndex,
    #[serde(default)]
    pub sampling: S3Sampling,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    /// Mollifier width as a fraction of the grid Nyquist frequency `π/dx`.
    #[serde(default = "default_moll_fraction")]
    pub moll_fraction: f64,
    #[serde(default = "default_eps_angle")]
    pub eps_angle: f64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    /// Divide the mollifier's attenuation out of the STFT.
    #[serde(default = "yes")]
    pub compensate: bool,
    /// Repeat the sweep at half the mollifier width.
    #[serde(default = "yes")]
    pub halving: bool,
}

struct KernelRun {
    estimate: WFEstimate,
    wf1_empty: bool,
    wf2_empty: bool,
    offenders: usize,
    cone: Option<f64>,
    max_oracle: f64,
}

fn kernel_run(cfg: &KernelCheckConfig, moll: f64, sampling: &S3Sampling) -> Result<KernelRun> {
    let k = kernel_signal_with(&cfg.evolution, cfg.grid.n, cfg.grid.dx, moll)?;
    let estimate = if cfg.compensate {
        estimate_kernel_wf(&Demollified { kernel: &k }, &cfg.window, &cfg.idx, sampling, &cfg.estimator)?
    } else {
        estimate_kernel_wf(&k.signal, &cfg.window, &cfg.idx, sampling, &cfg.estimator)?
    };
    let gc = check_graph_condition(&estimate, cfg.eps_angle)?;
    let cone = cone_constant(&estimate, &cfg.idx).ok();
    let max_oracle = estimate
        .singular()
        .iter()
        .map(|z| angle_to_kernel_relation(z, &cfg.evolution, &cfg.idx, &[]))
        .fold(0.0, f64::max);
    Ok(KernelRun {
        wf1_empty: gc.wf1_empty,
        wf2_empty: gc.wf2_empty,
        offenders: gc.offenders.len(),
        cone,
        max_oracle,
        estimate,
    })
}

pub fn run_kernel_check(cfg: &KernelCheckConfig, ctx: &mut RunContext) -> Result<Value> {
    check_positive(cfg.window.width, "window.width")?;
    check_positive(cfg.moll_fraction, "moll_fraction")?;
    check_positive(cfg.eps_angle, "eps_angle")?;
    check_positive(cfg.oracle_tol, "oracle_tol")?;
    check_positive(cfg.grid.dx, "grid.dx")?;
    check_index(&cfg.idx, "idx")?;
    cfg.evolution.validate().map_err(|e| Error::config("evolution", e.to_string()))?;
    if cfg.evolution.symbol.dim() != 1 {
        return Err(Error::config("evolution.symbol", "kernels are synthesized for d = 1"));
    }
    let sampling = cfg.sampling;
    let moll = cfg.moll_fraction * std::f64::consts::PI / cfg.grid.dx;
    let full = kernel_run(cfg, moll, &sampling)?;
    ctx.write_json("kernel_estimate.json", &full.estimate.to_json())?;
    let half = if cfg.halving {
        let h = kernel_run(cfg, moll / 2.0, &sampling)?;
        ctx.write_json("kernel_estimate_half.json", &h.estimate.to_json())?;
        Some(h)
    } else {
        None
    };
    let cone_text = |c: Option<f64>| c.map(|v| format!("{v:.2}"));
    let cone_stable = match &half {
        Some(h) => full.cone.is_some() && cone_text(full.cone) == cone_text(h.cone),
        None => full.cone.is_some(),
    };
    let oracle_ok = full.max_oracle <= cfg.oracle_tol && half.as_ref().is_none_or(|h| h.max_oracle <= cfg.oracle_tol);
    let graph_ok = full.wf1_empty && full.wf2_empty && half.as_ref().is_none_or(|h| h.wf1_empty && h.wf2_empty);
    let run_json = |r: &KernelRun, w: f64| {
        json!({
            "moll_width": w,
            "directions": r.estimate.entries.len(),
            "singular_count": r.estimate.singular_count(),
            "wf1_empty": r.wf1_empty,
            "wf2_empty": r.wf2_empty,
            "offenders": r.offenders,
            "cone_constant": r.cone.map_or(Value::Null, |c| json!(c)),
            "max_oracle_angle": r.max_oracle,
        })
    };
    let results = json!({
        "wf1_empty": full.wf1_empty,
        "wf2_empty": full.wf2_empty,
        "cone_constant": full.cone.map_or(Value::Null, |c| json!(c)),
        "cone_stable": cone_stable,
        "max_oracle_angle": full.max_oracle,
        "full": run_json(&full, moll),
        "half": half.as_ref().map_or(Value::Null, |h| run_json(h, moll / 2.0)),
        "pass": graph_ok && cone_stable && oracle_ok,
    });
    let report = envelope(Command::KernelCheck, cfg, cfg.sampling.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- relation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationConfig {
    /// Relation in `T*ℝ^{2d}`, layout `(x, y, ξ, η)`.
    pub a: PointSet,
    /// Set in `T*ℝ^d`.
    pub b: PointSet,
    /// With `scales`, the s-conic closure of `A′∘B` is checked.
    #[serde(default)]
    pub idx: Option<AnisoIndex>,
    #[serde(default)]
    pub scales: Vec<f64>,
}

pub fn run_relation(cfg: &RelationConfig, ctx: &mut RunContext) -> Result<Value> {
    let c = compose(&cfg.a, &cfg.b).map_err(|e| Error::config("a", e.to_string()))?;
    let p13 = proj_13(&cfg.a)?;
    let p24 = proj_2neg4(&cfg.a)?;
    let closure = match &cfg.idx {
        Some(idx) if !cfg.scales.is_empty() => {
            for (k, s) in cfg.scales.iter().enumerate() {
                check_positive(*s, &format!("scales[{k}]"))?;
            }
            json!({
                "composition": sconic_closure_check(&c, idx, &cfg.scales)?,
                "b": sconic_closure_check(&cfg.b, idx, &cfg.scales)?,
            })
        }
        _ => Value::Null,
    };
    ctx.write_json("composition.json", &json!({ "points": c.points(), "tol": c.tol() }))?;
    let results = json!({
        "composition": c.points(),
        "proj_13": p13.points(),
        "proj_2neg4": p24.points(),
        "sconic_closed": closure,
    });
    let report = envelope(Command::Relation, cfg, ctx.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- seminorm

fn default_max_order() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormConfig {
    pub signal: SignalSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub idx: AnisoIndex,
    /// Required for the STFT family.
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub r_values: Vec<f64>,
    #[serde(default)]
    pub h_values: Vec<f64>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
}

pub fn run_seminorm(cfg: &SeminormConfig, ctx: &mut RunContext) -> Result<Value> {
    if cfg.r_values.is_empty() && cfg.h_values.is_empty() {
        return Err(Error::config("r_values", "give r_values, h_values or both"));
    }
    for (k, r) in cfg.r_values.iter().enumerate() {
        check_positive(*r, &format!("r_values[{k}]"))?;
    }
    for (k, h) in cfg.h_values.iter().enumerate() {
        check_positive(*h, &format!("h_values[{k}]"))?;
    }
    let src = cfg.signal.build(cfg.grid.as_ref(), &ctx.base, "signal")?;
    let u = src
        .sampled()
        .ok_or_else(|| Error::config("signal", "seminorms are computed for sampled signals"))?;
    one_variable(&src, "signal")?;
    let mut stft_rows = Vec::new();
    if !cfg.r_values.is_empty() {
        let w = cfg.window.ok_or_else(|| Error::config("window", "missing field `window` for r_values"))?;
        check_positive(w.width, "window.width")?;
        let grid = stft_grid_strided(u, &w, 1)?;
        for r in &cfg.r_values {
            let v = stft_seminorm_on_grid(&grid, &cfg.idx, *r)?;
            stft_rows.push(json!({"r": r, "value": num(v.value), "divergent": v.divergent}));
        }
    }
    let mut classical_rows = Vec::new();
    for h in &cfg.h_values {
        let v = classical_seminorm(u, &cfg.idx, *h, cfg.max_order)?;
        classical_rows.push(json!({"h": h, "value": num(v), "divergent": !v.is_finite()}));
    }
    ctx.write_with("seminorm.csv", |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["family", "parameter", "value", "divergent"])?;
        for row in &stft_rows {
            w.write_record(["stft", &float_text(row["r"].as_f64().unwrap_or(f64::NAN)), &row["value"].to_string(), &row["divergent"].to_string()])?;
        }
        for row in &classical_rows {
            w.write_record(["classical", &float_text(row["h"].as_f64().unwrap_or(f64::NAN)), &row["value"].to_string(), &row["divergent"].to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let results = json!({ "stft": stft_rows, "classical": classical_rows });
    let report = envelope(Command::Seminorm, cfg, ctx.seed, results)?;
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- dispatch

/// Loads `config`, runs `cmd` into `out` and removes partial outputs on failure.
pub fn run_command(cmd: Command, config: &Path, out: &Path, seed: Option<u64>) -> Result<Value> {
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ctx = RunContext::new(out, base, seed.unwrap_or(0));
    let result = dispatch(cmd, config, seed, &mut ctx);
    if result.is_err() {
        ctx.cleanup();
    }
    result
}

/// An explicit seed replaces the one in the config's sampling plan.
fn dispatch(cmd: Command, config: &Path, seed: Option<u64>, ctx: &mut RunContext) -> Result<Value> {
    match cmd {
        Command::Stft => run_stft(&load_config(config)?, ctx),
        Command::Wf => {
            let mut cfg: WfConfig = load_config(config)?;
            if let Some(s) = seed {
                cfg.sampling.seed = s;
            }
            run_wf(&cfg, ctx)
        }
        Command::ChirpVerify => run_chirp_verify(&load_config(config)?, ctx),
        Command::PropagateVerify => run_propagate_verify(&load_config(config)?, ctx),
        Command::KernelCheck => {
            let mut cfg: KernelCheckConfig = load_config(config)?;
            if let Some(s) = seed {
                cfg.sampling.seed = s;
            }
            run_kernel_check(&cfg, ctx)
        }
        Command::Relation => run_relation(&load_config(config)?, ctx),
        Command::Seminorm => run_seminorm(&load_config(config)?, ctx),
    }
}
