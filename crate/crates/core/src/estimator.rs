//! Estimation of `WF^{t,s}` from the decay of `|V_φu|` along the curves `λ ↦ (λ^t x, λ^s ξ)`.
//!
//! A direction is classified singular when the exponential rate fitted to the
//! magnitudes over the reachable `λ`-window does not exceed a threshold and the
//! last sample is still above the numeric floor.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{norm, scale_point, AnisoIndex, PhasePoint, SphereDirection};
use crate::stft::{stft_point, StftSource, WindowSpec};

/// Samples of `λ` along a curve: `[min, max]`, optionally narrowed to `[max/span, max]`.
///
/// The largest `λ` is `max` reduced to the source's reach, or the reach itself when `max = None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    #[serde(default = "default_lambda_min")]
    pub min: f64,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub span: Option<f64>,
}

fn default_lambda_min() -> f64 {
    2.0
}

impl Default for LambdaRange {
    fn default() -> Self {
        LambdaRange {
            min: 2.0,
            max: None,
            span: None,
        }
    }
}

/// Tunables of the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSettings {
    pub n_lambda: usize,
    pub lambda: LambdaRange,
    pub r_threshold: f64,
    pub floor: f64,
    /// Replace single curves by the supremum over the angular cell of each direction.
    pub cell_sup: bool,
    /// Spacing of cell sub-directions in window resolution units.
    pub cell_resolution: f64,
    pub max_subsamples: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            n_lambda: 24,
            lambda: LambdaRange::default(),
            r_threshold: 1.0,
            floor: 1e-14,
            cell_sup: false,
            cell_resolution: 0.5,
            max_subsamples: 4096,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 8 {
            return Err(Error::config("n_lambda", "at least 8 samples are needed"));
        }
        if !(self.r_threshold > 0.0) {
            return Err(Error::config("r_threshold", "must be positive"));
        }
        if !(self.floor > 0.0) {
            return Err(Error::config("floor", "must be positive"));
        }
        if !(self.lambda.min > 0.0) {
            return Err(Error::config("lambda.min", "must be positive"));
        }
        if let Some(m) = self.lambda.max {
            if !(m > self.lambda.min) {
                return Err(Error::config("lambda.max", "must exceed lambda.min"));
            }
        }
        if let Some(s) = self.lambda.span {
            if !(s > 1.0) {
                return Err(Error::config("lambda.span", "must exceed 1"));
            }
        }
        if !(self.cell_resolution > 0.0) || self.max_subsamples == 0 {
            return Err(Error::config("cell_resolution", "must be positive"));
        }
        Ok(())
    }
}

/// `|V|` sampled along one curve (or one angular cell).
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    pub direction: SphereDirection,
    pub lambdas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub floor_mask: Vec<bool>,
    /// The requested `λ_max` exceeded the reach and was reduced.
    pub clipped: bool,
}

impl DecayProfile {
    /// Builds a profile from raw magnitudes; samples below `floor` are masked.
    pub fn from_magnitudes(direction: SphereDirection, lambdas: Vec<f64>, magnitudes: Vec<f64>, floor: f64) -> Result<Self> {
        if lambdas.len() != magnitudes.len() || lambdas.len() < 3 {
            return Err(Error::Domain("profile needs matching λ and magnitude lists".into()));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas[0] <= 0.0 {
            return Err(Error::Domain("λ samples must be positive and strictly increasing".into()));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Domain("magnitudes must be finite and nonnegative".into()));
        }
        let floor_mask = magnitudes.iter().map(|m| *m < floor).collect();
        Ok(DecayProfile {
            direction,
            lambdas,
            magnitudes,
            floor_mask,
            clipped: false,
        })
    }

    pub fn last_above_floor(&self) -> bool {
        !self.floor_mask.last().copied().unwrap_or(true)
    }

    /// CSV columns `lambda, magnitude, log_magnitude`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "magnitude", "log_magnitude"])?;
        for (l, m) in self.lambdas.iter().zip(&self.magnitudes) {
            w.write_record(&[format!("{l:.17e}"), format!("{m:.17e}"), format!("{:.17e}", m.ln())])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fitted rate; `Infinite` marks decay below the floor (super-exponential).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn value(&self) -> f64 {
        match self {
            Rate::Finite(r) => *r,
            Rate::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::report::ser_extended(&self.value(), s)
    }
}

/// Least-squares fit `ln|V| ≈ intercept − rhat·λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub rhat: Rate,
    pub intercept: f64,
    pub residual: f64,
    pub n_valid: usize,
}

fn least_squares(points: &[(f64, f64)]) -> RateFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    RateFit {
        rhat: Rate::Finite(-slope),
        intercept,
        residual: (rss / n).sqrt(),
        n_valid: points.len(),
    }
}

/// Fit over the samples above the floor; fewer than three valid samples give the sentinel.
pub fn fit_rate(p: &DecayProfile) -> RateFit {
    fit_prefix(p, p.lambdas.len())
}

fn fit_prefix(p: &DecayProfile, len: usize) -> RateFit {
    let pts: Vec<(f64, f64)> = (0..len)
        .filter(|k| !p.floor_mask[*k])
        .map(|k| (p.lambdas[k], p.magnitudes[k].ln()))
        .collect();
    if pts.len() < 3 {
        return RateFit {
            rhat: Rate::Infinite,
            intercept: f64::NAN,
            residual: 0.0,
            n_valid: pts.len(),
        };
    }
    least_squares(&pts)
}

/// Fits over the leading fractions of the samples, e.g. `[0.5, 0.75, 1.0]`.
///
/// Super-exponential decay shows up as rates increasing with the extent.
pub fn nested_rates(p: &DecayProfile, fractions: &[f64]) -> Vec<RateFit> {
    fractions
        .iter()
        .map(|f| {
            let len = ((p.lambdas.len() as f64 * f).round() as usize).clamp(1, p.lambdas.len());
            fit_prefix(p, len)
        })
        .collect()
}

/// True when the nested rates increase strictly (finite ones) or reach the sentinel.
pub fn grows_super_exponentially(rates: &[RateFit]) -> bool {
    rates.windows(2).all(|w| match (w[0].rhat, w[1].rhat) {
        (Rate::Finite(a), Rate::Finite(b)) => b > a,
        (_, Rate::Infinite) => true,
        (Rate::Infinite, Rate::Finite(_)) => false,
    })
}

/// Singular ⇔ finite `rhat ≤ threshold` (ties count as singular) and the last sample above the floor.
pub fn classify(fit: &RateFit, profile: &DecayProfile, r_threshold: f64) -> bool {
    match fit.rhat {
        Rate::Finite(r) => r <= r_threshold && profile.last_above_floor(),
        Rate::Infinite => false,
    }
}

/// Largest `λ` with `(λ^t x, λ^s ξ)` inside the reach, for the given block maxima `|x_i|, |ξ_i|`.
fn reach_lambda<S: StftSource + ?Sized>(u: &S, w: &WindowSpec, idx: &AnisoIndex, xmax: f64, ximax: f64) -> f64 {
    let reach = u.reach(w);
    let mut cap = f64::INFINITY;
    if let Some(bound) = reach.position {
        if xmax > 0.0 {
            cap = cap.min((bound / xmax).powf(1.0 / idx.t()));
        }
    }
    if let Some(bound) = reach.frequency {
        if ximax > 0.0 {
            cap = cap.min((bound / ximax).powf(1.0 / idx.s()));
        }
    }
    // keep the last sample strictly inside despite rounding in powf
    cap * (1.0 - 1e-12)
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln();
    (0..n).map(|k| lo * (r * k as f64 / (n - 1) as f64).exp()).collect()
}

/// The `λ` samples for a curve whose reach is `cap`; returns the samples and the clipping flag.
pub fn lambda_samples(range: &LambdaRange, cap: f64, n: usize) -> Result<(Vec<f64>, bool)> {
    let (top, clipped) = match range.max {
        Some(max) => (max.min(cap), cap < max),
        None => {
            if !cap.is_finite() {
                return Err(Error::Precondition(
                    "the source has unbounded reach; give an explicit lambda.max".into(),
                ));
            }
            (cap, false)
        }
    };
    let lo = range.span.map_or(range.min, |s| range.min.max(top / s));
    if top <= lo * (1.0 + 1e-9) {
        return Err(Error::Range(format!("largest usable λ = {top:.4} does not exceed λ_min = {lo}")));
    }
    Ok((geometric(lo, top, n), clipped))
}

fn block_max(z: &[f64]) -> (f64, f64) {
    let d = z.len() / 2;
    let xm = z[..d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fm = z[d..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (xm, fm)
}

/// `|V_φu|` along the curve through `z0`.
pub fn decay_profile<S: StftSource + ?Sized>(
    u: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    z0: &SphereDirection,
    range: &LambdaRange,
    n_samples: usize,
    floor: f64,
) -> Result<DecayProfile> {
    if z0.dim() != u.dim() {
        return Err(Error::Domain(format!("direction in T*R^{} for a signal in R^{}", z0.dim(), u.dim())));
    }
    let (xm, fm) = block_max(z0.as_slice());
    let cap = reach_lambda(u, w, idx, xm, fm);
    let (lambdas, clipped) = lambda_samples(range, cap, n_samples)?;
    let base = z0.point();
    let mut mags = Vec::with_capacity(lambdas.len());
    for l in &lambdas {
        mags.push(stft_point(u, w, &scale_point(idx, &base, *l))?.norm());
    }
    let mut p = DecayProfile::from_magnitudes(z0.clone(), lambdas, mags, floor)?;
    p.clipped = clipped;
    Ok(p)
}

/// Supremum of `|V_φu|` over the angular cell `[θ0 − h, θ0 + h]` of `T*ℝ` at each `λ`.
///
/// The cell is sampled so that neighbouring points on the scaled arc are at
/// most `resolution` apart in the metric `(Δx/w)² + (w Δξ)²`.
#[allow(clippy::too_many_arguments)]
pub fn cell_profile<S: StftSource + ?Sized>(
    u: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    theta0: f64,
    half: f64,
    range: &LambdaRange,
    n_samples: usize,
    floor: f64,
    resolution: f64,
    max_subsamples: usize,
) -> Result<DecayProfile> {
    if u.dim() != 1 {
        return Err(Error::Precondition("angular cells are defined for d = 1".into()));
    }
    let (mut xm, mut fm) = (0.0f64, 0.0f64);
    for k in 0..=16 {
        let th = theta0 - half + 2.0 * half * k as f64 / 16.0;
        xm = xm.max(th.cos().abs());
        fm = fm.max(th.sin().abs());
    }
    let cap = reach_lambda(u, w, idx, xm, fm);
    let (lambdas, clipped) = lambda_samples(range, cap, n_samples)?;
    let mut mags = Vec::with_capacity(lambdas.len());
    for l in &lambdas {
        let (lt, ls) = (l.powf(idx.t()), l.powf(idx.s()));
        let speed = |th: f64| ((lt * th.sin() / w.width).powi(2) + (ls * th.cos() * w.width).powi(2)).sqrt();
        let arc = speed(theta0 - half).max(speed(theta0)).max(speed(theta0 + half)) * 2.0 * half;
        let k = ((arc / resolution).ceil() as usize).clamp(2, max_subsamples);
        let mut best = 0.0f64;
        for j in 0..=k {
            let th = theta0 - half + 2.0 * half * j as f64 / k as f64;
            let p = PhasePoint::one(lt * th.cos(), ls * th.sin());
            best = best.max(stft_point(u, w, &p)?.norm());
        }
        mags.push(best);
    }
    let mut p = DecayProfile::from_magnitudes(SphereDirection::from_angle(theta0), lambdas, mags, floor)?;
    p.clipped = clipped;
    Ok(p)
}

/// One classified direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WfEntry {
    #[serde(rename = "dir")]
    pub direction: SphereDirection,
    pub rhat: Rate,
    pub residual: f64,
    pub n_valid: usize,
    pub singular: bool,
    #[serde(skip)]
    pub fit: RateFit,
    #[serde(skip)]
    pub lambda_max: f64,
}

/// Classified sweep over sampled sphere directions.
#[derive(Clone, Debug, PartialEq)]
pub struct WFEstimate {
    pub idx: AnisoIndex,
    pub r_threshold: f64,
    /// Angular spacing of the sweep (d = 1), or the refinement radius (4-d sweeps).
    pub angular_step: f64,
    pub entries: Vec<WfEntry>,
}

impl WFEstimate {
    pub fn singular(&self) -> Vec<&SphereDirection> {
        self.entries.iter().filter(|e| e.singular).map(|e| &e.direction).collect()
    }

    /// Number of variables of the estimated signal (0 for an empty sweep).
    pub fn signal_dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.direction.as_slice().len() / 2)
    }

    pub fn singular_count(&self) -> usize {
        self.entries.iter().filter(|e| e.singular).count()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "idx": serde_json::to_value(self.idx).expect("index serializes"),
            "threshold": self.r_threshold,
            "angular_step": self.angular_step,
            "entries": serde_json::to_value(&self.entries).expect("entries serialize"),
        })
    }
}

fn entry(profile: &DecayProfile, r_threshold: f64) -> WfEntry {
    let fit = fit_rate(profile);
    WfEntry {
        direction: profile.direction.clone(),
        rhat: fit.rhat,
        residual: fit.residual,
        n_valid: fit.n_valid,
        singular: classify(&fit, profile, r_threshold),
        fit,
        lambda_max: *profile.lambdas.last().expect("profile is nonempty"),
    }
}

fn check_index(idx: &AnisoIndex) -> Result<()> {
    if !idx.window_admissible() {
        return Err(Error::Precondition(format!(
            "Gaussian windows need t, s > 1/2; got {idx}"
        )));
    }
    Ok(())
}

/// Uniform angles `2πk/N` on the circle of `T*ℝ`.
pub fn circle_directions(n: usize) -> Vec<SphereDirection> {
    (0..n).map(|k| SphereDirection::from_angle(2.0 * PI * k as f64 / n as f64)).collect()
}

/// Sweep of `N` uniform directions of `T*ℝ`.
pub fn estimate_wf<S: StftSource + ?Sized>(
    u: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    sphere_samples: usize,
    settings: &EstimatorSettings,
) -> Result<WFEstimate> {
    Ok(estimate_wf_with_profiles(u, w, idx, sphere_samples, settings)?.0)
}

/// [`estimate_wf`] together with the decay profile behind each entry.
pub fn estimate_wf_with_profiles<S: StftSource + ?Sized>(
    u: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    sphere_samples: usize,
    settings: &EstimatorSettings,
) -> Result<(WFEstimate, Vec<DecayProfile>)> {
    settings.validate()?;
    check_index(idx)?;
    if u.dim() != 1 {
        return Err(Error::Precondition("direction sweeps on the circle need d = 1".into()));
    }
    if sphere_samples < 90 {
        return Err(Error::Precondition(format!("at least 90 directions are required, got {sphere_samples}")));
    }
    let step = 2.0 * PI / sphere_samples as f64;
    let entries: Result<Vec<(WfEntry, DecayProfile)>> = (0..sphere_samples)
        .into_par_iter()
        .map(|k| {
            let theta = step * k as f64;
            let profile = if settings.cell_sup {
                cell_profile(
                    u,
                    w,
                    idx,
                    theta,
                    step / 2.0,
                    &settings.lambda,
                    settings.n_lambda,
                    settings.floor,
                    settings.cell_resolution,
                    settings.max_subsamples,
                )?
            } else {
                decay_profile(u, w, idx, &SphereDirection::from_angle(theta), &settings.lambda, settings.n_lambda, settings.floor)?
            };
            Ok((entry(&profile, settings.r_threshold), profile))
        })
        .collect();
    let (entries, profiles) = entries?.into_iter().unzip();
    Ok((
        WFEstimate {
            idx: *idx,
            r_threshold: settings.r_threshold,
            angular_step: step,
            entries,
        },
        profiles,
    ))
}

/// Classify an explicit list of directions (any dimension).
pub fn estimate_directions<S: StftSource + ?Sized>(
    u: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    dirs: &[SphereDirection],
    settings: &EstimatorSettings,
) -> Result<Vec<WfEntry>> {
    settings.validate()?;
    check_index(idx)?;
    dirs.par_iter()
        .map(|z| {
            let p = decay_profile(u, w, idx, z, &settings.lambda, settings.n_lambda, settings.floor)?;
            Ok(entry(&p, settings.r_threshold))
        })
        .collect()
}

/// Sampling plan on `𝕊³ ⊂ T*ℝ²` in the `(x, y, ξ, η)` layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct S3Sampling {
    /// Number of steps of the mixing angle between the `(x,ξ)` and `(y,η)` planes.
    pub n_alpha: usize,
    /// Angular grid size on each plane.
    pub n_theta: usize,
    pub refine_per_hit: usize,
    pub refine_radius: f64,
    pub max_directions: usize,
    pub seed: u64,
}

impl Default for S3Sampling {
    fn default() -> Self {
        S3Sampling {
            n_alpha: 8,
            n_theta: 24,
            refine_per_hit: 6,
            refine_radius: 0.06,
            max_directions: 8000,
            seed: 0,
        }
    }
}

/// `(cos α cos θ₁, sin α cos θ₂, cos α sin θ₁, sin α sin θ₂)` over a product grid;
/// the two pure planes `α = 0, π/2` appear once per angle.
pub fn s3_product_grid(n_alpha: usize, n_theta: usize) -> Vec<SphereDirection> {
    let mut out = Vec::new();
    for i in 0..=n_alpha {
        let a = 0.5 * PI * i as f64 / n_alpha as f64;
        let (ca, sa) = (a.cos(), a.sin());
        let pure = i == 0 || i == n_alpha;
        for j in 0..n_theta {
            let t1 = 2.0 * PI * j as f64 / n_theta as f64;
            let inner = if pure { 1 } else { n_theta };
            for k in 0..inner {
                let t2 = if pure { t1 } else { 2.0 * PI * k as f64 / n_theta as f64 };
                let z = if i == 0 {
                    vec![t1.cos(), 0.0, t1.sin(), 0.0]
                } else if i == n_alpha {
                    vec![0.0, t2.cos(), 0.0, t2.sin()]
                } else {
                    vec![ca * t1.cos(), sa * t2.cos(), ca * t1.sin(), sa * t2.sin()]
                };
                out.push(SphereDirection::normalized(z).expect("unit by construction"));
            }
        }
    }
    out
}

/// Orthonormal basis of the tangent space `z^⊥` of the sphere.
fn tangent_basis(z: &[f64]) -> Vec<Vec<f64>> {
    let n = z.len();
    let mut basis: Vec<Vec<f64>> = vec![z.to_vec()];
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|a| a / nv).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Fibonacci lattice of `k` unit vectors in `ℝ³`, rotated about the polar axis by `spin`.
fn fibonacci_sphere(k: usize, spin: f64) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64 + spin;
            [r * phi.cos(), y, r * phi.sin()]
        })
        .collect()
}

/// Points at angular distance `radius` around `z` on `𝕊³`, placed by a Fibonacci lattice of tangent directions.
pub fn refine_around(z: &SphereDirection, k: usize, radius: f64, spin: f64) -> Vec<SphereDirection> {
    let basis = tangent_basis(z.as_slice());
    fibonacci_sphere(k, spin)
        .into_iter()
        .map(|c| {
            let v: Vec<f64> = (0..z.as_slice().len())
                .map(|i| z.as_slice()[i] * radius.cos() + radius.sin() * (c[0] * basis[0][i] + c[1] * basis[1][i] + c[2] * basis[2][i]))
                .collect();
            SphereDirection::normalized(v).expect("nonzero")
        })
        .collect()
}

/// Sweep of `𝕊³` for a signal of two variables (kernels and tensor products).
pub fn estimate_kernel_wf<S: StftSource + ?Sized>(
    k: &S,
    w: &WindowSpec,
    idx: &AnisoIndex,
    sampling: &S3Sampling,
    settings: &EstimatorSettings,
) -> Result<WFEstimate> {
    if k.dim() != 2 {
        return Err(Error::Precondition(format!("kernel sweeps need a signal of 2 variables, got {}", k.dim())));
    }
    let mut dirs = s3_product_grid(sampling.n_alpha.max(1), sampling.n_theta.max(4));
    dirs.truncate(sampling.max_directions);
    let mut entries = estimate_directions(k, w, idx, &dirs, settings)?;
    let hits: Vec<SphereDirection> = entries.iter().filter(|e| e.singular).map(|e| e.direction.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut extra = Vec::new();
    for h in hits {
        if entries.len() + extra.len() + sampling.refine_per_hit > sampling.max_directions {
            break;
        }
        let spin = rng.gen::<f64>() * 2.0 * PI;
        extra.extend(refine_around(&h, sampling.refine_per_hit, sampling.refine_radius, spin));
    }
    entries.extend(estimate_directions(k, w, idx, &extra, settings)?);
    Ok(WFEstimate {
        idx: *idx,
        r_threshold: settings.r_threshold,
        angular_step: sampling.refine_radius,
        entries,
    })
}

/// Outcome of the graph-condition check on a 4-d estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphCondition {
    pub wf1_empty: bool,
    pub wf2_empty: bool,
    /// Singular directions near a forbidden plane, tagged 1 or 2.
    pub offenders: Vec<(u8, SphereDirection)>,
}

fn blocks4(z: &[f64]) -> (f64, f64) {
    // layout (x, y, ξ, η) with blocks of length d
    let d = z.len() / 4;
    let left = z[..d].iter().chain(&z[2 * d..3 * d]).map(|v| v * v).sum::<f64>().sqrt();
    let right = z[d..2 * d].iter().chain(&z[3 * d..]).map(|v| v * v).sum::<f64>().sqrt();
    (left, right)
}

/// Angle between a unit vector and the plane `{(x, 0, ξ, 0)}`.
pub fn angle_to_plane1(z: &SphereDirection) -> f64 {
    blocks4(z.as_slice()).1.min(1.0).asin()
}

/// Angle between a unit vector and the plane `{(0, y, 0, −η)}`.
pub fn angle_to_plane2(z: &SphereDirection) -> f64 {
    blocks4(z.as_slice()).0.min(1.0).asin()
}

/// `WF₁ = ∅` iff no singular direction lies within `eps_angle` of `{(x,0,ξ,0)}`; `WF₂` likewise for `{(0,y,0,−η)}`.
pub fn check_graph_condition(wf: &WFEstimate, eps_angle: f64) -> Result<GraphCondition> {
    let mut offenders = Vec::new();
    for z in wf.singular() {
        if z.as_slice().len() % 4 != 0 {
            return Err(Error::Precondition("graph condition needs directions of T*R^{2d}".into()));
        }
        if angle_to_plane1(z) < eps_angle {
            offenders.push((1, z.clone()));
        }
        if angle_to_plane2(z) < eps_angle {
            offenders.push((2, z.clone()));
        }
    }
    Ok(GraphCondition {
        wf1_empty: offenders.iter().all(|o| o.0 != 1),
        wf2_empty: offenders.iter().all(|o| o.0 != 2),
        offenders,
    })
}

/// Smallest `c` on the lattice `1.00, 1.01, …` with
/// `c^{-1}(|x|^{1/t}+|ξ|^{1/s}) < |y|^{1/t}+|η|^{1/s} < c(|x|^{1/t}+|ξ|^{1/s})` on every singular direction.
pub fn cone_constant(wf: &WFEstimate, idx: &AnisoIndex) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for z in wf.singular() {
        let v = z.as_slice();
        if v.len() % 4 != 0 {
            return Err(Error::Precondition("cone constant needs directions of T*R^{2d}".into()));
        }
        let d = v.len() / 4;
        let bn = |r: std::ops::Range<usize>| v[r].iter().map(|a| a * a).sum::<f64>().sqrt();
        let a = bn(0..d).powf(1.0 / idx.t()) + bn(2 * d..3 * d).powf(1.0 / idx.s());
        let b = bn(d..2 * d).powf(1.0 / idx.t()) + bn(3 * d..4 * d).powf(1.0 / idx.s());
        if a < 1e-12 || b < 1e-12 {
            return Err(Error::Precondition(format!(
                "singular direction {v:?} has a vanishing block; the graph condition fails"
            )));
        }
        let ratio = (a / b).max(b / a);
        worst = Some(worst.map_or(ratio, |m: f64| m.max(ratio)));
    }
    Ok(match worst {
        None => 1.0,
        Some(r) => ((r * 100.0).floor() + 1.0) / 100.0,
    })
}

/// Angle from a 4-d direction to the product cone `(A ∪ 0) × (B ∪ 0)` built from
/// direction sets `A` (of the `(x,ξ)` block) and `B` (of the `(y,η)` block).
pub fn angle_to_product_cone(z: &SphereDirection, left: &[SphereDirection], right: &[SphereDirection]) -> f64 {
    let v = z.as_slice();
    let d = v.len() / 4;
    let lblock: Vec<f64> = v[..d].iter().chain(&v[2 * d..3 * d]).copied().collect();
    let rblock: Vec<f64> = v[d..2 * d].iter().chain(&v[3 * d..]).copied().collect();
    let dot = |a: &[f64], b: &SphereDirection| a.iter().zip(b.as_slice()).map(|(p, q)| p * q).sum::<f64>().max(0.0);
    let lbest = left.iter().map(|p| dot(&lblock, p)).fold(0.0, f64::max);
    let rbest = right.iter().map(|q| dot(&rblock, q)).fold(0.0, f64::max);
    lbest.hypot(rbest).min(1.0).acos()
}

/// Singular directions of a product estimate measured against the product of its factors' estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorBound {
    pub max_angle: f64,
    pub offenders: Vec<SphereDirection>,
    pub tol_angle: f64,
    pub holds: bool,
}

/// `WF(u⊗v) ⊆ ((WF(u) ∪ 0) × (WF(v) ∪ 0)) ∖ 0` up to `tol_angle`.
///
/// With `t = s` the product set is a Euclidean cone and the angle is exact; other
/// indices are rejected.
pub fn tensor_bound(product: &WFEstimate, left: &WFEstimate, right: &WFEstimate, tol_angle: f64) -> Result<TensorBound> {
    if !(tol_angle > 0.0) {
        return Err(Error::Domain("tol_angle must be positive".into()));
    }
    for e in [left, right] {
        if e.idx.t() != product.idx.t() || e.idx.s() != product.idx.s() {
            return Err(Error::Precondition("factor and product estimates use different indices".into()));
        }
    }
    if product.idx.t() != product.idx.s() {
        return Err(Error::Precondition(format!("the product cone test needs t = s, got {}", product.idx)));
    }
    let lset: Vec<SphereDirection> = left.singular().into_iter().cloned().collect();
    let rset: Vec<SphereDirection> = right.singular().into_iter().cloned().collect();
    let mut max_angle = 0.0f64;
    let mut offenders = Vec::new();
    for z in product.singular() {
        if z.as_slice().len() != 2 * (left.signal_dim() + right.signal_dim()) {
            return Err(Error::Precondition("product directions do not match the factor dimensions".into()));
        }
        let a = angle_to_product_cone(z, &lset, &rset);
        max_angle = max_angle.max(a);
        if a > tol_angle {
            offenders.push(z.clone());
        }
    }
    Ok(TensorBound {
        max_angle,
        holds: offenders.is_empty(),
        offenders,
        tol_angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::AnalyticSignal;

    fn synthetic(mags: impl Fn(f64) -> f64) -> DecayProfile {
        let l = geometric(2.0, 20.0, 24);
        let m = l.iter().map(|v| mags(*v)).collect();
        DecayProfile::from_magnitudes(SphereDirection::from_angle(0.0), l, m, 1e-300).unwrap()
    }

    #[test]
    fn exact_exponential_rate() {
        let f = fit_rate(&synthetic(|l| (-3.0 * l).exp()));
        assert!((f.rhat.value() - 3.0).abs() < 1e-6);
        assert!(f.residual < 1e-9);
        let c = fit_rate(&synthetic(|_| 0.25));
        assert!(c.rhat.value().abs() < 1e-6);
    }

    #[test]
    fn gaussian_decay_grows_across_extents() {
        let p = synthetic(|l| (-l * l).exp());
        let rates = nested_rates(&p, &[0.5, 0.75, 1.0]);
        assert!(grows_super_exponentially(&rates));
        assert!(rates[2].rhat.value() > 10.0);
    }

    #[test]
    fn floor_gives_sentinel() {
        let l = geometric(2.0, 20.0, 12);
        let p = DecayProfile::from_magnitudes(SphereDirection::from_angle(0.0), l, vec![1e-20; 12], 1e-14).unwrap();
        let f = fit_rate(&p);
        assert_eq!(f.rhat, Rate::Infinite);
        assert_eq!(f.n_valid, 0);
        assert!(!classify(&f, &p, 1.0));
    }

    #[test]
    fn ties_are_singular() {
        let p = synthetic(|l| (-0.5 * l).exp());
        let f = fit_rate(&p);
        assert!(classify(&f, &p, f.rhat.value()));
    }

    #[test]
    fn lambda_samples_respect_reach() {
        let r = LambdaRange::default();
        let (l, clipped) = lambda_samples(&r, 10.0, 24).unwrap();
        assert_eq!(l.len(), 24);
        assert!(!clipped && (l[0] - 2.0).abs() < 1e-15 && (l[23] - 10.0).abs() < 1e-12);
        let capped = LambdaRange { max: Some(40.0), ..r };
        let (l2, c2) = lambda_samples(&capped, 30.0, 24).unwrap();
        assert!(c2 && l2.len() == 24 && (*l2.last().unwrap() - 30.0).abs() < 1e-12);
        let (l4, c4) = lambda_samples(&capped, 100.0, 24).unwrap();
        assert!(!c4 && (*l4.last().unwrap() - 40.0).abs() < 1e-12);
        assert!(matches!(lambda_samples(&capped, 1.5, 24), Err(Error::Range(_))));
        assert!(lambda_samples(&r, f64::INFINITY, 24).is_err());
        let span = LambdaRange { span: Some(2.0), ..r };
        let (l3, _) = lambda_samples(&span, 10.0, 24).unwrap();
        assert!((l3[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_one_and_delta_sweeps() {
        let idx = AnisoIndex::new(1.0, 1.0).unwrap();
        let w = WindowSpec::new(1.0).unwrap();
        let settings = EstimatorSettings {
            lambda: LambdaRange {
                min: 2.0,
                max: Some(1000.0),
                span: None,
            },
            ..Default::default()
        };
        let one = estimate_wf(&AnalyticSignal::ConstantOne { dim: 1 }, &w, &idx, 720, &settings).unwrap();
        let s: Vec<f64> = one.singular().iter().map(|d| d.angle()).collect();
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s.iter().all(|a| a.sin().abs() < 1e-12));
        let delta = estimate_wf(&AnalyticSignal::DiracDelta { dim: 1 }, &w, &idx, 720, &settings).unwrap();
        let s: Vec<f64> = delta.singular().iter().map(|d| d.angle()).collect();
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s.iter().all(|a| a.cos().abs() < 1e-12));
    }

    #[test]
    fn s3_grid_is_unit_and_covers_planes() {
        let g = s3_product_grid(4, 12);
        assert_eq!(g.len(), 12 + 12 + 3 * 144);
        assert!(g.iter().all(|z| (norm(z.as_slice()) - 1.0).abs() < 1e-14));
        assert!(g.iter().any(|z| angle_to_plane1(z) < 1e-15));
        assert!(g.iter().any(|z| angle_to_plane2(z) < 1e-15));
    }

    #[test]
    fn refinement_stays_at_radius() {
        let z = SphereDirection::normalized(vec![1.0, 2.0, -0.5, 0.3]).unwrap();
        for p in refine_around(&z, 10, 0.05, 0.3) {
            assert!((p.angle_to(&z) - 0.05).abs() < 1e-12);
        }
    }

    fn fake_estimate(dirs: Vec<Vec<f64>>) -> WFEstimate {
        let fit = RateFit {
            rhat: Rate::Finite(0.0),
            intercept: 0.0,
            residual: 0.0,
            n_valid: 10,
        };
        WFEstimate {
            idx: AnisoIndex::new(1.0, 1.0).unwrap(),
            r_threshold: 1.0,
            angular_step: 0.1,
            entries: dirs
                .into_iter()
                .map(|z| WfEntry {
                    direction: SphereDirection::normalized(z).unwrap(),
                    rhat: fit.rhat,
                    residual: 0.0,
                    n_valid: 10,
                    singular: true,
                    fit,
                    lambda_max: 10.0,
                })
                .collect(),
        }
    }

    #[test]
    fn graph_condition_examples() {
        let empty = fake_estimate(vec![]);
        let g = check_graph_condition(&empty, 0.05).unwrap();
        assert!(g.wf1_empty && g.wf2_empty);
        assert_eq!(cone_constant(&empty, &empty.idx).unwrap(), 1.0);
        let on_plane = fake_estimate(vec![vec![1.0, 0.0, 1.0, 0.0]]);
        let g = check_graph_condition(&on_plane, 0.05).unwrap();
        assert!(!g.wf1_empty && g.wf2_empty);
        assert!(cone_constant(&on_plane, &on_plane.idx).is_err());
    }

    #[test]
    fn symmetric_graph_has_unit_cone_constant() {
        let e = fake_estimate(vec![vec![1.0, 1.0, 2.0, -2.0], vec![-0.3, -0.3, 1.0, -1.0]]);
        let c = cone_constant(&e, &e.idx).unwrap();
        assert!((c - 1.01).abs() < 1e-12);
    }
}
