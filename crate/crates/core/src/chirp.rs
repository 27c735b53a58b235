//! Predicted `WF^{t,s}` of chirps `e^{iφ}` with real polynomial phase, in the three index regimes.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_free::gaussian;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimator::WFEstimate;
use crate::geometry::{project, AnisoIndex, PhasePoint, SphereDirection};
use crate::poly::PolynomialData;

/// Tolerance for comparing `s` with `t(m−1)` when the index is not rational.
pub const REGIME_TOL: f64 = 1e-12;

/// Which set carries the prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `{(x, ∇φ_m(x)) : x ≠ 0}` for `s = t(m−1)`.
    GradientGraph,
    /// `(ℝ^d∖0) × {0}` for `s > t(m−1)`.
    XAxis,
    /// `{0} × (ℝ^d∖0)` for `t(m−1) > s` with elliptic `φ_m`.
    XiAxis,
}

/// Predicted set; `equality = false` means only the inclusion `WF ⊆ set` is known.
#[derive(Clone, Debug, PartialEq)]
pub struct WFPrediction {
    pub regime: Regime,
    pub equality: bool,
    pub idx: AnisoIndex,
    principal: PolynomialData,
}

fn compare_regime(idx: &AnisoIndex, m: u32) -> Ordering {
    if let Some((t, s)) = idx.exact() {
        return s.cmp(&(t * Ratio::from_integer(m as i64 - 1)));
    }
    let q = idx.t() * (m - 1) as f64;
    if (idx.s() - q).abs() <= REGIME_TOL {
        Ordering::Equal
    } else if idx.s() > q {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

fn exceeds_one(idx: &AnisoIndex, m: u32, strict: bool) -> bool {
    if let Some((t, _)) = idx.exact() {
        let q = t * Ratio::from_integer(m as i64 - 1);
        let one = Ratio::from_integer(1);
        return if strict { q > one } else { q >= one };
    }
    let q = idx.t() * (m - 1) as f64;
    if strict {
        q > 1.0 + REGIME_TOL
    } else {
        q >= 1.0 - REGIME_TOL
    }
}

fn s_exceeds_one(idx: &AnisoIndex) -> bool {
    match idx.exact() {
        Some((_, s)) => s > Ratio::from_integer(1),
        None => idx.s() > 1.0 + REGIME_TOL,
    }
}

/// Selects the regime of `(phase, idx)` and builds the prediction.
///
/// `s = t(m−1)` needs `t(m−1) > 1`; `s > t(m−1)` needs `t(m−1) ≥ 1` and `s > 1`;
/// `t(m−1) > s > 1` needs `φ_m` elliptic.
pub fn predict_chirp_wf(phase: &PolynomialData, idx: &AnisoIndex) -> Result<WFPrediction> {
    let m = phase.degree();
    if m < 2 {
        return Err(Error::Domain(format!("chirp phases need degree ≥ 2, got {m}")));
    }
    let principal = phase.principal_part();
    let d1 = phase.dim() == 1;
    let (regime, equality) = match compare_regime(idx, m) {
        Ordering::Equal => {
            if !exceeds_one(idx, m, true) {
                return Err(Error::UnsupportedRegime(format!(
                    "s = t(m-1) = {} must exceed 1",
                    idx.s()
                )));
            }
            (Regime::GradientGraph, d1 && (phase.is_even() || phase.is_odd()))
        }
        Ordering::Greater => {
            if !exceeds_one(idx, m, false) || !s_exceeds_one(idx) {
                return Err(Error::UnsupportedRegime(format!(
                    "s > t(m-1) needs t(m-1) >= 1 and s > 1, got {idx} with m = {m}"
                )));
            }
            (Regime::XAxis, d1 && (phase.is_even() || phase.is_odd()))
        }
        Ordering::Less => {
            if !s_exceeds_one(idx) {
                return Err(Error::UnsupportedRegime(format!(
                    "t(m-1) > s needs s > 1, got {idx} with m = {m}"
                )));
            }
            if !is_elliptic(&principal, 720)? {
                return Err(Error::Precondition(
                    "t(m-1) > s requires an elliptic principal part".into(),
                ));
            }
            (Regime::XiAxis, d1 && phase.is_even())
        }
    };
    Ok(WFPrediction {
        regime,
        equality,
        idx: *idx,
        principal,
    })
}

/// Deterministic unit vectors of `ℝ^d`: `±1` for `d = 1`, `n` uniform angles for
/// `d = 2`, and the coordinate axes plus seeded Gaussian draws otherwise.
pub fn unit_samples(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for j in 0..d {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[j] = sign;
                    out.push(e);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            while out.len() < n.max(2 * d) {
                let v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
                let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if nv > 1e-8 {
                    out.push(v.into_iter().map(|a| a / nv).collect());
                }
            }
            out
        }
    }
}

/// `min |φ_m| > 1e−9` over `sphere_samples` unit vectors.
pub fn is_elliptic(principal: &PolynomialData, sphere_samples: usize) -> Result<bool> {
    if !principal.is_homogeneous() {
        return Err(Error::Domain("ellipticity is defined for homogeneous polynomials".into()));
    }
    let min = unit_samples(principal.dim(), sphere_samples.max(4))
        .iter()
        .map(|u| principal.eval_unchecked(u).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(min > 1e-9)
}

mod rand_distr_free {
    use rand::Rng;

    /// Standard normal draw by the Box–Muller transform.
    pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Radii of the gradient-graph sweep: 400 log-spaced values in `[1e−2, 1e2]`.
pub fn graph_radii() -> Vec<f64> {
    (0..400).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 399.0)).collect()
}

impl WFPrediction {
    pub fn dim(&self) -> usize {
        self.principal.dim()
    }

    pub fn principal(&self) -> &PolynomialData {
        &self.principal
    }

    /// Pairs `(x, p(x, ∇φ_m(x)))` of the graph sweep.
    pub fn graph_samples(&self) -> Vec<(Vec<f64>, SphereDirection)> {
        let d = self.dim();
        let mut out = Vec::new();
        for u in unit_samples(d, 72) {
            for r in graph_radii() {
                let x: Vec<f64> = u.iter().map(|v| v * r).collect();
                let g = self.principal.grad_unchecked(&x);
                let p = PhasePoint::new(x.clone(), g).expect("matching blocks");
                out.push((x, project(&self.idx, &p).expect("x is nonzero")));
            }
        }
        out
    }

    /// Sample directions of the predicted set (deduplicated for `d = 1`).
    pub fn directions(&self) -> Vec<SphereDirection> {
        let d = self.dim();
        let raw: Vec<SphereDirection> = match self.regime {
            Regime::GradientGraph => self.graph_samples().into_iter().map(|s| s.1).collect(),
            Regime::XAxis => unit_samples(d, 72)
                .into_iter()
                .map(|u| SphereDirection::new(u.into_iter().chain(std::iter::repeat_n(0.0, d)).collect()).expect("unit"))
                .collect(),
            Regime::XiAxis => unit_samples(d, 72)
                .into_iter()
                .map(|u| SphereDirection::new(std::iter::repeat_n(0.0, d).chain(u).collect()).expect("unit"))
                .collect(),
        };
        if d > 1 {
            return raw;
        }
        let mut kept: Vec<SphereDirection> = Vec::new();
        for z in raw {
            if kept.iter().all(|k| k.angle_to(&z) > 1e-9) {
                kept.push(z);
            }
        }
        kept
    }

    /// Angle from `z` to the predicted set; exact for the axes, sampled for the graph.
    pub fn angle_to(&self, z: &SphereDirection) -> f64 {
        let v = z.as_slice();
        let d = v.len() / 2;
        let block = |r: std::ops::Range<usize>| v[r].iter().map(|a| a * a).sum::<f64>().sqrt().min(1.0);
        match self.regime {
            Regime::XAxis => block(d..2 * d).asin(),
            Regime::XiAxis => block(0..d).asin(),
            Regime::GradientGraph => self
                .directions()
                .iter()
                .map(|p| p.angle_to(z))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "regime": self.regime,
            "equality": self.equality,
            "idx": serde_json::to_value(self.idx).expect("index serializes"),
            "directions": self.directions().iter().map(|d| d.as_slice().to_vec()).collect::<Vec<_>>(),
        })
    }
}

/// Outcome of matching an estimate against a prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// Singular directions outside the tolerance of the predicted set.
    pub violations: Vec<SphereDirection>,
    /// Predicted directions without a singular match (only filled when equality is claimed).
    pub misses: Vec<SphereDirection>,
    pub max_angle_error: f64,
    /// Fraction of predicted directions with a singular direction within tolerance.
    pub coverage: f64,
    pub equality_checked: bool,
    pub tol_angle: f64,
    pub pass: bool,
}

/// Checks `estimate ⊆ prediction` and, when equality is claimed, the converse.
pub fn compare_wf(estimate: &WFEstimate, prediction: &WFPrediction, tol_angle: f64) -> Result<ComparisonReport> {
    if estimate.idx.t() != prediction.idx.t() || estimate.idx.s() != prediction.idx.s() {
        return Err(Error::Precondition(format!(
            "estimate index {} differs from prediction index {}",
            estimate.idx, prediction.idx
        )));
    }
    let singular = estimate.singular();
    let mut violations = Vec::new();
    let mut max_err = 0.0f64;
    for z in &singular {
        let a = prediction.angle_to(z);
        max_err = max_err.max(a);
        if a > tol_angle {
            violations.push((*z).clone());
        }
    }
    let predicted = prediction.directions();
    let mut misses = Vec::new();
    let mut matched = 0usize;
    for p in &predicted {
        if singular.iter().any(|z| z.angle_to(p) <= tol_angle) {
            matched += 1;
        } else if prediction.equality {
            misses.push(p.clone());
        }
    }
    let coverage = if predicted.is_empty() {
        1.0
    } else {
        matched as f64 / predicted.len() as f64
    };
    Ok(ComparisonReport {
        pass: violations.is_empty() && misses.is_empty(),
        violations,
        misses,
        max_angle_error: max_err,
        coverage,
        equality_checked: prediction.equality,
        tol_angle,
    })
}
