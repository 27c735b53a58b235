//! Anisotropic phase-space geometry.
//!
//! The radius `λ_{t,s}(x, ξ)` is the positive root of
//! `λ^{-2t}|x|² + λ^{-2s}|ξ|² = 1`. Internally everything is computed in the
//! normalization `t = 1, s = σ = s/t`, using `λ_{t,s} = λ_{1,σ}^{1/t}`.

use std::fmt;

use num_rational::Ratio;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pair `(t, s)` of decay and regularity indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnisoIndex {
    t: f64,
    s: f64,
    exact: Option<(Ratio<i64>, Ratio<i64>)>,
}

impl AnisoIndex {
    pub fn new(t: f64, s: f64) -> Result<Self> {
        if !(t.is_finite() && s.is_finite()) || t <= 0.0 || s <= 0.0 {
            return Err(Error::Domain(format!("indices must be positive, got t={t}, s={s}")));
        }
        if t + s <= 1.0 {
            return Err(Error::Domain(format!("t + s must exceed 1, got t={t}, s={s}")));
        }
        Ok(AnisoIndex { t, s, exact: None })
    }

    /// Index given by exact rationals; regime decisions then use exact arithmetic.
    pub fn rational(t: Ratio<i64>, s: Ratio<i64>) -> Result<Self> {
        let mut idx = AnisoIndex::new(ratio_f64(t), ratio_f64(s))?;
        if t + s <= Ratio::from_integer(1) {
            return Err(Error::Domain(format!("t + s must exceed 1, got t={t}, s={s}")));
        }
        idx.exact = Some((t, s));
        Ok(idx)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sigma(&self) -> f64 {
        self.s / self.t
    }

    pub fn exact(&self) -> Option<(Ratio<i64>, Ratio<i64>)> {
        self.exact
    }

    /// Gaussian windows belong to `Σ_t^s` only when both indices exceed 1/2.
    pub fn window_admissible(&self) -> bool {
        self.t > 0.5 && self.s > 0.5
    }
}

impl fmt::Display for AnisoIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some((t, s)) => write!(f, "(t={t}, s={s})"),
            None => write!(f, "(t={}, s={})", self.t, self.s),
        }
    }
}

pub(crate) fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IndexValue {
    Float(f64),
    Text(String),
}

fn parse_ratio(text: &str) -> Option<Ratio<i64>> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Ratio::new(n, d))
        }
        None => text.parse::<i64>().ok().map(Ratio::from_integer),
    }
}

impl Serialize for AnisoIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("AnisoIndex", 2)?;
        match self.exact {
            Some((t, s)) => {
                st.serialize_field("t", &t.to_string())?;
                st.serialize_field("s", &s.to_string())?;
            }
            None => {
                st.serialize_field("t", &self.t)?;
                st.serialize_field("s", &self.s)?;
            }
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for AnisoIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            t: IndexValue,
            s: IndexValue,
        }
        let raw = Raw::deserialize(deserializer)?;
        match (raw.t, raw.s) {
            (IndexValue::Float(t), IndexValue::Float(s)) => AnisoIndex::new(t, s).map_err(de::Error::custom),
            (t, s) => {
                let as_ratio = |v: IndexValue| -> std::result::Result<Ratio<i64>, D::Error> {
                    match v {
                        IndexValue::Text(text) => {
                            parse_ratio(&text).ok_or_else(|| de::Error::custom(format!("bad rational `{text}`")))
                        }
                        IndexValue::Float(x) => Err(de::Error::custom(format!(
                            "cannot mix rational and floating indices (got {x})"
                        ))),
                    }
                };
                AnisoIndex::rational(as_ratio(t)?, as_ratio(s)?).map_err(de::Error::custom)
            }
        }
    }
}

/// Point `(x, ξ)` of phase space `T*ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() {
            return Err(Error::Domain(format!(
                "position and frequency blocks differ in length ({} vs {})",
                x.len(),
                xi.len()
            )));
        }
        Ok(PhasePoint { x, xi })
    }

    pub fn one(x: f64, xi: f64) -> Self {
        PhasePoint { x: vec![x], xi: vec![xi] }
    }

    /// Splits a concatenated vector `(x, ξ)` of even length.
    pub fn from_concat(z: &[f64]) -> Result<Self> {
        if z.is_empty() || !z.len().is_multiple_of(2) {
            return Err(Error::Domain(format!("phase vector must have even length, got {}", z.len())));
        }
        let d = z.len() / 2;
        Ok(PhasePoint {
            x: z[..d].to_vec(),
            xi: z[d..].to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn concat(&self) -> Vec<f64> {
        self.x.iter().chain(self.xi.iter()).copied().collect()
    }

    pub fn x_norm(&self) -> f64 {
        norm(&self.x)
    }

    pub fn xi_norm(&self) -> f64 {
        norm(&self.xi)
    }

    pub fn norm(&self) -> f64 {
        self.x_norm().hypot(self.xi_norm())
    }

    pub fn is_zero(&self) -> bool {
        self.x.iter().chain(self.xi.iter()).all(|v| *v == 0.0)
    }
}

/// Unit vector of `ℝ^{2d}` in the concatenated `(x, ξ)` layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SphereDirection {
    z: Vec<f64>,
}

impl SphereDirection {
    /// Accepts a vector that is already unit to within 1e-12.
    pub fn new(z: Vec<f64>) -> Result<Self> {
        let n = norm(&z);
        if z.is_empty() || !z.len().is_multiple_of(2) || (n - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "direction must be a unit vector of even length (length {}, norm {n})",
                z.len()
            )));
        }
        Ok(SphereDirection { z })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(z: Vec<f64>) -> Result<Self> {
        let n = norm(&z);
        if n == 0.0 || !n.is_finite() || !z.len().is_multiple_of(2) {
            return Err(Error::Domain("cannot normalize a zero or odd-length vector".into()));
        }
        Ok(SphereDirection {
            z: z.into_iter().map(|v| v / n).collect(),
        })
    }

    /// Direction at angle `theta` in the `(x, ξ)` plane of `T*ℝ`.
    pub fn from_angle(theta: f64) -> Self {
        SphereDirection {
            z: vec![theta.cos(), theta.sin()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len() / 2
    }

    pub fn point(&self) -> PhasePoint {
        let d = self.dim();
        PhasePoint {
            x: self.z[..d].to_vec(),
            xi: self.z[d..].to_vec(),
        }
    }

    /// Great-circle angle to another direction.
    pub fn angle_to(&self, other: &SphereDirection) -> f64 {
        // chord form keeps full precision for nearby directions
        let chord = dist(&self.z, &other.z);
        2.0 * (0.5 * chord).min(1.0).asin()
    }

    /// Polar angle of a direction in `T*ℝ`.
    pub fn angle(&self) -> f64 {
        self.z[1].atan2(self.z[0])
    }

    pub fn neg(&self) -> SphereDirection {
        SphereDirection {
            z: self.z.iter().map(|v| -v).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for SphereDirection {
    type Error = Error;
    fn try_from(z: Vec<f64>) -> Result<Self> {
        SphereDirection::new(z)
    }
}

impl From<SphereDirection> for Vec<f64> {
    fn from(d: SphereDirection) -> Vec<f64> {
        d.z
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Root of `μ^{-2}a² + μ^{-2σ}b² = 1` for `a, b ≥ 0` not both zero.
fn radius_sigma(sigma: f64, a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return a;
    }
    if a == 0.0 {
        return b.powf(1.0 / sigma);
    }
    let (la, lb) = (a.ln(), b.ln());
    // g is strictly decreasing in l = ln μ
    let g = |l: f64| (2.0 * (la - l)).exp() + (2.0 * (lb - sigma * l)).exp() - 1.0;
    let mut lo = la.max(lb / sigma);
    let mut hi = (la + 0.5 * std::f64::consts::LN_2).max((lb + 0.5 * std::f64::consts::LN_2) / sigma);
    // width in ln μ is the relative width in μ
    let mut iters = 0;
    while hi - lo > 1e-13 && iters < 200 {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    let (ea, eb) = ((2.0 * (la - l)).exp(), (2.0 * (lb - sigma * l)).exp());
    let dg = -2.0 * ea - 2.0 * sigma * eb;
    let polished = l - (ea + eb - 1.0) / dg;
    if polished.is_finite() && (lo..=hi).contains(&polished) {
        polished.exp()
    } else {
        l.exp()
    }
}

fn sigma_radius_of(sigma: f64, p: &PhasePoint) -> Result<f64> {
    if p.is_zero() {
        return Err(Error::Domain("λ is undefined at the origin".into()));
    }
    Ok(radius_sigma(sigma, p.x_norm(), p.xi_norm()))
}

/// The anisotropic radius `λ_{t,s}(p)`.
pub fn lambda_solve(idx: &AnisoIndex, p: &PhasePoint) -> Result<f64> {
    Ok(sigma_radius_of(idx.sigma(), p)?.powf(1.0 / idx.t()))
}

/// Residual of the defining equation of `λ_{t,s}` relative to 1.
pub fn lambda_residual(idx: &AnisoIndex, p: &PhasePoint, lambda: f64) -> f64 {
    let a = p.x_norm();
    let b = p.xi_norm();
    ((lambda.powf(-2.0 * idx.t()) * a * a) + (lambda.powf(-2.0 * idx.s()) * b * b) - 1.0).abs()
}

/// Retraction `p_{1,σ}` onto the unit sphere along the curve `μ ↦ (μx, μ^σ ξ)`.
pub fn project_sigma(sigma: f64, p: &PhasePoint) -> Result<SphereDirection> {
    let mu = sigma_radius_of(sigma, p)?;
    let ms = mu.powf(sigma);
    let z = p.x.iter().map(|v| v / mu).chain(p.xi.iter().map(|v| v / ms)).collect();
    Ok(SphereDirection { z })
}

/// The projection `p_{t,s}(p)`; it depends only on `σ = s/t`.
pub fn project(idx: &AnisoIndex, p: &PhasePoint) -> Result<SphereDirection> {
    project_sigma(idx.sigma(), p)
}

/// The point `(μ^t x, μ^s ξ)`.
pub fn scale_point(idx: &AnisoIndex, p: &PhasePoint, mu: f64) -> PhasePoint {
    let (mt, ms) = (mu.powf(idx.t()), mu.powf(idx.s()));
    PhasePoint {
        x: p.x.iter().map(|v| v * mt).collect(),
        xi: p.xi.iter().map(|v| v * ms).collect(),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn check_dims(z0: &SphereDirection, p: &PhasePoint) -> Result<()> {
    if z0.dim() != p.dim() {
        return Err(Error::Domain(format!(
            "direction dimension {} does not match point dimension {}",
            z0.dim(),
            p.dim()
        )));
    }
    Ok(())
}

/// Membership in `Γ_{σ,z0,ε} = {p : |z0 − p_{1,σ}(p)| < ε}`.
pub fn in_gamma_nbhd(sigma: f64, z0: &SphereDirection, eps: f64, p: &PhasePoint) -> Result<bool> {
    check_dims(z0, p)?;
    let q = project_sigma(sigma, p)?;
    Ok(dist(q.as_slice(), z0.as_slice()) < eps)
}

/// `min_{λ>0} |(λy, λ^σ η) − z0|` found by a coarse log-scan followed by golden-section search.
pub fn tilde_distance(sigma: f64, z0: &SphereDirection, p: &PhasePoint) -> Result<f64> {
    check_dims(z0, p)?;
    if p.is_zero() {
        return Err(Error::Domain("zero point has no orbit".into()));
    }
    let z = z0.as_slice();
    let d = p.dim();
    let f = |l: f64| {
        let (a, b) = (l.exp(), (sigma * l).exp());
        let mut acc = 0.0;
        for i in 0..d {
            acc += (a * p.x[i] - z[i]).powi(2) + (b * p.xi[i] - z[d + i]).powi(2);
        }
        acc.sqrt()
    };
    let (lmin, lmax) = (1e-4f64.ln(), 1e4f64.ln());
    let scan = 64;
    let step = (lmax - lmin) / scan as f64;
    let (mut best, mut best_l) = (f64::INFINITY, lmin);
    for k in 0..=scan {
        let l = lmin + step * k as f64;
        let v = f(l);
        if v < best {
            best = v;
            best_l = l;
        }
    }
    let (mut a, mut b) = ((best_l - step).max(lmin), (best_l + step).min(lmax));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut e = a + phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..200 {
        if b - a < 1e-12 {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + phi * (b - a);
            fe = f(e);
        }
    }
    Ok(best.min(fc).min(fe))
}

/// Membership in `Γ̃_{σ,z0,ε}`: some rescaling `(λy, λ^σ η)` lies in `z0 + B_ε`.
pub fn in_gamma_tilde_nbhd(sigma: f64, z0: &SphereDirection, eps: f64, p: &PhasePoint) -> Result<bool> {
    Ok(tilde_distance(sigma, z0, p)? < eps)
}

/// `inf_{w ∈ G} |p_{1,σ}(p) − w|`.
pub fn dist_to_conic_set(sigma: f64, g: &[SphereDirection], p: &PhasePoint) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::Domain("conic set generator list is empty".into()));
    }
    let q = project_sigma(sigma, p)?;
    let mut best = f64::INFINITY;
    for w in g {
        check_dims(w, p)?;
        best = best.min(dist(q.as_slice(), w.as_slice()));
    }
    Ok(best)
}

/// Constants `(c1, c2)` with `c1 (|x|^{1/t} + |ξ|^{1/s}) ≤ λ_{t,s} ≤ c2 (|x|^{1/t} + |ξ|^{1/s})`.
///
/// The ratio is invariant under the anisotropic scaling, so it is bounded by
/// its extremes on the unit sphere, where `λ = 1`.
pub fn growth_constants(idx: &AnisoIndex) -> (f64, f64) {
    let h = |a: f64| a.powf(1.0 / idx.t()) + (1.0 - a * a).max(0.0).powf(0.5 / idx.s());
    let n = 4000;
    let (mut hmin, mut hmax) = (f64::INFINITY, 0.0f64);
    let (mut amin, mut amax) = (0.0, 0.0);
    for k in 0..=n {
        let a = k as f64 / n as f64;
        let v = h(a);
        if v < hmin {
            hmin = v;
            amin = a;
        }
        if v > hmax {
            hmax = v;
            amax = a;
        }
    }
    let refine = |center: f64, sign: f64| {
        let (mut lo, mut hi) = ((center - 1.0 / n as f64).max(0.0), (center + 1.0 / n as f64).min(1.0));
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if sign * h(m1) < sign * h(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        h(0.5 * (lo + hi))
    };
    hmin = hmin.min(refine(amin, -1.0));
    hmax = hmax.max(refine(amax, 1.0));
    ((1.0 - 1e-9) / hmax, (1.0 + 1e-9) / hmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(t: f64, s: f64) -> AnisoIndex {
        AnisoIndex::new(t, s).unwrap()
    }

    #[test]
    fn closed_forms_on_axes() {
        let i = idx(1.0, 2.0);
        assert!((lambda_solve(&i, &PhasePoint::one(0.0, 4.0)).unwrap() - 2.0).abs() < 1e-14);
        assert!((lambda_solve(&i, &PhasePoint::one(3.0, 0.0)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn unit_sphere_has_radius_one() {
        for (t, s) in [(1.0, 2.0), (0.6, 1.2), (3.0, 1.2)] {
            for k in 0..32 {
                let th = 0.2 + k as f64 * 0.19;
                let l = lambda_solve(&idx(t, s), &PhasePoint::one(th.cos(), th.sin())).unwrap();
                assert!((l - 1.0).abs() < 1e-12, "{l}");
            }
        }
    }

    #[test]
    fn residual_is_tiny() {
        let i = idx(0.7, 2.3);
        let p = PhasePoint::new(vec![3.0, -0.2], vec![1e-3, 40.0]).unwrap();
        let l = lambda_solve(&i, &p).unwrap();
        assert!(lambda_residual(&i, &p, l) < 1e-12);
    }

    #[test]
    fn zero_point_is_rejected() {
        assert!(matches!(lambda_solve(&idx(1.0, 1.0), &PhasePoint::one(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(project(&idx(1.0, 1.0), &PhasePoint::one(0.0, 0.0)).is_err());
    }

    #[test]
    fn projection_examples() {
        let i = idx(1.0, 2.0);
        let d = project(&i, &PhasePoint::one(0.0, 4.0)).unwrap();
        assert!((d.as_slice()[0]).abs() < 1e-15 && (d.as_slice()[1] - 1.0).abs() < 1e-14);
        let d2 = project(&i, &PhasePoint::one(0.0, 36.0)).unwrap();
        assert!(d.angle_to(&d2) < 1e-12);
        let on = PhasePoint::one(0.6, 0.8);
        let d3 = project(&i, &on).unwrap();
        assert!((d3.as_slice()[0] - 0.6).abs() < 1e-14 && (d3.as_slice()[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn scale_point_example() {
        let q = scale_point(&idx(1.0, 2.0), &PhasePoint::one(1.0, 1.0), 4.0);
        assert_eq!(q, PhasePoint::one(4.0, 16.0));
    }

    #[test]
    fn gamma_neighborhoods() {
        let z0 = SphereDirection::from_angle(std::f64::consts::FRAC_PI_2);
        let p = PhasePoint::one(1.0, 0.0);
        assert!(!in_gamma_nbhd(2.0, &z0, 0.1, &p).unwrap());
        assert!(in_gamma_nbhd(2.0, &z0, 2.01, &p).unwrap());
        assert!(!in_gamma_tilde_nbhd(2.0, &z0, 0.1, &p).unwrap());
        let on_orbit = PhasePoint::one(0.0, 9.0);
        assert!(in_gamma_tilde_nbhd(2.0, &z0, 1e-6, &on_orbit).unwrap());
        let g = vec![z0.clone()];
        assert!((dist_to_conic_set(2.0, &g, &p).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(dist_to_conic_set(2.0, &[], &p).is_err());
    }

    #[test]
    fn tilde_distance_along_x_axis_stays_large() {
        // orbit of (1,0) is the positive x-axis; its distance to (0,1) is at least 1
        let z0 = SphereDirection::from_angle(std::f64::consts::FRAC_PI_2);
        let d = tilde_distance(2.0, &z0, &PhasePoint::one(1.0, 0.0)).unwrap();
        assert!(d >= 1.0 - 1e-12);
    }

    #[test]
    fn index_validation_and_serde() {
        assert!(AnisoIndex::new(0.3, 0.5).is_err());
        assert!(AnisoIndex::new(-1.0, 3.0).is_err());
        let i: AnisoIndex = serde_json::from_str(r#"{"t": "6/5", "s": "6/5"}"#).unwrap();
        assert_eq!(i.exact().unwrap().0, Ratio::new(6, 5));
        assert!((i.t() - 1.2).abs() < 1e-15);
        let back = serde_json::to_string(&i).unwrap();
        assert_eq!(back, r#"{"t":"6/5","s":"6/5"}"#);
        let f: AnisoIndex = serde_json::from_str(r#"{"t": 1.5, "s": 1.2}"#).unwrap();
        assert!(f.exact().is_none());
    }

    #[test]
    fn growth_constants_bracket_identity_case() {
        let (c1, c2) = growth_constants(&idx(1.0, 1.0));
        // on the unit circle |x| + |ξ| ranges over [1, √2]
        assert!((c1 - 1.0 / 2f64.sqrt()).abs() < 1e-8);
        assert!((c2 - 1.0).abs() < 1e-8);
    }
}
