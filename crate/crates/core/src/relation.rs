//! Finite point sets in phase space and the relation algebra `A′∘B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, project, scale_point, AnisoIndex, PhasePoint, SphereDirection};

/// Default matching radius for exact fixtures.
pub const EXACT_TOL: f64 = 1e-9;

/// Finite set of nonzero points of `T*ℝ^d = ℝ^{2d}` (layout `(x, ξ)`) with a matching radius.
///
/// Points of `T*ℝ^{2d}` use the layout `(x, y, ξ, η)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSetFile", into = "PointSetFile")]
pub struct PointSet {
    ambient: usize,
    points: Vec<Vec<f64>>,
    tol: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSetFile {
    points: Vec<Vec<f64>>,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default)]
    ambient: Option<usize>,
}

fn default_tol() -> f64 {
    EXACT_TOL
}

impl TryFrom<PointSetFile> for PointSet {
    type Error = Error;
    fn try_from(f: PointSetFile) -> Result<Self> {
        let ambient = match (f.ambient, f.points.first()) {
            (Some(a), _) => a,
            (None, Some(p)) => p.len(),
            (None, None) => return Err(Error::Domain("an empty point set needs its ambient dimension".into())),
        };
        PointSet::new(ambient, f.points, f.tol)
    }
}

impl From<PointSet> for PointSetFile {
    fn from(s: PointSet) -> Self {
        PointSetFile {
            points: s.points,
            tol: s.tol,
            ambient: Some(s.ambient),
        }
    }
}

impl PointSet {
    pub fn new(ambient: usize, points: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        if ambient == 0 || !ambient.is_multiple_of(2) {
            return Err(Error::Domain(format!("ambient dimension {ambient} is not even")));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain("matching tolerance must be positive".into()));
        }
        for p in &points {
            if p.len() != ambient {
                return Err(Error::Domain(format!("point {p:?} is not in R^{ambient}")));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("point {p:?} is not finite")));
            }
            if p.iter().all(|v| *v == 0.0) {
                return Err(Error::Domain("point sets exclude the origin".into()));
            }
        }
        Ok(PointSet { ambient, points, tol })
    }

    pub fn empty(ambient: usize, tol: f64) -> Result<Self> {
        PointSet::new(ambient, Vec::new(), tol)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Some member within the matching radius of `p`.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.points.iter().any(|q| dist(q, p) <= self.tol)
    }

    pub fn directions(&self, idx: &AnisoIndex) -> Result<Vec<SphereDirection>> {
        self.points
            .iter()
            .map(|p| project(idx, &PhasePoint::from_concat(p)?))
            .collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d)
}

fn require_pair(a: &PointSet, b: &PointSet) -> Result<usize> {
    if !a.ambient.is_multiple_of(4) || a.ambient != 2 * b.ambient {
        return Err(Error::Domain(format!(
            "relation in R^{} cannot act on points of R^{}",
            a.ambient, b.ambient
        )));
    }
    Ok(b.ambient / 2)
}

/// `p_{1,3}(x, y, ξ, η) = (x, ξ)`.
pub fn proj_13_point(p: &[f64]) -> Vec<f64> {
    let d = p.len() / 4;
    p[..d].iter().chain(&p[2 * d..3 * d]).copied().collect()
}

/// `p_{2,−4}(x, y, ξ, η) = (y, −η)`.
pub fn proj_2neg4_point(p: &[f64]) -> Vec<f64> {
    let d = p.len() / 4;
    p[d..2 * d].iter().copied().chain(p[3 * d..].iter().map(|v| -v)).collect()
}

fn push_unique(out: &mut Vec<Vec<f64>>, p: Vec<f64>) {
    if p.iter().any(|v| *v != 0.0) && !out.contains(&p) {
        out.push(p);
    }
}

pub fn proj_13(a: &PointSet) -> Result<PointSet> {
    let mut out = Vec::new();
    for p in &a.points {
        push_unique(&mut out, proj_13_point(p));
    }
    PointSet::new(a.ambient / 2, out, a.tol)
}

pub fn proj_2neg4(a: &PointSet) -> Result<PointSet> {
    let mut out = Vec::new();
    for p in &a.points {
        push_unique(&mut out, proj_2neg4_point(p));
    }
    PointSet::new(a.ambient / 2, out, a.tol)
}

/// `A′∘B = {(x, ξ) : ∃(y, η) ∈ B, (x, y, ξ, −η) ∈ A}`, matching within `A`'s tolerance.
pub fn compose(a: &PointSet, b: &PointSet) -> Result<PointSet> {
    let d = require_pair(a, b)?;
    let mut out = Vec::new();
    for p in &a.points {
        let y: Vec<f64> = p[d..2 * d].to_vec();
        let eta: Vec<f64> = p[3 * d..].iter().map(|v| -v).collect();
        let target: Vec<f64> = y.into_iter().chain(eta).collect();
        if b.points.iter().any(|q| dist(q, &target) <= a.tol) {
            push_unique(&mut out, proj_13_point(p));
        }
    }
    PointSet::new(b.ambient, out, a.tol)
}

/// For each point and scale, the scaled point projects within `tol` of some member's projection.
pub fn sconic_closure_check(set: &PointSet, idx: &AnisoIndex, scales: &[f64]) -> Result<bool> {
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Domain("scales must be finite and positive".into()));
    }
    let dirs = set.directions(idx)?;
    for p in &set.points {
        let pt = PhasePoint::from_concat(p)?;
        for mu in scales {
            let z = project(idx, &scale_point(idx, &pt, *mu))?;
            if !dirs.iter().any(|w| dist(w.as_slice(), z.as_slice()) <= set.tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Scales every point by `μ` along its `(t, s)` curve.
pub fn scale_set(set: &PointSet, idx: &AnisoIndex, mu: f64) -> Result<PointSet> {
    let pts: Result<Vec<Vec<f64>>> = set
        .points
        .iter()
        .map(|p| Ok(scale_point(idx, &PhasePoint::from_concat(p)?, mu).concat()))
        .collect();
    PointSet::new(set.ambient, pts?, set.tol)
}
