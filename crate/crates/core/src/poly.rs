//! Real multivariate polynomials used both as chirp phases and as evolution symbols.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real polynomial `Σ c_α x^α` in `d` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialData {
    dim: usize,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Term {
    alpha: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyFile {
    dim: usize,
    coeffs: Vec<Term>,
}

impl PolynomialData {
    /// Builds a polynomial, summing repeated multi-indices and dropping zero coefficients.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("polynomial dimension must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (alpha, c) in terms {
            if alpha.len() != dim {
                return Err(Error::Domain(format!(
                    "multi-index {alpha:?} does not have {dim} entries"
                )));
            }
            if !c.is_finite() {
                return Err(Error::Domain(format!("coefficient of {alpha:?} is not finite")));
            }
            *coeffs.entry(alpha).or_insert(0.0) += c;
        }
        coeffs.retain(|_, c| *c != 0.0);
        if coeffs.is_empty() {
            return Err(Error::Domain("polynomial has no nonzero coefficient".into()));
        }
        Ok(PolynomialData { dim, coeffs })
    }

    /// One-variable polynomial from dense coefficients `c0 + c1 x + c2 x² + …`.
    pub fn univariate(dense: &[f64]) -> Result<Self> {
        PolynomialData::new(1, dense.iter().enumerate().map(|(k, c)| (vec![k as u32], *c)))
    }

    /// Monomial `c x^m` in one variable.
    pub fn monomial(m: u32, c: f64) -> Result<Self> {
        PolynomialData::new(1, [(vec![m], c)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|a| a.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.coeffs.iter().map(|(a, c)| (a, *c))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has {} coordinates, polynomial expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(alpha, c)| c * alpha.iter().zip(x).map(|(k, v)| v.powi(*k as i32)).product::<f64>())
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn grad_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (alpha, c) in &self.coeffs {
            for (j, gj) in g.iter_mut().enumerate() {
                if alpha[j] == 0 {
                    continue;
                }
                let mut term = c * alpha[j] as f64;
                for (i, (k, v)) in alpha.iter().zip(x).enumerate() {
                    let e = if i == j { *k as i32 - 1 } else { *k as i32 };
                    term *= v.powi(e);
                }
                *gj += term;
            }
        }
        g
    }

    /// The top-degree homogeneous component.
    pub fn principal_part(&self) -> PolynomialData {
        let m = self.degree();
        PolynomialData {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(a, _)| a.iter().sum::<u32>() == m)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        let m = self.degree();
        self.coeffs.keys().all(|a| a.iter().sum::<u32>() == m)
    }

    /// `φ(−x) = φ(x)`: only even total degrees occur.
    pub fn is_even(&self) -> bool {
        self.coeffs.keys().all(|a| a.iter().sum::<u32>() % 2 == 0)
    }

    /// `φ(−x) = −φ(x)`: only odd total degrees occur.
    pub fn is_odd(&self) -> bool {
        self.coeffs.keys().all(|a| a.iter().sum::<u32>() % 2 == 1)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = PolyFile {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|(a, c)| Term { alpha: a.clone(), c: *c }).collect(),
        };
        serde_json::to_value(file).expect("polynomial serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let file: PolyFile = serde_json::from_value(value.clone())?;
        PolynomialData::new(file.dim, file.coeffs.into_iter().map(|t| (t.alpha, t.c)))
    }
}

impl Serialize for PolynomialData {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolynomialData {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = PolyFile::deserialize(deserializer)?;
        PolynomialData::new(file.dim, file.coeffs.into_iter().map(|t| (t.alpha, t.c)))
            .map_err(serde::de::Error::custom)
    }
}
