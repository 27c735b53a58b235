//! JSON experiment configs: signal specs, grids and path-aware loading.

use std::fs::File;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnisoIndex, PhasePoint};
use crate::poly::PolynomialData;
use crate::signal::{make_chirp, make_gaussian, make_hermite, make_windowed_chirp, AnalyticSignal, SampledSignal};
use crate::stft::{Reach, StftSource, WindowSpec};

/// Uniform one-variable grid of `n` points with spacing `dx`, centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub dx: f64,
}

/// A signal named in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Gaussian { width: f64 },
    Hermite { order: usize },
    Chirp { phase: PolynomialData },
    /// `e^{iφ(x)} e^{−x²/(2W²)}`.
    WindowedChirp { phase: PolynomialData, envelope: f64 },
    /// Signal CSV as written by [`SampledSignal::write_csv`].
    File { path: PathBuf },
    Analytic { signal: AnalyticSignal },
}

/// Either a sampled or a closed-form signal.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Sampled(SampledSignal),
    Analytic(AnalyticSignal),
}

impl Source {
    pub fn sampled(&self) -> Option<&SampledSignal> {
        match self {
            Source::Sampled(s) => Some(s),
            Source::Analytic(_) => None,
        }
    }
}

impl StftSource for Source {
    fn dim(&self) -> usize {
        match self {
            Source::Sampled(s) => s.dim(),
            Source::Analytic(a) => a.dim(),
        }
    }

    fn stft_at(&self, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64> {
        match self {
            Source::Sampled(s) => s.stft_at(w, p),
            Source::Analytic(a) => a.stft_at(w, p),
        }
    }

    fn reach(&self, w: &WindowSpec) -> Reach {
        match self {
            Source::Sampled(s) => s.reach(w),
            Source::Analytic(a) => a.reach(w),
        }
    }
}

fn need_grid(grid: Option<&GridConfig>, field: &str) -> Result<GridConfig> {
    let g = grid.copied().ok_or_else(|| Error::config(field, "missing field `grid` for a sampled signal"))?;
    if g.n < 2 || !(g.dx > 0.0 && g.dx.is_finite()) {
        return Err(Error::config(format!("{field}.dx"), "grid needs n >= 2 and a positive spacing"));
    }
    Ok(g)
}

impl SignalSpec {
    /// Samples (or wraps) the signal; `field` names the config key for error messages.
    pub fn build(&self, grid: Option<&GridConfig>, base: &Path, field: &str) -> Result<Source> {
        let positive = |v: f64, name: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{field}.{name}"), "must be positive"))
            }
        };
        Ok(match self {
            SignalSpec::Gaussian { width } => {
                positive(*width, "width")?;
                let g = need_grid(grid, "grid")?;
                Source::Sampled(make_gaussian(1, g.n, g.dx, *width)?)
            }
            SignalSpec::Hermite { order } => {
                let g = need_grid(grid, "grid")?;
                Source::Sampled(make_hermite(*order, g.n, g.dx)?)
            }
            SignalSpec::Chirp { phase } => {
                let g = need_grid(grid, "grid")?;
                Source::Sampled(make_chirp(phase, g.n, g.dx)?)
            }
            SignalSpec::WindowedChirp { phase, envelope } => {
                positive(*envelope, "envelope")?;
                let g = need_grid(grid, "grid")?;
                Source::Sampled(make_windowed_chirp(phase, g.n, g.dx, *envelope)?)
            }
            SignalSpec::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                let f = File::open(&p).map_err(|e| Error::config(format!("{field}.path"), format!("{}: {e}", p.display())))?;
                Source::Sampled(SampledSignal::read_csv(f)?)
            }
            SignalSpec::Analytic { signal } => {
                signal.validate().map_err(|e| Error::config(format!("{field}.signal"), e.to_string()))?;
                Source::Analytic(signal.clone())
            }
        })
    }
}

/// Reads and deserializes a JSON config, reporting the failing field path.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let path = if path == "." { "<root>".to_string() } else { path };
        Error::config(path, inner.to_string())
    })
}

/// Indices usable with Gaussian windows.
pub fn check_index(idx: &AnisoIndex, field: &str) -> Result<()> {
    if !idx.window_admissible() {
        return Err(Error::config(field, format!("indices must satisfy t, s > 1/2, got {idx}")));
    }
    Ok(())
}

pub fn check_positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct Probe {
        signal: SignalSpec,
        window: WindowSpec,
    }

    #[test]
    fn missing_field_names_its_path() {
        let err = parse_config::<Probe>(r#"{"signal": {"kind": "gaussian"}, "window": {"width": 1.0}}"#).unwrap_err();
        match err {
            Error::Config { path, msg } => {
                assert_eq!(path, "signal");
                assert!(msg.contains("width"), "{msg}");
            }
            e => panic!("{e}"),
        }
        let err = parse_config::<Probe>(r#"{"signal": {"kind": "gaussian", "width": 1.0}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref msg, .. } if msg.contains("window")));
        assert_eq!(err.exit_code(), 2);
        let err = parse_config::<Probe>(r#"{"signal": {"kind": "gaussian", "width": 1.0}, "window": {"width": "x"}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "window.width"));
    }

    #[test]
    fn builds_sampled_and_analytic_sources() {
        let grid = GridConfig { n: 256, dx: 0.05 };
        let g = SignalSpec::Gaussian { width: 1.0 }.build(Some(&grid), Path::new("."), "signal").unwrap();
        assert_eq!(g.sampled().unwrap().n(), 256);
        assert!(SignalSpec::Gaussian { width: 1.0 }.build(None, Path::new("."), "signal").is_err());
        let a = SignalSpec::Analytic {
            signal: AnalyticSignal::DiracDelta { dim: 1 },
        }
        .build(None, Path::new("."), "signal")
        .unwrap();
        assert!(a.sampled().is_none());
        assert_eq!(a.dim(), 1);
    }
}
