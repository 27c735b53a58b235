//! Short-time Fourier transform `V_φu(x,ξ) = (2π)^{-d/2}∫u(y)φ̄(y−x)e^{-i⟨y,ξ⟩}dy`
//! with Gaussian windows, pointwise and on lattices, plus its inverse and seminorms.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnisoIndex, PhasePoint};
use crate::signal::{fourier, AnalyticSignal, SampledSignal};

/// Window support used by quadratures, in units of the window width.
pub const WINDOW_CUTOFF: f64 = 8.6;

/// Fraction of the grid extent inside which sampled STFT values are trusted.
pub const REACH_FRACTION: f64 = 0.8;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Gaussian window `e^{-|y|²/(2w²)}`, optionally scaled to unit `L²` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: f64,
    #[serde(default = "yes")]
    pub normalized: bool,
}

fn yes() -> bool {
    true
}

impl WindowSpec {
    pub fn new(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Domain(format!("window width must be positive, got {width}")));
        }
        Ok(WindowSpec { width, normalized: true })
    }

    pub fn unnormalized(width: f64) -> Result<Self> {
        Ok(WindowSpec {
            normalized: false,
            ..WindowSpec::new(width)?
        })
    }

    /// Amplitude of the one-variable factor at the origin.
    pub fn amplitude(&self) -> f64 {
        if self.normalized {
            (PI * self.width * self.width).powf(-0.25)
        } else {
            1.0
        }
    }

    /// One-variable factor at `y`.
    pub fn eval(&self, y: f64) -> f64 {
        self.amplitude() * (-y * y / (2.0 * self.width * self.width)).exp()
    }

    /// `L²` norm of the `d`-variable window.
    pub fn norm(&self, d: usize) -> f64 {
        (self.amplitude() * self.amplitude() * self.width * PI.sqrt()).powf(d as f64 / 2.0)
    }
}

/// Bounds on `|x_i|` and `|ξ_i|` inside which a source's STFT is trustworthy; `None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reach {
    pub position: Option<f64>,
    pub frequency: Option<f64>,
}

/// Anything whose STFT can be evaluated at arbitrary phase-space points.
pub trait StftSource: Sync {
    fn dim(&self) -> usize;
    fn stft_at(&self, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64>;
    fn reach(&self, w: &WindowSpec) -> Reach;
}

/// `V_φu(p)` by direct quadrature (sampled) or closed form (analytic).
pub fn stft_point<S: StftSource + ?Sized>(u: &S, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64> {
    if p.dim() != u.dim() {
        return Err(Error::Domain(format!("point dimension {} differs from signal dimension {}", p.dim(), u.dim())));
    }
    u.stft_at(w, p)
}

/// Window factor times `e^{-i y_j ξ}` over the index range covering the window support.
fn modulated_window(sig: &SampledSignal, w: &WindowSpec, x: f64, xi: f64) -> (usize, Vec<Complex64>) {
    let n = sig.n();
    let dx = sig.dx();
    let half = (n / 2) as f64;
    let reach = WINDOW_CUTOFF * w.width;
    let lo = (((x - reach) / dx + half).ceil().max(0.0)) as usize;
    let hi = (((x + reach) / dx + half).floor().min((n - 1) as f64)).max(-1.0);
    if hi < lo as f64 {
        return (lo, Vec::new());
    }
    let hi = hi as usize;
    let amp = w.amplitude();
    let inv2w2 = 1.0 / (2.0 * w.width * w.width);
    let rot = Complex64::from_polar(1.0, -dx * xi);
    let mut out = Vec::with_capacity(hi + 1 - lo);
    let mut ph = Complex64::new(0.0, 0.0);
    for j in lo..=hi {
        let y = sig.coord(j);
        if (j - lo).is_multiple_of(64) {
            ph = Complex64::from_polar(1.0, -y * xi);
        } else {
            ph *= rot;
        }
        let d = y - x;
        out.push(ph * (amp * (-d * d * inv2w2).exp()));
    }
    (lo, out)
}

impl StftSource for SampledSignal {
    fn dim(&self) -> usize {
        SampledSignal::dim(self)
    }

    fn stft_at(&self, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64> {
        let bound = REACH_FRACTION * self.half_width();
        if let Some(bad) = p.x.iter().find(|v| v.abs() > bound) {
            return Err(Error::Truncation(format!(
                "position {bad} lies outside 80% of the grid half-width {}",
                self.half_width()
            )));
        }
        let dx = self.dx();
        match self.dim() {
            1 => {
                let (lo, a) = modulated_window(self, w, p.x[0], p.xi[0]);
                let vals = &self.values()[lo..lo + a.len()];
                let s: Complex64 = vals.iter().zip(&a).map(|(u, k)| u * k).sum();
                Ok(s * (dx / (2.0 * PI).sqrt()))
            }
            2 => {
                let n = self.n();
                let (lo0, a) = modulated_window(self, w, p.x[0], p.xi[0]);
                let (lo1, b) = modulated_window(self, w, p.x[1], p.xi[1]);
                let vals = self.values();
                let mut s = C0;
                for (i, ai) in a.iter().enumerate() {
                    let row = &vals[(lo0 + i) * n + lo1..(lo0 + i) * n + lo1 + b.len()];
                    let inner: Complex64 = row.iter().zip(&b).map(|(u, k)| u * k).sum();
                    s += ai * inner;
                }
                Ok(s * (dx * dx / (2.0 * PI)))
            }
            d => Err(Error::Precondition(format!("pointwise quadrature supports d ≤ 2, got d = {d}"))),
        }
    }

    fn reach(&self, _w: &WindowSpec) -> Reach {
        Reach {
            position: Some(REACH_FRACTION * self.half_width()),
            frequency: Some(REACH_FRACTION * self.xi_max()),
        }
    }
}

/// Complex square root on the principal branch.
fn csqrt(z: Complex64) -> Complex64 {
    z.sqrt()
}

/// `(2π)^{-1/2}∫e^{-Ay²+By}dy·amp` combined with the trailing exponent `c`.
fn gaussian_integral(amp: f64, a: Complex64, b: Complex64, c: Complex64) -> Complex64 {
    let root = csqrt(Complex64::new(PI, 0.0) / a);
    (b * b / (4.0 * a) + c).exp() * root * (amp / (2.0 * PI).sqrt())
}

fn delta_factor(w: &WindowSpec, x: f64) -> Complex64 {
    Complex64::new(w.eval(-x) / (2.0 * PI).sqrt(), 0.0)
}

fn one_factor(w: &WindowSpec, x: f64, xi: f64) -> Complex64 {
    let hat = w.amplitude() * w.width * (-w.width * w.width * xi * xi / 2.0).exp();
    Complex64::from_polar(hat, -x * xi)
}

fn gaussian_factor(w: &WindowSpec, width: f64, x: f64, xi: f64) -> Complex64 {
    let w2 = w.width * w.width;
    let a = Complex64::new(0.5 * (1.0 / (width * width) + 1.0 / w2), 0.0);
    let b = Complex64::new(x / w2, -xi);
    let amp = w.amplitude() * (PI * width * width).powf(-0.25);
    gaussian_integral(amp, a, b, Complex64::new(-x * x / (2.0 * w2), 0.0))
}

/// Closed form for `e^{i(c2 y² + c1 y + c0)}`.
fn quadratic_chirp_factor(w: &WindowSpec, c: [f64; 3], x: f64, xi: f64) -> Complex64 {
    let w2 = w.width * w.width;
    let a = Complex64::new(1.0 / (2.0 * w2), -c[2]);
    let b = Complex64::new(x / w2, c[1] - xi);
    gaussian_integral(w.amplitude(), a, b, Complex64::new(-x * x / (2.0 * w2), c[0]))
}

/// Trapezoidal quadrature of a one-variable chirp against the window, with the
/// step chosen from the largest local frequency `|φ'(y) − ξ|` on the support.
fn chirp_quadrature(w: &WindowSpec, phase: &crate::poly::PolynomialData, x: f64, xi: f64) -> Result<Complex64> {
    let reach = WINDOW_CUTOFF * w.width;
    let mut kmax: f64 = 0.0;
    for k in 0..=256 {
        let y = x - reach + 2.0 * reach * k as f64 / 256.0;
        kmax = kmax.max((phase.grad_unchecked(&[y])[0] - xi).abs());
    }
    let band = kmax + WINDOW_CUTOFF / w.width;
    let h = (PI / (1.5 * band)).min(w.width / 8.0);
    let count = (2.0 * reach / h).ceil() as usize;
    if count > 1 << 22 {
        return Err(Error::Resolution(format!(
            "chirp quadrature would need {count} nodes at (x, ξ) = ({x}, {xi})"
        )));
    }
    let h = 2.0 * reach / count as f64;
    let mut s = C0;
    for k in 0..=count {
        let y = x - reach + h * k as f64;
        let wt = if k == 0 || k == count { 0.5 } else { 1.0 };
        s += Complex64::from_polar(wt * w.eval(y - x), phase.eval_unchecked(&[y]) - y * xi);
    }
    Ok(s * (h / (2.0 * PI).sqrt()))
}

fn analytic_stft(sig: &AnalyticSignal, w: &WindowSpec, x: &[f64], xi: &[f64]) -> Result<Complex64> {
    match sig {
        AnalyticSignal::DiracDelta { .. } => Ok(x.iter().map(|v| delta_factor(w, *v)).product()),
        AnalyticSignal::ConstantOne { .. } => Ok(x.iter().zip(xi).map(|(a, b)| one_factor(w, *a, *b)).product()),
        AnalyticSignal::Gaussian { width, .. } => {
            Ok(x.iter().zip(xi).map(|(a, b)| gaussian_factor(w, *width, *a, *b)).product())
        }
        AnalyticSignal::PolyChirp { phase } => {
            if phase.dim() != 1 {
                return Err(Error::Precondition("analytic chirp STFT is implemented for d = 1".into()));
            }
            if phase.degree() <= 2 {
                let mut c = [0.0; 3];
                for (alpha, v) in phase.terms() {
                    c[alpha[0] as usize] = v;
                }
                Ok(quadratic_chirp_factor(w, c, x[0], xi[0]))
            } else {
                chirp_quadrature(w, phase, x[0], xi[0])
            }
        }
        AnalyticSignal::Tensor { left, right } => {
            let dl = left.dim();
            Ok(analytic_stft(left, w, &x[..dl], &xi[..dl])? * analytic_stft(right, w, &x[dl..], &xi[dl..])?)
        }
    }
}

impl StftSource for AnalyticSignal {
    fn dim(&self) -> usize {
        AnalyticSignal::dim(self)
    }

    fn stft_at(&self, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64> {
        self.validate()?;
        analytic_stft(self, w, &p.x, &p.xi)
    }

    fn reach(&self, _w: &WindowSpec) -> Reach {
        Reach {
            position: None,
            frequency: None,
        }
    }
}

/// STFT of a one-variable signal on the lattice of translates `x_k` (every `step`-th
/// grid point) times the full dual frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StftGrid {
    pub n: usize,
    pub dx: f64,
    pub step: usize,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// Row-major `values[i * xi.len() + k]` for `(x[i], xi[k])`.
    pub values: Vec<Complex64>,
}

impl StftGrid {
    pub fn dxi(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    pub fn x_spacing(&self) -> f64 {
        self.step as f64 * self.dx
    }

    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.xi.len() + k]
    }

    /// `Σ|V|² Δx Δξ`, the discrete counterpart of `‖V_φu‖²`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.x_spacing() * self.dxi()
    }

    /// CSV with columns `x, xi, re, im, abs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "xi", "re", "im", "abs"])?;
        for (i, x) in self.x.iter().enumerate() {
            for (k, xi) in self.xi.iter().enumerate() {
                let v = self.at(i, k);
                w.write_record(&[
                    format!("{x:.17e}"),
                    format!("{xi:.17e}"),
                    format!("{:.17e}", v.re),
                    format!("{:.17e}", v.im),
                    format!("{:.17e}", v.norm()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Full-lattice STFT of a one-variable sampled signal.
pub fn stft_grid(u: &SampledSignal, w: &WindowSpec) -> Result<StftGrid> {
    stft_grid_strided(u, w, 1)
}

/// Lattice STFT with translates on every `step`-th grid point; one FFT per translate.
pub fn stft_grid_strided(u: &SampledSignal, w: &WindowSpec, step: usize) -> Result<StftGrid> {
    if u.dim() != 1 {
        return Err(Error::Precondition(format!("grid STFT is implemented for d = 1, got d = {}", u.dim())));
    }
    if step == 0 || !u.n().is_multiple_of(step) {
        return Err(Error::Domain(format!("translate step {step} must divide n = {}", u.n())));
    }
    let n = u.n();
    let dx = u.dx();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let xs: Vec<f64> = (0..n).step_by(step).map(|j| u.coord(j)).collect();
    let scale = dx / (2.0 * PI).sqrt();
    let rows: Vec<Vec<Complex64>> = xs
        .par_iter()
        .map(|&x| {
            let mut line: Vec<Complex64> = (0..n)
                .map(|j| {
                    let v = u.values()[j] * w.eval(u.coord(j) - x);
                    if j % 2 == 0 {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            fft.process(&mut line);
            for (k, v) in line.iter_mut().enumerate() {
                *v *= if k % 2 == 0 { scale } else { -scale };
            }
            line
        })
        .collect();
    let dxi = u.dxi();
    Ok(StftGrid {
        n,
        dx,
        step,
        x: xs,
        xi: (0..n).map(|k| (k as f64 - (n / 2) as f64) * dxi).collect(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// Relative Moyal defect `|‖V‖² − ‖u‖²‖φ‖²| / (‖u‖²‖φ‖²)`.
pub fn moyal_error(u: &SampledSignal, grid: &StftGrid, w: &WindowSpec) -> f64 {
    let want = u.norm().powi(2) * w.norm(1).powi(2);
    if want == 0.0 {
        return grid.energy();
    }
    (grid.energy() - want).abs() / want
}

/// Inversion `u = (2π)^{-1/2}∬V(x,ξ)M_ξT_xφ dx dξ` on the lattice.
pub fn istft(v: &StftGrid, w: &WindowSpec) -> Result<SampledSignal> {
    if !w.normalized {
        return Err(Error::Domain("inversion requires a window of unit L² norm".into()));
    }
    let n = v.n;
    if v.xi.len() != n || v.values.len() != v.x.len() * n {
        return Err(Error::Domain("grid does not carry the full frequency lattice".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let dxi = v.dxi();
    let scale = dxi / (2.0 * PI).sqrt();
    let hx = v.x_spacing();
    let coord = |j: usize| (j as f64 - (n / 2) as f64) * v.dx;
    let parts: Vec<Vec<Complex64>> = v
        .x
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut line: Vec<Complex64> = (0..n)
                .map(|k| {
                    let c = v.values[i * n + k];
                    if k % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .collect();
            fft.process(&mut line);
            for (j, c) in line.iter_mut().enumerate() {
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                *c *= sgn * scale * w.eval(coord(j) - x) * hx;
            }
            line
        })
        .collect();
    let mut out = vec![C0; n];
    for part in parts {
        for (o, c) in out.iter_mut().zip(part) {
            *o += c;
        }
    }
    SampledSignal::new(1, n, v.dx, out)
}

/// A supremum that may be flagged as divergent on a finite lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeminormValue {
    /// `f64::INFINITY` when divergent.
    #[serde(serialize_with = "crate::report::ser_extended")]
    pub value: f64,
    pub divergent: bool,
}

/// `sup e^{r(|x|^{1/t}+|ξ|^{1/s})}|V_φu(x,ξ)|` over an STFT lattice.
///
/// Lattice values below `1e-13·max|V|` are treated as zero. The supremum is
/// reported divergent when it is attained within two cells of the lattice
/// boundary or grows strictly across the nested boxes at 1/2, 3/4 and all of
/// the lattice extent.
pub fn stft_seminorm_on_grid(grid: &StftGrid, idx: &AnisoIndex, r: f64) -> Result<SeminormValue> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    let peak = grid.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(SeminormValue {
            value: 0.0,
            divergent: false,
        });
    }
    let xmax = grid.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ximax = grid.xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fractions = [0.5, 0.75, 1.0];
    let mut sups = [f64::NEG_INFINITY; 3];
    let mut arg = (0.0, 0.0);
    for (i, x) in grid.x.iter().enumerate() {
        for (k, xi) in grid.xi.iter().enumerate() {
            let m = grid.at(i, k).norm();
            if m < 1e-13 * peak {
                continue;
            }
            let lw = r * (x.abs().powf(1.0 / idx.t()) + xi.abs().powf(1.0 / idx.s())) + m.ln();
            for (f, s) in fractions.iter().zip(sups.iter_mut()) {
                if x.abs() <= f * xmax + 1e-12 && xi.abs() <= f * ximax + 1e-12 && lw > *s {
                    *s = lw;
                    if *f == 1.0 {
                        arg = (*x, *xi);
                    }
                }
            }
        }
    }
    let near_edge =
        arg.0.abs() >= xmax - 2.0 * grid.x_spacing() - 1e-12 || arg.1.abs() >= ximax - 2.0 * grid.dxi() - 1e-12;
    let growing = sups[1] > sups[0] + 1e-9 && sups[2] > sups[1] + 1e-9;
    if near_edge || growing {
        Ok(SeminormValue {
            value: f64::INFINITY,
            divergent: true,
        })
    } else {
        Ok(SeminormValue {
            value: sups[2].exp(),
            divergent: false,
        })
    }
}

/// STFT seminorm of a one-variable sampled signal over its full lattice.
pub fn stft_seminorm(u: &SampledSignal, w: &WindowSpec, idx: &AnisoIndex, r: f64) -> Result<SeminormValue> {
    let grid = stft_grid(u, w)?;
    stft_seminorm_on_grid(&grid, idx, r)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Truncated `sup_{α,β ≤ N} sup_x |x^α D^β u(x)| / (h^{α+β} α!^t β!^s)` by spectral differentiation.
pub fn classical_seminorm(u: &SampledSignal, idx: &AnisoIndex, h: f64, max_order: usize) -> Result<f64> {
    if u.dim() != 1 {
        return Err(Error::Precondition("classical seminorm is implemented for d = 1".into()));
    }
    if max_order > 8 {
        return Err(Error::Precondition(format!("max_order {max_order} exceeds the cap 8")));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    let spec = fourier(u, false);
    let total: f64 = spec.values().iter().map(|v| v.norm_sqr()).sum();
    let cut = 0.9 * u.xi_max();
    let high: f64 = (0..u.n())
        .filter(|k| spec.coord(*k).abs() > cut)
        .map(|k| spec.values()[k].norm_sqr())
        .sum();
    if total > 0.0 && high > 1e-8 * total {
        return Err(Error::Resolution(format!(
            "relative spectral energy {:.2e} near Nyquist makes spectral derivatives unreliable",
            high / total
        )));
    }
    let xs = u.axis();
    let mut best = f64::NEG_INFINITY;
    for beta in 0..=max_order {
        let deriv = if beta == 0 {
            u.clone()
        } else {
            let mut s = spec.clone();
            for k in 0..u.n() {
                let xi = spec.coord(k);
                s.values_mut()[k] *= xi.powi(beta as i32);
            }
            let mut back = fourier(&s, true);
            // spectral spacing round trip restores the primal grid
            back = SampledSignal::new(1, u.n(), u.dx(), back.into_values())?;
            back
        };
        for alpha in 0..=max_order {
            let denom = (alpha + beta) as f64 * h.ln() + idx.t() * ln_factorial(alpha) + idx.s() * ln_factorial(beta);
            for (x, v) in xs.iter().zip(deriv.values()) {
                let m = v.norm();
                if m == 0.0 {
                    continue;
                }
                let lx = if alpha == 0 {
                    0.0
                } else if *x == 0.0 {
                    continue;
                } else {
                    alpha as f64 * x.abs().ln()
                };
                best = best.max(lx + m.ln() - denom);
            }
        }
    }
    Ok(if best == f64::NEG_INFINITY { 0.0 } else { best.exp() })
}
