//! Sampled and analytic test signals and the `(2π)^{-d/2}`-normalized Fourier transform.
//!
//! Grids are centered: `x_j = (j − n/2)·dx` on every axis, and the Fourier
//! grid is `ξ_k = (k − n/2)·dξ` with `dξ = 2π/(n·dx)`.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::PolynomialData;

/// Threshold on `max |∇φ|·dx` accepted by the chirp constructors.
pub const CHIRP_ALIAS_LIMIT: f64 = 0.9 * PI;

/// Complex samples of a function of `dim` variables on the centered grid `n^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    dim: usize,
    n: usize,
    dx: f64,
    values: Vec<Complex64>,
}

fn check_grid(dim: usize, n: usize, dx: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::Domain("signal dimension must be positive".into()));
    }
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("samples per axis must be a power of two ≥ 16, got {n}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Domain(format!("grid spacing must be positive, got {dx}")));
    }
    Ok(())
}

impl SampledSignal {
    pub fn new(dim: usize, n: usize, dx: f64, values: Vec<Complex64>) -> Result<Self> {
        check_grid(dim, n, dx)?;
        let len = n.checked_pow(dim as u32).ok_or_else(|| Error::Domain("grid too large".into()))?;
        if values.len() != len {
            return Err(Error::Domain(format!("expected {len} samples, got {}", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("samples must be finite".into()));
        }
        Ok(SampledSignal { dim, n, dx, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(dim: usize, n: usize, dx: f64, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        check_grid(dim, n, dx)?;
        let len = n.pow(dim as u32);
        let mut x = vec![0.0; dim];
        let mut values = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rem = flat;
            for a in (0..dim).rev() {
                x[a] = (((rem % n) as isize) - (n / 2) as isize) as f64 * dx;
                rem /= n;
            }
            values.push(f(&x));
        }
        SampledSignal::new(dim, n, dx, values)
    }

    pub fn zeros(dim: usize, n: usize, dx: f64) -> Result<Self> {
        check_grid(dim, n, dx)?;
        Ok(SampledSignal {
            dim,
            n,
            dx,
            values: vec![Complex64::new(0.0, 0.0); n.pow(dim as u32)],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Coordinate of grid index `j` along any axis.
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dx
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    /// Half-width `n·dx/2` of the grid.
    pub fn half_width(&self) -> f64 {
        self.n as f64 * self.dx / 2.0
    }

    /// Spacing of the dual frequency grid.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    /// Largest frequency magnitude on the dual grid, `π/dx`.
    pub fn xi_max(&self) -> f64 {
        PI / self.dx
    }

    /// Discrete `L²` norm `(Σ|u|² dx^d)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx.powi(self.dim as i32)).sqrt()
    }

    /// Discrete `L²` distance to another signal on the same grid.
    pub fn distance(&self, other: &SampledSignal) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.dx.powi(self.dim as i32)).sqrt())
    }

    pub fn same_grid(&self, other: &SampledSignal) -> Result<()> {
        if self.dim != other.dim || self.n != other.n || (self.dx - other.dx).abs() > 1e-15 * self.dx {
            return Err(Error::Domain("signals live on different grids".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> SampledSignal {
        SampledSignal {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Value at a multi-index.
    pub fn at(&self, index: &[usize]) -> Complex64 {
        let flat = index.iter().fold(0, |acc, j| acc * self.n + j);
        self.values[flat]
    }

    /// Writes the signal CSV format: a `#n=..,dx=..,dim=..` line, then `index, x…, re, im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "#n={},dx={:.17e},dim={}", self.n, self.dx, self.dim)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((0..self.dim).map(|a| if self.dim == 1 { "x".to_string() } else { format!("x{a}") }));
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for (flat, v) in self.values.iter().enumerate() {
            let mut rec = vec![flat.to_string()];
            let mut rem = flat;
            let mut coords = vec![0.0; self.dim];
            for a in (0..self.dim).rev() {
                coords[a] = self.coord(rem % self.n);
                rem /= self.n;
            }
            rec.extend(coords.iter().map(|c| format!("{c:.17e}")));
            rec.push(format!("{:.17e}", v.re));
            rec.push(format!("{:.17e}", v.im));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = first.trim().trim_start_matches('#');
        let (mut n, mut dx, mut dim) = (None, None, None);
        for part in meta.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::config("signal.header", format!("malformed entry `{part}`")))?;
            match k.trim() {
                "n" => n = v.trim().parse::<usize>().ok(),
                "dx" => dx = v.trim().parse::<f64>().ok(),
                "dim" => dim = v.trim().parse::<usize>().ok(),
                other => return Err(Error::config("signal.header", format!("unknown key `{other}`"))),
            }
        }
        let n = n.ok_or_else(|| Error::config("signal.header.n", "missing or invalid"))?;
        let dx = dx.ok_or_else(|| Error::config("signal.header.dx", "missing or invalid"))?;
        let dim = dim.ok_or_else(|| Error::config("signal.header.dim", "missing or invalid"))?;
        check_grid(dim, n, dx)?;
        let len = n.pow(dim as u32);
        let mut values = vec![Complex64::new(0.0, 0.0); len];
        let mut seen = vec![false; len];
        let mut rdr = csv::Reader::from_reader(reader);
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != dim + 3 {
                return Err(Error::config("signal.rows", format!("expected {} columns", dim + 3)));
            }
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config("signal.rows", format!("bad number `{}`", &rec[i])))
            };
            let flat: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::config("signal.rows.index", format!("bad index `{}`", &rec[0])))?;
            if flat >= len {
                return Err(Error::config("signal.rows.index", format!("index {flat} out of range")));
            }
            values[flat] = Complex64::new(parse(dim + 1)?, parse(dim + 2)?);
            seen[flat] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("signal.rows", "some grid points are missing"));
        }
        SampledSignal::new(dim, n, dx, values)
    }
}

/// Centered DFT along one axis with the `(2π)^{-1/2}·h` weight of the continuous transform.
///
/// For `n` divisible by 4, `e^{∓i x_j ξ_k} = (−1)^{j+k} e^{∓2πi jk/n}`.
fn centered_dft_axis(values: &mut [Complex64], dim: usize, n: usize, axis: usize, h: f64, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let stride = n.pow((dim - 1 - axis) as u32);
    let outer = values.len() / (n * stride);
    let scale = h / (2.0 * PI).sqrt();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * n * stride + s;
            for (j, l) in line.iter_mut().enumerate() {
                let v = values[base + j * stride];
                *l = if j % 2 == 0 { v } else { -v };
            }
            fft.process(&mut line);
            for (k, l) in line.iter().enumerate() {
                let v = l * scale;
                values[base + k * stride] = if k % 2 == 0 { v } else { -v };
            }
        }
    }
}

/// Fourier transform `𝓕f(ξ) = (2π)^{-d/2}∫f(x)e^{-i⟨x,ξ⟩}dx` on the centered grids.
///
/// The output lives on the dual grid, whose spacing `2π/(n·dx)` is stored as its `dx`.
pub fn fourier(sig: &SampledSignal, inverse: bool) -> SampledSignal {
    let mut values = sig.values.clone();
    for axis in 0..sig.dim {
        centered_dft_axis(&mut values, sig.dim, sig.n, axis, sig.dx, inverse);
    }
    SampledSignal {
        dim: sig.dim,
        n: sig.n,
        dx: sig.dxi(),
        values,
    }
}

fn erfc_bound(z: f64) -> f64 {
    if z <= 0.0 {
        1.0
    } else {
        ((-z * z).exp() / (z * PI.sqrt())).min(1.0)
    }
}

/// `π^{-d/4} w^{-d/2} e^{-|x|²/(2w²)}`, of unit `L²` norm.
pub fn make_gaussian(d: usize, n: usize, dx: f64, width: f64) -> Result<SampledSignal> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!("width must be positive, got {width}")));
    }
    check_grid(d, n, dx)?;
    let half = n as f64 * dx / 2.0;
    let xi_max = PI / dx;
    let lost = d as f64 * (erfc_bound(half / width) + erfc_bound(xi_max * width));
    if lost > 1e-10 {
        return Err(Error::Resolution(format!(
            "Gaussian of width {width} loses {lost:.2e} of its mass on a grid of half-width {half} and frequency cutoff {xi_max:.3}"
        )));
    }
    let amp = (PI * width * width).powf(-(d as f64) / 4.0);
    SampledSignal::from_fn(d, n, dx, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new(amp * (-r2 / (2.0 * width * width)).exp(), 0.0)
    })
}

/// Hermite function `h_k` of unit `L²` norm in one variable.
pub fn make_hermite(order: usize, n: usize, dx: f64) -> Result<SampledSignal> {
    check_grid(1, n, dx)?;
    SampledSignal::from_fn(1, n, dx, |x| Complex64::new(hermite_function(order, x[0]), 0.0))
}

/// Normalized Hermite function by the stable three-term recurrence.
pub fn hermite_function(order: usize, x: f64) -> f64 {
    let mut h0 = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if order == 0 {
        return h0;
    }
    let mut h1 = 2f64.sqrt() * x * h0;
    for k in 1..order {
        let k = k as f64;
        let h2 = (2.0 / (k + 1.0)).sqrt() * x * h1 - (k / (k + 1.0)).sqrt() * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn alias_check(phase: &PolynomialData, n: usize, dx: f64, radius: Option<f64>) -> Result<()> {
    let d = phase.dim();
    let probe = SampledSignal::from_fn(d, n, dx, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if radius.is_some_and(|r| r2 > r * r) {
            return Complex64::new(0.0, 0.0);
        }
        let g = phase.grad_unchecked(x);
        Complex64::new(g.iter().map(|v| v * v).sum::<f64>().sqrt() * dx, 0.0)
    })?;
    let worst = probe.values.iter().map(|v| v.re).fold(0.0, f64::max);
    if worst > CHIRP_ALIAS_LIMIT {
        let grad_edge = worst / dx;
        let suggested = (grad_edge / CHIRP_ALIAS_LIMIT * n as f64 * dx).ceil() as usize;
        return Err(Error::Aliasing(format!(
            "phase increment max|∇φ|·dx = {worst:.3} exceeds {CHIRP_ALIAS_LIMIT:.3}; refine the grid (at least {} samples at the same extent)",
            suggested.next_power_of_two()
        )));
    }
    Ok(())
}

/// Unimodular chirp `e^{iφ(x)}` sampled on the grid.
pub fn make_chirp(phase: &PolynomialData, n: usize, dx: f64) -> Result<SampledSignal> {
    check_grid(phase.dim(), n, dx)?;
    alias_check(phase, n, dx, None)?;
    SampledSignal::from_fn(phase.dim(), n, dx, |x| Complex64::from_polar(1.0, phase.eval_unchecked(x)))
}

/// Chirp under a Gaussian envelope, `e^{-|x|²/(2W²)} e^{iφ(x)}`.
///
/// The aliasing guard is applied where the envelope exceeds `1e-16`; outside
/// that region the samples are below double precision relative to the peak.
pub fn make_windowed_chirp(phase: &PolynomialData, n: usize, dx: f64, envelope: f64) -> Result<SampledSignal> {
    if !(envelope > 0.0 && envelope.is_finite()) {
        return Err(Error::Domain(format!("envelope width must be positive, got {envelope}")));
    }
    check_grid(phase.dim(), n, dx)?;
    let radius = envelope * (2.0 * 16.0 * 10f64.ln()).sqrt();
    alias_check(phase, n, dx, Some(radius))?;
    SampledSignal::from_fn(phase.dim(), n, dx, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar((-r2 / (2.0 * envelope * envelope)).exp(), phase.eval_unchecked(x))
    })
}

/// `(u ⊗ v)(x, y) = u(x)v(y)` on the product grid.
pub fn tensor(u: &SampledSignal, v: &SampledSignal) -> Result<SampledSignal> {
    if u.n != v.n || (u.dx - v.dx).abs() > 1e-15 * u.dx {
        return Err(Error::Domain(format!(
            "tensor factors need the same grid (n {} vs {}, dx {} vs {})",
            u.n, v.n, u.dx, v.dx
        )));
    }
    let mut values = Vec::with_capacity(u.values.len() * v.values.len());
    for a in &u.values {
        values.extend(v.values.iter().map(|b| a * b));
    }
    SampledSignal::new(u.dim + v.dim, u.n, u.dx, values)
}

/// Distributions and closed-form signals that are never sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticSignal {
    DiracDelta { dim: usize },
    ConstantOne { dim: usize },
    /// Unit-norm Gaussian `π^{-d/4} w^{-d/2} e^{-|x|²/(2w²)}`.
    Gaussian { dim: usize, width: f64 },
    PolyChirp { phase: PolynomialData },
    Tensor { left: Box<AnalyticSignal>, right: Box<AnalyticSignal> },
}

impl AnalyticSignal {
    pub fn dim(&self) -> usize {
        match self {
            AnalyticSignal::DiracDelta { dim }
            | AnalyticSignal::ConstantOne { dim }
            | AnalyticSignal::Gaussian { dim, .. } => *dim,
            AnalyticSignal::PolyChirp { phase } => phase.dim(),
            AnalyticSignal::Tensor { left, right } => left.dim() + right.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticSignal::DiracDelta { dim } | AnalyticSignal::ConstantOne { dim } if *dim == 0 => {
                Err(Error::Domain("dimension must be positive".into()))
            }
            AnalyticSignal::Gaussian { dim, width } if *dim == 0 || !(*width > 0.0) => {
                Err(Error::Domain("Gaussian needs positive dimension and width".into()))
            }
            AnalyticSignal::Tensor { left, right } => {
                left.validate()?;
                right.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn tensor(left: AnalyticSignal, right: AnalyticSignal) -> AnalyticSignal {
        AnalyticSignal::Tensor {
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}
