//! Exact spectral solutions of `∂_t u + i p(D) u = 0`, their kernels, and the
//! Hamiltonian transport of singular directions.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, project, AnisoIndex, PhasePoint, SphereDirection};
use crate::poly::PolynomialData;
use crate::signal::{fourier, SampledSignal, CHIRP_ALIAS_LIMIT};
use crate::stft::{Reach, StftSource, WindowSpec};

/// Symbol `p` of order `m ≥ 2` with real coefficients, and the evolution time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub symbol: PolynomialData,
    pub time: f64,
}

impl EvolutionSpec {
    pub fn new(symbol: PolynomialData, time: f64) -> Result<Self> {
        let spec = EvolutionSpec { symbol, time };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.symbol.degree() < 2 {
            return Err(Error::Domain(format!("symbol order must be at least 2, got {}", self.symbol.degree())));
        }
        if !self.time.is_finite() {
            return Err(Error::Domain("evolution time must be finite".into()));
        }
        Ok(())
    }

    pub fn order(&self) -> u32 {
        self.symbol.degree()
    }

    pub fn at_time(&self, time: f64) -> EvolutionSpec {
        EvolutionSpec {
            symbol: self.symbol.clone(),
            time,
        }
    }
}

fn frequency_axis(n: usize, dxi: f64) -> Vec<f64> {
    (0..n).map(|k| (k as f64 - (n / 2) as f64) * dxi).collect()
}

/// Largest phase jump `|t (p(ξ_{k+1}) − p(ξ_k))|` between neighbouring bins along any axis.
pub fn phase_jump(spec: &EvolutionSpec, dim: usize, n: usize, dx: f64) -> f64 {
    let dxi = 2.0 * PI / (n as f64 * dx);
    let axis = frequency_axis(n, dxi);
    let t = spec.time.abs();
    if dim == 1 {
        return axis
            .windows(2)
            .map(|w| t * (spec.symbol.eval_unchecked(&[w[1]]) - spec.symbol.eval_unchecked(&[w[0]])).abs())
            .fold(0.0, f64::max);
    }
    let mut worst = 0.0f64;
    let total = n.pow(dim as u32);
    let mut idx = vec![0usize; dim];
    for flat in 0..total {
        let mut r = flat;
        for k in (0..dim).rev() {
            idx[k] = r % n;
            r /= n;
        }
        let xi: Vec<f64> = idx.iter().map(|k| axis[*k]).collect();
        let here = spec.symbol.eval_unchecked(&xi);
        for k in 0..dim {
            if idx[k] + 1 < n {
                let mut next = xi.clone();
                next[k] = axis[idx[k] + 1];
                worst = worst.max(t * (spec.symbol.eval_unchecked(&next) - here).abs());
            }
        }
    }
    worst
}

fn guard(spec: &EvolutionSpec, dim: usize, n: usize, dx: f64) -> Result<()> {
    let jump = phase_jump(spec, dim, n, dx);
    if jump > CHIRP_ALIAS_LIMIT {
        // the jump scales like 1/n at fixed dx
        let mut suggested = n * 2;
        while suggested < (1 << 26) && jump * n as f64 / suggested as f64 > CHIRP_ALIAS_LIMIT {
            suggested *= 2;
        }
        return Err(Error::Aliasing(format!(
            "symbol phase jumps by {jump:.3} between frequency bins (limit {CHIRP_ALIAS_LIMIT:.3}); use n = {suggested} at the same dx"
        )));
    }
    Ok(())
}

/// `u(t) = 𝓕⁻¹ e^{−itp(ξ)} 𝓕u₀`.
pub fn propagate(u0: &SampledSignal, spec: &EvolutionSpec) -> Result<SampledSignal> {
    spec.validate()?;
    if spec.symbol.dim() != u0.dim() {
        return Err(Error::Domain(format!(
            "symbol in {} variables for a signal in {}",
            spec.symbol.dim(),
            u0.dim()
        )));
    }
    if spec.time == 0.0 {
        return Ok(u0.clone());
    }
    guard(spec, u0.dim(), u0.n(), u0.dx())?;
    let mut hat = fourier(u0, false);
    let axis = frequency_axis(hat.n(), hat.dx());
    let (dim, n, t) = (hat.dim(), hat.n(), spec.time);
    let mut xi = vec![0.0; dim];
    for (flat, v) in hat.values_mut().iter_mut().enumerate() {
        let mut r = flat;
        for k in (0..dim).rev() {
            xi[k] = axis[r % n];
            r /= n;
        }
        *v *= Complex64::from_polar(1.0, -t * spec.symbol.eval_unchecked(&xi));
    }
    Ok(fourier(&hat, true))
}

/// Sampled mollified convolution kernel together with the mollifier width used.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSample {
    pub signal: SampledSignal,
    pub moll_width: f64,
}

/// `k_t = (2π)^{-1/2} 𝓕⁻¹(e^{−itp} e^{−ξ²/(2W²)})` on a grid of `2n` points with spacing `dx`.
pub fn mollified_kernel_1d(spec: &EvolutionSpec, n: usize, dx: f64, moll_width: f64) -> Result<SampledSignal> {
    spec.validate()?;
    if spec.symbol.dim() != 1 {
        return Err(Error::Precondition("kernels are synthesized for d = 1".into()));
    }
    if !(moll_width > 0.0 && moll_width.is_finite()) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {moll_width}")));
    }
    let big = 2 * n;
    guard(spec, 1, big, dx)?;
    let dxi = 2.0 * PI / (big as f64 * dx);
    let spectrum = SampledSignal::from_fn(1, big, dxi, |xi| {
        let m = (-xi[0] * xi[0] / (2.0 * moll_width * moll_width)).exp();
        Complex64::from_polar(m, -spec.time * spec.symbol.eval_unchecked(xi))
    })?;
    let k = fourier(&spectrum, true);
    Ok(k.scaled(Complex64::new((2.0 * PI).powf(-0.5), 0.0)))
}

/// `K_t(x, y) = k_t(x − y)` on the `n × n` grid, mollified at width `0.25·ξ_max`.
pub fn kernel_signal(spec: &EvolutionSpec, n: usize, dx: f64) -> Result<KernelSample> {
    kernel_signal_with(spec, n, dx, 0.25 * PI / dx)
}

pub fn kernel_signal_with(spec: &EvolutionSpec, n: usize, dx: f64, moll_width: f64) -> Result<KernelSample> {
    let k = mollified_kernel_1d(spec, n, dx, moll_width)?;
    // k lives on (j − n)dx, so x_i − y_j = (i − j)dx sits at index i − j + n
    let kv = k.values();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(kv[i + n - j]);
        }
    }
    Ok(KernelSample {
        signal: SampledSignal::new(2, n, dx, values)?,
        moll_width,
    })
}

/// Largest mollifier attenuation divided out by [`Demollified`].
pub const MAX_COMPENSATION: f64 = 1e4;

/// A sampled kernel with the Gaussian mollifier divided out of its STFT.
///
/// For a window of width `w` and mollifier width `W`, the identity
/// `|V_{K_W}(x, y, cξ, η)| = A(cξ) · |V'_K(x, y, ξ, η)|` holds with `c = 1 + 1/(wW)²`,
/// `A(ζ) = e^{−ζ²/(2(W² + w^{−2}))}` and `V'` the STFT for the window of width
/// `(w²+W^{−2})^{1/2}` in `x` and `w` in `y`. This source evaluates the right-hand
/// `V'_K` up to a constant factor and a phase, so decay rates no longer depend on `W`.
#[derive(Clone, Copy, Debug)]
pub struct Demollified<'a> {
    pub kernel: &'a KernelSample,
}

impl Demollified<'_> {
    fn stretch(&self, w: &WindowSpec) -> f64 {
        1.0 + 1.0 / (w.width * self.kernel.moll_width).powi(2)
    }

    fn attenuation_scale(&self, w: &WindowSpec) -> f64 {
        (self.kernel.moll_width.powi(2) + w.width.powi(-2)).sqrt()
    }
}

impl StftSource for Demollified<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn stft_at(&self, w: &WindowSpec, p: &PhasePoint) -> Result<Complex64> {
        let zeta = p.xi[0] * self.stretch(w);
        let q = PhasePoint::new(p.x.clone(), vec![zeta, p.xi[1]])?;
        let a = (-0.5 * (zeta / self.attenuation_scale(w)).powi(2)).exp();
        Ok(self.kernel.signal.stft_at(w, &q)? / a)
    }

    fn reach(&self, w: &WindowSpec) -> Reach {
        let grid = self.kernel.signal.reach(w);
        let c = self.stretch(w);
        let band = self.attenuation_scale(w) * (2.0 * MAX_COMPENSATION.ln()).sqrt() / c;
        Reach {
            position: grid.position,
            frequency: Some(grid.frequency.map_or(band, |f| band.min(f / c))),
        }
    }
}

/// `χ_t(x₀, ξ₀) = (x₀ + t∇p_m(ξ₀), ξ₀)`.
pub fn hamiltonian_flow(spec: &EvolutionSpec, p0: &PhasePoint) -> Result<PhasePoint> {
    if p0.is_zero() {
        return Err(Error::Domain("the flow acts on T*R^d minus the origin".into()));
    }
    if p0.dim() != spec.symbol.dim() {
        return Err(Error::Domain("point and symbol dimensions differ".into()));
    }
    let g = spec.symbol.principal_part().grad_unchecked(&p0.xi);
    let x = p0.x.iter().zip(&g).map(|(a, b)| a + spec.time * b).collect();
    PhasePoint::new(x, p0.xi.clone())
}

/// Position of `idx.t` relative to `s(m−1)`, exact for rational indices.
fn transport_order(idx: &AnisoIndex, m: u32) -> (Ordering, bool) {
    if let Some((t, s)) = idx.exact() {
        let q = s * Ratio::from_integer(m as i64 - 1);
        return (t.cmp(&q), q > Ratio::from_integer(1));
    }
    let q = idx.s() * (m - 1) as f64;
    let ord = if (idx.t() - q).abs() <= 1e-12 {
        Ordering::Equal
    } else if idx.t() > q {
        Ordering::Greater
    } else {
        Ordering::Less
    };
    (ord, q > 1.0 + 1e-12)
}

/// Image of singular directions under the evolution: `χ_t` when `t = s(m−1)`, the
/// identity when `t > s(m−1)`.
pub fn predict_transport(
    wf_in: &[SphereDirection],
    spec: &EvolutionSpec,
    idx: &AnisoIndex,
) -> Result<Vec<SphereDirection>> {
    let (ord, q_above_one) = transport_order(idx, spec.order());
    if !q_above_one || ord == Ordering::Less {
        return Err(Error::UnsupportedRegime(format!(
            "transport needs t >= s(m-1) > 1, got {idx} with m = {}",
            spec.order()
        )));
    }
    if ord == Ordering::Greater || spec.time == 0.0 {
        return Ok(wf_in.to_vec());
    }
    wf_in
        .iter()
        .map(|d| project(idx, &hamiltonian_flow(spec, &d.point())?))
        .collect()
}

/// Closed-form solution for `u₀ = e^{iax² − x²/(2W²)}` and `p(ξ) = cξ²`:
/// `u(t, x) = (1 + 4iAct)^{-1/2} e^{−Ax²/(1+4iAct)}` with `A = 1/(2W²) − ia`.
pub fn evolved_gaussian_chirp(a: f64, envelope: f64, c: f64, t: f64, x: f64) -> Complex64 {
    let big_a = Complex64::new(1.0 / (2.0 * envelope * envelope), -a);
    let den = Complex64::new(1.0, 0.0) + Complex64::new(0.0, 4.0 * c * t) * big_a;
    (-big_a * x * x / den).exp() / den.sqrt()
}

/// Quadratic phase coefficient of the evolved pure chirp `e^{iax²}` after time `t` under `cξ²`.
pub fn evolved_chirp_slope(a: f64, c: f64, t: f64) -> f64 {
    a / (1.0 + 4.0 * a * c * t)
}

/// `min_c ‖u − c·|u|e^{iβx²}‖ / ‖u‖` over `|x| ≤ radius`: how far the phase of `u`
/// is from the quadratic `βx²` up to a global phase and amplitude.
pub fn chirp_slope_error(u: &SampledSignal, beta: f64, radius: f64) -> Result<f64> {
    if u.dim() != 1 {
        return Err(Error::Domain("slope check needs d = 1".into()));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let (mut rr, mut uu) = (0.0, 0.0);
    let mut pairs = Vec::new();
    for (j, v) in u.values().iter().enumerate() {
        let x = u.coord(j);
        if x.abs() > radius {
            continue;
        }
        let r = Complex64::from_polar(v.norm(), beta * x * x);
        num += r.conj() * v;
        rr += r.norm_sqr();
        uu += v.norm_sqr();
        pairs.push((*v, r));
    }
    if uu == 0.0 {
        return Err(Error::Domain("signal vanishes on the interior".into()));
    }
    let c = num / rr;
    let err: f64 = pairs.iter().map(|(v, r)| (v - c * r).norm_sqr()).sum();
    Ok((err / uu).sqrt())
}

/// Relative `L²` distance on `|x| ≤ radius` after the best global complex factor.
pub fn interior_relative_error(u: &SampledSignal, reference: impl Fn(f64) -> Complex64, radius: f64) -> Result<f64> {
    if u.dim() != 1 {
        return Err(Error::Domain("interior comparison needs d = 1".into()));
    }
    let pts: Vec<(Complex64, Complex64)> = u
        .values()
        .iter()
        .enumerate()
        .filter(|(j, _)| u.coord(*j).abs() <= radius)
        .map(|(j, v)| (*v, reference(u.coord(j))))
        .collect();
    let num: Complex64 = pts.iter().map(|(v, r)| r.conj() * v).sum();
    let rr: f64 = pts.iter().map(|(_, r)| r.norm_sqr()).sum();
    let uu: f64 = pts.iter().map(|(v, _)| v.norm_sqr()).sum();
    if uu == 0.0 || rr == 0.0 {
        return Err(Error::Domain("empty interior".into()));
    }
    let c = num / rr;
    let err: f64 = pts.iter().map(|(v, r)| (v - c * r).norm_sqr()).sum();
    Ok((err / uu).sqrt())
}

/// Sample of the kernel relation `{(x₁ + t∇p_m(x₂), x₁, x₂, −x₂)}` projected to `𝕊³`,
/// in the `(x, y, ξ, η)` layout.
pub fn kernel_oracle_directions(spec: &EvolutionSpec, idx: &AnisoIndex, n_angles: usize, radii: &[f64]) -> Result<Vec<SphereDirection>> {
    if spec.symbol.dim() != 1 {
        return Err(Error::Precondition("kernel relation sampled for d = 1".into()));
    }
    let pm = spec.symbol.principal_part();
    let mut out = Vec::with_capacity(n_angles * radii.len());
    for k in 0..n_angles {
        let a = 2.0 * PI * k as f64 / n_angles as f64;
        for r in radii {
            let (x1, x2) = (r * a.cos(), r * a.sin());
            let g = pm.grad_unchecked(&[x2])[0];
            let p = PhasePoint::new(vec![x1 + spec.time * g, x1], vec![x2, -x2])?;
            out.push(project(idx, &p)?);
        }
    }
    Ok(out)
}

/// Angle from `z` to the kernel relation. Exact (a plane) for quadratic symbols with `t = s`.
pub fn angle_to_kernel_relation(z: &SphereDirection, spec: &EvolutionSpec, idx: &AnisoIndex, sampled: &[SphereDirection]) -> f64 {
    if spec.order() == 2 && idx.t() == idx.s() && spec.symbol.dim() == 1 {
        let c = spec.symbol.principal_part().terms().next().map(|(_, c)| c).unwrap_or(0.0);
        let b1 = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0, 0.0];
        // (2ct, 0, 1, −1) minus its b1 component
        let raw = [2.0 * c * spec.time, 0.0, 1.0, -1.0];
        let dot: f64 = raw.iter().zip(&b1).map(|(a, b)| a * b).sum();
        let mut b2: Vec<f64> = raw.iter().zip(&b1).map(|(a, b)| a - dot * b).collect();
        let nb = norm(&b2);
        b2.iter_mut().for_each(|v| *v /= nb);
        let v = z.as_slice();
        let c1: f64 = v.iter().zip(&b1).map(|(a, b)| a * b).sum();
        let c2: f64 = v.iter().zip(&b2).map(|(a, b)| a * b).sum();
        let resid: Vec<f64> = (0..4).map(|i| v[i] - c1 * b1[i] - c2 * b2[i]).collect();
        return norm(&resid).min(1.0).asin();
    }
    sampled.iter().map(|p| p.angle_to(z)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::make_windowed_chirp;

    fn free(t: f64) -> EvolutionSpec {
        EvolutionSpec::new(PolynomialData::monomial(2, 1.0).unwrap(), t).unwrap()
    }

    #[test]
    fn order_is_checked() {
        assert!(EvolutionSpec::new(PolynomialData::monomial(1, 1.0).unwrap(), 1.0).is_err());
        assert!(EvolutionSpec::new(PolynomialData::monomial(2, 1.0).unwrap(), f64::NAN).is_err());
    }

    #[test]
    fn unitary_invertible_group_law() {
        let u = SampledSignal::from_fn(1, 1024, 0.1, |x| Complex64::from_polar((-x[0] * x[0] / 4.0).exp(), 0.7 * x[0])).unwrap();
        let a = propagate(&u, &free(0.3)).unwrap();
        assert!((a.norm() / u.norm() - 1.0).abs() < 1e-12);
        let back = propagate(&a, &free(-0.3)).unwrap();
        assert!(back.distance(&u).unwrap() < 1e-12);
        let two = propagate(&propagate(&u, &free(0.1)).unwrap(), &free(0.2)).unwrap();
        assert!(two.distance(&a).unwrap() < 1e-12);
        assert_eq!(propagate(&u, &free(0.0)).unwrap(), u);
    }

    #[test]
    fn guard_rejects_coarse_frequency_grid() {
        let u = SampledSignal::from_fn(1, 64, 0.04, |x| Complex64::new((-x[0] * x[0] * 10.0).exp(), 0.0)).unwrap();
        match propagate(&u, &free(5.0)) {
            Err(Error::Aliasing(msg)) => assert!(msg.contains("n = ")),
            other => panic!("expected aliasing, got {other:?}"),
        }
    }

    #[test]
    fn evolved_windowed_chirp_matches_closed_form() {
        let (n, dx, w, t) = (16384, 0.02, 8.0, 0.25);
        let phase = PolynomialData::monomial(2, 1.0).unwrap();
        let u0 = make_windowed_chirp(&phase, n, dx, w).unwrap();
        let u = propagate(&u0, &free(t)).unwrap();
        let err = interior_relative_error(&u, |x| evolved_gaussian_chirp(1.0, w, 1.0, t, x), 30.0).unwrap();
        assert!(err < 1e-8, "{err}");
        let slope = evolved_chirp_slope(1.0, 1.0, t);
        assert!((slope - 0.5).abs() < 1e-15);
        let e = chirp_slope_error(&u, slope, 10.0).unwrap();
        assert!(e < 1e-3, "{e}");
        assert!(chirp_slope_error(&u, 0.55, 10.0).unwrap() > 0.1);
    }

    #[test]
    fn zero_time_kernel_is_the_mollifier() {
        let (n, dx) = (256, 0.05);
        let k = mollified_kernel_1d(&free(0.0), n, dx, 8.0).unwrap();
        for (j, v) in k.values().iter().enumerate() {
            let x = k.coord(j);
            let exact = 8.0 / (2.0 * PI).sqrt() * (-32.0 * x * x).exp();
            assert!((v - exact).norm() < 1e-12, "{x} {v}");
        }
    }

    #[test]
    fn kernel_is_translation_invariant() {
        let ks = kernel_signal_with(&free(0.02), 128, 0.05, 10.0).unwrap();
        let k = &ks.signal;
        for (i, j) in [(3usize, 5usize), (40, 17), (90, 90)] {
            for a in [1usize, 7, 20] {
                assert_eq!(k.at(&[i + a, j + a]), k.at(&[i, j]));
            }
        }
    }

    #[test]
    fn flow_examples() {
        let p = hamiltonian_flow(&free(0.5), &PhasePoint::one(0.0, 1.0)).unwrap();
        assert_eq!(p, PhasePoint::one(1.0, 1.0));
        let q = PhasePoint::one(0.3, -2.0);
        assert_eq!(hamiltonian_flow(&free(0.0), &q).unwrap(), q);
        let ab = hamiltonian_flow(&free(0.2), &hamiltonian_flow(&free(0.5), &q).unwrap()).unwrap();
        let c = hamiltonian_flow(&free(0.7), &q).unwrap();
        assert!((ab.x[0] - c.x[0]).abs() < 1e-14 && ab.xi == c.xi);
        assert!(hamiltonian_flow(&free(1.0), &PhasePoint::one(0.0, 0.0)).is_err());
    }

    #[test]
    fn transport_examples() {
        let idx = AnisoIndex::new(1.2, 1.2).unwrap();
        let t = 0.25;
        let input = [SphereDirection::normalized(vec![1.0, 2.0]).unwrap()];
        let out = predict_transport(&input, &free(t), &idx).unwrap();
        let want = SphereDirection::normalized(vec![1.0 + 4.0 * t, 2.0]).unwrap();
        assert!(out[0].angle_to(&want) < 1e-12);
        assert_eq!(predict_transport(&input, &free(0.0), &idx).unwrap(), input.to_vec());
        let wide = AnisoIndex::new(3.0, 1.2).unwrap();
        assert_eq!(predict_transport(&input, &free(t), &wide).unwrap(), input.to_vec());
        assert!(matches!(
            predict_transport(&input, &free(t), &AnisoIndex::new(0.9, 0.9).unwrap()),
            Err(Error::UnsupportedRegime(_))
        ));
        assert!(predict_transport(&input, &free(t), &AnisoIndex::new(1.1, 1.2).unwrap()).is_err());
    }

    #[test]
    fn kernel_relation_angles() {
        let idx = AnisoIndex::new(1.2, 1.2).unwrap();
        let spec = free(0.3);
        let sampled = kernel_oracle_directions(&spec, &idx, 90, &[1.0]).unwrap();
        for d in sampled.iter().step_by(7) {
            assert!(angle_to_kernel_relation(d, &spec, &idx, &[]) < 1e-12);
        }
        let off = SphereDirection::normalized(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let exact = angle_to_kernel_relation(&off, &spec, &idx, &[]);
        // a cubic symbol takes the sampled branch; feed it the dense quadratic sample
        let cubic = EvolutionSpec::new(PolynomialData::monomial(3, 1.0).unwrap(), 0.3).unwrap();
        let dense = kernel_oracle_directions(&spec, &idx, 2000, &[1.0]).unwrap();
        let approx = angle_to_kernel_relation(&off, &cubic, &idx, &dense);
        assert!((exact - approx).abs() < 1e-3);
        assert!(exact > 0.3);
    }
}
