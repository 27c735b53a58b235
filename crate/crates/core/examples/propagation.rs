//! Free evolution of a windowed chirp and the closed-form check of its slope.
use anisowf::poly::PolynomialData;
use anisowf::propagator::{chirp_slope_error, evolved_chirp_slope, evolved_gaussian_chirp, interior_relative_error, propagate, EvolutionSpec};
use anisowf::signal::make_windowed_chirp;

fn main() -> anisowf::Result<()> {
    let (a, envelope, t) = (1.0, 10.0, 0.25);
    let u0 = make_windowed_chirp(&PolynomialData::monomial(2, a)?, 32768, 0.0125, envelope)?;
    let spec = EvolutionSpec::new(PolynomialData::monomial(2, 1.0)?, t)?;
    let u = propagate(&u0, &spec)?;
    println!("norm change {:.1e}", (u.norm() - u0.norm()).abs() / u0.norm());
    let back = propagate(&u, &spec.at_time(-t))?;
    println!("round trip {:.1e}", back.distance(&u0)? / u0.norm());
    let closed = interior_relative_error(&u, |x| evolved_gaussian_chirp(a, envelope, 1.0, t, x), envelope)?;
    let beta = evolved_chirp_slope(a, 1.0, t);
    println!("closed form error {closed:.1e}");
    println!("slope {beta} error {:.1e}", chirp_slope_error(&u, beta, envelope)?);
    Ok(())
}
