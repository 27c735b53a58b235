//! STFT of a Gaussian wave packet: Moyal identity, inversion and a point probe.
use anisowf::geometry::PhasePoint;
use anisowf::signal::SampledSignal;
use anisowf::stft::{istft, moyal_error, stft_grid, stft_point, WindowSpec};
use num_complex::Complex64;

fn main() -> anisowf::Result<()> {
    let u = SampledSignal::from_fn(1, 1024, 0.04, |x| {
        (-(x[0] - 2.0).powi(2) / 2.0).exp() * Complex64::from_polar(1.0, 5.0 * x[0])
    })?;
    let w = WindowSpec::new(1.0)?;
    let grid = stft_grid(&u, &w)?;
    println!("lattice {} x {}", grid.x.len(), grid.xi.len());
    println!("moyal error {:.1e}", moyal_error(&u, &grid, &w));
    println!("inversion error {:.1e}", istft(&grid, &w)?.distance(&u)? / u.norm());
    // the packet sits at (2, 5) in phase space
    for (x, xi) in [(2.0, 5.0), (2.0, -5.0), (-4.0, 5.0)] {
        println!("|V(x={x}, xi={xi})| = {:.3e}", stft_point(&u, &w, &PhasePoint::one(x, xi))?.norm());
    }
    Ok(())
}
