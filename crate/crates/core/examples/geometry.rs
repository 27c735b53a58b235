//! Anisotropic radius, projection to the sphere and the scaling orbit of a point.
use anisowf::geometry::{lambda_residual, lambda_solve, project, scale_point, AnisoIndex, PhasePoint};

fn main() -> anisowf::Result<()> {
    let idx = AnisoIndex::new(0.6, 1.2)?;
    let p = PhasePoint::one(2.0, -3.0);
    let lam = lambda_solve(&idx, &p)?;
    println!("lambda = {lam:.6}, residual = {:.1e}", lambda_residual(&idx, &p, lam));
    let z = project(&idx, &p)?;
    println!("direction = {:?}", z.as_slice());
    for mu in [0.5, 2.0, 10.0] {
        let q = scale_point(&idx, &p, mu);
        let back = project(&idx, &q)?;
        println!(
            "mu = {mu:>4}: lambda ratio {:.12}, same direction within {:.1e}",
            lambda_solve(&idx, &q)? / lam,
            back.angle_to(&z)
        );
    }
    Ok(())
}
