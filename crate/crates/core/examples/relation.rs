//! Composition of finite phase-space relations.
use anisowf::geometry::AnisoIndex;
use anisowf::relation::{compose, proj_13, proj_2neg4, scale_set, PointSet, EXACT_TOL};

fn main() -> anisowf::Result<()> {
    // the graph of the identity on two points, and a set it should echo
    let a = PointSet::new(4, vec![vec![1.0, 1.0, 3.0, -3.0], vec![2.0, 2.0, -1.0, 1.0]], EXACT_TOL)?;
    let b = PointSet::new(2, vec![vec![1.0, 3.0]], EXACT_TOL)?;
    println!("A∘B = {:?}", compose(&a, &b)?.points());
    println!("p13(A) = {:?}", proj_13(&a)?.points());
    println!("p2,-4(A) = {:?}", proj_2neg4(&a)?.points());
    let idx = AnisoIndex::new(0.6, 1.2)?;
    let scaled = compose(&scale_set(&a, &idx, 2.0)?, &scale_set(&b, &idx, 2.0)?)?;
    println!("after scaling by 2: {:?}", scaled.points());
    Ok(())
}
