//! Wave front set estimate of the Dirac delta and of a Gaussian.
use anisowf::estimator::{estimate_wf, EstimatorSettings, LambdaRange};
use anisowf::geometry::AnisoIndex;
use anisowf::signal::{make_gaussian, AnalyticSignal};
use anisowf::stft::WindowSpec;

fn main() -> anisowf::Result<()> {
    let idx = AnisoIndex::new(1.2, 1.2)?;
    let w = WindowSpec::new(1.0)?;
    let settings = EstimatorSettings {
        lambda: LambdaRange {
            min: 1.0,
            max: Some(40.0),
            span: None,
        },
        r_threshold: 0.2,
        floor: 1e-12,
        ..Default::default()
    };
    let delta = estimate_wf(&AnalyticSignal::DiracDelta { dim: 1 }, &w, &idx, 360, &settings)?;
    println!("delta: {} singular of {}", delta.singular_count(), delta.entries.len());
    for z in delta.singular().iter().take(4) {
        println!("  {:?}", z.as_slice());
    }
    let g = make_gaussian(1, 1024, 0.04, 1.0)?;
    let sampled = EstimatorSettings {
        lambda: LambdaRange {
            min: 1.0,
            max: None,
            span: Some(2.0),
        },
        floor: 1e-11,
        ..settings
    };
    let est = estimate_wf(&g, &WindowSpec::new(0.5)?, &idx, 360, &sampled)?;
    println!("gaussian: {} singular", est.singular_count());
    Ok(())
}
