//! Quadratic chirp: predicted against detected singular directions.
use anisowf::chirp::{compare_wf, predict_chirp_wf};
use anisowf::estimator::{estimate_wf, EstimatorSettings, LambdaRange};
use anisowf::geometry::AnisoIndex;
use anisowf::poly::PolynomialData;
use anisowf::signal::make_chirp;
use anisowf::stft::WindowSpec;

fn main() -> anisowf::Result<()> {
    let phase = PolynomialData::monomial(2, 1.0)?;
    let idx = AnisoIndex::new(1.2, 1.2)?;
    let prediction = predict_chirp_wf(&phase, &idx)?;
    println!("regime {:?}, equality {}", prediction.regime, prediction.equality);

    let u = make_chirp(&phase, 1024, 0.04)?;
    let settings = EstimatorSettings {
        lambda: LambdaRange {
            min: 1.0,
            max: None,
            span: Some(2.0),
        },
        r_threshold: 0.2,
        floor: 1e-11,
        ..Default::default()
    };
    let est = estimate_wf(&u, &WindowSpec::new(0.5)?, &idx, 720, &settings)?;
    let cmp = compare_wf(&est, &prediction, 0.09)?;
    println!(
        "{} singular, max angle {:.3}, coverage {:.2}, pass {}",
        est.singular_count(),
        cmp.max_angle_error,
        cmp.coverage,
        cmp.pass
    );
    Ok(())
}
