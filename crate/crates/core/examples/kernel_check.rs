//! Graph condition and cone constant for the mollified kernel of `e^{-itD²}`.
use anisowf::estimator::{check_graph_condition, cone_constant, estimate_kernel_wf, EstimatorSettings, LambdaRange, S3Sampling};
use anisowf::geometry::AnisoIndex;
use anisowf::poly::PolynomialData;
use anisowf::propagator::{kernel_signal, Demollified, EvolutionSpec};
use anisowf::stft::WindowSpec;

fn main() -> anisowf::Result<()> {
    let spec = EvolutionSpec::new(PolynomialData::monomial(2, 1.0)?, 0.3)?;
    let kernel = kernel_signal(&spec, 1024, 0.05)?;
    let idx = AnisoIndex::new(1.2, 1.2)?;
    let sampling = S3Sampling {
        n_alpha: 6,
        n_theta: 16,
        ..Default::default()
    };
    let settings = EstimatorSettings {
        lambda: LambdaRange {
            min: 1.0,
            max: None,
            span: Some(2.0),
        },
        r_threshold: 0.1,
        floor: 1e-11,
        ..Default::default()
    };
    let src = Demollified { kernel: &kernel };
    let est = estimate_kernel_wf(&src, &WindowSpec::new(0.6)?, &idx, &sampling, &settings)?;
    let g = check_graph_condition(&est, 0.05)?;
    println!("{} directions, {} singular", est.entries.len(), est.singular_count());
    println!("wf1 empty {}, wf2 empty {}", g.wf1_empty, g.wf2_empty);
    println!("cone constant {:.3}", cone_constant(&est, &idx)?);
    Ok(())
}
