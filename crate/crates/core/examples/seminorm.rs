//! STFT and classical seminorms of a Hermite function.
use anisowf::geometry::AnisoIndex;
use anisowf::signal::make_hermite;
use anisowf::stft::{classical_seminorm, stft_seminorm, WindowSpec};

fn main() -> anisowf::Result<()> {
    let u = make_hermite(3, 512, 0.05)?;
    let idx = AnisoIndex::new(1.2, 1.2)?;
    let w = WindowSpec::new(1.0)?;
    for r in [0.1, 0.5, 1.0, 2.0] {
        let v = stft_seminorm(&u, &w, &idx, r)?;
        println!("stft r = {r}: {:.4e}{}", v.value, if v.divergent { " (divergent)" } else { "" });
    }
    for h in [0.5, 1.0, 2.0] {
        println!("classical h = {h}: {:.4e}", classical_seminorm(&u, &idx, h, 6)?);
    }
    Ok(())
}
