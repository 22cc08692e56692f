//! One user picks the codeword that best fits its dominant channel subspace.

use cpsc_fama::channel::{ChannelModel, CorrelatedRician, Deployment, PortGrid, UserGeometry};
use cpsc_fama::codebook::make_dft_codebook;
use cpsc_fama::rng::{stream, Substream};
use cpsc_fama::selector::{all_codewords, select_codeword, subspace_scores, truncated_basis, BasisMode};

fn main() -> cpsc_fama::Result<()> {
    let m = 16;
    let model = ChannelModel { rice_factor: 0.1, channel_power: 1.0, num_bs_antennas: m, grid: PortGrid::square(6, 4.0)? };
    let sampler = CorrelatedRician::new(model)?;
    let book = make_dft_codebook(m)?;

    let mut rng = stream(42, 0, Substream::Channel(0));
    let geom = UserGeometry::random(&mut rng, &Deployment::default());
    let h = sampler.sample(&geom, 0, &mut rng);

    for t in [1, 4, 8] {
        let mut srng = stream(42, 0, Substream::Selector(0));
        let fast = truncated_basis(&h, t, &mut srng, BasisMode::Randomized)?;
        let exact = truncated_basis(&h, t, &mut srng, BasisMode::Exact)?;
        let choice = select_codeword(&fast, &book, &all_codewords(m))?;
        println!(
            "t = {t}: codeword {:2} (score {:.3}), captured energy {:.3} vs exact {:.3}",
            choice.index,
            choice.score,
            fast.captured_energy(&h.entries),
            exact.captured_energy(&h.entries)
        );
    }

    let basis = truncated_basis(&h, 4, &mut stream(42, 0, Substream::Selector(0)), BasisMode::Randomized)?;
    let scores = subspace_scores(&basis, &book)?;
    let bars: String = scores.iter().map(|s| char::from(b" .:-=+*#%@"[(s * 9.99) as usize])).collect();
    println!("scores over all {m} codewords: [{bars}]");
    Ok(())
}
