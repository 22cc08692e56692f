//! Compare the port selection strategies on one channel and codeword.

use cpsc_fama::channel::{ChannelModel, CorrelatedRician, Deployment, PortGrid, UserGeometry};
use cpsc_fama::codebook::make_dft_codebook;
use cpsc_fama::linalg::CVector;
use cpsc_fama::ports::{self, WeightsMode};
use cpsc_fama::rng::{stream, Substream};
use cpsc_fama::selector::{all_codewords, select_codeword, truncated_basis, BasisMode};

fn main() -> cpsc_fama::Result<()> {
    let (m, k) = (8, 3);
    let model = ChannelModel { rice_factor: 0.1, channel_power: 1.0, num_bs_antennas: m, grid: PortGrid::new(3, 4, 4.0, 4.0)? };
    let sampler = CorrelatedRician::new(model)?;
    let book = make_dft_codebook(m)?;

    let mut rng = stream(3, 0, Substream::Channel(0));
    let h = sampler.sample(&UserGeometry::random(&mut rng, &Deployment::default()), 0, &mut rng);
    let basis = truncated_basis(&h, k, &mut stream(3, 0, Substream::Selector(0)), BasisMode::Randomized)?;
    let idx = select_codeword(&basis, &book, &all_codewords(m))?.index;
    let q: CVector = book.codeword(idx).into_owned();
    let h = &h.entries;

    let runs = [
        ("fixed first K", ports::fixed_ports(h, &q, k)?),
        ("greedy, equal weights", ports::greedy_no_combining(h, &q, k)?),
        ("OMP + closed-form weights", ports::omp_port_select(h, &q, k)?),
        ("exhaustive", ports::exhaustive_port_select(h, &q, k, WeightsMode::Lemma1, ports::EXHAUSTIVE_BUDGET)?),
    ];
    println!("codeword {idx}, N = {}, K = {k}", h.ncols());
    for (name, r) in &runs {
        // equal weights are scored by |q^H h|, free real weights by Re{q^H h}
        println!("  {name:<26} ports {:?}  alignment {:.4} ({:?})", r.ports.indices(), r.alignment, r.objective);
    }

    let trace = ports::greedy_trace(h, &q, k)?;
    println!("greedy accepted scores: {:?}", trace.accepted_scores);
    Ok(())
}
