//! Write a DFT codebook to stdout as CSV and check that it reads back unitary.

use cpsc_fama::codebook::{make_dft_codebook, unitarity_error, Codebook};

fn main() -> cpsc_fama::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let book = make_dft_codebook(m)?;
    let mut buf = Vec::new();
    book.write_csv(&mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    let back = Codebook::read_csv(buf.as_slice())?;
    eprintln!("M = {m}, unitarity error after round trip {:.1e}", unitarity_error(back.matrix()));
    Ok(())
}
