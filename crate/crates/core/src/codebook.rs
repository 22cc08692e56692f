//! Shared unitary codebook and the projections both ends run against it.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Per-entry tolerance on `Q^H Q - I` when accepting a user-supplied codebook.
pub const CUSTOM_UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodebookKind {
    Dft,
    CustomUnitary,
}

/// `M x M` matrix of unit-norm, mutually orthogonal codewords (columns).
#[derive(Clone)]
pub struct Codebook {
    columns: DMatrix<Complex64>,
    kind: CodebookKind,
    /// Unnormalized inverse transform; present for the DFT kind only.
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Codebook").field("size", &self.size()).field("kind", &self.kind).finish()
    }
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.columns == other.columns
    }
}

/// Unit-norm DFT codebook: entry `i` of codeword `m` is `exp(-j 2 pi i m / M) / sqrt(M)`.
pub fn make_dft_codebook(m: usize) -> Result<Codebook> {
    if m == 0 {
        return Err(Error::invalid("codebook size must be at least 1"));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let columns = DMatrix::from_fn(m, m, |i, k| {
        // reduce the exponent first so the phase stays accurate for large M
        let e = (i * k) % m;
        Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * e as f64 / m as f64)
    });
    let fft = FftPlanner::new().plan_fft_inverse(m);
    Ok(Codebook { columns, kind: CodebookKind::Dft, fft: Some(fft) })
}

impl Codebook {
    /// Wrap an arbitrary unitary matrix.
    pub fn custom(columns: DMatrix<Complex64>) -> Result<Self> {
        if columns.nrows() == 0 || columns.nrows() != columns.ncols() {
            return Err(Error::invalid(format!(
                "codebook must be square and nonempty, got {}x{}",
                columns.nrows(),
                columns.ncols()
            )));
        }
        let dev = unitarity_error(&columns);
        if !(dev <= CUSTOM_UNITARY_TOL) {
            return Err(Error::invalid(format!("codebook is not unitary: max |Q^H Q - I| = {dev:.3e}")));
        }
        Ok(Codebook { columns, kind: CodebookKind::CustomUnitary, fft: None })
    }

    pub fn size(&self) -> usize {
        self.columns.ncols()
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn codeword(&self, index: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.columns.column(index)
    }

    /// Scores of every codeword against every input column: `out[(r, m)] = q_m^H v_r`.
    ///
    /// The DFT kind uses one length-`M` inverse FFT per column.
    pub fn project_all(&self, vectors: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_rows(vectors)?;
        match &self.fft {
            Some(fft) => {
                let m = self.size();
                let scale = 1.0 / (m as f64).sqrt();
                let mut out = DMatrix::zeros(vectors.ncols(), m);
                let mut buf = vec![Complex64::new(0.0, 0.0); m];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for (r, col) in vectors.column_iter().enumerate() {
                    buf.copy_from_slice(col.as_slice());
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    for (k, v) in buf.iter().enumerate() {
                        out[(r, k)] = v * scale;
                    }
                }
                Ok(out)
            }
            None => self.project_all_direct(vectors),
        }
    }

    /// `O(M^2)` inner products; the reference for [`Codebook::project_all`].
    pub fn project_all_direct(&self, vectors: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        self.check_rows(vectors)?;
        Ok((vectors.adjoint() * &self.columns).map(|v| v.conj()))
    }

    fn check_rows(&self, vectors: &DMatrix<Complex64>) -> Result<()> {
        if vectors.nrows() != self.size() {
            return Err(Error::invalid(format!(
                "vectors have length {}, codebook size is {}",
                vectors.nrows(),
                self.size()
            )));
        }
        Ok(())
    }

    /// Export as CSV rows `m, i, re, im` (codeword `m`, entry `i`, zero-based).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "i", "re", "im"])?;
        for m in 0..self.size() {
            for i in 0..self.size() {
                let v = self.columns[(i, m)];
                w.write_record(&[m.to_string(), i.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Import a CSV written by [`Codebook::write_csv`]; the result is a custom-unitary codebook.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Row {
            m: usize,
            i: usize,
            re: f64,
            im: f64,
        }
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(input).deserialize() {
            let row: Row = rec?;
            rows.push(row);
        }
        let size = (rows.len() as f64).sqrt().round() as usize;
        if size == 0 || size * size != rows.len() {
            return Err(Error::Schema(format!("{} entries do not form a square codebook", rows.len())));
        }
        let mut seen = vec![false; rows.len()];
        let mut columns = DMatrix::zeros(size, size);
        for row in rows {
            if row.m >= size || row.i >= size {
                return Err(Error::Schema(format!("entry ({}, {}) out of range for size {size}", row.m, row.i)));
            }
            let slot = row.m * size + row.i;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::Schema(format!("duplicate entry ({}, {})", row.m, row.i)));
            }
            columns[(row.i, row.m)] = Complex64::new(row.re, row.im);
        }
        Codebook::custom(columns)
    }
}

/// `max |Q^H Q - I|` over all entries.
pub fn unitarity_error(q: &DMatrix<Complex64>) -> f64 {
    let gram = q.adjoint() * q;
    let mut worst: f64 = 0.0;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}
