//! Codeword choice from local CSI.
//!
//! A UE ranks codewords by how much of each one lies in the dominant left
//! singular subspace of its channel, `||U_t^H q_m||^2`. The subspace comes
//! from a randomized range finder (or a full SVD when exactness matters), and
//! the scores for a DFT codebook come from one FFT per basis vector.
//! [`select_codeword_full_projector`] scores against the exact column-space
//! projector and serves as the reference.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelMatrix;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, GRAM_COND_LIMIT, GRAM_EPS};

/// Oversampling of the randomized range finder.
pub const OVERSAMPLING: usize = 8;
/// Power iterations of the randomized range finder.
pub const POWER_ITERATIONS: usize = 4;
/// Scores closer than this are treated as tied; ties go to the lowest index.
pub const TIE_TOL: f64 = 1e-12;
/// Residual threshold (relative to the largest column norm) of the
/// rank-revealing column selection used by the projector oracle.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BasisMode {
    #[default]
    Randomized,
    Exact,
}

/// `M x t` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    pub vectors: CMatrix,
}

impl SubspaceBasis {
    pub fn t(&self) -> usize {
        self.vectors.ncols()
    }

    /// `||U^H H||_F^2`, the channel energy the basis captures.
    pub fn captured_energy(&self, h: &CMatrix) -> f64 {
        (self.vectors.adjoint() * h).norm_squared()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodewordChoice {
    /// Zero-based codeword index.
    pub index: usize,
    /// `||U^H q||^2`, in `[0, 1]`.
    pub score: f64,
}

/// Top-`t` left singular subspace of `h`.
pub fn truncated_basis<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    t: usize,
    rng: &mut R,
    mode: BasisMode,
) -> Result<SubspaceBasis> {
    let (m, n) = h.entries.shape();
    let max_t = m.min(n);
    if t == 0 || t > max_t {
        return Err(Error::invalid(format!("t = {t} outside 1..={max_t}")));
    }
    let a = &h.entries;
    let vectors = match mode {
        BasisMode::Exact => {
            let (u, _) = linalg::sorted_left_singular(a.clone())?;
            u.columns(0, t).into_owned()
        }
        BasisMode::Randomized => {
            let samples = (t + OVERSAMPLING).min(max_t);
            let sketch = linalg::complex_gaussian(n, samples, rng);
            let mut q = linalg::orthonormalize_tall(linalg::cmul(a, &sketch));
            for _ in 0..POWER_ITERATIONS {
                let z = linalg::orthonormalize_tall(linalg::cmul_adjoint(a, &q));
                q = linalg::orthonormalize_tall(linalg::cmul(a, &z));
            }
            let small = linalg::cmul_adjoint(&q, a);
            let u_small = linalg::wide_left_singular(&small);
            linalg::cmul(&q, &u_small.columns(0, t).into_owned())
        }
    };
    Ok(SubspaceBasis { vectors })
}

fn check_allowed(allowed: &[usize], size: usize) -> Result<Vec<usize>> {
    if allowed.is_empty() {
        return Err(Error::invalid("allowed codeword set is empty"));
    }
    if let Some(bad) = allowed.iter().find(|&&i| i >= size) {
        return Err(Error::invalid(format!("codeword index {bad} outside codebook of size {size}")));
    }
    let mut sorted = allowed.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

/// Lowest-index argmax with tie tolerance.
fn argmax(sorted: &[usize], score: impl Fn(usize) -> f64) -> CodewordChoice {
    let mut best = CodewordChoice { index: sorted[0], score: score(sorted[0]) };
    for &i in &sorted[1..] {
        let s = score(i);
        if s > best.score + TIE_TOL {
            best = CodewordChoice { index: i, score: s };
        }
    }
    best
}

/// Scores `||U^H q_m||^2` for all codewords.
pub fn subspace_scores(basis: &SubspaceBasis, book: &Codebook) -> Result<Vec<f64>> {
    let proj = book.project_all(&basis.vectors)?;
    Ok((0..book.size()).map(|m| proj.column(m).norm_squared()).collect())
}

/// Best codeword within `allowed` by subspace energy.
pub fn select_codeword(basis: &SubspaceBasis, book: &Codebook, allowed: &[usize]) -> Result<CodewordChoice> {
    let allowed = check_allowed(allowed, book.size())?;
    let scores = subspace_scores(basis, book)?;
    Ok(argmax(&allowed, |m| scores[m]))
}

/// Every index of a codebook of size `m`.
pub fn all_codewords(m: usize) -> Vec<usize> {
    (0..m).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorChoice {
    pub choice: CodewordChoice,
    /// Number of linearly independent columns kept.
    pub rank: usize,
    /// Whether the Gram matrix had to be regularized.
    pub regularized: bool,
}

/// Column-space projector `P = H_r (H_r^H H_r)^{-1} H_r^H` where `H_r` holds a
/// maximal independent subset of the columns of `h`.
pub fn column_space_projector(h: &CMatrix) -> Result<(CMatrix, usize, bool)> {
    let picked = linalg::independent_columns(h, RANK_TOL);
    if picked.is_empty() {
        return Err(Error::RankDeficient("channel matrix is zero".into()));
    }
    let hr = linalg::select_columns(h, &picked);
    let mut gram = hr.adjoint() * &hr;
    let eig = SymmetricEigen::new(gram.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l.abs()), hi.max(l.abs())));
    let mut regularized = false;
    if lo == 0.0 || hi / lo > GRAM_COND_LIMIT {
        let bump = GRAM_EPS * gram.trace().re / picked.len() as f64;
        for i in 0..picked.len() {
            gram[(i, i)] += Complex64::new(bump, 0.0);
        }
        regularized = true;
    }
    let inv = gram.try_inverse().ok_or_else(|| Error::RankDeficient("Gram matrix not invertible".into()))?;
    Ok((&hr * inv * hr.adjoint(), picked.len(), regularized))
}

/// Best codeword within `allowed` by `||P_H q_m||^2`.
pub fn select_codeword_full_projector(
    h: &ChannelMatrix,
    book: &Codebook,
    allowed: &[usize],
) -> Result<ProjectorChoice> {
    if h.num_bs_antennas() != book.size() {
        return Err(Error::invalid(format!(
            "channel has {} rows, codebook size is {}",
            h.num_bs_antennas(),
            book.size()
        )));
    }
    let allowed = check_allowed(allowed, book.size())?;
    let (p, rank, regularized) = column_space_projector(&h.entries)?;
    let projected = &p * book.matrix();
    let choice = argmax(&allowed, |m| projected.column(m).norm_squared());
    Ok(ProjectorChoice { choice, rank, regularized })
}
