//! Port activation and real combining for a chosen codeword.
//!
//! With ports `S` active and real unit-norm weights `b`, the effective channel
//! is `H_S b` and the quality of the match is
//! `Re{q^H H_S b} / ||H_S b|| = a^T b / sqrt(b^T G b)` with
//! `G = Re{H_S^H H_S}` and `a = Re{H_S^H q}`. For fixed `S` this is maximized
//! by `b ∝ G^{-1} a` ([`optimal_combiner`]). Choosing `S` is combinatorial:
//! [`omp_port_select`] grows it greedily under the real inner product,
//! [`greedy_no_combining`] handles hardware without attenuators (equal
//! weights), and [`exhaustive_port_select`] is the reference.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

/// Default cap on subsets visited by [`exhaustive_port_select`].
pub const EXHAUSTIVE_BUDGET: u128 = 2_000_000;
/// Residual threshold of the pivoted selection in [`full_rank_alignment`].
pub const FULL_RANK_TOL: f64 = 1e-9;

/// Sorted, distinct, zero-based port indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortSet {
    indices: Vec<usize>,
    capacity: usize,
}

impl PortSet {
    pub fn new(mut indices: Vec<usize>, capacity: usize, num_ports: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate port index"));
        }
        if indices.len() > capacity {
            return Err(Error::invalid(format!("{} ports exceed capacity {capacity}", indices.len())));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= num_ports) {
            return Err(Error::invalid(format!("port {bad} outside 0..{num_ports}")));
        }
        Ok(PortSet { indices, capacity })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Real weights with unit Euclidean norm, one per active port.
#[derive(Clone, Debug, PartialEq)]
pub struct CombiningVector {
    pub weights: DVector<f64>,
}

impl CombiningVector {
    pub fn uniform(k: usize) -> Self {
        CombiningVector { weights: DVector::from_element(k, 1.0 / (k as f64).sqrt()) }
    }

    fn normalized(v: DVector<f64>) -> Option<Self> {
        let n = v.norm();
        (n > 0.0 && n.is_finite()).then(|| CombiningVector { weights: v / n })
    }
}

/// Which match quality a result maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `Re{q^H h} / ||h||`; used whenever the weights are free real numbers.
    RealPart,
    /// `|q^H h| / ||h||`; used for fixed equal weights, where no real weight
    /// can rotate the phase and the symbol phase absorbs it instead.
    Magnitude,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolutionFlags {
    /// The Gram matrix was regularized before solving.
    pub regularized: bool,
    /// The solve failed and equal weights were substituted.
    pub degraded: bool,
    /// `q` is real-orthogonal to every active port; any weights are optimal.
    pub zero_alignment: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub ports: PortSet,
    pub weights: CombiningVector,
    pub alignment: f64,
    pub objective: Objective,
    pub flags: SolutionFlags,
}

impl AlignmentResult {
    /// Effective channel `H_S b`.
    pub fn effective_channel(&self, h: &CMatrix) -> CVector {
        effective_channel(h, self.ports.indices(), &self.weights.weights)
    }

    /// Recompute the objective from `(ports, weights, h, q)`.
    pub fn recompute(&self, h: &CMatrix, q: &CVector) -> f64 {
        alignment(h, q, self.ports.indices(), &self.weights.weights, self.objective)
    }
}

pub fn effective_channel(h: &CMatrix, ports: &[usize], weights: &DVector<f64>) -> CVector {
    let mut out = CVector::zeros(h.nrows());
    for (&p, &w) in ports.iter().zip(weights.iter()) {
        out += h.column(p) * Complex64::new(w, 0.0);
    }
    out
}

/// Match quality of `(ports, weights)` against `q`; 0 for a vanishing effective channel.
pub fn alignment(h: &CMatrix, q: &CVector, ports: &[usize], weights: &DVector<f64>, objective: Objective) -> f64 {
    let v = effective_channel(h, ports, weights);
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let inner = q.dotc(&v);
    match objective {
        Objective::RealPart => inner.re / norm,
        Objective::Magnitude => inner.norm() / norm,
    }
}

/// `G = Re{H_S^H H_S}` and `a = Re{H_S^H q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealGram {
    pub g: DMatrix<f64>,
    pub a: DVector<f64>,
}

impl RealGram {
    pub fn new(h_s: &CMatrix, q: &CVector) -> Self {
        let g = linalg::real_inner(h_s, h_s);
        let a = (h_s.adjoint() * q).map(|v| v.re);
        RealGram { g, a }
    }

    /// `a^T b / sqrt(b^T G b)`.
    pub fn objective(&self, b: &DVector<f64>) -> f64 {
        let den = b.dot(&(&self.g * b));
        if den <= 0.0 {
            return 0.0;
        }
        self.a.dot(b) / den.sqrt()
    }

    /// Gradient of [`RealGram::objective`] with respect to `b`.
    pub fn gradient(&self, b: &DVector<f64>) -> DVector<f64> {
        let gb = &self.g * b;
        let den = b.dot(&gb);
        let num = self.a.dot(b);
        &self.a / den.sqrt() - gb * (num / den.powf(1.5))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombinerSolution {
    pub weights: CombiningVector,
    pub flags: SolutionFlags,
}

/// Best real unit-norm weights for a fixed port set: `b = G^{-1} a / ||G^{-1} a||`.
pub fn optimal_combiner(h_s: &CMatrix, q: &CVector) -> Result<CombinerSolution> {
    let k = h_s.ncols();
    if k == 0 {
        return Err(Error::invalid("no active ports"));
    }
    if q.len() != h_s.nrows() {
        return Err(Error::invalid(format!("codeword length {} vs {} BS antennas", q.len(), h_s.nrows())));
    }
    let gram = RealGram::new(h_s, q);
    let scale = gram.g.trace().max(0.0).sqrt() * q.norm();
    if gram.a.amax() <= 1e-14 * scale {
        return Ok(CombinerSolution {
            weights: CombiningVector::uniform(k),
            flags: SolutionFlags { zero_alignment: true, ..Default::default() },
        });
    }
    let solved = linalg::solve_spd(&gram.g, &gram.a);
    match solved.and_then(|s| CombiningVector::normalized(s.x).map(|w| (w, s.regularized))) {
        Some((weights, regularized)) => {
            Ok(CombinerSolution { weights, flags: SolutionFlags { regularized, ..Default::default() } })
        }
        None => Ok(CombinerSolution {
            weights: CombiningVector::uniform(k),
            flags: SolutionFlags { degraded: true, ..Default::default() },
        }),
    }
}

fn check_problem(h: &CMatrix, q: &CVector, k: usize) -> Result<()> {
    let n = h.ncols();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("port capacity {k} outside 1..={n}")));
    }
    if q.len() != h.nrows() {
        return Err(Error::invalid(format!("codeword length {} vs {} BS antennas", q.len(), h.nrows())));
    }
    Ok(())
}

/// Combine a fixed port set with the closed-form weights.
pub fn combine_ports(h: &CMatrix, q: &CVector, ports: Vec<usize>, capacity: usize) -> Result<AlignmentResult> {
    let ports = PortSet::new(ports, capacity, h.ncols())?;
    let h_s = linalg::select_columns(h, ports.indices());
    let sol = optimal_combiner(&h_s, q)?;
    let alignment = alignment(h, q, ports.indices(), &sol.weights.weights, Objective::RealPart);
    Ok(AlignmentResult { ports, weights: sol.weights, alignment, objective: Objective::RealPart, flags: sol.flags })
}

/// Conventional fixed array: the first `k` ports, only the weights adapt.
pub fn fixed_ports(h: &CMatrix, q: &CVector, k: usize) -> Result<AlignmentResult> {
    check_problem(h, q, k)?;
    combine_ports(h, q, (0..k).collect(), k)
}

/// Selection order and residual history of OMP under the real inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct OmpTrace {
    /// Ports in the order they were picked.
    pub order: Vec<usize>,
    /// `||r||` before the first pick and after every pick.
    pub residual_norms: Vec<f64>,
}

/// Real-coefficient least-squares fit of `q` on the columns `cols`.
fn real_projection(h: &CMatrix, q: &CVector, cols: &[usize]) -> CVector {
    let h_s = linalg::select_columns(h, cols);
    let gram = RealGram::new(&h_s, q);
    match linalg::solve_spd(&gram.g, &gram.a) {
        Some(s) => &h_s * s.x.map(|v| Complex64::new(v, 0.0)),
        None => CVector::zeros(h.nrows()),
    }
}

/// Run `k` OMP iterations: pick the unselected port whose normalized column
/// has the largest `|Re{h^H r}|`, then refit `q` on all picked ports.
pub fn omp_trace(h: &CMatrix, q: &CVector, k: usize) -> Result<OmpTrace> {
    check_problem(h, q, k)?;
    let n = h.ncols();
    let inv_norm: Vec<f64> = h
        .column_iter()
        .map(|c| {
            let r = c.norm_squared();
            if r > 0.0 {
                1.0 / r.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut selected = vec![false; n];
    let mut order = Vec::with_capacity(k);
    let mut residual = q.clone();
    let mut residual_norms = vec![residual.norm()];
    for _ in 0..k {
        let corr = (h.adjoint() * &residual).map(|v| v.re);
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| !selected[i]) {
            let c = corr[i].abs() * inv_norm[i];
            if c > best_score {
                best = Some(i);
                best_score = c;
            }
        }
        let pick = best.expect("k <= N leaves a candidate");
        selected[pick] = true;
        order.push(pick);
        residual = q - real_projection(h, q, &order);
        residual_norms.push(residual.norm());
    }
    Ok(OmpTrace { order, residual_norms })
}

/// OMP port selection followed by the closed-form combiner.
pub fn omp_port_select(h: &CMatrix, q: &CVector, k: usize) -> Result<AlignmentResult> {
    let trace = omp_trace(h, q, k)?;
    combine_ports(h, q, trace.order, k)
}

/// Accepted picks and scores of the equal-weight greedy search.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace {
    pub order: Vec<usize>,
    /// `Delta` after each accepted pick.
    pub accepted_scores: Vec<f64>,
}

/// Greedy port growth with equal weights.
///
/// The score of a set is `|sum g_n|^2 / sum r_pq` with `g_n = q^H h_n` and
/// `r_pq = Re{h_p^H h_q}`. After the first pick, a port is only added if it
/// strictly raises the score.
pub fn greedy_trace(h: &CMatrix, q: &CVector, k: usize) -> Result<GreedyTrace> {
    check_problem(h, q, k)?;
    let n = h.ncols();
    let g: Vec<Complex64> = (h.adjoint() * q).iter().copied().collect();
    let diag: Vec<f64> = h.column_iter().map(|c| c.norm_squared()).collect();

    let mut selected = vec![false; n];
    // sum over selected p of r_{p,l}
    let mut cross = vec![0.0; n];
    let mut sum_g = Complex64::new(0.0, 0.0);
    let mut sum_r = 0.0;
    let mut score = 0.0;
    let mut order = Vec::new();
    let mut accepted_scores = Vec::new();

    while order.len() < k {
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for l in (0..n).filter(|&l| !selected[l]) {
            let den = sum_r + 2.0 * cross[l] + diag[l];
            if den <= 0.0 {
                continue;
            }
            let d = (sum_g + g[l]).norm_sqr() / den;
            if d > best_score {
                best = Some(l);
                best_score = d;
            }
        }
        let Some(pick) = best else { break };
        if !order.is_empty() && best_score <= score {
            break;
        }
        selected[pick] = true;
        order.push(pick);
        sum_g += g[pick];
        sum_r += 2.0 * cross[pick] + diag[pick];
        let hp = h.column(pick);
        for (l, c) in cross.iter_mut().enumerate() {
            *c += hp.dotc(&h.column(l)).re;
        }
        score = best_score;
        accepted_scores.push(score);
    }
    Ok(GreedyTrace { order, accepted_scores })
}

/// Equal-weight port selection; may activate fewer than `k` ports.
pub fn greedy_no_combining(h: &CMatrix, q: &CVector, k: usize) -> Result<AlignmentResult> {
    let trace = greedy_trace(h, q, k)?;
    if trace.order.is_empty() {
        return Err(Error::InvalidState("every port has a zero channel".into()));
    }
    let ports = PortSet::new(trace.order, k, h.ncols())?;
    let weights = CombiningVector::uniform(ports.len());
    let alignment = alignment(h, q, ports.indices(), &weights.weights, Objective::Magnitude);
    Ok(AlignmentResult { ports, weights, alignment, objective: Objective::Magnitude, flags: SolutionFlags::default() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightsMode {
    /// Closed-form real weights; objective [`Objective::RealPart`].
    Lemma1,
    /// Equal weights; objective [`Objective::Magnitude`].
    Uniform,
}

/// `C(n, k)` without overflow for the sizes we care about.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Global optimum over all `k`-subsets, refusing when `C(N, k)` exceeds `budget`.
///
/// Work is split on the smallest index of each subset; ties are resolved
/// towards the lexicographically smallest subset, so the result does not
/// depend on the thread count.
pub fn exhaustive_port_select(
    h: &CMatrix,
    q: &CVector,
    k: usize,
    mode: WeightsMode,
    budget: u128,
) -> Result<AlignmentResult> {
    check_problem(h, q, k)?;
    let n = h.ncols();
    let subsets = binomial(n, k);
    if subsets > budget {
        return Err(Error::BudgetExceeded { subsets, budget });
    }
    let r = linalg::real_inner(h, h);
    let a: Vec<f64> = (h.adjoint() * q).iter().map(|v| v.re).collect();
    let g: Vec<Complex64> = (h.adjoint() * q).iter().copied().collect();

    let score = |set: &[usize]| -> f64 {
        match mode {
            WeightsMode::Lemma1 => {
                let gm = DMatrix::from_fn(set.len(), set.len(), |i, j| r[(set[i], set[j])]);
                let av = DVector::from_iterator(set.len(), set.iter().map(|&i| a[i]));
                match linalg::solve_spd(&gm, &av) {
                    // a^T G^{-1} a = (objective at the optimum)^2
                    Some(s) => av.dot(&s.x).max(0.0).sqrt(),
                    None => 0.0,
                }
            }
            WeightsMode::Uniform => {
                let num = set.iter().map(|&i| g[i]).sum::<Complex64>().norm();
                let den: f64 = set.iter().flat_map(|&p| set.iter().map(move |&l| (p, l))).map(|(p, l)| r[(p, l)]).sum();
                if den > 0.0 {
                    num / den.sqrt()
                } else {
                    0.0
                }
            }
        }
    };

    let best_per_head: Vec<Option<(f64, Vec<usize>)>> = (0..=n - k)
        .into_par_iter()
        .map(|head| {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for tail in ((head + 1)..n).combinations(k - 1) {
                let mut set = Vec::with_capacity(k);
                set.push(head);
                set.extend(tail);
                let s = score(&set);
                if best.as_ref().is_none_or(|(b, _)| s > *b) {
                    best = Some((s, set));
                }
            }
            best
        })
        .collect();
    let (_, set) = best_per_head
        .into_iter()
        .flatten()
        .reduce(|acc, cand| if cand.0 > acc.0 { cand } else { acc })
        .expect("at least one subset");

    match mode {
        WeightsMode::Lemma1 => combine_ports(h, q, set, k),
        WeightsMode::Uniform => {
            let ports = PortSet::new(set, k, n)?;
            let weights = CombiningVector::uniform(k);
            let alignment = alignment(h, q, ports.indices(), &weights.weights, Objective::Magnitude);
            Ok(AlignmentResult { ports, weights, alignment, objective: Objective::Magnitude, flags: SolutionFlags::default() })
        }
    }
}

/// Exact match with `M` independent ports and complex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexAlignment {
    pub ports: Vec<usize>,
    pub weights: CVector,
    /// `|q^H H_S b| / ||H_S b||`.
    pub alignment: f64,
}

/// Benchmark only: with `N >= M`, pick `M` independent ports and solve
/// `H_S b = q` exactly. The weights are complex, so this is outside the
/// real-weight pipeline.
pub fn full_rank_alignment(h: &CMatrix, q: &CVector) -> Result<ComplexAlignment> {
    let (m, n) = h.shape();
    if q.len() != m {
        return Err(Error::invalid(format!("codeword length {} vs {m} BS antennas", q.len())));
    }
    if n < m {
        return Err(Error::RankDeficient(format!("{n} ports cannot span {m} dimensions")));
    }
    let ports = linalg::independent_columns(h, FULL_RANK_TOL);
    if ports.len() < m {
        return Err(Error::RankDeficient(format!("channel rank {} < {m}", ports.len())));
    }
    let h_s = linalg::select_columns(h, &ports);
    let b0 = h_s
        .clone()
        .lu()
        .solve(q)
        .ok_or_else(|| Error::RankDeficient("selected ports are singular".into()))?;
    let weights = &b0 / Complex64::new(b0.norm(), 0.0);
    let v = &h_s * &weights;
    let alignment = q.dotc(&v).norm() / v.norm();
    Ok(ComplexAlignment { ports, weights, alignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Substream};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        stream(seed, 0, Substream::Channel(0))
    }

    fn instance(m: usize, n: usize, seed: u64) -> (CMatrix, CVector) {
        let mut r = rng(seed);
        let h = linalg::complex_gaussian(m, n, &mut r);
        let q = linalg::complex_gaussian(m, 1, &mut r).column(0).into_owned();
        let q = &q / Complex64::new(q.norm(), 0.0);
        (h, q)
    }

    fn random_unit(k: usize, r: &mut impl Rng) -> DVector<f64> {
        let v = DVector::from_fn(k, |_, _| r.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        v / n
    }

    #[test]
    fn single_port_weight_is_sign_of_a() {
        let (h, q) = instance(4, 1, 1);
        let sol = optimal_combiner(&h, &q).unwrap();
        let a = RealGram::new(&h, &q).a[0];
        assert_eq!(sol.weights.weights[0], a.signum());
    }

    #[test]
    fn orthonormal_real_columns() {
        // G = I, so b is H_S^T q normalized
        let h = CMatrix::from_fn(4, 2, |r, c| Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0));
        let q2 = CVector::from_vec(vec![Complex64::new(0.3, 0.0), Complex64::new(0.4, 0.0), Complex64::new(0.866_025_403_784_438_6, 0.0), Complex64::new(0.0, 0.0)]);
        let sol = optimal_combiner(&h, &q2).unwrap();
        assert!((sol.weights.weights[0] - 0.6).abs() < 1e-12);
        assert!((sol.weights.weights[1] - 0.8).abs() < 1e-12);
        // q orthogonal to both columns on the real inner product
        let q3 = CVector::from_vec(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);
        let sol = optimal_combiner(&h, &q3).unwrap();
        assert!(sol.flags.zero_alignment);
        assert_eq!(sol.weights, CombiningVector::uniform(2));
    }

    #[test]
    fn combiner_beats_random_search() {
        let mut r = rng(99);
        let (h, q) = instance(6, 3, 2);
        let sol = optimal_combiner(&h, &q).unwrap();
        let gram = RealGram::new(&h, &q);
        let best = gram.objective(&sol.weights.weights);
        let mut search = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            search = search.max(gram.objective(&random_unit(3, &mut r)));
        }
        assert!(best >= search - 1e-4, "{best} vs {search}");
    }

    #[test]
    fn combiner_is_stationary() {
        for seed in 0..20 {
            let (h, q) = instance(6, 3, 300 + seed);
            let sol = optimal_combiner(&h, &q).unwrap();
            let gram = RealGram::new(&h, &q);
            let b = &sol.weights.weights;
            // central finite differences
            let step = 1e-6;
            let mut grad = DVector::zeros(3);
            for i in 0..3 {
                let mut hi = b.clone();
                let mut lo = b.clone();
                hi[i] += step;
                lo[i] -= step;
                grad[i] = (gram.objective(&hi) - gram.objective(&lo)) / (2.0 * step);
            }
            // on the sphere, the gradient of a scale-invariant function at a
            // maximum is orthogonal to b, and here vanishes
            assert!(grad.norm() < 1e-4, "seed {seed}: {}", grad.norm());
            assert!((gram.gradient(b) - &grad).norm() < 1e-4);
        }
    }

    #[test]
    fn combiner_alignment_equals_projection_norm() {
        let (h, q) = instance(8, 4, 5);
        let res = combine_ports(&h, &q, vec![0, 1, 2, 3], 4).unwrap();
        let proj = real_projection(&h, &q, &[0, 1, 2, 3]);
        assert!((res.alignment - proj.norm()).abs() < 1e-10);
    }

    #[test]
    fn omp_exact_match_single_port() {
        let (mut h, _) = instance(6, 8, 6);
        let c = h.column(5).into_owned();
        let q = &c / Complex64::new(c.norm(), 0.0);
        h.set_column(5, &(c * Complex64::new(3.0, 0.0)));
        let res = omp_port_select(&h, &q, 1).unwrap();
        assert_eq!(res.ports.indices(), &[5]);
        assert!((res.alignment - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omp_is_optimal_for_orthogonal_real_columns() {
        let mut r = rng(7);
        for _ in 0..20 {
            // real orthogonal columns with random scales
            let m = 8;
            let basis = linalg::orthonormalize(linalg::complex_gaussian(m, m, &mut r).map(|v| Complex64::new(v.re, 0.0)));
            let n = 6;
            let h = CMatrix::from_fn(m, n, |i, j| basis[(i, j)] * (1.0 + j as f64));
            let q = linalg::complex_gaussian(m, 1, &mut r).column(0).into_owned();
            let q = &q / Complex64::new(q.norm(), 0.0);
            let omp = omp_port_select(&h, &q, 3).unwrap();
            let ex = exhaustive_port_select(&h, &q, 3, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap();
            assert!((omp.alignment - ex.alignment).abs() < 1e-12);
        }
    }

    #[test]
    fn omp_residual_non_increasing_and_real_orthogonal() {
        for seed in 0..30 {
            let (h, q) = instance(8, 20, 400 + seed);
            let trace = omp_trace(&h, &q, 6).unwrap();
            for w in trace.residual_norms.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            let proj = real_projection(&h, &q, &trace.order);
            let res = &q - proj;
            let h_s = linalg::select_columns(&h, &trace.order);
            let ortho = (h_s.adjoint() * res).map(|v| v.re);
            assert!(ortho.amax() < 1e-9);
        }
    }

    #[test]
    fn omp_never_repeats_and_runs_k_steps() {
        let (h, q) = instance(4, 10, 8);
        let res = omp_port_select(&h, &q, 10).unwrap();
        assert_eq!(res.ports.indices(), (0..10).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn greedy_first_pick() {
        let (h, q) = instance(8, 10, 9);
        let res = greedy_no_combining(&h, &q, 1).unwrap();
        let best = (0..10)
            .max_by(|&a, &b| {
                let s = |i: usize| q.dotc(&h.column(i)).norm_sqr() / h.column(i).norm_squared();
                s(a).total_cmp(&s(b)).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(res.ports.indices(), &[best]);
    }

    #[test]
    fn greedy_stops_on_duplicate() {
        let (h0, q) = instance(8, 1, 10);
        let h = CMatrix::from_fn(8, 2, |r, _| h0[(r, 0)]);
        let trace = greedy_trace(&h, &q, 2).unwrap();
        assert_eq!(trace.order.len(), 1);
    }

    #[test]
    fn greedy_scores_increase_and_match_alignment() {
        for seed in 0..100 {
            let (h, q) = instance(8, 10, 500 + seed);
            let trace = greedy_trace(&h, &q, 3).unwrap();
            for w in trace.accepted_scores.windows(2) {
                assert!(w[1] > w[0]);
            }
            let res = greedy_no_combining(&h, &q, 3).unwrap();
            let last = *trace.accepted_scores.last().unwrap();
            assert!((res.alignment - last.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn greedy_at_least_best_single_port() {
        for seed in 0..50 {
            let (h, q) = instance(8, 10, 600 + seed);
            let res = greedy_no_combining(&h, &q, 3).unwrap();
            for i in 0..10 {
                let single = alignment(&h, &q, &[i], &DVector::from_element(1, 1.0), Objective::Magnitude);
                assert!(res.alignment >= single - 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_full_set_and_budget() {
        let (h, q) = instance(4, 5, 11);
        let res = exhaustive_port_select(&h, &q, 5, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(res.ports.indices(), &[0, 1, 2, 3, 4]);
        let err = exhaustive_port_select(&h, &q, 2, WeightsMode::Lemma1, 9).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { subsets: 10, budget: 9 }));
    }

    #[test]
    fn exhaustive_finds_planted_pair() {
        // q lives in the span of columns 0 and 2; the others are small noise
        let mut r = rng(12);
        let m = 6;
        let basis = linalg::orthonormalize(linalg::complex_gaussian(m, 4, &mut r));
        let noise = linalg::complex_gaussian(m, 4, &mut r) * Complex64::new(0.05, 0.0);
        let h = &basis + noise;
        let q = basis.column(0) * Complex64::new(0.6, 0.0) + basis.column(2) * Complex64::new(0.8, 0.0);
        let res = exhaustive_port_select(&h, &q, 2, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(res.ports.indices(), &[0, 2]);
        // brute force over the six pairs by hand
        let mut best = (f64::NEG_INFINITY, vec![]);
        for pair in (0..4).combinations(2) {
            let s = combine_ports(&h, &q, pair.clone(), 2).unwrap().alignment;
            if s > best.0 {
                best = (s, pair);
            }
        }
        assert_eq!(best.1, vec![0, 2]);
    }

    #[test]
    fn exhaustive_dominates_omp() {
        for seed in 0..30 {
            let (h, q) = instance(8, 10, 700 + seed);
            let omp = omp_port_select(&h, &q, 2).unwrap();
            let ex = exhaustive_port_select(&h, &q, 2, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap();
            assert!(ex.alignment >= omp.alignment - 1e-12);
            assert!(omp.alignment >= 0.0);
        }
    }

    #[test]
    fn exhaustive_uniform_dominates_greedy() {
        for seed in 0..30 {
            let (h, q) = instance(8, 10, 800 + seed);
            let greedy = greedy_no_combining(&h, &q, 3).unwrap();
            let mut best: f64 = 0.0;
            for k in 1..=3 {
                best = best.max(exhaustive_port_select(&h, &q, k, WeightsMode::Uniform, EXHAUSTIVE_BUDGET).unwrap().alignment);
            }
            assert!(best >= greedy.alignment - 1e-12);
        }
    }

    #[test]
    fn full_rank_exact_alignment() {
        for (m, n) in [(4, 4), (4, 8), (6, 12)] {
            let (h, q) = instance(m, n, 13 + n as u64);
            let res = full_rank_alignment(&h, &q).unwrap();
            assert_eq!(res.ports.len(), m);
            assert!((res.alignment - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_rejects_rank_one() {
        let (h0, q) = instance(4, 1, 14);
        let h = CMatrix::from_fn(4, 6, |r, c| h0[(r, 0)] * (c as f64 + 1.0));
        assert!(matches!(full_rank_alignment(&h, &q), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn capacity_validation() {
        let (h, q) = instance(4, 5, 15);
        assert!(omp_port_select(&h, &q, 0).is_err());
        assert!(omp_port_select(&h, &q, 6).is_err());
        assert!(greedy_no_combining(&h, &q, 6).is_err());
    }

    #[test]
    fn positive_scaling_changes_nothing() {
        for seed in 0..20 {
            let (h, q) = instance(8, 12, 900 + seed);
            let scaled = &h * Complex64::new(7.3, 0.0);
            let pairs = [
                (omp_port_select(&h, &q, 3).unwrap(), omp_port_select(&scaled, &q, 3).unwrap()),
                (greedy_no_combining(&h, &q, 3).unwrap(), greedy_no_combining(&scaled, &q, 3).unwrap()),
                (
                    exhaustive_port_select(&h, &q, 2, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap(),
                    exhaustive_port_select(&scaled, &q, 2, WeightsMode::Lemma1, EXHAUSTIVE_BUDGET).unwrap(),
                ),
            ];
            for (a, b) in pairs {
                assert_eq!(a.ports, b.ports);
                assert!((&a.weights.weights - &b.weights.weights).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn results_are_rederivable() {
        for seed in 0..20 {
            let (h, q) = instance(8, 12, 1000 + seed);
            for res in [
                omp_port_select(&h, &q, 3).unwrap(),
                greedy_no_combining(&h, &q, 3).unwrap(),
                fixed_ports(&h, &q, 3).unwrap(),
                exhaustive_port_select(&h, &q, 2, WeightsMode::Uniform, EXHAUSTIVE_BUDGET).unwrap(),
            ] {
                assert!((res.recompute(&h, &q) - res.alignment).abs() < 1e-10);
                assert!((res.weights.weights.norm() - 1.0).abs() < 1e-12);
                assert!(res.alignment <= 1.0 + 1e-12);
            }
        }
    }
}
