//! Independent ground truth: dense diagonalization of the Rabi
//! Hamiltonian in a truncated Fock basis.
//!
//! The basis is `|n, s⟩` with boson number `n ≤ cutoff` and spin
//! `s ∈ {+1, -1}`, ordered `2n + (s == -1)`.  In the rotated frame the
//! matrix elements are `⟨n,s|H|n,s⟩ = n`, `⟨n,-s|H|n,s⟩ = μ` and
//! `⟨n+1,s|H|n,s⟩ = s λ √(n+1)`.  Everything downstream (terminating
//! solutions, degeneracy claims, eigenfunction reconstructions) is
//! validated against spectra from this module; none of it feeds back in.

use std::fmt;

use nalgebra::DMatrix;

use crate::rabi::RabiParams;

pub const CUTOFF_START: usize = 32;
pub const CUTOFF_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    CutoffTooSmall { cutoff: usize },
    /// Level shifts between the two largest cutoffs stayed above the
    /// requested tolerance.
    NoConvergence { cutoff: usize, last_delta: f64 },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::CutoffTooSmall { cutoff } => {
                write!(f, "cutoff must be at least 2, got {cutoff}")
            }
            OracleError::NoConvergence { cutoff, last_delta } => {
                write!(f, "spectrum not converged at cutoff {cutoff} (last delta {last_delta:.3e})")
            }
        }
    }
}

impl std::error::Error for OracleError {}

/// The Hamiltonian restricted to boson numbers `0..=cutoff`.
#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    cutoff: usize,
    matrix: DMatrix<f64>,
}

fn idx(n: usize, spin_down: bool) -> usize {
    2 * n + usize::from(spin_down)
}

impl TruncatedHamiltonian {
    /// Assembles the matrix without sign validation of the couplings;
    /// the symmetry tests map negative λ or μ onto the same spectrum.
    pub fn build_raw(lambda: f64, mu: f64, cutoff: usize) -> Result<Self, OracleError> {
        if cutoff < 2 {
            return Err(OracleError::CutoffTooSmall { cutoff });
        }
        let dim = 2 * (cutoff + 1);
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for n in 0..=cutoff {
            for (s, down) in [(1.0f64, false), (-1.0f64, true)] {
                let i = idx(n, down);
                m[(i, i)] = n as f64;
                m[(i, idx(n, !down))] = mu;
                if n + 1 <= cutoff {
                    let j = idx(n + 1, down);
                    let v = s * lambda * ((n + 1) as f64).sqrt();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        Ok(TruncatedHamiltonian { cutoff, matrix: m })
    }

    pub fn build(params: &RabiParams, cutoff: usize) -> Result<Self, OracleError> {
        Self::build_raw(params.lambda, params.mu, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// All eigenvalues ascending with matching eigenvector columns.
    pub fn eigen_sorted(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let dim = self.matrix.nrows();
        let mut vectors = DMatrix::<f64>::zeros(dim, dim);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }
}

/// The parity operator `Π |n,s⟩ = (-1)^n |n,-s⟩` on the truncated
/// basis.
pub fn parity_operator(cutoff: usize) -> DMatrix<f64> {
    let dim = 2 * (cutoff + 1);
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=cutoff {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        p[(idx(n, false), idx(n, true))] = sign;
        p[(idx(n, true), idx(n, false))] = sign;
    }
    p
}

/// `⟨v|Π|v⟩` without materializing the operator.
pub fn parity_expectation(v: &[f64]) -> f64 {
    debug_assert!(v.len() % 2 == 0);
    let mut acc = 0.0;
    for n in 0..v.len() / 2 {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += 2.0 * sign * v[2 * n] * v[2 * n + 1];
    }
    acc
}

/// Parity label of a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Plus,
    Minus,
    /// |⟨Π⟩| below threshold; only arises inside unresolved degenerate
    /// subspaces.
    Mixed,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Plus => write!(f, "+1"),
            Parity::Minus => write!(f, "-1"),
            Parity::Mixed => write!(f, "mixed"),
        }
    }
}

const PARITY_PURITY: f64 = 0.99;

/// Labels a normalized eigenvector by its parity expectation.
pub fn parity_signature(v: &[f64]) -> Parity {
    let exp = parity_expectation(v);
    if exp > PARITY_PURITY {
        Parity::Plus
    } else if exp < -PARITY_PURITY {
        Parity::Minus
    } else {
        Parity::Mixed
    }
}

/// Converged low spectrum with parity labels and eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub parities: Vec<Parity>,
    /// Columns match `eigenvalues`; within numerically degenerate pairs
    /// the basis is rotated to parity eigenvectors.
    pub eigenvectors: DMatrix<f64>,
    pub cutoff_used: usize,
    pub converged_count: usize,
    pub tol_achieved: f64,
}

/// Rotates the eigenvector columns of near-degenerate pairs into the
/// parity eigenbasis and labels every level.
fn label_parities(values: &[f64], vectors: &mut DMatrix<f64>, k: usize, pair_tol: f64) -> Vec<Parity> {
    let mut parities = vec![Parity::Mixed; k];
    let mut i = 0usize;
    while i < k {
        let paired = i + 1 < values.len() && (values[i + 1] - values[i]).abs() < pair_tol;
        if paired {
            let va: Vec<f64> = vectors.column(i).iter().copied().collect();
            let vb: Vec<f64> = vectors.column(i + 1).iter().copied().collect();
            // Π restricted to the pair span, symmetrized.
            let paa = parity_expectation(&va);
            let pbb = parity_expectation(&vb);
            let mut pab = 0.0;
            for n in 0..va.len() / 2 {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                pab += sign * (va[2 * n] * vb[2 * n + 1] + va[2 * n + 1] * vb[2 * n]);
            }
            // Eigenvectors of [[paa, pab], [pab, pbb]].
            let theta = 0.5 * (2.0 * pab).atan2(paa - pbb);
            let (ct, st) = (theta.cos(), theta.sin());
            let ra: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| ct * a + st * b).collect();
            let rb: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| -st * a + ct * b).collect();
            let na = (ra.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let nb = (rb.iter().map(|x| x * x).sum::<f64>()).sqrt();
            for (r, x) in ra.iter().enumerate() {
                vectors[(r, i)] = x / na;
            }
            for (r, x) in rb.iter().enumerate() {
                vectors[(r, i + 1)] = x / nb;
            }
            parities[i] = parity_signature(&vectors.column(i).iter().copied().collect::<Vec<_>>());
            if i + 1 < k {
                parities[i + 1] =
                    parity_signature(&vectors.column(i + 1).iter().copied().collect::<Vec<_>>());
            }
            i += 2;
        } else {
            let v: Vec<f64> = vectors.column(i).iter().copied().collect();
            parities[i] = parity_signature(&v);
            i += 1;
        }
    }
    parities
}

/// Doubles the cutoff from [`CUTOFF_START`] until the lowest `k_levels`
/// eigenvalues move by less than `tol`, capped at `cutoff_cap`.
pub fn converged_spectrum_with_cap(
    params: &RabiParams,
    k_levels: usize,
    tol: f64,
    cutoff_cap: usize,
) -> Result<SpectrumResult, OracleError> {
    assert!(k_levels >= 1, "need at least one level");
    let mut cutoff = CUTOFF_START.max(k_levels);
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let h = TruncatedHamiltonian::build(params, cutoff)?;
        let (values, mut vectors) = h.eigen_sorted();
        let low: Vec<f64> = values.iter().take(k_levels).copied().collect();
        if let Some(p) = prev {
            let delta = p
                .iter()
                .zip(&low)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if delta < tol {
                let pair_tol = (100.0 * tol).max(1e-12);
                let parities = label_parities(&values, &mut vectors, k_levels, pair_tol);
                return Ok(SpectrumResult {
                    eigenvalues: low,
                    parities,
                    eigenvectors: vectors,
                    cutoff_used: cutoff,
                    converged_count: k_levels,
                    tol_achieved: delta,
                });
            }
            if cutoff >= cutoff_cap {
                return Err(OracleError::NoConvergence { cutoff, last_delta: delta });
            }
        } else if cutoff >= cutoff_cap {
            return Err(OracleError::NoConvergence { cutoff, last_delta: f64::INFINITY });
        }
        prev = Some(low);
        cutoff *= 2;
    }
}

pub fn converged_spectrum(
    params: &RabiParams,
    k_levels: usize,
    tol: f64,
) -> Result<SpectrumResult, OracleError> {
    converged_spectrum_with_cap(params, k_levels, tol, CUTOFF_CAP)
}

/// A numerically degenerate adjacent pair in the low spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneratePair {
    /// Index of the lower member within the converged levels.
    pub index: usize,
    pub energy: f64,
}

/// Finds degenerate pairs among the lowest `k_levels` converged levels.
///
/// Every hit must satisfy the necessary condition that `E + λ²` lies
/// within 1e-6 of a non-negative integer; a violation panics, because it
/// would mean the degeneracy structure itself is wrong.
pub fn degeneracy_scan(
    params: &RabiParams,
    k_levels: usize,
    gap_tol: f64,
) -> Result<Vec<DegeneratePair>, OracleError> {
    let tol = (gap_tol / 100.0).min(1e-8);
    let spectrum = converged_spectrum(params, k_levels, tol)?;
    let mut pairs = Vec::new();
    let mut i = 0usize;
    while i + 1 < spectrum.eigenvalues.len() {
        let (a, b) = (spectrum.eigenvalues[i], spectrum.eigenvalues[i + 1]);
        if (b - a).abs() < gap_tol {
            let energy = 0.5 * (a + b);
            let base = energy + params.lambda * params.lambda;
            assert!(
                (base - base.round()).abs() < 1e-6 && base.round() >= -0.5,
                "degeneracy at E = {energy} violates the integer condition (E + λ² = {base})"
            );
            pairs.push(DegeneratePair { index: i, energy });
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn params(lambda: f64, mu: f64) -> RabiParams {
        RabiParams::new(lambda, mu, 0.0).unwrap()
    }

    #[test]
    fn small_cutoff_is_rejected() {
        assert!(matches!(
            TruncatedHamiltonian::build_raw(0.1, 0.1, 1),
            Err(OracleError::CutoffTooSmall { cutoff: 1 })
        ));
    }

    #[test]
    fn matrix_is_symmetric_with_expected_elements() {
        let h = TruncatedHamiltonian::build(&params(0.4, 0.6), 8).unwrap();
        let m = h.matrix();
        let asym = (m - m.transpose()).abs().max();
        assert!(asym == 0.0);
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(m[(0, 1)], 0.6);
        assert!((m[(0, 2)] - 0.4).abs() < 1e-15, "spin-up boson coupling +λ√1");
        assert!((m[(1, 3)] + 0.4).abs() < 1e-15, "spin-down boson coupling -λ√1");
        assert!((m[(4, 6)] - 0.4 * 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(m[(4, 4)], 2.0);
        assert_eq!(m[(0, 3)], 0.0);
    }

    #[test]
    fn decoupled_atom_spectrum_is_exact() {
        let h = TruncatedHamiltonian::build(&params(0.0, 0.3), 2).unwrap();
        let (values, _) = h.eigen_sorted();
        let want = [-0.3, 0.3, 0.7, 1.3, 1.7, 2.3];
        for (got, want) in values.iter().zip(want) {
            assert!((got - want).abs() < 1e-13, "got {got}, want {want}");
        }
    }

    #[test]
    fn zero_lambda_converges_immediately() {
        let p = params(0.0, 0.3);
        let s = converged_spectrum(&p, 4, 1e-10).unwrap();
        assert_eq!(s.cutoff_used, 2 * CUTOFF_START);
        assert!(s.tol_achieved < 1e-14);
        assert!((s.eigenvalues[0] + 0.3).abs() < 1e-13);
    }

    #[test]
    fn displaced_oscillator_levels_pair_up() {
        let p = params(0.5, 0.0);
        let s = converged_spectrum(&p, 6, 1e-9).unwrap();
        for (i, want) in [-0.25, -0.25, 0.75, 0.75, 1.75, 1.75].iter().enumerate() {
            assert!((s.eigenvalues[i] - want).abs() < 1e-8, "level {i}");
        }
        let pairs = degeneracy_scan(&p, 6, 1e-6).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!((pairs[0].energy + 0.25).abs() < 1e-8);
    }

    #[test]
    fn first_terminating_point_hosts_a_degenerate_pair() {
        let p = params(0.4, 0.6);
        let pairs = degeneracy_scan(&p, 6, 1e-6).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].energy - 0.84).abs() < 1e-7, "E = {}", pairs[0].energy);
    }

    #[test]
    fn degenerate_pair_has_opposite_parities() {
        let p = params(0.4, 0.6);
        let s = converged_spectrum(&p, 6, 1e-10).unwrap();
        let pair_at = s
            .eigenvalues
            .windows(2)
            .position(|w| (w[1] - w[0]).abs() < 1e-7)
            .expect("degenerate pair present");
        let labels = (s.parities[pair_at], s.parities[pair_at + 1]);
        assert!(
            matches!(labels, (Parity::Plus, Parity::Minus) | (Parity::Minus, Parity::Plus)),
            "expected opposite parities, got {labels:?}"
        );
    }

    #[test]
    fn generic_point_has_no_degeneracies_and_pure_parities() {
        let p = params(0.3, 0.7);
        let pairs = degeneracy_scan(&p, 6, 1e-6).unwrap();
        assert!(pairs.is_empty());
        let s = converged_spectrum(&p, 6, 1e-10).unwrap();
        for (i, parity) in s.parities.iter().enumerate() {
            assert!(*parity != Parity::Mixed, "level {i} should have pure parity");
        }
    }

    #[test]
    fn parity_commutes_with_hamiltonian() {
        for (lambda, mu) in [(0.4, 0.6), (0.9, 0.2), (0.0, 0.5), (1.2, 0.0)] {
            let h = TruncatedHamiltonian::build_raw(lambda, mu, 32).unwrap();
            let pi = parity_operator(32);
            let comm = h.matrix() * &pi - &pi * h.matrix();
            assert!(comm.abs().max() < 1e-13);
        }
    }

    #[test]
    fn spectrum_is_invariant_under_coupling_signs() {
        let (values, _) = TruncatedHamiltonian::build_raw(0.45, 0.35, 64).unwrap().eigen_sorted();
        for (l, m) in [(-0.45, 0.35), (0.45, -0.35), (-0.45, -0.35)] {
            let (flipped, _) = TruncatedHamiltonian::build_raw(l, m, 64).unwrap().eigen_sorted();
            let max_diff = values
                .iter()
                .zip(&flipped)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_diff < 1e-12, "λ={l}, μ={m}: {max_diff:e}");
        }
    }

    #[test]
    fn truncation_is_variational() {
        let p = params(0.7, 0.4);
        let mut prev: Option<Vec<f64>> = None;
        for cutoff in [32, 64, 128] {
            let (values, _) = TruncatedHamiltonian::build(&p, cutoff).unwrap().eigen_sorted();
            let low: Vec<f64> = values.into_iter().take(6).collect();
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(&low) {
                    assert!(*b <= *a + 1e-12, "levels must not rise with cutoff");
                }
            }
            prev = Some(low);
        }
    }

    #[test]
    fn parity_expectation_matches_operator() {
        let h = TruncatedHamiltonian::build(&params(0.4, 0.6), 16).unwrap();
        let (_, vectors) = h.eigen_sorted();
        let pi = parity_operator(16);
        for col in 0..4 {
            let v: Vec<f64> = vectors.column(col).iter().copied().collect();
            let dv = DVector::from_column_slice(&v);
            let explicit = (dv.transpose() * &pi * &dv)[(0, 0)];
            assert!((parity_expectation(&v) - explicit).abs() < 1e-13);
        }
    }
}
