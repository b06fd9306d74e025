//! Reduction of a linear system with an irregular singular point at
//! infinity to its Birkhoff canonical form.
//!
//! A system `df/dz = p(z) f` whose coefficient matrix has the Laurent
//! expansion `p(z) = Σ_{k<=q} p^(k) z^k` (rank exponent `q >= -1`) is
//! transformed by a normalizing series `a(z) = Σ_{k>=0} a^(k) z^{-k}`,
//! `a^(0) = I`, into `z F' = P(z) F` with `P` a matrix polynomial of
//! degree at most `q + 1`.  Substituting `f = a F` and matching powers of
//! `z` yields, for every order `l >= 0`,
//!
//! ```text
//! Σ_{i=0..l} ( a^(l-i) P^(q+1-i) - p^(q-i) a^(l-i) ) = (l-q-1) a^(l-q-1)
//! ```
//!
//! with `P^(q+1) = p^(q)`.  The orders `l <= q+1` determine the canonical
//! polynomial from the free low-order coefficients of `a`; every higher
//! order is one block of an infinite lower-triangular linear system for
//! the remaining coefficients.  At each order the leading commutator-type
//! operator annihilates part of `a^(l)` (for the Rabi structure, its
//! diagonal); those entries are carried as unknowns and pinned by the
//! right-hand side of the following order.  [`recurrence_solve`] performs
//! this elimination explicitly, order by order, with a pivot tolerance
//! deciding which directions are structurally free.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::series::{mat_max_abs, CMat, LaurentMatrixSeries, PolynomialMatrix};

/// Coefficient matrices with norm below this are treated as vanished when
/// deciding that a transformation terminates.
pub const TERMINATION_TOL: f64 = 1e-10;

/// A pivot smaller than this fraction of the largest coefficient of the
/// order's linear system counts as structurally zero.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Number of consecutive vanished coefficients required to flag
/// termination is the matrix dimension plus this margin.
const TERMINATION_WINDOW_MARGIN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum BirkhoffError {
    /// The linear system at this order is singular beyond its structural
    /// kernel: a vanished pivot row carries a non-vanishing right-hand
    /// side.
    Resonance { order: usize, residual: f64 },
    /// The supplied canonical polynomial cannot be produced by any
    /// normalized transformation of the system.
    InconsistentCanonical { order: usize, residual: f64 },
    /// `canonical_polynomials` received the wrong number of free
    /// coefficient matrices.
    BadFreeParams { expected: usize, got: usize },
    /// The descriptor's series is too shallow for the requested depth.
    InsufficientDepth { required_bottom: i64, available_bottom: i64 },
}

impl fmt::Display for BirkhoffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BirkhoffError::Resonance { order, residual } => {
                write!(f, "resonant order {order}: singular beyond structural kernel (residual {residual:.3e})")
            }
            BirkhoffError::InconsistentCanonical { order, residual } => {
                write!(f, "canonical system inconsistent with descriptor at order {order} (residual {residual:.3e})")
            }
            BirkhoffError::BadFreeParams { expected, got } => {
                write!(f, "expected {expected} free coefficient matrices, got {got}")
            }
            BirkhoffError::InsufficientDepth { required_bottom, available_bottom } => {
                write!(f, "descriptor series too shallow: need powers down to z^{required_bottom}, have z^{available_bottom}")
            }
        }
    }
}

impl std::error::Error for BirkhoffError {}

/// A linear system `df/dz = p(z) f` described by its expansion around
/// infinity.
#[derive(Debug, Clone)]
pub struct SystemDescriptor {
    dim: usize,
    rank_exponent: i64,
    p_series: LaurentMatrixSeries,
    finite_singularities: Vec<C64>,
}

impl SystemDescriptor {
    /// `rank_exponent` is the bookkeeping top degree `q >= -1` of the
    /// expansion.  A series whose stored top lies below it (the leading
    /// matrices vanish, e.g. the decoupled λ=0 system) is padded with
    /// zero coefficients; a stored top above it is rejected.
    pub fn new(
        rank_exponent: i64,
        p_series: LaurentMatrixSeries,
        finite_singularities: Vec<C64>,
    ) -> Self {
        assert!(rank_exponent >= -1, "rank exponent must be >= -1");
        assert!(
            p_series.top() <= rank_exponent,
            "series top degree {} exceeds the declared rank exponent {}",
            p_series.top(),
            rank_exponent
        );
        let p_series = if p_series.top() < rank_exponent {
            p_series.padded_to_top(rank_exponent)
        } else {
            p_series
        };
        SystemDescriptor { dim: p_series.dim(), rank_exponent, p_series, finite_singularities }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_exponent(&self) -> i64 {
        self.rank_exponent
    }

    pub fn p_series(&self) -> &LaurentMatrixSeries {
        &self.p_series
    }

    pub fn finite_singularities(&self) -> &[C64] {
        &self.finite_singularities
    }
}

/// Leading expansion coefficient `p^(q)` of the system.
pub fn leading_coefficient(desc: &SystemDescriptor) -> CMat {
    desc.p_series.coeff(desc.rank_exponent)
}

/// The canonical target system `z F' = P(z) F`.
#[derive(Debug, Clone)]
pub struct CanonicalSystem {
    /// Canonical polynomial, degree at most `q + 1`.
    pub p: PolynomialMatrix,
    /// The low-order transformation coefficients `a^(1..q+1)` this
    /// polynomial was built from.  Only the components that actually
    /// enter `P` are binding; the rest (the structural kernel, e.g. the
    /// diagonals in the Rabi case) stay free and are determined later by
    /// the recurrence.
    pub free_params: Vec<CMat>,
}

/// Builds the canonical polynomial from the descriptor and a choice of
/// the free low-order coefficients `a^(1..q+1)`.
///
/// The result depends affinely on `free_params`, and its leading
/// coefficient always equals `p^(q)`.
pub fn canonical_polynomials(
    desc: &SystemDescriptor,
    free_params: &[CMat],
) -> Result<CanonicalSystem, BirkhoffError> {
    let q = desc.rank_exponent;
    let expected = (q + 1) as usize;
    if free_params.len() != expected {
        return Err(BirkhoffError::BadFreeParams { expected, got: free_params.len() });
    }
    if desc.p_series.bottom() > -1 {
        return Err(BirkhoffError::InsufficientDepth {
            required_bottom: -1,
            available_bottom: desc.p_series.bottom(),
        });
    }
    let m = desc.dim;
    let mut a: Vec<CMat> = Vec::with_capacity(expected + 1);
    a.push(CMat::identity(m, m));
    a.extend(free_params.iter().cloned());

    let deg = expected; // q + 1
    let mut coeffs = vec![CMat::zeros(m, m); deg + 1];
    for l in 0..=deg {
        let mut acc = CMat::zeros(m, m);
        for i in 0..=l {
            acc += desc.p_series.coeff(q - i as i64) * &a[l - i];
        }
        for i in 0..l {
            acc -= &a[l - i] * &coeffs[deg - i];
        }
        coeffs[deg - l] = acc;
    }
    Ok(CanonicalSystem { p: PolynomialMatrix::new(coeffs), free_params: free_params.to_vec() })
}

/// Normalizing transformation `a(z) = Σ_{k=0..K} a^(k) z^{-k}`.
#[derive(Debug, Clone)]
pub struct TransformSeries {
    coeffs: Vec<CMat>,
    terminated: bool,
}

impl TransformSeries {
    /// Wraps computed coefficients; termination is detected from the
    /// trailing window (dimension + 2 consecutive vanished matrices).
    pub fn from_coeffs(coeffs: Vec<CMat>) -> Self {
        assert!(!coeffs.is_empty(), "transformation needs at least a^(0)");
        let m = coeffs[0].nrows();
        let id = CMat::identity(m, m);
        assert!(
            mat_max_abs(&(&coeffs[0] - id)) <= 1e-12,
            "transformation must be normalized (a^(0) = I)"
        );
        let window = m + TERMINATION_WINDOW_MARGIN;
        let trailing = coeffs.iter().rev().take_while(|c| mat_max_abs(c) < TERMINATION_TOL).count();
        let terminated = trailing >= window;
        TransformSeries { coeffs, terminated }
    }

    /// Wraps coefficients of a transformation known to terminate exactly
    /// (every coefficient beyond the stored order vanishes).
    pub fn exact(coeffs: Vec<CMat>) -> Self {
        let mut t = TransformSeries::from_coeffs(coeffs);
        t.terminated = true;
        t
    }

    /// Highest stored order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    /// Coefficient `a^(k)`, zero-extended beyond the stored order (exact
    /// for terminated transformations, a truncation convention
    /// otherwise).
    pub fn coeff(&self, k: usize) -> CMat {
        if k < self.coeffs.len() {
            self.coeffs[k].clone()
        } else {
            let m = self.coeffs[0].nrows();
            CMat::zeros(m, m)
        }
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// The transformation as a Laurent series with top degree 0.
    pub fn as_laurent(&self) -> LaurentMatrixSeries {
        LaurentMatrixSeries::new(0, self.coeffs.clone())
    }

    /// Scalar entry `a_rs(z)` as an inverse-power series.
    pub fn entry_series(&self, r: usize, s: usize) -> crate::series::InversePowerSeries {
        crate::series::InversePowerSeries::new(self.coeffs.iter().map(|c| c[(r, s)]).collect())
    }

    /// Evaluates the truncated transformation at `z`.
    pub fn eval(&self, z: C64) -> CMat {
        self.as_laurent().eval(z)
    }
}

// ---------------------------------------------------------------------
// Affine forms over not-yet-determined coefficient entries.

/// `c + Σ k_i · u_i` with the terms sorted by variable id.
#[derive(Debug, Clone)]
struct Lin {
    c: C64,
    terms: Vec<(u32, C64)>,
}

impl Lin {
    fn constant(c: C64) -> Self {
        Lin { c, terms: Vec::new() }
    }

    fn var(id: u32) -> Self {
        Lin { c: C64::new(0.0, 0.0), terms: vec![(id, C64::new(1.0, 0.0))] }
    }

    fn add_scaled(&mut self, other: &Lin, k: C64) {
        self.c += other.c * k;
        if other.terms.is_empty() {
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.terms.len() || j < other.terms.len() {
            match (self.terms.get(i), other.terms.get(j)) {
                (Some(&(va, ca)), Some(&(vb, cb))) => {
                    if va < vb {
                        merged.push((va, ca));
                        i += 1;
                    } else if vb < va {
                        merged.push((vb, cb * k));
                        j += 1;
                    } else {
                        merged.push((va, ca + cb * k));
                        i += 1;
                        j += 1;
                    }
                }
                (Some(&t), None) => {
                    merged.push(t);
                    i += 1;
                }
                (None, Some(&(vb, cb))) => {
                    merged.push((vb, cb * k));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        merged.retain(|(_, c)| c.norm() != 0.0);
        self.terms = merged;
    }

    fn max_term_abs(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

enum FeedOutcome {
    Pivoted,
    Trivial,
    Inconsistent(f64),
}

#[derive(Default)]
struct LinSolver {
    next_var: u32,
    /// Solved variables, each expressed over unsolved variables only.
    solved: HashMap<u32, Lin>,
}

impl LinSolver {
    fn fresh_var(&mut self) -> Lin {
        let id = self.next_var;
        self.next_var += 1;
        Lin::var(id)
    }

    fn reduce(&self, lin: &Lin) -> Lin {
        let mut out = Lin::constant(lin.c);
        for &(v, k) in &lin.terms {
            match self.solved.get(&v) {
                Some(expr) => out.add_scaled(expr, k),
                None => out.add_scaled(&Lin::var(v), k),
            }
        }
        out
    }

    /// Eliminates one variable from `eq` (after substituting everything
    /// already solved), or reports the equation as trivial/inconsistent.
    fn feed(&mut self, eq: &Lin, pivot_floor: f64, resid_floor: f64) -> FeedOutcome {
        let eq = self.reduce(eq);
        let mut pivot: Option<(u32, C64)> = None;
        for &(v, k) in &eq.terms {
            if pivot.map_or(true, |(_, pk)| k.norm() > pk.norm()) {
                pivot = Some((v, k));
            }
        }
        match pivot {
            Some((v, k)) if k.norm() >= pivot_floor => {
                let mut expr = Lin::constant(C64::new(0.0, 0.0));
                let minus_inv = -C64::new(1.0, 0.0) / k;
                expr.c = eq.c * minus_inv;
                for &(w, kw) in &eq.terms {
                    if w != v {
                        expr.add_scaled(&Lin::var(w), kw * minus_inv);
                    }
                }
                for form in self.solved.values_mut() {
                    if let Some(pos) = form.terms.iter().position(|&(w, _)| w == v) {
                        let k_ref = form.terms.remove(pos).1;
                        form.add_scaled(&expr, k_ref);
                    }
                }
                self.solved.insert(v, expr);
                FeedOutcome::Pivoted
            }
            _ => {
                if eq.c.norm() <= resid_floor {
                    FeedOutcome::Trivial
                } else {
                    FeedOutcome::Inconsistent(eq.c.norm())
                }
            }
        }
    }
}

fn linmat_zero(m: usize) -> Vec<Lin> {
    vec![Lin::constant(C64::new(0.0, 0.0)); m * m]
}

/// `acc += sign * (A · K)` for an affine matrix `A` and constant `K`.
fn add_linmat_times_const(acc: &mut [Lin], a: &[Lin], k: &CMat, sign: f64, m: usize) {
    for r in 0..m {
        for s in 0..m {
            for t in 0..m {
                let coef = k[(t, s)] * C64::from(sign);
                if coef.norm() != 0.0 {
                    let entry = a[r * m + t].clone();
                    acc[r * m + s].add_scaled(&entry, coef);
                }
            }
        }
    }
}

/// `acc += sign * (K · A)`.
fn add_const_times_linmat(acc: &mut [Lin], k: &CMat, a: &[Lin], sign: f64, m: usize) {
    for r in 0..m {
        for s in 0..m {
            for t in 0..m {
                let coef = k[(r, t)] * C64::from(sign);
                if coef.norm() != 0.0 {
                    let entry = a[t * m + s].clone();
                    acc[r * m + s].add_scaled(&entry, coef);
                }
            }
        }
    }
}

/// Solves the matching recurrence order by order and returns the
/// normalizing transformation up to `a^(depth)`.
///
/// Orders `0..=q+1` double as a consistency check of `canon` against the
/// descriptor; orders beyond that perform the elimination proper.  The
/// directions annihilated by the leading operator at order `l` are pinned
/// by the right-hand side of order `l + q + 1`, so internally the solve
/// runs up to order `depth + q + 1` before the requested window is
/// emitted.
pub fn recurrence_solve(
    desc: &SystemDescriptor,
    canon: &CanonicalSystem,
    depth: usize,
) -> Result<TransformSeries, BirkhoffError> {
    let m = desc.dim;
    let q = desc.rank_exponent;
    let top_order = depth as i64 + q + 1;
    let required_bottom = q - top_order;
    if desc.p_series.bottom() > required_bottom {
        return Err(BirkhoffError::InsufficientDepth {
            required_bottom,
            available_bottom: desc.p_series.bottom(),
        });
    }

    let mut solver = LinSolver::default();
    let mut a_forms: Vec<Vec<Lin>> = Vec::with_capacity(top_order.max(0) as usize + 1);
    let mut identity_form = linmat_zero(m);
    for r in 0..m {
        identity_form[r * m + r] = Lin::constant(C64::new(1.0, 0.0));
    }
    a_forms.push(identity_form);

    for l in 1..=top_order.max(0) {
        a_forms.push((0..m * m).map(|_| solver.fresh_var()).collect());
        let _ = l;
    }

    for l in 0..=top_order.max(0) {
        let lu = l as usize;
        let mut eqs = linmat_zero(m);
        for i in 0..=lu {
            let j = lu - i;
            let p_canon = canon.p.coeff(q + 1 - i as i64);
            if mat_max_abs(&p_canon) != 0.0 {
                add_linmat_times_const(&mut eqs, &a_forms[j], &p_canon, 1.0, m);
            }
            let p_desc = desc.p_series.coeff(q - i as i64);
            if mat_max_abs(&p_desc) != 0.0 {
                add_const_times_linmat(&mut eqs, &p_desc, &a_forms[j], -1.0, m);
            }
        }
        let rhs_order = l - q - 1;
        if rhs_order >= 1 {
            let factor = -(rhs_order as f64);
            let rhs = a_forms[rhs_order as usize].clone();
            for (e, r) in eqs.iter_mut().zip(rhs.iter()) {
                e.add_scaled(r, C64::from(factor));
            }
        }

        let reduced: Vec<Lin> = eqs.iter().map(|e| solver.reduce(e)).collect();
        let scale = reduced.iter().map(|e| e.max_term_abs()).fold(0.0, f64::max);
        let const_scale = reduced.iter().map(|e| e.c.norm()).fold(0.0, f64::max);
        let pivot_floor = PIVOT_REL_TOL * scale.max(1.0);
        let resid_floor = 1e-8 * const_scale.max(1.0);
        for eq in &eqs {
            match solver.feed(eq, pivot_floor, resid_floor) {
                FeedOutcome::Pivoted | FeedOutcome::Trivial => {}
                FeedOutcome::Inconsistent(residual) => {
                    return Err(if l <= q + 1 {
                        BirkhoffError::InconsistentCanonical { order: lu, residual }
                    } else {
                        BirkhoffError::Resonance { order: lu, residual }
                    });
                }
            }
        }
    }

    let mut coeffs = Vec::with_capacity(depth + 1);
    let mut zero_filled = 0usize;
    for k in 0..=depth {
        let mut mat = CMat::zeros(m, m);
        for r in 0..m {
            for s in 0..m {
                let form = solver.reduce(&a_forms[k][r * m + s]);
                if form.max_term_abs() > PIVOT_REL_TOL {
                    zero_filled += 1;
                }
                mat[(r, s)] = form.c;
            }
        }
        coeffs.push(mat);
    }
    if zero_filled > 0 {
        log::debug!("recurrence_solve: {zero_filled} coefficient entries left free by the recurrence were zero-filled");
    }
    Ok(TransformSeries::from_coeffs(coeffs))
}

/// Residuals of the matching recurrence at the given orders for an
/// explicit transformation (zero-extended past its stored coefficients).
pub fn order_residuals(
    desc: &SystemDescriptor,
    canon: &CanonicalSystem,
    transform: &TransformSeries,
    orders: &[usize],
) -> Result<Vec<f64>, BirkhoffError> {
    let m = desc.dim;
    let q = desc.rank_exponent;
    let max_order = orders.iter().copied().max().unwrap_or(0) as i64;
    let required_bottom = q - max_order;
    if desc.p_series.bottom() > required_bottom {
        return Err(BirkhoffError::InsufficientDepth {
            required_bottom,
            available_bottom: desc.p_series.bottom(),
        });
    }
    let mut out = Vec::with_capacity(orders.len());
    for &l in orders {
        let mut acc = CMat::zeros(m, m);
        for i in 0..=l {
            let a = transform.coeff(l - i);
            acc += &a * canon.p.coeff(q + 1 - i as i64);
            acc -= desc.p_series.coeff(q - i as i64) * &a;
        }
        let rhs_order = l as i64 - q - 1;
        if rhs_order >= 0 {
            acc -= transform.coeff(rhs_order as usize) * C64::from(rhs_order as f64);
        }
        out.push(mat_max_abs(&acc));
    }
    Ok(out)
}

/// Residual of the defining identity `P(z) = z (a⁻¹ p a - a⁻¹ a')`,
/// measured coefficient by coefficient over the stored window down to
/// `z^{-depth}` (or as deep as the inputs allow); 0 means exact to
/// truncation.
///
/// Each deviation is scaled by the magnitude of the conjugated-product
/// coefficients it came from.  The identity cancels those products down
/// to the polynomial `P`, and for a divergent (merely formal)
/// transformation they grow factorially with the order, so the absolute
/// deviation floor grows with them; the scaled residual stays at working
/// precision whenever the identity holds.  For terminating or otherwise
/// tame transformations the scale is O(1) and the result is an ordinary
/// absolute residual.
///
/// For a terminated transformation the tail is exactly zero, so the
/// series is extended as needed; otherwise the requested depth is capped
/// by the stored order.
pub fn verify_canonicalization(
    desc: &SystemDescriptor,
    transform: &TransformSeries,
    canon: &CanonicalSystem,
    depth: usize,
) -> f64 {
    let q = desc.rank_exponent;
    let mut a = transform.as_laurent();
    if transform.terminated() {
        let want = depth + (q.max(0) as usize) + 2;
        if a.depth_below_top() < want {
            a = a.extended_with_zeros(want - a.depth_below_top());
        }
    }
    let da = a.depth_below_top();
    let a_inv = a.invert(da).expect("normalized by construction");
    let pa = desc.p_series.multiply(&a).expect("dims match");
    let s1 = a_inv.multiply(&pa).expect("dims match");
    let s2 = a_inv.multiply(&a.derivative()).expect("dims match");
    let r = s1.sub(&s2).expect("dims match").shift(1);
    let depth_available = (-r.bottom()).max(0) as usize;
    let d_eff = depth.min(depth_available);
    let p_l = canon.p.as_laurent(d_eff);
    let diff = r.sub(&p_l).expect("dims match");
    let zero = CMat::zeros(desc.dim, desc.dim);
    let mut worst = 0.0f64;
    let mut power = diff.top();
    while power >= -(d_eff as i64) {
        let scale = 1.0f64
            .max(mat_max_abs(s1.coeff_ref(power - 1).unwrap_or(&zero)))
            .max(mat_max_abs(s2.coeff_ref(power - 1).unwrap_or(&zero)));
        worst = worst.max(mat_max_abs(&diff.coeff(power)) / scale);
        power -= 1;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::laurent_expand_rational;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Expansion of the two-level Bargmann system around infinity:
    /// p11 = (E - λz)/(z + λ), p12 = -μ/(z + λ),
    /// p21 = -μ/(z - λ),       p22 = (E + λz)/(z - λ).
    fn two_level_descriptor(lambda: f64, mu: f64, energy: f64, depth: usize) -> SystemDescriptor {
        let entries = vec![
            laurent_expand_rational(&[c(energy), c(-lambda)], &[c(lambda), c(1.0)], depth).unwrap(),
            laurent_expand_rational(&[c(-mu)], &[c(lambda), c(1.0)], depth).unwrap(),
            laurent_expand_rational(&[c(-mu)], &[c(-lambda), c(1.0)], depth).unwrap(),
            laurent_expand_rational(&[c(energy), c(lambda)], &[c(-lambda), c(1.0)], depth).unwrap(),
        ];
        let p = LaurentMatrixSeries::from_entries(2, &entries);
        SystemDescriptor::new(0, p, vec![C64::new(-lambda, 0.0), C64::new(lambda, 0.0)])
    }

    fn two_level_canonical(
        desc: &SystemDescriptor,
        a12: f64,
    ) -> CanonicalSystem {
        let mut a1 = CMat::zeros(2, 2);
        a1[(0, 1)] = c(a12);
        a1[(1, 0)] = c(-a12);
        canonical_polynomials(desc, &[a1]).unwrap()
    }

    #[test]
    fn leading_coefficient_examples() {
        let d = two_level_descriptor(0.5, 0.1, 1.0, 4);
        let lead = leading_coefficient(&d);
        assert!((lead[(0, 0)].re + 0.5).abs() < 1e-15);
        assert!((lead[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(lead[(0, 1)].norm() < 1e-15);

        let d0 = two_level_descriptor(0.0, 0.3, 0.7, 4);
        assert!(mat_max_abs(&leading_coefficient(&d0)) < 1e-15);
    }

    #[test]
    fn canonical_polynomial_has_expected_form() {
        let d = two_level_descriptor(0.5, 0.1, 1.0, 6);
        let canon = two_level_canonical(&d, 0.0);
        assert_eq!(canon.p.degree(), 1);
        let p1 = canon.p.coeff(1);
        assert!((p1[(0, 0)].re + 0.5).abs() < 1e-14);
        assert!((p1[(1, 1)].re - 0.5).abs() < 1e-14);
        let p0 = canon.p.coeff(0);
        // With a^(1) = 0 the constant term is [[E+λ², -μ], [-μ, E+λ²]].
        assert!((p0[(0, 0)].re - 1.25).abs() < 1e-14);
        assert!((p0[(1, 1)].re - 1.25).abs() < 1e-14);
        assert!((p0[(0, 1)].re + 0.1).abs() < 1e-14);
        assert!((p0[(1, 0)].re + 0.1).abs() < 1e-14);
    }

    #[test]
    fn off_diagonal_choice_cancels_coupling() {
        // a12 = -μ/(2λ) makes the constant off-diagonal vanish.
        let (lambda, mu) = (0.5, 0.1);
        let d = two_level_descriptor(lambda, mu, 1.0, 6);
        let canon = two_level_canonical(&d, -mu / (2.0 * lambda));
        let p0 = canon.p.coeff(0);
        assert!(p0[(0, 1)].norm() < 1e-14);
        assert!(p0[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn canonical_polynomial_is_affine_in_free_params() {
        let d = two_level_descriptor(0.45, 0.3, 0.8, 6);
        let p_at = |x: f64| two_level_canonical(&d, x).p;
        let p0 = p_at(0.0);
        let p1 = p_at(0.1);
        let p3 = p_at(0.3);
        for k in 0..=1i64 {
            let lin = &p0.coeff(k) + (&p1.coeff(k) - &p0.coeff(k)) * c(3.0);
            assert!(mat_max_abs(&(&p3.coeff(k) - lin)) < 1e-13, "affine failure at power {k}");
        }
    }

    #[test]
    fn pure_leading_term_system_yields_zero_constant() {
        // p(z) = z^0 M only: with a^(1) = 0 the constant canonical term
        // collects only vanished lower coefficients.
        let mut m0 = CMat::zeros(2, 2);
        m0[(0, 0)] = c(-0.3);
        m0[(1, 1)] = c(0.3);
        let p = LaurentMatrixSeries::new(0, vec![m0, CMat::zeros(2, 2), CMat::zeros(2, 2)]);
        let d = SystemDescriptor::new(0, p, vec![]);
        let canon = canonical_polynomials(&d, &[CMat::zeros(2, 2)]).unwrap();
        assert!(mat_max_abs(&canon.p.coeff(0)) < 1e-15);
    }

    #[test]
    fn recurrence_reproduces_binomial_closed_form() {
        // Decoupled case μ = 0 with E + λ² a non-negative integer B:
        // a11(z) = (1 + λ/z)^B, a22(z) = (1 - λ/z)^B.
        let (lambda, b) = (0.5, 2.0);
        let energy = b - lambda * lambda;
        let d = two_level_descriptor(lambda, 0.0, energy, 10);
        let canon = two_level_canonical(&d, 0.0);
        let t = recurrence_solve(&d, &canon, 8).unwrap();
        let binom = |k: usize| -> f64 {
            let mut acc = 1.0;
            for i in 0..k {
                acc *= (b - i as f64) / (i as f64 + 1.0);
            }
            acc
        };
        for k in 0..=8usize {
            let want_11 = binom(k) * lambda.powi(k as i32);
            let want_22 = binom(k) * (-lambda).powi(k as i32);
            let a = t.coeff(k);
            assert!((a[(0, 0)].re - want_11).abs() < 1e-12, "a11^({k})");
            assert!((a[(1, 1)].re - want_22).abs() < 1e-12, "a22^({k})");
            assert!(a[(0, 1)].norm() < 1e-12, "a12^({k})");
            assert!(a[(1, 0)].norm() < 1e-12, "a21^({k})");
        }
        assert!(t.terminated(), "binomial series terminates at order B");
    }

    #[test]
    fn recurrence_reproduces_first_terminating_point() {
        // μ = 0.6 on the first exact-point curve: λ = 0.4, E + λ² = 1,
        // a^(1) = [[(1+μ²)/(4λ), -μ/(2λ)], [μ/(2λ), -(1+μ²)/(4λ)]].
        let (lambda, mu) = (0.4, 0.6);
        let energy = 1.0 - lambda * lambda;
        let d = two_level_descriptor(lambda, mu, energy, 10);
        let canon = two_level_canonical(&d, -mu / (2.0 * lambda));
        let t = recurrence_solve(&d, &canon, 8).unwrap();
        let a1 = t.coeff(1);
        assert!((a1[(0, 0)].re - 0.85).abs() < 1e-10, "a11^(1) = {}", a1[(0, 0)].re);
        assert!((a1[(0, 1)].re + 0.75).abs() < 1e-10);
        assert!((a1[(1, 0)].re - 0.75).abs() < 1e-10);
        assert!((a1[(1, 1)].re + 0.85).abs() < 1e-10);
        for k in 2..=8usize {
            assert!(mat_max_abs(&t.coeff(k)) < 1e-10, "tail order {k}");
        }
        assert!(t.terminated());
    }

    #[test]
    fn recurrence_for_uncoupled_oscillator_is_identity() {
        let d = two_level_descriptor(0.0, 0.3, 0.7, 10);
        let canon = two_level_canonical(&d, 0.0);
        let t = recurrence_solve(&d, &canon, 6).unwrap();
        for k in 1..=6usize {
            assert!(mat_max_abs(&t.coeff(k)) < 1e-12, "order {k} should vanish");
        }
        assert!(t.terminated());
    }

    #[test]
    fn resonant_regular_point_is_reported() {
        // Regular singular point (q = -1) with integer exponent spacing
        // and a forcing term along the resonant direction.
        let mut p1 = CMat::zeros(2, 2);
        p1[(1, 1)] = c(1.0);
        let mut p2 = CMat::zeros(2, 2);
        p2[(0, 1)] = c(1.0);
        let p = LaurentMatrixSeries::new(-1, vec![p1, p2, CMat::zeros(2, 2), CMat::zeros(2, 2)]);
        let d = SystemDescriptor::new(-1, p, vec![]);
        let canon = canonical_polynomials(&d, &[]).unwrap();
        match recurrence_solve(&d, &canon, 2) {
            Err(BirkhoffError::Resonance { order: 1, .. }) => {}
            other => panic!("expected resonance at order 1, got {other:?}"),
        }
    }

    #[test]
    fn recurrence_order_residuals_vanish_for_terminating_point() {
        let (lambda, mu) = (0.4, 0.6);
        let energy = 1.0 - lambda * lambda;
        let d = two_level_descriptor(lambda, mu, energy, 12);
        let canon = two_level_canonical(&d, -mu / (2.0 * lambda));
        let t = recurrence_solve(&d, &canon, 6).unwrap();
        let res = order_residuals(&d, &canon, &t, &[2, 3, 4, 5, 6]).unwrap();
        for (i, r) in res.iter().enumerate() {
            assert!(*r < 1e-12, "order residual {i}: {r:e}");
        }
    }

    #[test]
    fn closure_on_random_parameters() {
        let mut rng = StdRng::seed_from_u64(2024);
        for draw in 0..5 {
            let lambda = rng.gen_range(0.1..=1.0);
            let mu = rng.gen_range(0.1..=1.0);
            let energy = rng.gen_range(-1.0..=2.0);
            let depth = 30usize;
            let d = two_level_descriptor(lambda, mu, energy, depth + 4);
            let canon = two_level_canonical(&d, -mu / (2.0 * lambda));
            let t = recurrence_solve(&d, &canon, depth).unwrap();
            let res = verify_canonicalization(&d, &t, &canon, depth - 1);
            assert!(res < 1e-10, "draw {draw} (λ={lambda:.3}, μ={mu:.3}, E={energy:.3}): residual {res:e}");
        }
    }

    #[test]
    fn perturbed_transformation_is_rejected() {
        let d = two_level_descriptor(0.5, 0.3, 0.9, 20);
        let canon = two_level_canonical(&d, -0.3 / 1.0);
        let t = recurrence_solve(&d, &canon, 16).unwrap();
        let mut coeffs = t.coeffs().to_vec();
        coeffs[1][(0, 1)] += c(0.1);
        let bad = TransformSeries::from_coeffs(coeffs);
        let res = verify_canonicalization(&d, &bad, &canon, 10);
        assert!(res > 0.01, "perturbation must show up, residual {res:e}");
    }

    #[test]
    fn canonical_leading_term_matches_descriptor() {
        let d = two_level_descriptor(0.5, 0.2, 1.1, 6);
        let canon = two_level_canonical(&d, 0.1);
        let diff = &canon.p.coeff(1) - leading_coefficient(&d);
        assert!(mat_max_abs(&diff) < 1e-14);
    }

    #[test]
    fn free_param_count_is_validated() {
        let d = two_level_descriptor(0.5, 0.2, 1.1, 6);
        match canonical_polynomials(&d, &[]) {
            Err(BirkhoffError::BadFreeParams { expected: 1, got: 0 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
