//! Truncated series arithmetic around the irregular singular point at
//! infinity.
//!
//! Three representations are used throughout the crate:
//!
//! * [`InversePowerSeries`] — a scalar series `Σ_{k=0..K} c_k z^{-k}`,
//!   the substrate for entries of the normalizing transformation.
//! * [`LaurentMatrixSeries`] — a matrix series with a finite number of
//!   positive powers, `Σ_{k<=q} P^(k) z^k`, truncated below at a known
//!   depth.  Coefficient matrices share a common top degree and depth.
//! * [`PolynomialMatrix`] — a matrix polynomial in `z`, exact.
//!
//! All arithmetic propagates truncation pessimistically: a product or sum
//! is only stored down to the depth at which every contributing
//! coefficient of both operands is known, so no fabricated precision can
//! leak into downstream residual checks.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Dense complex matrix used for series coefficients.
pub type CMat = DMatrix<C64>;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Largest entry magnitude of a coefficient matrix.
pub fn mat_max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesError {
    /// Denominator of a rational expansion is identically zero.
    DegenerateRational,
    /// Matrix operands have incompatible dimensions.
    DimensionMismatch { left: usize, right: usize },
    /// Inversion requested for a series whose constant term is not the
    /// identity (or whose top degree is not zero).
    NotNormalized { deviation: f64 },
    /// An operation needs more stored coefficients than are available.
    InsufficientDepth { required: usize, available: usize },
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::DegenerateRational => write!(f, "degenerate rational: denominator is zero"),
            SeriesError::DimensionMismatch { left, right } => {
                write!(f, "matrix dimension mismatch: {left} vs {right}")
            }
            SeriesError::NotNormalized { deviation } => {
                write!(f, "not Birkhoff-normalized: constant term deviates from identity by {deviation:.3e}")
            }
            SeriesError::InsufficientDepth { required, available } => {
                write!(f, "insufficient series depth: need {required} coefficients, have {available}")
            }
        }
    }
}

impl std::error::Error for SeriesError {}

/// Scalar series in inverse powers of `z`: `Σ_{k=0..K} c_k z^{-k}`.
///
/// `K` is the truncation order; coefficients beyond it are unknown, not
/// zero.  Arithmetic returns results truncated to the smaller operand
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePowerSeries {
    coeffs: Vec<C64>,
}

impl InversePowerSeries {
    /// Builds a series from coefficients `c_0, c_1, ..., c_K`.
    pub fn new(coeffs: Vec<C64>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the constant term");
        InversePowerSeries { coeffs }
    }

    /// The zero series truncated at `order`.
    pub fn zero(order: usize) -> Self {
        InversePowerSeries { coeffs: vec![czero(); order + 1] }
    }

    /// A constant `c` truncated at `order`.
    pub fn constant(c: C64, order: usize) -> Self {
        let mut coeffs = vec![czero(); order + 1];
        coeffs[0] = c;
        InversePowerSeries { coeffs }
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^{-k}`; `k` beyond the truncation order is a
    /// caller error.
    pub fn coeff(&self, k: usize) -> C64 {
        assert!(
            k <= self.truncation_order(),
            "coefficient z^-{k} beyond truncation order {}",
            self.truncation_order()
        );
        self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        InversePowerSeries {
            coeffs: (0..n).map(|k| self.coeffs[k] + other.coeffs[k]).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        InversePowerSeries {
            coeffs: (0..n).map(|k| self.coeffs[k] - other.coeffs[k]).collect(),
        }
    }

    /// Cauchy product truncated to the smaller operand order.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.truncation_order().min(other.truncation_order());
        let mut coeffs = vec![czero(); n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            for i in 0..=k {
                *c += self.coeffs[i] * other.coeffs[k - i];
            }
        }
        InversePowerSeries { coeffs }
    }

    pub fn scale(&self, s: C64) -> Self {
        InversePowerSeries { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Termwise derivative.  Exact: the coefficient of `z^{-(K+1)}` in the
    /// derivative depends only on `c_K`, so the result carries order `K+1`.
    pub fn derivative(&self) -> Self {
        let mut coeffs = vec![czero(); self.coeffs.len() + 1];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            coeffs[k + 1] = -C64::from(k as f64) * c;
        }
        InversePowerSeries { coeffs }
    }

    /// Evaluates the truncated series at `z` (Horner in `1/z`).
    pub fn eval(&self, z: C64) -> C64 {
        let w = C64::new(1.0, 0.0) / z;
        let mut acc = czero();
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Scalar Laurent series around infinity: coefficients for the powers
/// `z^top, z^{top-1}, ..., z^{top-(len-1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLaurent {
    top: i64,
    coeffs: Vec<C64>,
}

impl ScalarLaurent {
    pub fn new(top: i64, coeffs: Vec<C64>) -> Self {
        assert!(!coeffs.is_empty(), "Laurent series needs at least one coefficient");
        ScalarLaurent { top, coeffs }
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    /// Lowest stored power.
    pub fn bottom(&self) -> i64 {
        self.top - (self.coeffs.len() as i64 - 1)
    }

    /// Coefficient of `z^power`.  Powers above the top are exactly zero;
    /// powers below the stored bottom are unknown and panic.
    pub fn coeff(&self, power: i64) -> C64 {
        if power > self.top {
            return czero();
        }
        assert!(power >= self.bottom(), "coefficient z^{power} below stored depth");
        self.coeffs[(self.top - power) as usize]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Evaluates the truncated series at `z` (valid outside the
    /// singularity radius).
    pub fn eval(&self, z: C64) -> C64 {
        let w = C64::new(1.0, 0.0) / z;
        let mut acc = czero();
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * z.powi(self.top as i32)
    }
}

/// Expands `num(z) / den(z)` in a Laurent series around infinity, down to
/// the power `z^{-depth}`.
///
/// Polynomials are given lowest-degree-first.  The top degree of the
/// result is `deg(num) - deg(den)`; coefficients are produced by power
/// series division of the degree-reversed polynomials in `w = 1/z`.
pub fn laurent_expand_rational(
    num: &[C64],
    den: &[C64],
    depth: usize,
) -> Result<ScalarLaurent, SeriesError> {
    let deg = |p: &[C64]| p.iter().rposition(|c| c.norm() != 0.0);
    let dd = deg(den).ok_or(SeriesError::DegenerateRational)?;
    let Some(dn) = deg(num) else {
        // Zero numerator: the series is identically zero at every depth.
        return Ok(ScalarLaurent::new(0, vec![czero(); depth + 1]));
    };
    let top = dn as i64 - dd as i64;
    let len = top + depth as i64 + 1;
    if len < 1 {
        // The whole window lies above the first nonzero power.
        return Ok(ScalarLaurent::new(-(depth as i64), vec![czero()]));
    }
    let n_rev = |j: usize| if j <= dn { num[dn - j] } else { czero() };
    let d_rev = |j: usize| if j <= dd { den[dd - j] } else { czero() };
    let lead = d_rev(0);
    let mut coeffs = vec![czero(); len as usize];
    for j in 0..coeffs.len() {
        let mut acc = n_rev(j);
        for i in 1..=j {
            acc -= d_rev(i) * coeffs[j - i];
        }
        coeffs[j] = acc / lead;
    }
    Ok(ScalarLaurent::new(top, coeffs))
}

/// Matrix Laurent series around infinity.  All entries share the top
/// degree and the truncation depth; `coeffs[i]` is the coefficient matrix
/// of `z^{top-i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentMatrixSeries {
    dim: usize,
    top: i64,
    coeffs: Vec<CMat>,
}

impl LaurentMatrixSeries {
    pub fn new(top: i64, coeffs: Vec<CMat>) -> Self {
        assert!(!coeffs.is_empty(), "matrix series needs at least one coefficient");
        let dim = coeffs[0].nrows();
        for c in &coeffs {
            assert!(c.nrows() == dim && c.ncols() == dim, "coefficients must be square and uniform");
        }
        LaurentMatrixSeries { dim, top, coeffs }
    }

    /// The identity as a series with top degree 0, stored down to
    /// `z^{-depth}`.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let mut coeffs = vec![CMat::zeros(dim, dim); depth + 1];
        coeffs[0] = CMat::identity(dim, dim);
        LaurentMatrixSeries { dim, top: 0, coeffs }
    }

    /// Assembles a matrix series from scalar entries (row-major,
    /// `dim * dim` of them).  The common top degree is the largest entry
    /// top; the common depth is the shallowest entry bottom.
    pub fn from_entries(dim: usize, entries: &[ScalarLaurent]) -> Self {
        assert_eq!(entries.len(), dim * dim, "need dim^2 entries");
        let top = entries.iter().map(|e| e.top()).max().unwrap();
        let bottom = entries.iter().map(|e| e.bottom()).max().unwrap();
        assert!(bottom <= top, "entries leave no common stored window");
        let len = (top - bottom + 1) as usize;
        let mut coeffs = vec![CMat::zeros(dim, dim); len];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let power = top - i as i64;
            for r in 0..dim {
                for s in 0..dim {
                    c[(r, s)] = entries[r * dim + s].coeff(power);
                }
            }
        }
        LaurentMatrixSeries { dim, top, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    pub fn bottom(&self) -> i64 {
        self.top - (self.coeffs.len() as i64 - 1)
    }

    /// Number of stored coefficients below the top degree.
    pub fn depth_below_top(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient matrix of `z^power`.  Powers above the top are exactly
    /// zero; powers below the stored bottom are unknown and panic.
    pub fn coeff(&self, power: i64) -> CMat {
        if power > self.top {
            return CMat::zeros(self.dim, self.dim);
        }
        assert!(power >= self.bottom(), "coefficient of z^{power} below stored depth");
        self.coeffs[(self.top - power) as usize].clone()
    }

    pub fn coeff_ref(&self, power: i64) -> Option<&CMat> {
        if power > self.top || power < self.bottom() {
            None
        } else {
            Some(&self.coeffs[(self.top - power) as usize])
        }
    }

    /// Product of two matrix series.  Top degrees add; the stored depth
    /// below the top is the smaller of the two operand depths.
    pub fn multiply(&self, rhs: &Self) -> Result<Self, SeriesError> {
        if self.dim != rhs.dim {
            return Err(SeriesError::DimensionMismatch { left: self.dim, right: rhs.dim });
        }
        let len = self.coeffs.len().min(rhs.coeffs.len());
        let mut coeffs = vec![CMat::zeros(self.dim, self.dim); len];
        for (i, c) in coeffs.iter_mut().enumerate() {
            for j in 0..=i {
                *c += &self.coeffs[j] * &rhs.coeffs[i - j];
            }
        }
        Ok(LaurentMatrixSeries { dim: self.dim, top: self.top + rhs.top, coeffs })
    }

    /// Multiplicative inverse of a normalized series (`top == 0`,
    /// constant term the identity), stored down to `z^{-depth}`.
    pub fn invert(&self, depth: usize) -> Result<Self, SeriesError> {
        let id = CMat::identity(self.dim, self.dim);
        let deviation = if self.top == 0 { mat_max_abs(&(&self.coeffs[0] - &id)) } else { f64::INFINITY };
        if self.top != 0 || deviation > 1e-12 {
            return Err(SeriesError::NotNormalized { deviation });
        }
        if depth > self.depth_below_top() {
            return Err(SeriesError::InsufficientDepth {
                required: depth,
                available: self.depth_below_top(),
            });
        }
        let mut inv: Vec<CMat> = Vec::with_capacity(depth + 1);
        inv.push(id);
        for n in 1..=depth {
            let mut c = CMat::zeros(self.dim, self.dim);
            for j in 1..=n {
                c -= &self.coeffs[j] * &inv[n - j];
            }
            inv.push(c);
        }
        Ok(LaurentMatrixSeries { dim: self.dim, top: 0, coeffs: inv })
    }

    /// Termwise derivative; the stored window shifts down by one power.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * C64::from((self.top - i as i64) as f64))
            .collect();
        LaurentMatrixSeries { dim: self.dim, top: self.top - 1, coeffs }
    }

    /// Multiplies by `z^k` (shifts every power up by `k`).
    pub fn shift(&self, k: i64) -> Self {
        LaurentMatrixSeries { dim: self.dim, top: self.top + k, coeffs: self.coeffs.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        LaurentMatrixSeries {
            dim: self.dim,
            top: self.top,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Difference, stored on the common window of the operands.
    pub fn sub(&self, rhs: &Self) -> Result<Self, SeriesError> {
        if self.dim != rhs.dim {
            return Err(SeriesError::DimensionMismatch { left: self.dim, right: rhs.dim });
        }
        let top = self.top.max(rhs.top);
        let bottom = self.bottom().max(rhs.bottom());
        assert!(bottom <= top, "operands leave no common stored window");
        let len = (top - bottom + 1) as usize;
        let mut coeffs = Vec::with_capacity(len);
        for i in 0..len {
            let power = top - i as i64;
            let a = self.coeff_ref(power).cloned().unwrap_or_else(|| {
                if power > self.top { CMat::zeros(self.dim, self.dim) } else { unreachable!() }
            });
            let b = rhs
                .coeff_ref(power)
                .cloned()
                .unwrap_or_else(|| CMat::zeros(self.dim, self.dim));
            coeffs.push(a - b);
        }
        Ok(LaurentMatrixSeries { dim: self.dim, top, coeffs })
    }

    /// Pads the stored window upward with zero coefficients so the top
    /// degree becomes `new_top`.
    pub fn padded_to_top(&self, new_top: i64) -> Self {
        assert!(new_top >= self.top, "padding can only raise the top degree");
        let extra = (new_top - self.top) as usize;
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + extra);
        coeffs.extend(std::iter::repeat_with(|| CMat::zeros(self.dim, self.dim)).take(extra));
        coeffs.extend(self.coeffs.iter().cloned());
        LaurentMatrixSeries { dim: self.dim, top: new_top, coeffs }
    }

    /// Extends the stored window down by `extra` zero coefficients.  Only
    /// meaningful when the caller knows the tail vanishes exactly (e.g. a
    /// terminating transformation).
    pub fn extended_with_zeros(&self, extra: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(std::iter::repeat_with(|| CMat::zeros(self.dim, self.dim)).take(extra));
        LaurentMatrixSeries { dim: self.dim, top: self.top, coeffs }
    }

    /// Evaluates the truncated series at `z`.
    pub fn eval(&self, z: C64) -> CMat {
        let w = C64::new(1.0, 0.0) / z;
        let mut acc = CMat::zeros(self.dim, self.dim);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * z.powi(self.top as i32)
    }

    /// Largest entry magnitude over all stored coefficients.
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(mat_max_abs).fold(0.0, f64::max)
    }
}

/// Matrix polynomial in `z`; `coeffs[k]` is the coefficient of `z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMatrix {
    dim: usize,
    coeffs: Vec<CMat>,
}

impl PolynomialMatrix {
    pub fn new(coeffs: Vec<CMat>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least the constant term");
        let dim = coeffs[0].nrows();
        for c in &coeffs {
            assert!(c.nrows() == dim && c.ncols() == dim, "coefficients must be square and uniform");
        }
        PolynomialMatrix { dim, coeffs }
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        PolynomialMatrix { dim, coeffs: vec![CMat::zeros(dim, dim); degree + 1] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: i64) -> CMat {
        if k < 0 || k as usize >= self.coeffs.len() {
            CMat::zeros(self.dim, self.dim)
        } else {
            self.coeffs[k as usize].clone()
        }
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn eval(&self, z: C64) -> CMat {
        let mut acc = CMat::zeros(self.dim, self.dim);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// The polynomial viewed as a Laurent series stored down to
    /// `z^{-depth}` (exact: a polynomial has no hidden tail).
    pub fn as_laurent(&self, depth: usize) -> LaurentMatrixSeries {
        let top = self.degree() as i64;
        let len = self.coeffs.len() + depth;
        let mut coeffs = Vec::with_capacity(len);
        coeffs.extend(self.coeffs.iter().rev().cloned());
        coeffs.extend(std::iter::repeat_with(|| CMat::zeros(self.dim, self.dim)).take(depth));
        LaurentMatrixSeries { dim: self.dim, top, coeffs }
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(mat_max_abs).fold(0.0, f64::max)
    }
}
