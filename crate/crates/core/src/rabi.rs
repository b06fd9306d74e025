//! The Rabi Hamiltonian as a first-order system in Bargmann space and
//! its canonical form.
//!
//! With the oscillator frequency fixed to 1, atomic half-splitting `μ`
//! and coupling `λ`, a candidate eigenvalue `E` turns the eigenproblem
//! into the system
//!
//! ```text
//! f₁' = (E - λz)/(z + λ) f₁ - μ/(z + λ) f₂
//! f₂' = -μ/(z - λ) f₁ + (E + λz)/(z - λ) f₂
//! ```
//!
//! with regular singular points at z = ±λ and an irregular one at
//! infinity.  The canonical form produced by the engine is
//! `z F' = P(z) F` with `P(z) = (E + λ²) I - A σ₁ + λ z diag(-1, 1)`,
//! where `A = μ + 2λ a₁₂⁽¹⁾` collects the one remaining free parameter
//! of the normalizing transformation (parity symmetry forces
//! `a₂₁⁽¹⁾ = -a₁₂⁽¹⁾`, which this module bakes in).  Entire solutions
//! exist only for special constellations of the indicial roots
//! `ρ = E + λ² ± A`; the classifier below names them.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::birkhoff::{canonical_polynomials, CanonicalSystem, SystemDescriptor};
use crate::series::{laurent_expand_rational, CMat, LaurentMatrixSeries};

/// Absolute tolerance for integer and half-integer detection in the
/// indicial classification.
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum RabiError {
    NegativeParameter { name: &'static str, value: f64 },
    /// μ and λ both zero leaves a bare oscillator with no two-level
    /// structure to analyze.
    DegenerateModel,
}

impl fmt::Display for RabiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RabiError::NegativeParameter { name, value } => {
                write!(f, "{name} must be non-negative, got {value}")
            }
            RabiError::DegenerateModel => {
                write!(f, "μ and λ must not vanish simultaneously")
            }
        }
    }
}

impl std::error::Error for RabiError {}

/// Model parameters and a candidate eigenvalue, in units of the
/// oscillator frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiParams {
    pub lambda: f64,
    pub mu: f64,
    pub energy: f64,
}

impl RabiParams {
    pub fn new(lambda: f64, mu: f64, energy: f64) -> Result<Self, RabiError> {
        if lambda < 0.0 {
            return Err(RabiError::NegativeParameter { name: "lambda", value: lambda });
        }
        if mu < 0.0 {
            return Err(RabiError::NegativeParameter { name: "mu", value: mu });
        }
        if lambda == 0.0 && mu == 0.0 {
            return Err(RabiError::DegenerateModel);
        }
        Ok(RabiParams { lambda, mu, energy })
    }

    /// `E + λ²`, the center of the indicial roots.
    pub fn indicial_base(&self) -> f64 {
        self.energy + self.lambda * self.lambda
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Builds the first-order system around infinity, expanded down to
/// `z^{-depth}` below the leading power.
pub fn initial_system(params: &RabiParams, depth: usize) -> SystemDescriptor {
    let (lambda, mu, energy) = (params.lambda, params.mu, params.energy);
    let entries = vec![
        laurent_expand_rational(&[c(energy), c(-lambda)], &[c(lambda), c(1.0)], depth).unwrap(),
        laurent_expand_rational(&[c(-mu)], &[c(lambda), c(1.0)], depth).unwrap(),
        laurent_expand_rational(&[c(-mu)], &[c(-lambda), c(1.0)], depth).unwrap(),
        laurent_expand_rational(&[c(energy), c(lambda)], &[c(-lambda), c(1.0)], depth).unwrap(),
    ];
    let p = LaurentMatrixSeries::from_entries(2, &entries);
    let singularities =
        if lambda == 0.0 { vec![c(0.0)] } else { vec![c(-lambda), c(lambda)] };
    SystemDescriptor::new(0, p, singularities)
}

/// The transformation coefficient `a^(1)` encoding the one free
/// canonical parameter: parity symmetry of the system forces
/// `a₂₁⁽¹⁾ = -a₁₂⁽¹⁾`, and the diagonal does not enter `P`.
pub fn free_coefficient(a12_1: f64) -> CMat {
    let mut a1 = CMat::zeros(2, 2);
    a1[(0, 1)] = c(a12_1);
    a1[(1, 0)] = c(-a12_1);
    a1
}

/// Canonical system for the given parameters and free off-diagonal
/// entry:
/// `z F₁' = (E + λ² - λz) F₁ - A F₂`,
/// `z F₂' = -A F₁ + (E + λ² + λz) F₂`,
/// with `A = μ + 2λ a₁₂⁽¹⁾`.
pub fn canonical_system(params: &RabiParams, a12_1: f64) -> CanonicalSystem {
    let desc = initial_system(params, 2);
    canonical_polynomials(&desc, &[free_coefficient(a12_1)])
        .expect("two-level canonical construction cannot fail")
}

/// Effective off-diagonal coupling of the canonical system.
pub fn coupling(params: &RabiParams, a12_1: f64) -> f64 {
    params.mu + 2.0 * params.lambda * a12_1
}

/// The choice of `a₁₂⁽¹⁾` that makes the canonical system diagonal
/// (`A = 0`); unavailable at λ = 0 unless μ = 0 as well.
pub fn decoupling_a12(params: &RabiParams) -> Option<f64> {
    if params.lambda > 0.0 {
        Some(-params.mu / (2.0 * params.lambda))
    } else {
        None
    }
}

/// Rule governing entire solutions, read off the indicial roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticRule {
    /// No root is a non-negative integer: no entire solutions.
    NoEntireSolutions,
    /// Exactly one admissible root: one analytic solution set up to
    /// linear dependence.
    UniqueAnalyticSet,
    /// Two or more integer roots (one non-negative): at least one
    /// analytic set; further sets exist only in exceptional cases.
    MultipleIntegerSets,
}

/// Named constellations of base `E + λ²` and coupling `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionCase {
    /// Generic constellation: none of the special patterns below.  The
    /// rule and degeneracy still reflect the actual roots.
    NonInteger,
    /// Base and A both half-odd-integers: one of the two canonical
    /// Kummer solutions is undefined, one-dimensional solution set.
    HalfInteger,
    /// Base a non-negative integer with A = 0: doubly degenerate, the
    /// constellation hosting the exact terminating solutions.
    IntegerAZero,
    /// Base a positive integer, A a nonzero integer with |A| ≤ base:
    /// doubly degenerate.
    IntegerAInteger,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseClassification {
    pub case: SolutionCase,
    pub rule: AnalyticRule,
    /// Dimension of the entire-solution space implied by the case (a
    /// lower bound of 1 for [`AnalyticRule::MultipleIntegerSets`] in the
    /// generic constellation).
    pub degeneracy: usize,
}

fn is_integer(x: f64, tol: f64) -> bool {
    (x - x.round()).abs() < tol
}

fn is_half_odd(x: f64, tol: f64) -> bool {
    is_integer(2.0 * x, tol) && !is_integer(x, tol)
}

/// Classifies the constellation of `base = E + λ²` and coupling `A`.
pub fn classify_solution_case(base: f64, a: f64, tol: f64) -> CaseClassification {
    if is_integer(base, tol) && base > -tol && a.abs() < tol {
        return CaseClassification {
            case: SolutionCase::IntegerAZero,
            rule: AnalyticRule::MultipleIntegerSets,
            degeneracy: 2,
        };
    }
    if is_integer(base, tol)
        && base > tol
        && is_integer(a, tol)
        && a.abs() > tol
        && a.abs() <= base + tol
    {
        return CaseClassification {
            case: SolutionCase::IntegerAInteger,
            rule: AnalyticRule::MultipleIntegerSets,
            degeneracy: 2,
        };
    }
    if is_half_odd(base, tol) && is_half_odd(a, tol) {
        return CaseClassification {
            case: SolutionCase::HalfInteger,
            rule: AnalyticRule::UniqueAnalyticSet,
            degeneracy: 1,
        };
    }
    let roots = [base + a, base - a];
    let admissible =
        |r: &&f64| is_integer(**r, tol) && **r > -tol;
    let integer_roots = roots.iter().filter(|r| is_integer(**r, tol)).count();
    let admissible_roots = roots.iter().filter(admissible).count();
    if integer_roots >= 2 && admissible_roots >= 1 {
        CaseClassification {
            case: SolutionCase::NonInteger,
            rule: AnalyticRule::MultipleIntegerSets,
            degeneracy: 1,
        }
    } else if admissible_roots >= 1 {
        CaseClassification {
            case: SolutionCase::NonInteger,
            rule: AnalyticRule::UniqueAnalyticSet,
            degeneracy: 1,
        }
    } else {
        CaseClassification {
            case: SolutionCase::NonInteger,
            rule: AnalyticRule::NoEntireSolutions,
            degeneracy: 0,
        }
    }
}

/// Indicial data of the canonical system at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicialData {
    /// `E + λ²`.
    pub base: f64,
    /// `A = μ + 2λ a₁₂⁽¹⁾`.
    pub coupling: f64,
    /// `(base + A, base - A)`, the eigenvalues of `P(0)`.
    pub roots: (f64, f64),
    pub case: CaseClassification,
}

/// Reads the indicial roots `ρ = E + λ² ± A` off a Rabi canonical
/// system and classifies the constellation at [`CLASSIFY_TOL`].
pub fn indicial_roots(canon: &CanonicalSystem) -> IndicialData {
    let p0 = canon.p.coeff(0);
    debug_assert!(
        (p0[(0, 0)] - p0[(1, 1)]).norm() < 1e-12 && (p0[(0, 1)] - p0[(1, 0)]).norm() < 1e-12,
        "not a Rabi canonical constant term"
    );
    let base = p0[(0, 0)].re;
    let coupling = -p0[(0, 1)].re;
    IndicialData {
        base,
        coupling,
        roots: (base + coupling, base - coupling),
        case: classify_solution_case(base, coupling, CLASSIFY_TOL),
    }
}

/// Scalar second-order form obeyed by the first canonical component:
/// `c₂(z) F₁'' + c₁(z) F₁' + c₀(z) F₁ = 0` with ascending coefficient
/// lists `c₂ = z²`, `c₁ = (1 - 2(E+λ²)) z`,
/// `c₀ = (E+λ²)² - A² + λz - λ²z²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderForm {
    pub c2: Vec<f64>,
    pub c1: Vec<f64>,
    pub c0: Vec<f64>,
}

impl SecondOrderForm {
    /// Residual `|c₂ F'' + c₁ F' + c₀ F|` at a point, given the value
    /// and first two derivatives.
    pub fn residual(&self, z: C64, f: C64, fp: C64, fpp: C64) -> f64 {
        let eval = |p: &[f64]| {
            let mut acc = C64::new(0.0, 0.0);
            for &ck in p.iter().rev() {
                acc = acc * z + c(ck);
            }
            acc
        };
        (eval(&self.c2) * fpp + eval(&self.c1) * fp + eval(&self.c0) * f).norm()
    }
}

pub fn second_order_coeffs(params: &RabiParams, a: f64) -> SecondOrderForm {
    let b = params.indicial_base();
    let lambda = params.lambda;
    SecondOrderForm {
        c2: vec![0.0, 0.0, 1.0],
        c1: vec![0.0, 1.0 - 2.0 * b],
        c0: vec![b * b - a * a, lambda, -lambda * lambda],
    }
}

/// Residual of the canonical system `z F' = P(z) F` at a point.
pub fn canonical_residual(
    canon: &CanonicalSystem,
    z: C64,
    f: (C64, C64),
    fp: (C64, C64),
) -> f64 {
    let p = canon.p.eval(z);
    let r1 = z * fp.0 - p[(0, 0)] * f.0 - p[(0, 1)] * f.1;
    let r2 = z * fp.1 - p[(1, 0)] * f.0 - p[(1, 1)] * f.1;
    r1.norm().max(r2.norm())
}

/// Residual of the pole-cleared initial system at a point:
/// `(z+λ) f₁' - (E-λz) f₁ + μ f₂` and `(z-λ) f₂' + μ f₁ - (E+λz) f₂`.
pub fn initial_residual(
    params: &RabiParams,
    z: C64,
    f: (C64, C64),
    fp: (C64, C64),
) -> f64 {
    let (lambda, mu, energy) = (params.lambda, params.mu, params.energy);
    let r1 = (z + c(lambda)) * fp.0 - (c(energy) - c(lambda) * z) * f.0 + c(mu) * f.1;
    let r2 = (z - c(lambda)) * fp.1 + c(mu) * f.0 - (c(energy) + c(lambda) * z) * f.1;
    r1.norm().max(r2.norm())
}
