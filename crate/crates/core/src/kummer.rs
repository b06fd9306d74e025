//! Confluent hypergeometric solutions of the canonical system and
//! Bargmann-space admissibility checks.
//!
//! The second-order reduction of the canonical Rabi system is solved by
//! `F₁(z) = exp(λz) · ₁F₁(1 ± A, 1 ± 2A; -2λz) · z^(E+λ²±A)`; the
//! partner component follows exactly from the first canonical equation.
//! Entire solutions stay in the Bargmann-Fock space because they grow at
//! most like `z^α exp(λ|z|)`, far below the `exp(γ|z|²/2)` admissibility
//! envelope.

use std::fmt;

use num_complex::Complex64 as C64;

use crate::rabi::RabiParams;

/// Iteration cap for the direct series.
const MAX_TERMS: usize = 10_000;

/// Distance within which `c` counts as a non-positive integer, making
/// the function undefined.
const C_POLE_TOL: f64 = 1e-12;

/// Below this coupling the solution pair degenerates to the decoupled
/// exponential form.
const COUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum KummerError {
    /// `c` is (numerically) a non-positive integer.
    Undefined { c: C64 },
    NoConvergence { terms: usize, last_term: f64 },
}

impl fmt::Display for KummerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KummerError::Undefined { c } => {
                write!(f, "Kummer function undefined: c = {c} is a non-positive integer")
            }
            KummerError::NoConvergence { terms, last_term } => {
                write!(f, "Kummer series did not converge within {terms} terms (last term {last_term:.3e})")
            }
        }
    }
}

impl std::error::Error for KummerError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KummerEval {
    pub value: C64,
    /// Number of series terms actually summed.
    pub terms: usize,
    /// Magnitude of the last term relative to the partial sum.
    pub achieved_tol: f64,
}

fn is_nonpositive_integer(c: C64) -> bool {
    c.im.abs() < C_POLE_TOL && c.re < 0.5 && (c.re - c.re.round()).abs() < C_POLE_TOL
}

fn series_1f1(a: C64, c: C64, z: C64, tol: f64) -> Result<KummerEval, KummerError> {
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut small_streak = 0usize;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        let rel = term.norm() / sum.norm().max(1.0);
        if rel < tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(KummerEval { value: sum, terms: k + 1, achieved_tol: rel });
            }
        } else {
            small_streak = 0;
        }
    }
    Err(KummerError::NoConvergence { terms: MAX_TERMS, last_term: term.norm() })
}

/// Confluent hypergeometric function ₁F₁(a; c; z) by direct series
/// summation, with the reflection `₁F₁(a,c;z) = e^z ₁F₁(c-a,c;-z)` on
/// the left half plane to keep the terms same-signed.
pub fn kummer_1f1(a: C64, c: C64, z: C64, tol: f64) -> Result<KummerEval, KummerError> {
    if is_nonpositive_integer(c) {
        return Err(KummerError::Undefined { c });
    }
    if z.re < 0.0 {
        let mut eval = series_1f1(c - a, c, -z, tol)?;
        eval.value *= z.exp();
        return Ok(eval);
    }
    series_1f1(a, c, z, tol)
}

/// One solution of the canonical system written as
/// `exp(exp_scale·z) · ₁F₁(a, c; argument_scale·z) · z^prefactor_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KummerSpec {
    pub a: C64,
    pub c: C64,
    pub argument_scale: C64,
    pub prefactor_power: f64,
    pub exp_scale: f64,
}

impl KummerSpec {
    pub fn new(
        a: C64,
        c: C64,
        argument_scale: C64,
        prefactor_power: f64,
        exp_scale: f64,
    ) -> Result<Self, KummerError> {
        if is_nonpositive_integer(c) {
            return Err(KummerError::Undefined { c });
        }
        Ok(KummerSpec { a, c, argument_scale, prefactor_power, exp_scale })
    }

    /// Evaluates the solution at `z` (principal branch for the
    /// non-integer power).
    pub fn eval(&self, z: C64, tol: f64) -> Result<C64, KummerError> {
        let m = kummer_1f1(self.a, self.c, self.argument_scale * z, tol)?;
        Ok((C64::new(self.exp_scale, 0.0) * z).exp()
            * m.value
            * z.powc(C64::new(self.prefactor_power, 0.0)))
    }
}

/// Which indicial root the solution is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Descriptor of the first component `F₁` on the chosen branch.
pub fn solution_spec(
    params: &RabiParams,
    a_coupling: f64,
    branch: Branch,
) -> Result<KummerSpec, KummerError> {
    let s = branch.sign();
    KummerSpec::new(
        C64::new(1.0 + s * a_coupling, 0.0),
        C64::new(1.0 + 2.0 * s * a_coupling, 0.0),
        C64::new(-2.0 * params.lambda, 0.0),
        params.indicial_base() + s * a_coupling,
        params.lambda,
    )
}

/// Canonical solution pair `(F₁, F₂)` on the chosen branch.
///
/// `F₂` follows exactly from the first canonical equation,
/// `A·F₂ = (E + λ² - λz) F₁ - z F₁'`, with the Kummer derivative
/// evaluated through `₁F₁'(a,c;w) = (a/c) ₁F₁(a+1,c+1;w)`.  At `A = 0`
/// the pair degenerates to `(exp(-λz) z^B, exp(λz) z^B)`.
pub fn canonical_solution_pair(
    params: &RabiParams,
    a_coupling: f64,
    branch: Branch,
    z: C64,
    tol: f64,
) -> Result<(C64, C64), KummerError> {
    let b = params.indicial_base();
    let lambda = params.lambda;
    if a_coupling.abs() < COUPLING_TOL {
        let zb = z.powc(C64::new(b, 0.0));
        let lz = C64::new(lambda, 0.0) * z;
        return Ok(((-lz).exp() * zb, lz.exp() * zb));
    }
    let spec = solution_spec(params, a_coupling, branch)?;
    let f1 = spec.eval(z, tol)?;
    let s = branch.sign();
    let rho = b + s * a_coupling;
    let w = C64::new(-2.0 * lambda, 0.0) * z;
    let m_up = kummer_1f1(spec.a + 1.0, spec.c + 1.0, w, tol)?.value;
    let pre = (C64::new(lambda, 0.0) * z).exp() * z.powc(C64::new(rho, 0.0));
    // z F₁' = (λz + ρ) F₁ - 2λz (a/c) · pre · M₊
    let z_f1p = (C64::new(lambda, 0.0) * z + C64::new(rho, 0.0)) * f1
        - C64::new(2.0 * lambda, 0.0) * z * (spec.a / spec.c) * pre * m_up;
    let f2 = ((C64::new(b, 0.0) - C64::new(lambda, 0.0) * z) * f1 - z_f1p)
        / C64::new(a_coupling, 0.0);
    Ok((f1, f2))
}

/// Admissibility envelope parameters: membership requires
/// `|F(z)| ≤ c_bound · exp(gamma |z|²/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheckConfig {
    pub gamma: f64,
    pub c_bound: f64,
    pub sample_radii: Vec<f64>,
}

impl GrowthCheckConfig {
    pub fn new(gamma: f64, c_bound: f64, sample_radii: Vec<f64>) -> Self {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
        assert!(c_bound > 0.0, "c_bound must be positive");
        GrowthCheckConfig { gamma, c_bound, sample_radii }
    }
}

/// Samples `(z, |f(z)|)` at `n` equispaced points on the circle of the
/// given radius.
pub fn sample_circle_magnitudes(
    f: impl Fn(C64) -> C64,
    radius: f64,
    n: usize,
) -> Vec<(C64, f64)> {
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            let z = C64::new(radius * t.cos(), radius * t.sin());
            (z, f(z).norm())
        })
        .collect()
}

/// Checks the sampled magnitudes against the Gaussian envelope.  The
/// samples must cover at least three distinct radii of at least 5, so
/// that super-envelope growth cannot hide below the bound constant.
pub fn bargmann_growth_check(samples: &[(C64, f64)], config: &GrowthCheckConfig) -> bool {
    let mut radii: Vec<f64> = samples.iter().map(|(z, _)| z.norm()).collect();
    radii.sort_by(|x, y| x.partial_cmp(y).unwrap());
    radii.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    let large = radii.iter().filter(|r| **r >= 5.0 - 1e-9).count();
    assert!(large >= 3, "need samples on at least 3 circles of radius >= 5, got {large}");
    samples.iter().all(|(z, mag)| {
        let r2 = z.norm_sqr();
        *mag <= config.c_bound * (config.gamma * r2 / 2.0).exp()
    })
}
