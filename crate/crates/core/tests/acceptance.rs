//! End-to-end acceptance gate.  Each test covers one headline capability
//! and prints a single pass/fail line (visible under `--nocapture`).

use num_complex::Complex64 as C64;
use rabi_canonical::juddian::{
    baseline_curve_n1, baseline_curve_n2, reconstruct_eigenfunction, solve_terminating,
    subspace_overlap, validate_point, ComponentFunction, ConstraintPolynomial,
};
use rabi_canonical::kummer::{canonical_solution_pair, kummer_1f1, Branch};
use rabi_canonical::oracle::{
    converged_spectrum, degeneracy_scan, parity_operator, Parity, TruncatedHamiltonian,
};
use rabi_canonical::rabi::{canonical_system, initial_residual, initial_system, RabiParams};
use rabi_canonical::{recurrence_solve, sweep, verify_canonicalization};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::Instant;

fn report<F: FnOnce()>(id: usize, name: &str, body: F) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("criterion {id} ({name}): PASS"),
        Err(e) => {
            println!("criterion {id} ({name}): FAIL");
            resume_unwind(e);
        }
    }
}

fn params(lambda: f64, mu: f64, energy: f64) -> RabiParams {
    RabiParams::new(lambda, mu, energy).unwrap()
}

#[test]
fn criterion_01_uncoupled_limit_spectrum() {
    report(1, "uncoupled limit", || {
        let t0 = Instant::now();
        let spec = converged_spectrum(&params(0.5, 0.0, 0.0), 8, 1e-9).unwrap();
        for (i, e) in spec.eigenvalues.iter().enumerate() {
            let want = (i / 2) as f64 - 0.25;
            assert!(
                (e - want).abs() < 1e-8,
                "level {i}: {e} vs {want}"
            );
        }
        assert!(t0.elapsed().as_secs_f64() < 5.0, "took {:?}", t0.elapsed());
    });
}

#[test]
fn criterion_02_first_crossing_curve_sweep() {
    report(2, "first crossing curve sweep", || {
        let t0 = Instant::now();
        let grid: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
        let results = sweep::map_collect(grid, |mu| {
            let lambda = (1.0 - mu * mu).sqrt() / 2.0;
            let target = 1.0 - lambda * lambda;
            let spec = converged_spectrum(&params(lambda, mu, target), 6, 1e-8).unwrap();
            let vals = &spec.eigenvalues;
            let i = (0..vals.len() - 1)
                .min_by(|&a, &b| {
                    let ea = (0.5 * (vals[a] + vals[a + 1]) - target).abs();
                    let eb = (0.5 * (vals[b] + vals[b + 1]) - target).abs();
                    ea.partial_cmp(&eb).unwrap()
                })
                .unwrap();
            let gap = vals[i + 1] - vals[i];
            let mean = 0.5 * (vals[i] + vals[i + 1]);
            let opposite = matches!(
                (spec.parities[i], spec.parities[i + 1]),
                (Parity::Plus, Parity::Minus) | (Parity::Minus, Parity::Plus)
            );
            (mu, gap, (mean - target).abs(), opposite)
        });
        for (mu, gap, offset, opposite) in results {
            assert!(gap < 1e-6, "gap {gap:.3e} at μ = {mu}");
            assert!(offset < 1e-5, "energy offset {offset:.3e} at μ = {mu}");
            assert!(opposite, "pair parities not opposite at μ = {mu}");
        }
        assert!(t0.elapsed().as_secs_f64() < 30.0, "took {:?}", t0.elapsed());
    });
}

#[test]
fn criterion_03_second_crossing_branches() {
    report(3, "second crossing branches", || {
        let pts = baseline_curve_n2(0.5).unwrap();
        assert_eq!(pts.len(), 2, "two branches expected at μ = 0.5");
        let poly = ConstraintPolynomial::for_level(2).unwrap();
        for (pt, approx) in pts.iter().zip([0.332330, 0.892081]) {
            assert!(
                (pt.lambda - approx).abs() < 2e-5,
                "branch λ = {} vs ≈ {approx}",
                pt.lambda
            );
            assert!(poly.eval(pt.lambda, 0.5).abs() < 1e-12);
            let report = validate_point(pt, 1e-6).unwrap();
            assert!(report.passed, "oracle validation failed at λ = {}", pt.lambda);
            assert!(report.oracle_gap < 1e-6);
            assert!((report.pair_energy - (2.0 - pt.lambda * pt.lambda)).abs() < 1e-5);
        }
    });
}

#[test]
fn criterion_04_negative_control_off_curve() {
    report(4, "negative control", || {
        let (lambda, mu) = (0.3, 0.7);
        for n in 1..=2 {
            let poly = ConstraintPolynomial::for_level(n).unwrap();
            let r = poly.eval(lambda, mu).abs();
            assert!(r > 0.01, "constraint {n} residual {r} too small");
        }
        let pairs = degeneracy_scan(&params(lambda, mu, 0.0), 6, 1e-6).unwrap();
        assert!(pairs.is_empty(), "unexpected degeneracies: {pairs:?}");
    });
}

#[test]
fn criterion_05_canonicalization_closure() {
    report(5, "canonicalization closure", || {
        let mut rng = StdRng::seed_from_u64(71);
        for draw in 0..20 {
            let lambda = 0.1 + 0.9 * rng.gen::<f64>();
            let mu = 0.1 + 0.9 * rng.gen::<f64>();
            let energy = -1.0 + 3.0 * rng.gen::<f64>();
            let p = params(lambda, mu, energy);
            let canon = canonical_system(&p, -mu / (2.0 * lambda));
            let desc = initial_system(&p, 44);
            let t = recurrence_solve(&desc, &canon, 40).unwrap();
            let residual = verify_canonicalization(&desc, &t, &canon, 39);
            assert!(
                residual < 1e-10,
                "draw {draw} (λ={lambda:.3}, μ={mu:.3}, E={energy:.3}): residual {residual:.3e}"
            );
        }
    });
}

#[test]
fn criterion_06_closed_form_regeneration() {
    report(6, "closed-form regeneration", || {
        // Decoupled binomial transforms at integer E + λ².
        let lambda = 0.5;
        for b in 1..=3usize {
            let p = params(lambda, 0.0, b as f64 - lambda * lambda);
            let canon = canonical_system(&p, 0.0);
            let desc = initial_system(&p, b + 6);
            let t = recurrence_solve(&desc, &canon, b + 4).unwrap();
            assert!(t.terminated(), "binomial case B = {b} must terminate");
            let mut binom = 1.0;
            for k in 0..=b {
                if k > 0 {
                    binom *= (b - k + 1) as f64 / k as f64;
                }
                let c = t.coeff(k);
                assert!((c[(0, 0)].re - binom * lambda.powi(k as i32)).abs() < 1e-12);
                assert!((c[(1, 1)].re - binom * (-lambda).powi(k as i32)).abs() < 1e-12);
                assert!(c[(0, 1)].norm() < 1e-12 && c[(1, 0)].norm() < 1e-12);
            }
        }

        // First-curve entries at the reference crossing.
        let pt = baseline_curve_n1(0.6).unwrap();
        let p = pt.params();
        let canon = canonical_system(&p, -0.6 / (2.0 * pt.lambda));
        let desc = initial_system(&p, 8);
        let t = recurrence_solve(&desc, &canon, 5).unwrap();
        assert!(t.terminated());
        for (r, s) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let got = t.coeff(1)[(r, s)].re;
            let want = pt.transform.coeff(1)[(r, s)].re;
            assert!((got - want).abs() < 1e-10, "entry ({r},{s}): {got} vs {want}");
        }

        // Second-curve entries on both branches.
        for pt in baseline_curve_n2(0.5).unwrap() {
            let p = pt.params();
            let canon = canonical_system(&p, -0.5 / (2.0 * pt.lambda));
            let desc = initial_system(&p, 9);
            let t = recurrence_solve(&desc, &canon, 6).unwrap();
            assert!(t.terminated());
            for k in 1..=2 {
                for (r, s) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let got = t.coeff(k)[(r, s)].re;
                    let want = pt.transform.coeff(k)[(r, s)].re;
                    assert!(
                        (got - want).abs() < 1e-10,
                        "order {k} entry ({r},{s}): {got} vs {want}"
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_07_confluent_hypergeometric_identities() {
    report(7, "confluent hypergeometric identities", || {
        let one = C64::new(1.0, 0.0);
        let two = C64::new(2.0, 0.0);
        for k in 0..20 {
            let r = 0.5 + 9.5 * (k as f64) / 19.0;
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / 7.3;
            let z = C64::new(r * theta.cos(), r * theta.sin());
            let ez = z.exp();
            let got = kummer_1f1(one, one, z, 1e-15).unwrap().value;
            assert!((got - ez).norm() / ez.norm() < 1e-12, "M(1,1;{z}) off");
            let got = kummer_1f1(one, two, z, 1e-15).unwrap().value;
            let want = (ez - one) / z;
            assert!((got - want).norm() / want.norm() < 1e-12, "M(1,2;{z}) off");
        }

        // Both solution branches satisfy the canonical system on |z| = 1,
        // checked with Richardson-extrapolated central differences.
        let p = params(0.3, 0.4, 0.7);
        let canon = canonical_system(&p, 0.0);
        let tol = 1e-14;
        for branch in [Branch::Plus, Branch::Minus] {
            for k in 0..8 {
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / 8.0;
                let z = C64::new(theta.cos(), theta.sin());
                let f = canonical_solution_pair(&p, 0.4, branch, z, tol).unwrap();
                let diff = |h: f64| -> (C64, C64) {
                    let hh = C64::new(h, 0.0);
                    let fp = canonical_solution_pair(&p, 0.4, branch, z + hh, tol).unwrap();
                    let fm = canonical_solution_pair(&p, 0.4, branch, z - hh, tol).unwrap();
                    ((fp.0 - fm.0) / (2.0 * hh), (fp.1 - fm.1) / (2.0 * hh))
                };
                let (d1, d2) = (diff(1e-4), diff(5e-5));
                let fp = (
                    (C64::new(4.0, 0.0) * d2.0 - d1.0) / C64::new(3.0, 0.0),
                    (C64::new(4.0, 0.0) * d2.1 - d1.1) / C64::new(3.0, 0.0),
                );
                let r = rabi_canonical::rabi::canonical_residual(&canon, z, f, fp);
                assert!(r < 1e-9, "branch {branch:?} residual {r:.3e} at {z}");
            }
        }
    });
}

#[test]
fn criterion_08_eigenfunction_reconstruction() {
    report(8, "eigenfunction reconstruction", || {
        let pt = baseline_curve_n1(0.6).unwrap();
        let spec = converged_spectrum(&pt.params(), 6, 1e-9).unwrap();
        let vals = &spec.eigenvalues;
        let i = (0..vals.len() - 1)
            .min_by(|&a, &b| {
                let ea = (0.5 * (vals[a] + vals[a + 1]) - 0.84).abs();
                let eb = (0.5 * (vals[b] + vals[b + 1]) - 0.84).abs();
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap();
        assert!((vals[i + 1] - vals[i]).abs() < 1e-7, "no crossing pair found");

        let rec = reconstruct_eigenfunction(&pt, spec.cutoff_used + 1).unwrap();
        let ours = rec.fock_vectors.to_vec();
        let reference: Vec<Vec<f64>> = [i, i + 1]
            .iter()
            .map(|&c| spec.eigenvectors.column(c).iter().copied().collect())
            .collect();
        let overlap = subspace_overlap(&ours, &reference);
        assert!(overlap > 1.0 - 1e-6, "subspace overlap {overlap}");
    });
}

#[test]
fn criterion_09_newton_solver_agreement() {
    report(9, "Newton solver agreement", || {
        let pt = solve_terminating(1, 0.6, None).unwrap();
        assert!((pt.lambda - 0.4).abs() < 1e-10);
        assert!(pt.validated);

        let pt = solve_terminating(2, 0.5, None).unwrap();
        let closed = baseline_curve_n2(0.5).unwrap()[0].lambda;
        assert!((pt.lambda - closed).abs() < 1e-10);
        assert!(pt.validated);

        // Beyond the closed forms: seeded from the oracle crossing scan and
        // validated purely against the spectrum.
        let pt = solve_terminating(3, 0.5, None).unwrap();
        assert!(pt.validated);
        assert!((pt.energy - (3.0 - pt.lambda * pt.lambda)).abs() < 1e-12);
        let report = validate_point(&pt, 1e-6).unwrap();
        assert!(report.passed);
        assert!(report.oracle_gap < 1e-6, "gap {:.3e}", report.oracle_gap);
    });
}

#[test]
fn criterion_10_symmetry_suite() {
    report(10, "symmetry suite", || {
        // Parity commutes with the Hamiltonian at finite cutoff.
        let h = TruncatedHamiltonian::build(&params(0.4, 0.6, 0.0), 64).unwrap();
        let pi = parity_operator(64);
        let comm = (h.matrix() * &pi - &pi * h.matrix()).abs().max();
        assert!(comm < 1e-13, "commutator norm {comm:.3e}");

        // Spectrum invariance under coupling sign flips.
        let base = TruncatedHamiltonian::build_raw(0.4, 0.6, 64).unwrap().eigen_sorted().0;
        for (l, m) in [(-0.4, 0.6), (0.4, -0.6), (-0.4, -0.6)] {
            let flipped = TruncatedHamiltonian::build_raw(l, m, 64).unwrap().eigen_sorted().0;
            for (a, b) in base.iter().zip(&flipped).take(12) {
                assert!((a - b).abs() < 1e-12, "spectrum moved under ({l}, {m})");
            }
        }

        // The parity image (f₁, f₂) → (f₂(-z), f₁(-z)) of a solution solves
        // the same initial system; check it on an exact crossing solution.
        let pt = baseline_curve_n1(0.6).unwrap();
        let rec = reconstruct_eigenfunction(&pt, 12).unwrap();
        let p = pt.params();
        let derivative = |c: &ComponentFunction| -> ComponentFunction {
            let mut poly = vec![0.0; c.poly.len()];
            for (i, &x) in c.poly.iter().enumerate() {
                poly[i] += c.rate * x;
                if i > 0 {
                    poly[i - 1] += i as f64 * x;
                }
            }
            ComponentFunction { poly, rate: c.rate }
        };
        for pair in &rec.solutions {
            let (f1, f2) = (&pair[0], &pair[1]);
            let (d1, d2) = (derivative(f1), derivative(f2));
            for k in 0..8 {
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.21) / 8.0;
                let z = C64::new(1.5 * theta.cos(), 1.5 * theta.sin());
                // The solution itself.
                let r = initial_residual(&p, z, (f1.eval(z), f2.eval(z)), (d1.eval(z), d2.eval(z)));
                assert!(r < 1e-9, "solution residual {r:.3e} at {z}");
                // Its parity image.
                let g = (f2.eval(-z), f1.eval(-z));
                let gp = (-d2.eval(-z), -d1.eval(-z));
                let r = initial_residual(&p, z, g, gp);
                assert!(r < 1e-9, "parity image residual {r:.3e} at {z}");
            }
        }
    });
}
