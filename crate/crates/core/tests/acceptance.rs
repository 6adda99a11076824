//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnd_mite::cfunc::{
    ancilla_operator_value, c_approx1, c_exact, gaussian_width, CFuncParams, PhotonOutcome,
};
use qnd_mite::mite::{run_stage, trajectory_rng, Stage};
use qnd_mite::povm::{build_operator, sample_outcome, MeasurementModel, OutcomeSpace, TruncationPolicy};
use qnd_mite::protocols::{
    effective_interaction_check, run_ensemble, stage_configs_c4, C4Options, InitialState,
};
use qnd_mite::statevec::{eigendecompose, HamiltonianSpec, Matrix, StateVector};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn stage_hamiltonians() -> Vec<(HamiltonianSpec, f64)> {
    stage_configs_c4(&C4Options::default())
        .unwrap()
        .stages
        .into_iter()
        .map(|s| (s.hamiltonian, s.tau))
        .collect()
}

fn povm_completeness() -> Outcome {
    let outcomes = OutcomeSpace::per_mode(30).outcomes();
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0] {
        for (h, tau) in stage_hamiltonians() {
            let eig = Arc::new(eigendecompose(&h).unwrap());
            let dim = eig.dim();
            let mut total = Matrix::zeros(dim, dim);
            for &o in &outcomes {
                let m = build_operator(&eig, o, tau, alpha).unwrap().to_matrix();
                total += m.adjoint() * &m;
            }
            let defect = (total - Matrix::identity(dim, dim))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(defect);
        }
    }
    verdict(worst <= 1e-10, format!("max |sum M^dag M - I| = {:.2e}", worst))
}

/// Argmax of `f` on `[lo, hi]`: dense scan, then golden-section refinement.
fn argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 4000;
    let step = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|i| lo + i as f64 * step)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn peak_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n: u32 = rng.random_range(10..=60);
        let n_c = rng.random_range(0..=n);
        let o = PhotonOutcome::new(n_c, n - n_c);
        let p = CFuncParams::new(1.0, o).unwrap();
        let found = argmax(|x| c_exact(&p, x).abs(), 0.0, FRAC_PI_2);
        let predicted = ((n_c as f64 - (n - n_c) as f64) / n as f64).acos() / 2.0;
        worst = worst.max((found - predicted).abs());
    }
    verdict(worst <= 1e-3, format!("max argmax deviation {:.2e} rad", worst))
}

/// Local maxima of `|f|` on a grid, ignoring those below `floor`.
fn local_peaks(f: impl Fn(f64) -> f64, grid: &[f64], floor: f64) -> Vec<f64> {
    let v: Vec<f64> = grid.iter().map(|&x| f(x).abs()).collect();
    (1..grid.len() - 1)
        .filter(|&i| v[i] >= v[i - 1] && v[i] > v[i + 1] && v[i] > floor)
        .map(|i| grid[i])
        .collect()
}

fn approximation_fidelity() -> Outcome {
    let grid: Vec<f64> = (0..=30000).map(|i| -PI / 4.0 + 1.5 * PI * i as f64 / 30000.0).collect();
    let mut notes = Vec::new();
    let mut pass = true;
    for (n_c, n_d) in [(25, 0), (20, 5), (13, 12), (0, 25)] {
        let o = PhotonOutcome::new(n_c, n_d);
        let p = CFuncParams::new(5.0, o).unwrap();
        let scale = grid.iter().map(|&x| c_exact(&p, x).abs()).fold(0.0, f64::max);
        let exact = local_peaks(|x| c_exact(&p, x), &grid, 1e-3 * scale);
        let approx = local_peaks(|x| c_approx1(&p, x), &grid, 1e-3 * scale);
        let half_width = 0.5 * gaussian_width(o).unwrap();
        let positions_ok = exact.len() == approx.len()
            && !exact.is_empty()
            && exact.iter().zip(&approx).all(|(a, b)| (a - b).abs() <= half_width);
        let sign_errors = grid
            .iter()
            .filter(|&&x| {
                let e = c_exact(&p, x);
                e.abs() > 1e-6 && e.signum() != c_approx1(&p, x).signum()
            })
            .count();
        if !positions_ok || sign_errors > 0 {
            pass = false;
        }
        let max_shift = exact
            .iter()
            .zip(&approx)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        notes.push(format!(
            "({},{}): {} peaks, shift {:.1e} <= {:.3}, sign errors {}",
            n_c,
            n_d,
            exact.len(),
            max_shift,
            half_width,
            sign_errors
        ));
    }
    verdict(pass, notes.join("; "))
}

fn born_sampling() -> Outcome {
    let h = HamiltonianSpec::parse(2, "Z1 - Z2").unwrap();
    let eig = Arc::new(eigendecompose(&h).unwrap());
    let tau = PI / 8.0;
    let space = OutcomeSpace::per_mode(5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let psi = StateVector::random(2, &mut rng).unwrap();

    // Born probabilities from the explicit operators: |M psi|^2.
    let outcomes = space.outcomes();
    let weights: Vec<f64> = outcomes
        .iter()
        .map(|&o| {
            let m = build_operator(&eig, o, tau, 1.0).unwrap().to_matrix();
            let v = &m * nalgebra::DVector::from_column_slice(psi.amplitudes());
            v.iter().map(Complex64::norm_sqr).sum()
        })
        .collect();
    let kept: f64 = weights.iter().sum();

    let model = MeasurementModel::new(eig, tau, 1.0, space).unwrap();
    let dist = model.distribution(&psi, &TruncationPolicy::default()).unwrap();
    let draws = 100_000;
    let mut counts = vec![0usize; outcomes.len()];
    for _ in 0..draws {
        let o = sample_outcome(&dist, &mut rng).unwrap();
        counts[outcomes.iter().position(|&x| x == o).unwrap()] += 1;
    }
    let tv = 0.5
        * counts
            .iter()
            .zip(&weights)
            .map(|(&c, &w)| (c as f64 / draws as f64 - w / kept).abs())
            .sum::<f64>();
    verdict(tv < 0.01, format!("total variation {:.4} over {} draws", tv, draws))
}

fn long_time_identity() -> Outcome {
    let h = HamiltonianSpec::parse(3, "-(X1 + X2 + X3) + 3").unwrap();
    let eig = Arc::new(eigendecompose(&h).unwrap());
    let level = |e: f64| {
        eig.levels()
            .iter()
            .find(|l| (l.energy - e).abs() < 1e-9)
            .map(|l| l.start)
            .expect("level present")
    };
    let (l0, l2, l4, l6) = (level(0.0), level(2.0), level(4.0), level(6.0));
    let mut mismatches = 0;
    let outcomes = OutcomeSpace::per_mode(30).outcomes();
    for &o in &outcomes {
        let op = build_operator(&eig, o, PI / 4.0, 1.0).unwrap();
        let d = op.diagonal_values();
        if d[l0].abs() != d[l4].abs() || d[l2].abs() != d[l6].abs() {
            mismatches += 1;
        }
    }

    let mut worst: f64 = 0.0;
    for text in ["-(Z1 + Z2 + Z3)", "-(X1 + X2 + X3)"] {
        let h0 = HamiltonianSpec::parse(3, text).unwrap();
        let report = effective_interaction_check(&h0, PI / 4.0).unwrap();
        worst = worst.max(report.max_deviation);
        for b in 0..8usize {
            // E = -(3 - 2k) for k flipped spins; the product operator is (-1)^k.
            let k = b.count_ones() as i32;
            let direct = (2.0 * -(3.0 - 2.0 * k as f64) * PI / 4.0).sin();
            let product = if k % 2 == 0 { 1.0 } else { -1.0 };
            let predicted = (PI * 4.0 / 2.0).cos() * product;
            worst = worst
                .max((report.diagonal[b] - direct).abs())
                .max((report.diagonal[b] - predicted).abs());
        }
    }
    verdict(
        mismatches == 0 && worst <= 1e-12,
        format!(
            "{} of {} operators break |C(0)|=|C(4)|, |C(2)|=|C(6)|; sine identity deviation {:.1e}",
            mismatches,
            outcomes.len(),
            worst
        ),
    )
}

fn stage_convergence() -> Outcome {
    let plan = stage_configs_c4(&C4Options::default()).unwrap();
    let stage = Stage::new(plan.stages[0].clone()).unwrap();
    let f1 = plan.trackers.iter().position(|t| t.name == "F_1").unwrap();
    let mut good = 0;
    for i in 0..100 {
        let mut rng = trajectory_rng(606, i);
        let psi = StateVector::random(4, &mut rng).unwrap();
        let (_, rec) = run_stage(&psi, &stage, &mut rng, &plan.trackers).unwrap();
        let reached = rec.rounds.len() <= 100
            && rec.rounds.iter().any(|r| r.fidelities[f1] >= 0.999)
            && rec.final_fidelities()[f1] >= 0.999;
        if reached {
            good += 1;
        }
    }
    verdict(good >= 95, format!("{}/100 trajectories reach F_1 >= 0.999", good))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cluster_reproduction() -> Outcome {
    let protocol = stage_configs_c4(&C4Options::default()).unwrap().prepare().unwrap();
    let runs = run_ensemble(&protocol, &InitialState::Random, 2024, 100).unwrap();
    let good = runs
        .iter()
        .filter(|r| r.final_fidelity("F_C").unwrap() >= 0.99)
        .count();
    let mut medians = Vec::new();
    for k in 0..4 {
        let settling: Vec<f64> = runs
            .iter()
            .map(|r| r.stages[k].settling_round(k + 1, 0.999) as f64)
            .collect();
        medians.push(median(settling));
    }
    let mut sector_failures = 0;
    for r in &runs {
        for k in 0..4 {
            let end_ok = r.stages[k].final_fidelities()[k + 1] >= 0.999;
            let kept = r.stages[k + 1..]
                .iter()
                .all(|s| s.rounds.iter().all(|x| x.fidelities[k + 1] >= 0.999));
            if !(end_ok && kept) {
                sector_failures += 1;
            }
        }
    }
    verdict(
        good >= 95 && medians.iter().all(|&m| m <= 30.0) && sector_failures == 0,
        format!(
            "{}/100 final F_C >= 0.99; median settling rounds {:?}; sector violations {}",
            good, medians, sector_failures
        ),
    )
}

fn ancilla_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (1..=100).map(|i| -PI / 4.0 + FRAC_PI_2 * i as f64 / 101.0).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (k0, k1) = (rng.random_range(0..=20u32), rng.random_range(0..=20u32));
        let p = CFuncParams::new(1.0, PhotonOutcome::new(k0, k1)).unwrap();
        let ratios: Vec<f64> = xs
            .iter()
            .map(|&x| {
                // Product of single-shot ancilla operator values.
                let a = ancilla_operator_value(0, x).powi(k0 as i32) * ancilla_operator_value(1, x).powi(k1 as i32);
                c_exact(&p, x + PI / 4.0) / a
            })
            .collect();
        let r0 = ratios[0];
        worst = ratios
            .iter()
            .map(|r| (r / r0 - 1.0).abs())
            .fold(worst, f64::max);
    }
    verdict(worst <= 1e-10, format!("max relative spread of the ratio {:.1e}", worst))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_qnd-mite"))
            .args(["run-cluster", "--seed", "31337", "--trajectories", "3", "--out-dir"])
            .arg(&out)
            .env_remove("QND_MITE_OUT_DIR")
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (0..3)
            .map(|i| std::fs::read(out.join(format!("trajectory_{:04}.csv", i))).unwrap())
            .collect::<Vec<_>>()
    };
    let a = run("a");
    let b = run("b");
    let bytes: usize = a.iter().map(Vec::len).sum();
    verdict(a == b && bytes > 0, format!("{} CSV bytes compared over 3 trajectories", bytes))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("POVM completeness", povm_completeness),
        ("C-function peak law", peak_law),
        ("approximation fidelity", approximation_fidelity),
        ("Born sampling", born_sampling),
        ("long-time interaction identity", long_time_identity),
        ("stage convergence", stage_convergence),
        ("cluster-state reproduction", cluster_reproduction),
        ("ancilla-baseline equivalence", ancilla_equivalence),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {}", msg))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} AC{} {}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
