//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p vtol-core --test acceptance`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vtol_core::clf::{
    build_clf, certify_negative_definite, certify_positive_definite, evaluate_clf, p0,
    riccati_residual, sweep_gain_grid, ClfMatrix,
};
use vtol_core::control::{
    cost_integrand, mu_value, sontag_control, theorem2_q, SontagParams,
};
use vtol_core::experiments::{canonical_scenario, compare_nominal, monte_carlo};
use vtol_core::model::{
    decoupling_matrix, input_block, lift_to_normal_form, normal_form_fields, CompensatorState,
    PlantParams, PlantState,
};
use vtol_core::output::{write_clf_sweep, write_envelope, write_summary, write_timeseries};
use vtol_core::sim::{run, run_normal_form, run_zero_dynamics, AugmentedState};
use vtol_core::{ControllerKind, MonteCarloConfig, SimConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn criterion_1() -> Outcome {
    let certify = || {
        let pos = certify_positive_definite(&p0()).unwrap();
        let clf = build_clf(1.0, 1.0).unwrap();
        let neg = certify_negative_definite(&riccati_residual(&clf)).unwrap();
        (pos, neg)
    };
    certify();
    let start = Instant::now();
    let (pos, neg) = certify();
    let elapsed = start.elapsed();

    let sweep = sweep_gain_grid(0.2, 1e6, 25).unwrap();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("clf_sweep.csv");
    write_clf_sweep(std::fs::File::create(&path).unwrap(), &sweep).unwrap();
    let violations: Vec<String> = sweep
        .violations()
        .map(|p| format!("(kx={:e}, ky={:e}, margin={:e})", p.kx, p.ky, p.margin))
        .collect();
    let min_margin = sweep.points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);

    let pass = pos.definite
        && pos.margin > 0.0
        && neg.definite
        && neg.margin > 0.0
        && elapsed < Duration::from_millis(1)
        && violations.is_empty();
    outcome(
        pass,
        format!(
            "P0 pivot margin {:.3e}, residual margin {:.3e}, {:.1} µs; sweep {} points, min margin {:.3e}, violations [{}], table {}",
            pos.margin,
            neg.margin,
            secs(elapsed) * 1e6,
            sweep.points.len(),
            min_margin,
            violations.join(", "),
            path.display()
        ),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> (PlantState, CompensatorState) {
    let s = PlantState {
        x: rng.gen_range(-10.0..10.0),
        y: rng.gen_range(-10.0..10.0),
        theta: rng.gen_range(-4.0..4.0),
        xdot: rng.gen_range(-5.0..5.0),
        ydot: rng.gen_range(-5.0..5.0),
        thetadot: rng.gen_range(-3.0..3.0),
    };
    let c = CompensatorState {
        fhat: rng.gen_range(0.5..25.0),
        fhatdot: rng.gen_range(-5.0..5.0),
    };
    (s, c)
}

fn criterion_2() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clf = ClfMatrix::unit();
    let nominal = PlantParams::nominal();
    let start = Instant::now();
    let mut worst = [0.0f64; 5];
    let mut below_floor = 0usize;
    for _ in 0..N {
        let eps = rng.gen_range(0.05..2.0);
        let p = PlantParams::new(eps, 9.81).unwrap();
        let theta: f64 = rng.gen_range(-20.0..20.0);
        let det = decoupling_matrix(theta, &p).determinant();
        worst[0] = worst[0].max((det + eps).abs() / (1e-12 * (1.0 + eps)));

        let (s, c) = random_state(&mut rng);
        let (_, gamma) = normal_form_fields(&s, &c, &p);
        let det_g = input_block(&gamma).determinant();
        worst[1] = worst[1].max((det_g - c.fhat).abs() / (1e-12 * (1.0 + c.fhat)));

        let (s, c) = random_state(&mut rng);
        let params = SontagParams::new(rng.gen_range(0.1..10.0)).unwrap();
        let z = lift_to_normal_form(&s, &c, &nominal).0;
        let (phi, gamma) = normal_form_fields(&s, &c, &nominal);
        let ev = evaluate_clf(&clf, &z, &phi, &gamma);
        let floor = params.beta_floor(&z);
        if ev.b <= floor {
            below_floor += 1;
            continue;
        }
        let u = sontag_control(&ev, &params, floor);
        let mu = mu_value(&ev, &params, floor);
        let vdot_gap = ev.alpha
            + ev.beta.dot(&u.as_vector())
            + params.c0 * ev.b
            + (ev.alpha * ev.alpha + ev.b * ev.b).sqrt();
        worst[2] = worst[2].max(vdot_gap.abs() / (1e-9 * (1.0 + ev.alpha.abs() + ev.b)));
        let q_gap = 0.5 * params.c0 * ev.b - theorem2_q(&ev, &u);
        // rounding allowance only; any genuine shortfall is far above it
        worst[3] = worst[3].max(q_gap / (1e-12 * (1.0 + ev.alpha.abs() + ev.b)));
        let l = cost_integrand(&ev, &u, mu).unwrap();
        worst[4] = worst[4].max((l - mu * ev.b).abs() / (1e-9 * (1.0 + mu * ev.b)));
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w <= 1.0) && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "{N} states each, worst/tolerance: det A {:.2e}, det G {:.2e}, Vdot {:.2e}, Q {:.2e}, integrand {:.2e}; {below_floor} states on the zero branch; {:.3} s",
            worst[0], worst[1], worst[2], worst[3], worst[4], secs(elapsed)
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ControllerKind::InvOpt, ControllerKind::Fbl] {
        let cfg = canonical_scenario().with_controller(kind);
        let phys = run(&cfg).unwrap();
        let nf = run_normal_form(&cfg).unwrap();
        let lifted = |i: usize| {
            let r = &phys.records[i];
            lift_to_normal_form(&r.plant, &r.compensator, &cfg.plant).0
        };
        let tol = 1e-6 * (1.0 + lifted(0).norm());
        let ok = phys.status.is_completed()
            && nf.status.is_completed()
            && phys.records.len() == nf.z.len();
        let gap = (0..phys.records.len().min(nf.z.len()))
            .map(|i| (lifted(i) - nf.z[i]).norm())
            .fold(0.0, f64::max);
        pass &= ok && gap <= tol;
        parts.push(format!("{kind} max ‖Δz‖ {gap:.3e} (tol {tol:.3e})"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    outcome(pass, format!("{}; {:.2} s", parts.join(", "), secs(elapsed)))
}

fn endpoint(cfg: &SimConfig) -> [f64; 9] {
    let out = run(cfg).unwrap();
    assert!(out.status.is_completed());
    let r = out.last().unwrap();
    AugmentedState {
        plant: r.plant,
        compensator: r.compensator,
        cost: r.cost,
    }
    .to_array()
}

fn criterion_4() -> Outcome {
    let base = canonical_scenario().with_controller(ControllerKind::InvOpt);
    let at = |dt: f64| {
        endpoint(&SimConfig {
            dt,
            decimation: 1_000_000,
            ..base.clone()
        })
    };
    let reference = at(2.5e-4);
    let dist = |a: [f64; 9]| {
        a.iter()
            .zip(&reference)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let coarse = dist(at(2e-3));
    let fine = dist(at(1e-3));
    let ratio = coarse / fine;
    outcome(
        ratio >= 12.0,
        format!(
            "endpoint error {coarse:.3e} at dt=2e-3, {fine:.3e} at dt=1e-3, ratio {ratio:.2} ({} RK4 substeps per dt)",
            base.substeps
        ),
    )
}

struct NominalArtifacts {
    outcome: Outcome,
    csv: Vec<Vec<u8>>,
}

fn criterion_5() -> NominalArtifacts {
    let cmp = compare_nominal(&canonical_scenario()).unwrap();
    let err = |r: &vtol_core::SimRun| r.last().map_or(f64::INFINITY, |rec| rec.error_norm);
    let (e_inv, e_fbl) = (err(&cmp.invopt), err(&cmp.fbl));
    let ratio = cmp.ratio();
    let pass = cmp.invopt.status.is_completed()
        && cmp.fbl.status.is_completed()
        && e_inv <= 1e-3
        && e_fbl <= 1e-3
        && ratio >= 1e3;
    let csv = [&cmp.invopt, &cmp.fbl]
        .iter()
        .map(|r| {
            let mut buf = Vec::new();
            write_timeseries(&mut buf, &r.records).unwrap();
            buf
        })
        .collect();
    NominalArtifacts {
        outcome: outcome(
            pass,
            format!(
                "‖e(30)‖ invopt {e_inv:.4e}, fbl {e_fbl:.4e} (tol 1e-3); J_invopt={:.6} J_fbl={:.6} ratio={ratio:.1} (need ≥ 1e3)",
                cmp.j_invopt, cmp.j_fbl
            ),
        ),
        csv,
    }
}

fn criterion_6(jobs: usize) -> NominalArtifacts {
    let scenario = canonical_scenario();
    let mc = MonteCarloConfig::default();
    let start = Instant::now();
    let inv = monte_carlo(&scenario, &mc, ControllerKind::InvOpt, jobs).unwrap();
    let fbl = monte_carlo(&scenario, &mc, ControllerKind::Fbl, jobs).unwrap();
    let elapsed = start.elapsed();

    let max_of = |v: Vec<Option<f64>>| {
        v.into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let inv_err = max_of(inv.summaries.iter().map(|s| s.final_err).collect());
    let inv_tail = max_of(inv.summaries.iter().map(|s| s.tail_osc).collect());
    let fbl_tail = fbl
        .summaries
        .iter()
        .filter_map(|s| s.tail_osc)
        .fold(f64::NEG_INFINITY, f64::max);
    let completed = inv.count("completed");
    let budget = if jobs >= 8 { 60.0 } else { 300.0 };
    let pass = completed == mc.n_runs
        && inv_err <= 1e-2
        && inv_tail <= 1e-3
        && fbl_tail >= 10.0 * inv_tail
        && secs(elapsed) < budget;

    let mut csv = Vec::new();
    for report in [&inv, &fbl] {
        let mut buf = Vec::new();
        write_summary(&mut buf, &report.summaries).unwrap();
        csv.push(buf);
        let mut buf = Vec::new();
        write_envelope(&mut buf, &report.envelope).unwrap();
        csv.push(buf);
    }
    NominalArtifacts {
        outcome: outcome(
            pass,
            format!(
                "invopt {completed}/{} completed, max ‖e(30)‖ {inv_err:.4e} (tol 1e-2), max tail {inv_tail:.3e} rad (tol 1e-3); fbl {} completed, max tail {fbl_tail:.3e} rad (need ≥ {:.3e}); {:.1} s on {jobs} worker(s), budget {budget} s",
                mc.n_runs,
                fbl.count("completed"),
                10.0 * inv_tail,
                secs(elapsed)
            ),
        ),
        csv,
    }
}

fn criterion_7() -> Outcome {
    let p = PlantParams::nominal();
    let bound = 3.0 * (p.epsilon / p.gravity).sqrt() * 200f64.ln();
    let samples = run_zero_dynamics(1e-3, 0.0, bound, 1e-4, &p).unwrap();
    match samples.iter().find(|s| s.1.abs() >= 0.1) {
        Some(&(t, theta, _)) => outcome(
            t <= bound,
            format!("|θ| = {theta:.4} at t = {t:.4} s, bound {bound:.4} s"),
        ),
        None => outcome(false, format!("|θ| stayed below 0.1 rad up to {bound:.4} s")),
    }
}

fn main() {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
    ];
    let nominal = criterion_5();
    let robust = criterion_6(workers);
    results.push((5, nominal.outcome));
    results.push((6, robust.outcome));
    results.push((7, criterion_7()));

    let other_jobs = if workers > 1 { 1 } else { 2 };
    let nominal_again = criterion_5();
    let robust_again = criterion_6(other_jobs);
    let same = nominal.csv == nominal_again.csv && robust.csv == robust_again.csv;
    let bytes: usize = nominal.csv.iter().chain(&robust.csv).map(Vec::len).sum();
    results.push((
        8,
        outcome(
            same,
            format!(
                "{} CSV tables ({bytes} bytes) byte-identical on repeat ({workers} vs {other_jobs} worker(s))",
                nominal.csv.len() + robust.csv.len()
            ),
        ),
    ));

    let mut failed = 0;
    for (n, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {tag} — {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
