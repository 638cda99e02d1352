//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cpsim_core::contact::{check_self_duality, run_coupled_pair, run_quenched, SimOptions};
use cpsim_core::environment::{EdgeSetEnvironment, QuenchedEnvironment};
use cpsim_core::estimator::{
    quenched_annealed_compare, scaling_table, EstimatorOptions, ScalingOptions,
};
use cpsim_core::mean_field::{integrate_numeric, solve_closed_form};
use cpsim_core::path_process::{mean_zeta_origin, run_joint, ZetaMethod};
use cpsim_core::seeds::seed_schedule;
use cpsim_core::sir::{
    second_moment_bound, theoretical_pair_correlation,
    InfectionRelation, InfectionTrialField, OrientedPath,
};
use cpsim_core::stats::Estimate;
use cpsim_core::walk_pair::{
    empirical_constant, estimate_theta_tail, collision_moment, simulate_pair, MeetingCounts,
};
use cpsim_core::{Error, ModelParams, Vertex};

const MASTER: u64 = 0x5eed_2024;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn z(est: &Estimate, target: f64) -> f64 {
    if est.se > 0.0 {
        (est.mean - target) / est.se
    } else if est.mean == target {
        0.0
    } else {
        f64::INFINITY
    }
}

fn zeta_mean_law() -> Verdict {
    let (d, p) = (3, 0.5);
    let replicas = 100_000;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut cells = Vec::new();
    for factor in [0.4, 1.0, 1.6] {
        let params = ModelParams::new(d, p, factor / (d as f64 * p)).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let opts = SimOptions::new(30, t, seed_schedule(MASTER, "c1", (factor * 10.0) as u64 * 10 + (t * 2.0) as u64));
            let r = mean_zeta_origin(&params, t, replicas, &opts, ZetaMethod::Dual).unwrap();
            let score = z(&r.estimate, r.analytic);
            worst = worst.max(score.abs());
            ok &= score.abs() <= 3.0 && r.boundary_hits == 0 && r.overflow_discards == 0;
            cells.push(format!("{factor}/dp,t={t}: {:.4}+-{:.4} vs {:.4}", r.estimate.mean, r.estimate.se, r.analytic));
        }
    }
    Verdict::new(ok, format!("max |z| = {worst:.2}; {}", cells.join("; ")))
}

fn path_count_first_moment() -> Verdict {
    let params = ModelParams::geometric(2, 0.5).unwrap();
    let seeds = 10_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=4 {
        let samples: Vec<f64> = (0..seeds)
            .map(|i| {
                let env = QuenchedEnvironment::new(params, seed_schedule(MASTER, "c2", i)).unwrap();
                env.count_open_paths_to_origin(n).unwrap() as f64
            })
            .collect();
        let est = Estimate::from_samples(&samples);
        ok &= z(&est, 1.0).abs() <= 3.0;
        parts.push(format!("n={n}: {:.4}+-{:.4}", est.mean, est.se));
    }
    Verdict::new(ok, parts.join("; "))
}

fn infection_closed_forms() -> Verdict {
    let trials = 1_000_000u64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (lambda, p) in [(1.0, 0.5), (2.0, 0.3)] {
        let params = ModelParams::new(2, p, lambda).unwrap();
        let origin = Vertex::origin(2);
        let (mut one, mut two) = (0u64, 0u64);
        for i in 0..trials {
            let field = InfectionTrialField::new(&params, seed_schedule(MASTER, "c3", i)).unwrap();
            let a = field.infects(&origin, 0);
            let b = field.infects(&origin, 1);
            one += a as u64;
            two += (a && b) as u64;
        }
        let marginal = lambda * p / (1.0 + lambda);
        let pair = 2.0 * lambda * lambda * p * p / ((2.0 * lambda + 1.0) * (lambda + 1.0));
        let (e1, e2) = (
            Estimate::from_indicators(one, trials),
            Estimate::from_indicators(two, trials),
        );
        let (z1, z2) = (z(&e1, marginal), z(&e2, pair));
        ok &= z1.abs() <= 3.0 && z2.abs() <= 3.0;
        parts.push(format!(
            "lambda={lambda},p={p}: marginal {:.5} vs {marginal:.5} (z={z1:.2}), pair {:.5} vs {pair:.5} (z={z2:.2})",
            e1.mean, e2.mean
        ));
    }
    Verdict::new(ok, parts.join("; "))
}

fn second_moment_bound_check() -> Verdict {
    let (lambda, p) = (1.0, 0.5);
    let params = ModelParams::new(2, p, lambda).unwrap();
    let (m1, m2, pos) = common::exact_path_moments_d2(lambda, p, 2);
    let exact_bound = m1 * m1 / m2;
    let r = second_moment_bound(&params, 2, 1_000_000, seed_schedule(MASTER, "c4", 0)).unwrap();
    let scores = [
        z(&r.first_moment, m1),
        z(&r.second_moment, m2),
        z(&r.direct, pos),
        z(&r.bound, exact_bound),
    ];
    let mc_ok = scores.iter().all(|s| s.abs() <= 3.0);
    let cs_ok = r.direct.mean >= r.bound.mean - 3.0 * r.direct.combined_se(&r.bound);

    let mut identity_gap: f64 = 0.0;
    for n in [2, 3] {
        let paths = OrientedPath::all(2, n).unwrap();
        let sum: f64 = paths
            .iter()
            .flat_map(|a| paths.iter().map(move |b| (a, b)))
            .map(|(a, b)| theoretical_pair_correlation(lambda, p, a, b).unwrap())
            .sum();
        let (_, exact_m2, _) = common::exact_path_moments_d2(lambda, p, n);
        identity_gap = identity_gap.max((sum - exact_m2).abs());
    }
    let identity_ok = identity_gap <= 1e-12;
    Verdict::new(
        mc_ok && cs_ok && identity_ok,
        format!(
            "exact E|M|={m1:.6} E|M|^2={m2:.6} P={pos:.6} bound={exact_bound:.6}; MC z-scores {:?}; \
             direct {:.5} >= bound {:.5}: {cs_ok}; pair-sum identity gap {identity_gap:.2e}",
            scores.map(|s| (s * 100.0).round() / 100.0),
            r.direct.mean,
            r.bound.mean
        ),
    )
}

fn walk_pair_laws() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2, 3, 4, 6] {
        let t = estimate_theta_tail(d, &[1], 100_000, seed_schedule(MASTER, "c5", d as u64)).unwrap();
        let s = z(&t[0].first_step_meeting, 1.0 / d as f64);
        ok &= s.abs() <= 3.0;
        parts.push(format!("P(theta=1) d={d}: {:.4} (z={s:.2})", t[0].first_step_meeting.mean));
    }
    let forced = simulate_pair(1, 500, 1).unwrap();
    let degenerate = forced.theta == Some(1)
        && forced.counts == MeetingCounts { sticks: 500, splits: 0 }
        && matches!(
            collision_moment(&ModelParams::new(1, 0.5, 1.0).unwrap(), &[10], 10, 0),
            Err(Error::Divergent(_))
        );
    ok &= degenerate;
    parts.push(format!("d=1 forced (k=0, r=N, moment divergent): {degenerate}"));
    let mut traces = 0;
    let mut bad = 0;
    for d in 1..=6 {
        for i in 0..2_000 {
            let t = simulate_pair(d, 300, seed_schedule(MASTER, "c5/trace", (d * 10_000 + i) as u64)).unwrap();
            traces += 1;
            bad += t.check_decomposition().is_err() as u32;
        }
    }
    ok &= bad == 0;
    parts.push(format!("decomposition identity exact on {}/{traces} traces", traces - bad));
    Verdict::new(ok, parts.join("; "))
}

fn collision_tail_decay() -> (Verdict, f64) {
    let mut rows = Vec::new();
    for d in 2..=6 {
        let t = estimate_theta_tail(d, &[1600], 100_000, seed_schedule(MASTER, "c6", d as u64)).unwrap();
        rows.push(t[0]);
    }
    let c_hat = empirical_constant(&rows).unwrap();
    let (c2, c6) = (rows[0].implied_constant, rows[4].implied_constant);
    let ok = c6.mean <= c2.mean + 3.0 * c2.combined_se(&c6);
    let table = rows
        .iter()
        .map(|r| format!("d={}: d^2 P={:.3}+-{:.3}", r.d, r.implied_constant.mean, r.implied_constant.se))
        .collect::<Vec<_>>()
        .join("; ");
    (Verdict::new(ok, format!("{table}; C_hat = {c_hat:.3}")), c_hat)
}

fn mean_field_dichotomy() -> Verdict {
    let mut max_gap: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for k in 0..=100 {
            let t = k as f64 * 0.1;
            let gap = (solve_closed_form(a, t).unwrap() - integrate_numeric(a, t, 1e-3).unwrap()).abs();
            max_gap = max_gap.max(gap);
        }
    }
    let decayed = solve_closed_form(0.5, 20.0).unwrap().max(integrate_numeric(0.5, 20.0, 1e-3).unwrap());
    let limit = (solve_closed_form(2.0, 50.0).unwrap() - 0.5).abs();
    Verdict::new(
        max_gap < 1e-8 && decayed < 1e-4 && limit < 1e-6,
        format!("max |closed - RK4| = {max_gap:.2e}; f(a=0.5,t=20) = {decayed:.2e}; |f(a=2,t=50) - 0.5| = {limit:.2e}"),
    )
}

fn self_duality() -> Verdict {
    let params = ModelParams::new(2, 0.7, 2.0).unwrap();
    let opts = SimOptions::new(12, 1.0, seed_schedule(MASTER, "c8", 0));
    let r = check_self_duality(&params, 1.0, 100_000, &opts).unwrap();
    let ok = r.difference().abs() <= 3.0 * r.combined_se
        && r.forward.boundary_hits == 0
        && r.single_site.boundary_hits == 0;
    Verdict::new(
        ok,
        format!(
            "forward {:.4}, single-site {:.4}, difference {:.4}, 3 SE = {:.4}",
            r.forward.estimate.mean,
            r.single_site.estimate.mean,
            r.difference(),
            3.0 * r.combined_se
        ),
    )
}

fn sandwich_and_scaling(c_hat: f64) -> Verdict {
    let opts = ScalingOptions {
        estimator: EstimatorOptions {
            rng_seed: seed_schedule(MASTER, "c9", 0),
            ..Default::default()
        },
        c_hat: Some(c_hat),
        ..Default::default()
    };
    let rows = scaling_table(0.5, &[2, 3, 4, 5], &opts).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    // Scaled interval [dp ci.lo, dp ci.hi] per row; a row without a bracket
    // only bounds its estimate from below.
    let mut scaled = Vec::new();
    for row in &rows {
        let dp = row.d as f64 * row.p;
        match &row.estimate {
            Ok(e) => {
                let floor = e.lambda_hat >= row.lower - e.ci_width();
                ok &= floor;
                let upper = row
                    .upper
                    .map(|u| format!("{}", e.lambda_hat <= u + e.ci_width()))
                    .unwrap_or_else(|| "undefined".into());
                let long = match &row.long_horizon {
                    Some(Ok(l)) => format!("{:.4}", l.lambda_hat),
                    Some(Err(_)) => "no bracket".into(),
                    None => "-".into(),
                };
                parts.push(format!(
                    "d={}: lambda_hat {:.4} ci [{:.4}, {:.4}] dp*lambda_hat {:.3} floor {}: {floor}, upper {:?}: {upper}, at 2T {long}",
                    row.d, e.lambda_hat, e.ci.0, e.ci.1, dp * e.lambda_hat, row.lower, row.upper
                ));
                scaled.push((row.d, dp * e.ci.0, Some(dp * e.ci.1)));
            }
            Err(msg) => {
                parts.push(format!("d={}: no bracket ({msg})", row.d));
                let max_tried = opts.lower_factor * row.lower * 2f64.powi(opts.max_doublings as i32);
                scaled.push((row.d, dp * max_tried, None));
            }
        }
    }
    let (_, lo2, hi2) = scaled[0];
    let (_, lo5, _) = scaled[3];
    let ordering = match hi2 {
        Some(hi2) => lo5 <= hi2,
        None => lo5 <= lo2,
    };
    ok &= ordering;
    parts.push(format!("dp*lambda_hat(5) <= dp*lambda_hat(2) within ci: {ordering}"));
    Verdict::new(ok, parts.join("; "))
}

fn quenched_equals_annealed() -> Verdict {
    let params = ModelParams::geometric(3, 0.5).unwrap();
    let opts = EstimatorOptions {
        rng_seed: seed_schedule(MASTER, "c10", 0),
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..5).map(|i| seed_schedule(MASTER, "c10/env", i)).collect();
    let c = quenched_annealed_compare(&params, (0.5, 2.0), &seeds, &opts).unwrap();
    let mut parts = vec![format!(
        "annealed {:.4} [{:.4}, {:.4}]",
        c.annealed.lambda_hat, c.annealed.ci.0, c.annealed.ci.1
    )];
    for (seed, r) in &c.quenched {
        parts.push(match r {
            Ok(e) => format!("env {seed:#x}: {:.4} [{:.4}, {:.4}]", e.lambda_hat, e.ci.0, e.ci.1),
            Err(msg) => format!("env {seed:#x}: {msg}"),
        });
    }
    parts.push(format!("max deviation {:.4}", c.max_deviation));
    Verdict::new(c.all_overlap, parts.join("; "))
}

fn exact_oracles_and_couplings() -> Verdict {
    // Two sites a -> b on a line, start {a, b}, lambda = 1, t = 1.
    let a = Vertex::from_coords(&[0]).unwrap();
    let b = Vertex::from_coords(&[1]).unwrap();
    let env = EdgeSetEnvironment::with_edges(1, [(a, 0)]).unwrap();
    let rates = common::line_contact_rates(2, &[true], 1.0);
    let dist = common::ctmc_distribution(&rates, &[0.0, 0.0, 0.0, 1.0], 1.0);
    let exact = dist[2] + dist[3]; // bit 1 = b infected
    let runs = 1_000_000u64;
    let hits = (0..runs)
        .filter(|&i| {
            let opts = SimOptions::new(3, 1.0, seed_schedule(MASTER, "c11", i));
            run_quenched(&env, 1.0, &[a, b], &opts).unwrap().final_config.contains(&b)
        })
        .count() as u64;
    let est = Estimate::from_indicators(hits, runs);
    let score = z(&est, exact);

    let params = ModelParams::geometric(2, 0.7).unwrap();
    let (mut violations, mut mismatches) = (0u64, 0u64);
    for i in 0..1_000u64 {
        let env = QuenchedEnvironment::new(params, seed_schedule(MASTER, "c11/env", i)).unwrap();
        let start = [Vertex::origin(2), Vertex::from_coords(&[1, -1]).unwrap()];
        let opts = SimOptions::new(10, 3.0, seed_schedule(MASTER, "c11/run", i));
        violations += run_coupled_pair(&env, 1.0, 2.0, &start, &opts).unwrap().inclusion_violations;
        mismatches += run_joint(&env, 1.5, &start, &opts).unwrap().mismatches;
    }
    Verdict::new(
        score.abs() <= 3.0 && violations == 0 && mismatches == 0,
        format!(
            "two-site P(eta_1(b)=1) {:.5} vs exact {exact:.5} (z={score:.2}); inclusion violations {violations}; support mismatches {mismatches} over 1000 joint runs",
            est.mean
        ),
    )
}

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let mut failures = 0;
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Verdict| {
        if !wanted(id) {
            return;
        }
        let started = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} ({name}): {status} [{:.1}s] {}",
            started.elapsed().as_secs_f64(),
            v.detail
        );
    };
    let mut c_hat = None;
    report(1, "zeta mean law", &mut zeta_mean_law);
    report(2, "path count first moment", &mut path_count_first_moment);
    report(3, "infection-trial closed forms", &mut infection_closed_forms);
    report(4, "second-moment bound", &mut second_moment_bound_check);
    report(5, "walk-pair laws", &mut walk_pair_laws);
    report(6, "collision tail decay", &mut || {
        let (v, c) = collision_tail_decay();
        c_hat = Some(c);
        v
    });
    report(7, "mean-field dichotomy", &mut mean_field_dichotomy);
    report(8, "annealed self-duality", &mut self_duality);
    report(9, "sandwich and scaling", &mut || {
        let c = c_hat.unwrap_or_else(|| collision_tail_decay().1);
        sandwich_and_scaling(c)
    });
    report(10, "quenched vs annealed", &mut quenched_equals_annealed);
    report(11, "exact oracles and couplings", &mut exact_oracles_and_couplings);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
