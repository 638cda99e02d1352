//! One function per subcommand: resolve parameters, run, write the record.

use std::path::{Path, PathBuf};

use cpsim_core::contact::{check_self_duality, run_quenched, Direction, SimOptions};
use cpsim_core::environment::QuenchedEnvironment;
use cpsim_core::estimator::{
    bisect_lambda_c, bisect_with_search, scaling_table, CriticalEstimate, EstimatorMode,
    EstimatorOptions, ScalingOptions,
};
use cpsim_core::mean_field::trajectory;
use cpsim_core::path_process::{mean_zeta_origin, ZetaMethod};
use cpsim_core::seeds::seed_schedule;
use cpsim_core::sir::second_moment_bound;
use cpsim_core::stats::Estimate;
use cpsim_core::walk_pair::{empirical_constant, estimate_theta_tail, collision_moment, upper_bound_lambda};
use cpsim_core::{estimator, ModelParams, Vertex};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    merge, require, DirectionArg, EstimateArgs, EstimatorArgs, MeanfieldArgs, MethodArg, ModeArg,
    PathsArgs, ScalingArgs, SelfdualArgs, SimulateArgs, Site, SweepArgs, WalksArgs, ZetaArgs,
};
use crate::error::CliError;
use crate::output::{emit, json_record, num, opt_num, Table};
use crate::Context;

/// The parameter block with defaults filled in, plus the master seed, as a
/// document that `--config` accepts back.
fn resolved<T: Serialize>(args: &T, ctx: &Context) -> Value {
    let mut value = serde_json::to_value(args).expect("serializable");
    if let Value::Object(map) = &mut value {
        map.retain(|_, v| !v.is_null());
        map.insert("master_seed".into(), json!(ctx.master_seed));
    }
    value
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable")
}

fn write_json(command: &str, ctx: &Context, config: &Value, result: Value) -> Result<(), CliError> {
    emit(ctx.out.as_deref(), &json_record(command, ctx.master_seed, config, result))
}

fn command_seed(ctx: &Context, command: &str) -> u64 {
    seed_schedule(ctx.master_seed, command, 0)
}

pub fn simulate(flags: SimulateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let d = require(&a.d, "d")?;
    let params = ModelParams::new(d, require(&a.p, "p")?, require(&a.lambda, "lambda")?)?;
    let box_radius = *a.box_radius.get_or_insert(20);
    let horizon = *a.horizon.get_or_insert(10.0);
    let direction = match *a.direction.get_or_insert(DirectionArg::Forward) {
        DirectionArg::Forward => Direction::Forward,
        DirectionArg::Dual => Direction::Dual,
    };
    let env_seed = *a.env_seed.get_or_insert(0);
    let start = a.start.get_or_insert_with(|| vec![Site(vec![0; d])]).clone();
    let initial = start
        .iter()
        .map(|s| Vertex::from_coords(&s.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut opts = SimOptions::new(box_radius, horizon, command_seed(ctx, "simulate"))
        .with_direction(direction);
    if let Some(cap) = a.max_active {
        opts = opts.with_max_active(cap);
    }
    let env = QuenchedEnvironment::new(params, env_seed)?;
    let run = run_quenched(&env, params.require_lambda()?, &initial, &opts)?;
    write_json("simulate", ctx, &resolved(&a, ctx), to_json(&run))
}

pub fn zeta(flags: ZetaArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let params = ModelParams::new(
        require(&a.d, "d")?,
        require(&a.p, "p")?,
        require(&a.lambda, "lambda")?,
    )?;
    let t = require(&a.t, "t")?;
    let replicas = *a.replicas.get_or_insert(10_000);
    let box_radius = *a.box_radius.get_or_insert(30);
    let method = match *a.method.get_or_insert(MethodArg::Dual) {
        MethodArg::Forward => ZetaMethod::Forward,
        MethodArg::Dual => ZetaMethod::Dual,
    };
    let opts = SimOptions::new(box_radius, t, command_seed(ctx, "zeta"));
    let report = mean_zeta_origin(&params, t, replicas, &opts, method)?;
    write_json("zeta", ctx, &resolved(&a, ctx), to_json(&report))
}

pub fn paths(flags: PathsArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let d = require(&a.d, "d")?;
    let p = require(&a.p, "p")?;
    let n = require(&a.n, "n")?;
    let seeds = *a.seeds.get_or_insert(10_000);
    if seeds == 0 {
        return Err(CliError::Model(cpsim_core::Error::InvalidParameter(
            "seeds must be at least 1".into(),
        )));
    }
    let geometry = ModelParams::geometric(d, p)?;
    let counts = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let env = QuenchedEnvironment::new(geometry, seed_schedule(ctx.master_seed, "paths/environment", i))?;
            env.count_open_paths_to_origin(n)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let alive = counts.iter().filter(|&&c| c > 0).count() as u64;
    let mut result = json!({
        "n": n,
        "environments": seeds,
        "mean_count": Estimate::from_samples(&as_f64),
        "expected_count": (d as f64 * p).powi(n as i32),
        "open_path_probability": Estimate::from_indicators(alive, seeds),
    });
    if let Some(lambda) = a.lambda {
        let fields = *a.fields.get_or_insert(10_000);
        let params = geometry.with_lambda(lambda)?;
        let report = second_moment_bound(&params, n, fields, seed_schedule(ctx.master_seed, "paths/fields", 0))?;
        result["infection_paths"] = to_json(&report);
    }
    write_json("paths", ctx, &resolved(&a, ctx), result)
}

pub fn walks(flags: WalksArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let dims = a.d.get_or_insert_with(|| vec![2, 3, 4, 5, 6]).clone();
    let horizons = a.horizons.get_or_insert_with(|| vec![100, 400, 1600]).clone();
    let replicas = *a.replicas.get_or_insert(10_000);
    let moment_horizons = match (a.p, a.lambda) {
        (Some(_), Some(_)) => Some(a.moment_horizons.get_or_insert_with(|| horizons.clone()).clone()),
        _ => None,
    };
    let mut per_dim = Vec::new();
    let mut all_tails = Vec::new();
    for &d in &dims {
        let tails = estimate_theta_tail(d, &horizons, replicas, seed_schedule(ctx.master_seed, "walks/theta", d as u64))?;
        let mut entry = json!({ "d": d, "tails": tails, "constant": empirical_constant(&tails) });
        if let (Some(p), Some(lambda), Some(mh)) = (a.p, a.lambda, moment_horizons.as_ref()) {
            let params = ModelParams::new(d, p, lambda)?;
            match collision_moment(&params, mh, replicas, seed_schedule(ctx.master_seed, "walks/moment", d as u64)) {
                Ok(report) => entry["moment"] = to_json(&report),
                Err(e) => entry["moment_error"] = json!(e.to_string()),
            }
        }
        all_tails.extend(tails);
        per_dim.push(entry);
    }
    let c_hat = empirical_constant(&all_tails);
    if let (Some(p), Some(c)) = (a.p, c_hat) {
        for entry in &mut per_dim {
            let d = entry["d"].as_u64().expect("dimension") as usize;
            entry["upper_bound"] = json!(upper_bound_lambda(d, p, c));
        }
    }
    let result = json!({ "dimensions": per_dim, "constant": c_hat });
    write_json("walks", ctx, &resolved(&a, ctx), result)
}

pub fn meanfield(flags: MeanfieldArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let growth = require(&a.a, "a")?;
    let t_max = *a.t_max.get_or_insert(10.0);
    let dt = *a.dt.get_or_insert(0.01);
    let mut table = Table::new(vec!["t", "f"]);
    for state in trajectory(growth, t_max, dt)? {
        table.push(vec![num(state.t), num(state.f)]);
    }
    emit(ctx.out.as_deref(), &table.render("meanfield", ctx.master_seed, &resolved(&a, ctx)))
}

pub fn selfdual(flags: SelfdualArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let params = ModelParams::new(
        require(&a.d, "d")?,
        require(&a.p, "p")?,
        require(&a.lambda, "lambda")?,
    )?;
    let t = require(&a.t, "t")?;
    let replicas = *a.replicas.get_or_insert(100_000);
    let box_radius = *a.box_radius.get_or_insert(12);
    let opts = SimOptions::new(box_radius, t, command_seed(ctx, "selfdual"));
    let report = check_self_duality(&params, t, replicas, &opts)?;
    let mut result = to_json(&report);
    result["difference"] = json!(report.difference());
    write_json("selfdual", ctx, &resolved(&a, ctx), result)
}

/// Fill the shared estimator block. A `max_active` of 0 disables the cap.
fn estimator_options(e: &mut EstimatorArgs, rng_seed: u64) -> EstimatorOptions {
    let base = EstimatorOptions::default();
    let cap = *e.max_active.get_or_insert(base.max_active.unwrap_or(0));
    EstimatorOptions {
        horizon: *e.horizon.get_or_insert(base.horizon),
        box_radius: *e.box_radius.get_or_insert(base.box_radius),
        replicas: *e.replicas.get_or_insert(base.replicas),
        epsilon: *e.epsilon.get_or_insert(base.epsilon),
        tol: *e.tol.get_or_insert(base.tol),
        z: *e.z.get_or_insert(base.z),
        max_active: (cap > 0).then_some(cap),
        extra_starts: *e.extra_starts.get_or_insert(base.extra_starts),
        rng_seed,
    }
}

fn estimator_mode(mode: &mut Option<ModeArg>, env_seed: &mut Option<u64>) -> EstimatorMode {
    match *mode.get_or_insert(ModeArg::Annealed) {
        ModeArg::Annealed => EstimatorMode::Annealed,
        ModeArg::Quenched => EstimatorMode::Quenched {
            env_seed: *env_seed.get_or_insert(0),
        },
    }
}

pub fn estimate(flags: EstimateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let params = ModelParams::geometric(require(&a.d, "d")?, require(&a.p, "p")?)?;
    let mode = estimator_mode(&mut a.mode, &mut a.env_seed);
    let opts = estimator_options(&mut a.estimator, command_seed(ctx, "estimate"));
    let lo = *a.lambda_lo.get_or_insert(0.5 / params.mean_degree());
    let est = match a.lambda_hi {
        Some(hi) => bisect_lambda_c(&params, (lo, hi), mode, &opts)?,
        None => {
            let doublings = *a.max_doublings.get_or_insert(6);
            bisect_with_search(&params, lo, doublings, mode, &opts)?
        }
    };
    let mut result = to_json(&est);
    result["ci_width"] = json!(est.ci_width());
    result["lower_bound"] = json!(1.0 / params.mean_degree());
    write_json("estimate", ctx, &resolved(&a, ctx), result)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

pub fn sweep(flags: SweepArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let params = ModelParams::geometric(require(&a.d, "d")?, require(&a.p, "p")?)?;
    let lambdas = require(&a.lambdas, "lambdas")?;
    let mode = estimator_mode(&mut a.mode, &mut a.env_seed);
    let long = *a.long_horizon.get_or_insert(false);
    let opts = estimator_options(&mut a.estimator, command_seed(ctx, "sweep"));
    let mut records = vec![estimator::sweep(&params, &lambdas, mode, &opts)?];
    if long {
        let twice = EstimatorOptions { horizon: 2.0 * opts.horizon, ..opts };
        records.push(estimator::sweep(&params, &lambdas, mode, &twice)?);
    }
    let config = resolved(&a, ctx);
    let mut table = Table::new(vec!["horizon", "lambda", "survival", "se", "boundary_hits", "capped"]);
    for record in &records {
        for point in &record.points {
            table.push(vec![
                num(record.options.horizon),
                num(point.lambda),
                num(point.survival.estimate.mean),
                num(point.survival.estimate.se),
                point.survival.boundary_hits.to_string(),
                point.survival.capped.to_string(),
            ]);
        }
        for w in &record.warnings {
            eprintln!("warning: {w}");
        }
    }
    emit(ctx.out.as_deref(), &table.render("sweep", ctx.master_seed, &config))?;
    if let Some(out) = &ctx.out {
        emit(Some(&sidecar(out)), &json_record("sweep", ctx.master_seed, &config, to_json(&records)))?;
    }
    Ok(())
}

fn estimate_columns(est: Option<&Result<CriticalEstimate, String>>) -> [String; 3] {
    match est {
        Some(Ok(e)) => [num(e.lambda_hat), num(e.ci.0), num(e.ci.1)],
        _ => Default::default(),
    }
}

pub fn scaling(flags: ScalingArgs, ctx: &Context) -> Result<(), CliError> {
    let mut a = merge(&flags, &ctx.config)?;
    let p = require(&a.p, "p")?;
    let dims = a.dims.get_or_insert_with(|| vec![2, 3, 4, 5]).clone();
    let base = ScalingOptions::default();
    let opts = ScalingOptions {
        estimator: estimator_options(&mut a.estimator, command_seed(ctx, "scaling")),
        lower_factor: *a.lower_factor.get_or_insert(base.lower_factor),
        max_doublings: *a.max_doublings.get_or_insert(base.max_doublings),
        c_hat: a.c_hat,
        long_horizon: *a.long_horizon.get_or_insert(base.long_horizon),
    };
    let rows = scaling_table(p, &dims, &opts)?;
    let config = resolved(&a, ctx);
    let mut table = Table::new(vec![
        "d", "p", "lower", "upper", "lambda_hat", "ci_lo", "ci_hi", "scaled",
        "lambda_hat_2t", "ci_lo_2t", "ci_hi_2t", "error",
    ]);
    for row in &rows {
        let [hat, lo, hi] = estimate_columns(Some(&row.estimate));
        let [hat2, lo2, hi2] = estimate_columns(row.long_horizon.as_ref());
        let error = row.estimate.as_ref().err().cloned().unwrap_or_default();
        table.push(vec![
            row.d.to_string(),
            num(row.p),
            num(row.lower),
            opt_num(row.upper),
            hat,
            lo,
            hi,
            opt_num(row.scaled()),
            hat2,
            lo2,
            hi2,
            format!("\"{}\"", error.replace('"', "'")),
        ]);
    }
    emit(ctx.out.as_deref(), &table.render("scaling", ctx.master_seed, &config))?;
    if let Some(out) = &ctx.out {
        emit(Some(&sidecar(out)), &json_record("scaling", ctx.master_seed, &config, to_json(&rows)))?;
    }
    Ok(())
}
