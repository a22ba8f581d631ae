//! Command-line driver. Each subcommand loads a flat `key = value`
//! configuration file, runs one library capability, writes a JSON summary
//! plus CSV series into the output directory, and prints a one-line
//! verdict. Exit codes: 0 when the command's check passes, 2 on a domain
//! failure (an inadmissible table, a rejected statistical check), 1 on
//! configuration or I/O errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{free_zone_bound, validate_table, Table};
use crate::phase::{mean_return_time_flow_identity, measure_masses};
use crate::report::{envelope, to_value, write_json, Cell, CsvWriter};
use crate::stats::{
    clt_diagnostics, empirical_covariance, estimate_sigma2, gouezel_covariance,
    pair_correlation, positive_definiteness, pushforward_invariance, variance_growth,
    BlockLayout, CltParams, CorrelationParams, SigmaParams,
};

const USAGE: &str = "\
usage: sinai <command> [--config PATH] [--out DIR] [--seed N] [--threads N]
             [--set key=value ...]

commands:
  validate       check the table inequalities and report slack per condition
  constants      derived geometric constants, section masses, mean return time
  simulate       trace one orbit of the return map to a trajectory CSV
  invariance     pushforward vs fresh invariant-measure samples, per-wall KS
  hyperbolicity  cone invariance and expansion bounds over random centerings
  correlation    lagged pair correlations of an observable
  gouezel        characteristic-function factorization defect vs block gap
  covariance     limit covariance: truncated series vs empirical replicas
  clt            normality diagnostics of normalized Birkhoff sums
  growth         variance growth over horizons vs the fitted limit covariance

flags override configuration keys of the same name; --set works for any key.
The output directory defaults to the `out` key, then $SINAI_OUT_DIR, then ./out.";

/// Entry point for the binary: parses `std::env::args`.
pub fn run_main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    run(&args)
}

/// Run one command line; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct CliArgs {
    command: String,
    config_path: Option<PathBuf>,
    out_dir: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    sets: Vec<(String, String)>,
}

fn parse_args(args: &[String]) -> Result<Option<CliArgs>> {
    let mut command = None;
    let mut config_path = None;
    let mut out_dir = None;
    let mut seed = None;
    let mut threads = None;
    let mut sets = Vec::new();

    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value_for = |flag: &str| -> Result<String> {
            it.next().cloned().ok_or_else(|| {
                Error::Config(format!("flag {flag} needs a value\n{USAGE}"))
            })
        };
        match arg.as_str() {
            "--help" | "-h" | "help" => {
                println!("{USAGE}");
                return Ok(None);
            }
            "--config" => config_path = Some(PathBuf::from(value_for("--config")?)),
            "--out" => out_dir = Some(value_for("--out")?),
            "--seed" => {
                let v = value_for("--seed")?;
                seed = Some(v.parse::<u64>().map_err(|_| {
                    Error::Config(format!("flag --seed: `{v}` is not an integer"))
                })?);
            }
            "--threads" => {
                let v = value_for("--threads")?;
                threads = Some(v.parse::<usize>().map_err(|_| {
                    Error::Config(format!("flag --threads: `{v}` is not an integer"))
                })?);
            }
            "--set" => {
                let v = value_for("--set")?;
                let (k, val) = v.split_once('=').ok_or_else(|| {
                    Error::Config(format!("flag --set: expected key=value, got `{v}`"))
                })?;
                sets.push((k.trim().to_string(), val.trim().to_string()));
            }
            other if other.starts_with('-') => {
                return Err(Error::Config(format!("unknown flag `{other}`\n{USAGE}")));
            }
            other => {
                if command.is_some() {
                    return Err(Error::Config(format!(
                        "unexpected argument `{other}`\n{USAGE}"
                    )));
                }
                command = Some(other.to_string());
            }
        }
    }
    match command {
        Some(command) => Ok(Some(CliArgs {
            command,
            config_path,
            out_dir,
            seed,
            threads,
            sets,
        })),
        None => Err(Error::Config(format!("no command given\n{USAGE}"))),
    }
}

fn dispatch(args: &[String]) -> Result<bool> {
    let cli = match parse_args(args)? {
        Some(c) => c,
        None => return Ok(true),
    };
    let mut cfg = match &cli.config_path {
        Some(p) => Config::from_path(p)?,
        None => Config::parse("")?,
    };
    for (k, v) in &cli.sets {
        cfg.set(k, v.clone());
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    if let Some(t) = cli.threads {
        cfg.set("threads", t.to_string());
    }
    if let Some(o) = &cli.out_dir {
        cfg.set("out", o.clone());
    }

    let seed = cfg.u64_or("seed", 1)?;
    let requested = cfg.usize_or("threads", 1)?;
    if requested > 1 {
        eprintln!("note: this build runs serially; --threads {requested} clamped to 1");
    }
    let out_default =
        std::env::var("SINAI_OUT_DIR").unwrap_or_else(|_| "out".to_string());
    let out_dir = PathBuf::from(cfg.str_or("out", &out_default));
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        Error::Config(format!("cannot create {}: {e}", out_dir.display()))
    })?;

    let mut ctx = Ctx {
        cfg,
        out_dir,
        seed,
        threads: 1,
        outputs: Vec::new(),
    };
    match cli.command.as_str() {
        "validate" => cmd_validate(&mut ctx),
        "constants" => cmd_constants(&mut ctx),
        "simulate" => cmd_simulate(&mut ctx),
        "invariance" => cmd_invariance(&mut ctx),
        "hyperbolicity" => cmd_hyperbolicity(&mut ctx),
        "correlation" => cmd_correlation(&mut ctx),
        "gouezel" => cmd_gouezel(&mut ctx),
        "covariance" => cmd_covariance(&mut ctx),
        "clt" => cmd_clt(&mut ctx),
        "growth" => cmd_growth(&mut ctx),
        other => Err(Error::Config(format!("unknown command `{other}`\n{USAGE}"))),
    }
}

struct Ctx {
    cfg: Config,
    out_dir: PathBuf,
    seed: u64,
    threads: usize,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn csv(&self, name: &str, header: &[&str]) -> Result<CsvWriter> {
        CsvWriter::create(&self.out_dir.join(name), header)
    }

    fn keep(&mut self, w: CsvWriter) -> Result<()> {
        self.outputs.push(w.finish()?);
        Ok(())
    }

    /// Write the JSON envelope and print the one-line verdict.
    fn finish(
        &mut self,
        command: &str,
        pass: Option<bool>,
        payload: Value,
        summary: &str,
    ) -> Result<()> {
        let path = self.out_dir.join(format!("{command}.json"));
        let v = envelope(
            command,
            self.seed,
            self.threads,
            self.cfg.resolved(),
            &self.outputs,
            pass,
            payload,
        );
        write_json(&path, &v)?;
        let verdict = match pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "done",
        };
        println!("{command}: {verdict} {summary} ({})", path.display());
        Ok(())
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    json!(rows)
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn cmd_validate(ctx: &mut Ctx) -> Result<bool> {
    let config = ctx.cfg.table()?;
    let rows = Table::condition_report(config);
    let pass = rows.iter().all(|c| c.pass);

    let mut w = ctx.csv("validate.csv", &["condition", "lhs", "rhs", "pass", "slack"])?;
    for c in &rows {
        w.row(&[
            Cell::Str(c.name),
            Cell::Float(c.lhs),
            Cell::Float(c.rhs),
            Cell::Str(bool_str(c.pass)),
            Cell::Float(c.slack),
        ])?;
    }
    ctx.keep(w)?;

    let failed: Vec<&str> = rows.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let payload = json!({
        "conditions": to_value(&rows),
        "free_zone_bound": free_zone_bound(config.rbar),
        "failed": failed,
    });
    let summary = if pass {
        format!("all {} conditions hold", rows.len())
    } else {
        format!("{} of {} conditions fail", failed.len(), rows.len())
    };
    ctx.finish("validate", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_constants(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let masses = measure_masses(&table);
    let mean_return = mean_return_time_flow_identity(&table);

    let named: Vec<(&str, f64)> = vec![
        ("rbar", table.rbar()),
        ("r", table.r()),
        ("eps", table.eps()),
        ("free_zone_bound", free_zone_bound(table.rbar())),
        ("tau_min", table.tau_min()),
        ("tau_max", table.tau_max()),
        ("kappa_gray", table.kappa_gray()),
        ("kappa_white", table.kappa_white()),
        ("a_transparent", table.a_transparent()),
        ("a_min", table.a_min()),
        ("b_max", table.b_max()),
        ("lambda", table.lambda()),
        ("expansion_constant", table.expansion_constant()),
        ("mass_gray", masses.gray),
        ("mass_transparent", masses.transparent),
        ("mass_white", masses.white),
        ("mass_base", masses.base),
        ("mass_extended", masses.extended),
        ("mean_return_time", mean_return),
        ("mean_white_hits_per_return", masses.white / masses.base),
    ];
    let mut w = ctx.csv("constants.csv", &["name", "value"])?;
    for (name, value) in &named {
        w.row(&[Cell::Str(name), Cell::Float(*value)])?;
    }
    ctx.keep(w)?;

    let map: BTreeMap<&str, f64> = named.into_iter().collect();
    let payload = json!({
        "constants": map,
        "masses": to_value(&masses),
    });
    let summary = format!(
        "lambda {:.6}, mean return {:.6}",
        table.lambda(),
        mean_return
    );
    ctx.finish("constants", Some(true), payload, &summary)?;
    Ok(true)
}

fn cmd_simulate(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    model.validate(&table)?;
    let n = ctx.cfg.usize_or("n", 1_000)?;
    let seed = ctx.seed;

    let header = [
        "k", "wall", "r", "phi", "tau", "dx", "dy", "legs", "white_hits", "margin",
    ];
    let mut w = ctx.csv("trajectory.csv", &header)?;

    let mut payload = json!({ "n": n });
    let mut summary = "empty trajectory".to_string();
    if n > 0 {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let draw = model.draw(&table, n, &mut rng)?;
        let records = crate::stats::orbit_from_mu(&table, &draw.centerings, &mut rng)?;

        let mut occupancy: BTreeMap<String, usize> = BTreeMap::new();
        let mut total_time = 0.0;
        let mut white_hits = 0u64;
        let mut displacement = [0.0f64; 2];
        for (k, rec) in records.iter().enumerate() {
            let wall = format!("{:?}", rec.to.wall);
            w.row(&[
                Cell::UInt(k as u64 + 1),
                Cell::Str(&wall),
                Cell::Float(rec.to.r),
                Cell::Float(rec.to.phi),
                Cell::Float(rec.time),
                Cell::Float(rec.displacement[0]),
                Cell::Float(rec.displacement[1]),
                Cell::UInt(rec.legs as u64),
                Cell::UInt(rec.white_hits as u64),
                Cell::Float(rec.min_margin),
            ])?;
            *occupancy.entry(wall).or_insert(0) += 1;
            total_time += rec.time;
            white_hits += rec.white_hits as u64;
            displacement[0] += rec.displacement[0];
            displacement[1] += rec.displacement[1];
        }
        let mean_tau = total_time / n as f64;
        payload = json!({
            "n": n,
            "mean_flight_time": mean_tau,
            "predicted_mean_flight_time": mean_return_time_flow_identity(&table),
            "white_hit_fraction": white_hits as f64 / n as f64,
            "total_displacement": displacement,
            "wall_occupancy": occupancy,
        });
        summary = format!("{n} returns, mean flight {mean_tau:.6}");
    }
    ctx.keep(w)?;
    ctx.finish("simulate", None, payload, &summary)?;
    Ok(true)
}

fn cmd_invariance(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let samples = ctx.cfg.usize_or("samples", 100_000)?;
    let alpha = ctx.cfg.f64_or("alpha", 1e-3)?;
    if !ctx.cfg.has("centerings") {
        let eps = table.eps();
        let d = eps / std::f64::consts::SQRT_2;
        ctx.cfg
            .set("centerings", format!("0 0 ; {eps} 0 ; {d} {d}"));
    }
    let centerings = ctx.cfg.centering_rows("centerings")?;

    let header = [
        "centering_index",
        "cx",
        "cy",
        "wall",
        "marginal",
        "statistic",
        "p_value",
    ];
    let mut w = ctx.csv("invariance.csv", &header)?;
    let mut reports = Vec::new();
    for (i, c) in centerings.iter().enumerate() {
        let rep = pushforward_invariance(
            &table,
            c,
            samples,
            alpha,
            ctx.seed.wrapping_add(i as u64),
        )?;
        for t in &rep.tests {
            w.row(&[
                Cell::UInt(i as u64),
                Cell::Float(c.x),
                Cell::Float(c.y),
                Cell::Str(&t.wall),
                Cell::Str(t.marginal),
                Cell::Float(t.statistic),
                Cell::Float(t.p_value),
            ])?;
        }
        reports.push(rep);
    }
    ctx.keep(w)?;

    let pass = reports.iter().all(|r| r.pass);
    let min_p = reports.iter().map(|r| r.min_p).fold(f64::INFINITY, f64::min);
    let payload = json!({
        "reports": to_value(&reports),
        "min_p": min_p,
    });
    let summary = format!(
        "{} centerings x {} samples, min p {:.4}",
        centerings.len(),
        samples,
        min_p
    );
    ctx.finish("invariance", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_hyperbolicity(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let centerings = ctx.cfg.usize_or("centerings", 100)?;
    let samples = ctx.cfg.usize_or("samples", 1_000)?;
    let euclid_samples = ctx.cfg.usize_or("euclid_samples", 200)?;
    let euclid_n = ctx.cfg.usize_or("euclid_n", 20)?;

    let rep = crate::dynamics::hyperbolicity_check(
        &table,
        centerings,
        samples,
        euclid_samples,
        euclid_n,
        ctx.seed,
    );

    let mut w = ctx.csv("hyperbolicity.csv", &["n", "min_ratio"])?;
    for g in &rep.euclidean {
        w.row(&[Cell::UInt(g.n as u64), Cell::Float(g.min_ratio)])?;
    }
    ctx.keep(w)?;

    let pass = rep.pass;
    let summary = format!(
        "{} cone checks, {} violations, min leg expansion {:.6} vs lambda {:.6}",
        rep.cone_checks, rep.cone_violations, rep.min_leg_expansion, rep.lambda
    );
    ctx.finish("hyperbolicity", Some(pass), to_value(&rep), &summary)?;
    Ok(pass)
}

fn cmd_correlation(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    let observable = ctx.cfg.observable()?;
    let params = CorrelationParams {
        max_lag: ctx.cfg.usize_or("max_lag", 30)?,
        replicas: ctx.cfg.usize_or("replicas", 20_000)?,
        batches: ctx.cfg.usize_or("batches", 40)?,
    };
    let rep = pair_correlation(&table, &model, &observable, &params, ctx.seed)?;

    let dim = observable.dim();
    let mut header: Vec<String> = vec!["lag".into(), "norm".into()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("c_{i}{j}"));
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("se_{i}{j}"));
        }
    }
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut w = ctx.csv("correlation.csv", &hdr)?;
    for (k, lag) in rep.lags.iter().enumerate() {
        let mut cells = vec![Cell::UInt(*lag as u64), Cell::Float(rep.norms[k])];
        for i in 0..dim {
            for j in 0..dim {
                cells.push(Cell::Float(rep.matrices[k][(i, j)]));
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                cells.push(Cell::Float(rep.se[k][(i, j)]));
            }
        }
        w.row(&cells)?;
    }
    ctx.keep(w)?;

    // Decay rule: over the last three lags the norm must be statistically
    // indistinguishable from zero up to a floor of five percent of the
    // lag-0 norm.
    let c0 = rep.norms[0];
    let last = rep.lags.len().saturating_sub(3)..rep.lags.len();
    let tail_sig = last
        .map(|k| {
            let se_norm = rep.se[k].iter().map(|v| v * v).sum::<f64>().sqrt();
            (rep.norms[k] - 3.0 * se_norm).max(0.0)
        })
        .fold(0.0f64, f64::max);
    let pass = c0 > 0.0 && tail_sig <= 0.05 * c0;

    let payload = json!({
        "lags": rep.lags,
        "norms": rep.norms,
        "matrices": rep.matrices.iter().map(matrix_rows).collect::<Vec<_>>(),
        "se": rep.se.iter().map(matrix_rows).collect::<Vec<_>>(),
        "replicas": rep.replicas,
        "lag0_norm": c0,
        "tail_significant_norm": tail_sig,
        "decay_rule": "max over last three lags of (norm - 3 se)+ <= 0.05 lag-0 norm",
    });
    let summary = format!(
        "lag-0 norm {:.4}, significant tail {:.2e}",
        c0, tail_sig
    );
    ctx.finish("correlation", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_gouezel(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    let observable = ctx.cfg.observable()?;
    let gaps = ctx
        .cfg
        .usize_list_or("gaps", &[0, 2, 4, 6, 8, 10, 15, 20, 25, 30])?;
    let first = ctx.cfg.usize_or("block_first", 1)?;
    let second = ctx.cfg.usize_or("block_second", 1)?;
    let frequency = ctx.cfg.f64_list_or("frequency", &[3.0])?;
    if frequency.len() != observable.dim() {
        return Err(Error::Config(format!(
            "key `frequency`: needs {} numbers for this observable, got {}",
            observable.dim(),
            frequency.len()
        )));
    }
    let replicas = ctx.cfg.usize_or("replicas", 20_000)?;
    let batches = ctx.cfg.usize_or("batches", 40)?;
    if gaps.is_empty() {
        return Err(Error::Config("key `gaps`: needs at least one gap".into()));
    }

    let mut w = ctx.csv("gouezel.csv", &["gap", "modulus", "se"])?;
    let mut moduli = Vec::new();
    let mut ses = Vec::new();
    for &gap in &gaps {
        let layout = BlockLayout { first, gap, second };
        let rep = gouezel_covariance(
            &table, &model, &observable, &layout, &frequency, replicas, batches,
            ctx.seed,
        )?;
        w.row(&[
            Cell::UInt(gap as u64),
            Cell::Float(rep.modulus),
            Cell::Float(rep.se),
        ])?;
        moduli.push(rep.modulus);
        ses.push(rep.se);
    }
    ctx.keep(w)?;

    // Decay rule: at the widest gap the defect must sit inside the Monte
    // Carlo noise up to a floor of five percent of the largest defect.
    let near = moduli.iter().copied().fold(0.0f64, f64::max);
    let far = *moduli.last().unwrap();
    let far_se = *ses.last().unwrap();
    let pass = far <= 3.0 * far_se + 0.05 * near;

    let payload = json!({
        "layout": {"first": first, "second": second},
        "frequency": frequency,
        "gaps": gaps,
        "moduli": moduli,
        "se": ses,
        "replicas": replicas,
        "decay_rule": "modulus at the widest gap <= 3 se + 0.05 max modulus",
    });
    let summary = format!("max defect {near:.4}, widest-gap defect {far:.2e}");
    ctx.finish("gouezel", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_covariance(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    let observable = ctx.cfg.observable()?;
    let defaults = SigmaParams::for_model(&model);
    let params = SigmaParams {
        m_max: ctx.cfg.usize_or("m_max", defaults.m_max)?,
        shifts: ctx.cfg.usize_or("shifts", defaults.shifts)?,
        burn_in: ctx.cfg.usize_or("burn_in", defaults.burn_in)?,
        replicas: ctx.cfg.usize_or("replicas", defaults.replicas)?,
        batches: ctx.cfg.usize_or("batches", defaults.batches)?,
    };
    let emp_n = ctx.cfg.usize_or("empirical_n", 2_000)?;
    let emp_replicas = ctx.cfg.usize_or("empirical_replicas", params.replicas)?;

    let series = estimate_sigma2(&table, &model, &observable, &params, ctx.seed)?;
    let emp = empirical_covariance(
        &table,
        &model,
        &observable,
        emp_n,
        emp_replicas,
        params.batches,
        ctx.seed.wrapping_add(1),
    )?;
    let pd = positive_definiteness(&series.matrix);

    let mut w = ctx.csv("covariance_terms.csv", &["m", "term_norm"])?;
    for (m, norm) in series.term_norms.iter().enumerate() {
        w.row(&[Cell::UInt(m as u64), Cell::Float(*norm)])?;
    }
    ctx.keep(w)?;

    // Agreement rule: entrywise, the series and empirical estimates must
    // agree within three combined standard errors plus one percent of the
    // diagonal scale (room for the finite-horizon bias of the empirical
    // estimate).
    let dim = observable.dim();
    let mut max_excess = f64::MIN;
    for i in 0..dim {
        for j in 0..dim {
            let diff = (series.matrix[(i, j)] - emp.matrix[(i, j)]).abs();
            let se = (series.se[(i, j)].powi(2) + emp.se[(i, j)].powi(2)).sqrt();
            let scale =
                (series.matrix[(i, i)] * series.matrix[(j, j)]).abs().sqrt();
            let excess = diff - 3.0 * se - 0.01 * scale;
            max_excess = max_excess.max(excess);
        }
    }
    let agree = max_excess <= 0.0;
    let max_se = series.se.iter().copied().fold(0.0f64, f64::max);
    let psd = pd.min_eigenvalue >= -3.0 * max_se;
    let pass = agree && psd;

    let payload = json!({
        "series": {
            "matrix": matrix_rows(&series.matrix),
            "se": matrix_rows(&series.se),
            "term_norms": series.term_norms,
            "tail_fraction": series.tail_fraction,
            "m_max": series.m_max,
            "shifts": series.shifts,
            "burn_in": series.burn_in,
            "replicas": series.replicas,
        },
        "empirical": {
            "matrix": matrix_rows(&emp.matrix),
            "se": matrix_rows(&emp.se),
            "mean": emp.mean,
            "n": emp.n,
            "replicas": emp.replicas,
        },
        "eigenvalues": to_value(&pd),
        "agreement": agree,
        "agreement_excess": max_excess,
        "agreement_rule":
            "entrywise |series - empirical| <= 3 combined se + 0.01 diagonal scale",
        "positive_semidefinite": psd,
    });
    let summary = format!(
        "series trace {:.6}, empirical trace {:.6}, min eigenvalue {:.3e}",
        series.matrix.trace(),
        emp.matrix.trace(),
        pd.min_eigenvalue
    );
    ctx.finish("covariance", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_clt(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    let observable = ctx.cfg.observable()?;
    let params = CltParams {
        n: ctx.cfg.usize_or("n", 400)?,
        replicas: ctx.cfg.usize_or("replicas", 2_000)?,
    };
    let alpha = ctx.cfg.f64_or("alpha", 1e-3)?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Config(format!(
            "key `alpha`: must be in (0, 0.5), got {alpha}"
        )));
    }
    let rep = clt_diagnostics(&table, &model, &observable, &params, ctx.seed)?;

    let dim = observable.dim();
    let replicas = rep.replicas;
    let mut w = ctx.csv(
        "clt_qq.csv",
        &["component", "rank", "sample_quantile", "normal_quantile"],
    )?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for k in 0..dim {
        let mut column: Vec<f64> = rep.whitened.iter().map(|z| z[k]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, v) in column.iter().enumerate() {
            let q = normal.inverse_cdf((i as f64 + 0.5) / replicas as f64);
            w.row(&[
                Cell::UInt(k as u64),
                Cell::UInt(i as u64),
                Cell::Float(*v),
                Cell::Float(q),
            ])?;
        }
    }
    ctx.keep(w)?;

    let z_crit = normal.inverse_cdf(1.0 - alpha / 2.0);
    let ks_ok = rep.component_ks.iter().all(|k| k.p_value > alpha);
    let skew_ok = rep.mardia_skewness_p > alpha;
    let kurt_ok = rep.mardia_kurtosis_z.abs() < z_crit;
    let pass = ks_ok && skew_ok && kurt_ok;

    let min_ks_p = rep
        .component_ks
        .iter()
        .map(|k| k.p_value)
        .fold(f64::INFINITY, f64::min);
    let payload = json!({
        "sigma_hat": matrix_rows(&rep.sigma_hat),
        "mean": rep.mean,
        "component_ks": to_value(&rep.component_ks),
        "mardia_skewness": rep.mardia_skewness,
        "mardia_skewness_p": rep.mardia_skewness_p,
        "mardia_kurtosis_z": rep.mardia_kurtosis_z,
        "n": rep.n,
        "replicas": rep.replicas,
        "alpha": alpha,
        "kurtosis_z_critical": z_crit,
    });
    let summary = format!(
        "min KS p {:.4}, skewness p {:.4}, kurtosis z {:+.3}",
        min_ks_p, rep.mardia_skewness_p, rep.mardia_kurtosis_z
    );
    ctx.finish("clt", Some(pass), payload, &summary)?;
    Ok(pass)
}

fn cmd_growth(ctx: &mut Ctx) -> Result<bool> {
    let table = validate_table(ctx.cfg.table()?)?;
    let model = ctx.cfg.sequence_model()?;
    let observable = ctx.cfg.observable()?;
    let ns = ctx
        .cfg
        .usize_list_or("ns", &[250, 500, 1_000, 2_000, 4_000])?;
    if ns.is_empty() || ns.iter().any(|&n| n == 0) {
        return Err(Error::Config("key `ns`: needs positive horizons".into()));
    }
    let replicas = ctx.cfg.usize_or("replicas", 1_000)?;
    let batches = ctx.cfg.usize_or("batches", 40)?;
    let defaults = SigmaParams::for_model(&model);
    let avg_params = SigmaParams {
        m_max: ctx.cfg.usize_or("m_max", defaults.m_max)?,
        shifts: ctx.cfg.usize_or("shifts", defaults.shifts)?,
        burn_in: ctx.cfg.usize_or("burn_in", defaults.burn_in)?,
        replicas: ctx.cfg.usize_or("sigma_replicas", defaults.replicas)?,
        batches: defaults.batches,
    };
    let naive_params = SigmaParams {
        shifts: 1,
        burn_in: 0,
        ..avg_params
    };

    let sigma_avg = estimate_sigma2(&table, &model, &observable, &avg_params, ctx.seed)?;
    let sigma_naive = estimate_sigma2(
        &table,
        &model,
        &observable,
        &naive_params,
        ctx.seed.wrapping_add(1),
    )?;
    let growth = variance_growth(
        &table,
        &model,
        &observable,
        &ns,
        replicas,
        batches,
        ctx.seed.wrapping_add(2),
    )?;

    // Deviation of the summed covariance from linear growth at the
    // estimated rate: || Cov(S_n) - n Sigma ||_F, with the Monte Carlo
    // error of the same quantity for scale.
    let dim = observable.dim();
    let deviation = |sigma: &DMatrix<f64>, sigma_se: &DMatrix<f64>| {
        let mut dev = Vec::new();
        let mut dev_se = Vec::new();
        for (idx, &n) in ns.iter().enumerate() {
            let nf = n as f64;
            let mut d2 = 0.0;
            let mut s2 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let diff = growth.matrices[idx][(i, j)] - sigma[(i, j)];
                    d2 += (nf * diff).powi(2);
                    let se = (growth.se[idx][(i, j)].powi(2)
                        + sigma_se[(i, j)].powi(2))
                    .sqrt();
                    s2 += (nf * se).powi(2);
                }
            }
            dev.push(d2.sqrt());
            dev_se.push(s2.sqrt());
        }
        (dev, dev_se)
    };
    let (dev_avg, dev_avg_se) = deviation(&sigma_avg.matrix, &sigma_avg.se);
    let (dev_naive, dev_naive_se) = deviation(&sigma_naive.matrix, &sigma_naive.se);

    let mut w = ctx.csv(
        "growth.csv",
        &[
            "n",
            "trace",
            "trace_se",
            "dev_avg",
            "dev_avg_se",
            "dev_naive",
            "dev_naive_se",
        ],
    )?;
    for (idx, &n) in ns.iter().enumerate() {
        w.row(&[
            Cell::UInt(n as u64),
            Cell::Float(growth.traces[idx]),
            Cell::Float(growth.trace_se[idx]),
            Cell::Float(dev_avg[idx]),
            Cell::Float(dev_avg_se[idx]),
            Cell::Float(dev_naive[idx]),
            Cell::Float(dev_naive_se[idx]),
        ])?;
    }
    ctx.keep(w)?;

    // Growth rule: against the averaged estimate the deviation must be
    // bounded by a curve logarithmic in n, checked as a least-squares fit
    // a + b log n whose residuals stay within three standard errors plus
    // five percent of the largest deviation.
    let (intercept, slope, residuals) = fit_log(&ns, &dev_avg);
    let floor = 0.05 * dev_avg.iter().copied().fold(0.0f64, f64::max);
    let pass = residuals
        .iter()
        .zip(&dev_avg_se)
        .all(|(r, se)| r.abs() <= 3.0 * se + floor);

    let payload = json!({
        "ns": ns,
        "traces": growth.traces,
        "trace_se": growth.trace_se,
        "growth_matrices": growth.matrices.iter().map(matrix_rows).collect::<Vec<_>>(),
        "sigma_averaged": {
            "matrix": matrix_rows(&sigma_avg.matrix),
            "se": matrix_rows(&sigma_avg.se),
            "shifts": sigma_avg.shifts,
            "burn_in": sigma_avg.burn_in,
        },
        "sigma_naive": {
            "matrix": matrix_rows(&sigma_naive.matrix),
            "se": matrix_rows(&sigma_naive.se),
            "shifts": sigma_naive.shifts,
            "burn_in": sigma_naive.burn_in,
        },
        "deviation_averaged": dev_avg,
        "deviation_averaged_se": dev_avg_se,
        "deviation_naive": dev_naive,
        "deviation_naive_se": dev_naive_se,
        "log_fit": {"intercept": intercept, "slope": slope, "residuals": residuals},
        "growth_rule":
            "deviations from the averaged estimate fit a + b log n within 3 se + 0.05 max",
    });
    let summary = format!(
        "deviation at n={} is {:.4} (averaged) vs {:.4} (naive)",
        ns.last().unwrap(),
        dev_avg.last().unwrap(),
        dev_naive.last().unwrap()
    );
    ctx.finish("growth", Some(pass), payload, &summary)?;
    Ok(pass)
}

/// Least squares of `y` on `a + b log n`; returns `(a, b, residuals)`.
fn fit_log(ns: &[usize], ys: &[f64]) -> (f64, f64, Vec<f64>) {
    let m = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    let (a, b) = if denom.abs() < 1e-12 {
        (sy / m, 0.0)
    } else {
        let b = (m * sxy - sx * sy) / denom;
        ((sy - b * sx) / m, b)
    };
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (a + b * x))
        .collect();
    (a, b, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &std::path::Path, text: &str) -> PathBuf {
        let path = dir.join("run.conf");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn validate_passes_and_fails_by_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let good = write_config(dir.path(), "rbar = 0.36\nr = 0.20\neps = 0.01\n");
        let out = dir.path().join("good");
        let args: Vec<String> = [
            "validate",
            "--config",
            good.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(run(&args), 0);
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("validate.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["pass"], true);
        assert_eq!(report["conditions"].as_array().unwrap().len(), 5);

        let bad = write_config(dir.path(), "rbar = 0.30\nr = 0.20\neps = 0.01\n");
        let out_bad = dir.path().join("bad");
        let args: Vec<String> = [
            "validate",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            out_bad.to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(run(&args), 2);
    }

    #[test]
    fn simulate_writes_trajectory_rows() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write_config(
            dir.path(),
            "rbar = 0.36\nr = 0.20\neps = 0.01\nmodel = iid\nn = 50\n",
        );
        let out = dir.path().join("out");
        let args: Vec<String> = [
            "simulate",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(run(&args), 0);
        let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
        assert_eq!(csv.lines().count(), 51, "header plus one row per return");
        assert!(csv.lines().next().unwrap().starts_with("k,wall,r,phi,tau"));
    }

    #[test]
    fn unknown_command_is_a_config_error() {
        let args = vec!["frobnicate".to_string()];
        assert_eq!(run(&args), 1);
    }

    #[test]
    fn missing_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let args: Vec<String> = ["constants", "--out", out.to_str().unwrap()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(run(&args), 1, "missing rbar/r/eps should exit 1");
    }

    #[test]
    fn set_flag_overrides_config_keys() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write_config(dir.path(), "rbar = 0.30\nr = 0.20\neps = 0.01\n");
        let out = dir.path().join("out");
        let args: Vec<String> = [
            "validate",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--set",
            "rbar=0.36",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(run(&args), 0, "--set should repair the failing radius");
    }
}
