//! `audit`: command-line front end for the counterfactual fairness pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use cfaudit::audit::{
    emit_report, run_audit, sweep_k, AuditCache, AuditConfig, ReportFormat, Role, SweepCurve,
    UNDEF,
};
use cfaudit::cf::Provenance;
use cfaudit::{par, Error};

#[derive(Parser)]
#[command(
    name = "audit",
    version,
    about = "Counterfactual fairness audits for binary classifiers",
    after_help = "Environment:\n  \
        AUDIT_WORKERS  caps the worker pool (read once on first use; 1 forces\n  \
                 sequential fan-outs, unset uses every core)\n\n\
        Exit codes: 0 success, 2 configuration error, 3 data or file error,\n\
        1 anything else."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the audit a config file describes and write its report files.
    Run {
        /// Audit configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Trace metric gaps across ranking cut-offs for one decision model.
    ///
    /// Counterfactuals are generated once at the configured pool size (or
    /// reloaded from the cache a previous run left) and truncated per
    /// cut-off, so points at different k stay comparable.
    Sweep {
        /// Audit configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Decision model name from the config.
        #[arg(long)]
        model: String,
        /// Counterfactual strategy: genetic or known_space.
        #[arg(long)]
        strategy: String,
        /// Cut-offs: one value (25), a list (10,50,100), or an inclusive
        /// range (1..100).
        #[arg(long)]
        k: String,
    },
    /// Re-render report files from a finished run's cache, without
    /// recomputing anything.
    Report {
        /// Cache directory of a finished run (<output>/cache).
        #[arg(long)]
        cache: PathBuf,
        /// csv or json; repeat or comma-separate for both.
        #[arg(long, value_delimiter = ',')]
        format: Vec<String>,
        /// Target directory; defaults to the cache's parent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_strategy(name: &str) -> Result<Provenance, Error> {
    match name {
        "genetic" => Ok(Provenance::Genetic),
        "known_space" => Ok(Provenance::KnownSpace),
        other => Err(Error::Config(format!(
            "unknown strategy '{other}' (expected genetic or known_space)"
        ))),
    }
}

fn parse_format(name: &str) -> Result<ReportFormat, Error> {
    match name {
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        other => Err(Error::Config(format!(
            "unknown format '{other}' (expected csv or json)"
        ))),
    }
}

/// Accepts "25", "10,50,100", and "1..100" / "1..=100" (both inclusive).
fn parse_k(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Config(format!("cannot parse k specification '{text}'"));
    if let Some((lo, hi)) = text.split_once("..") {
        let hi = hi.trim();
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.parse().map_err(|_| bad())?;
        if lo < 1 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|part| part.trim().parse::<usize>().map_err(|_| bad()))
        .collect()
}

/// Undefined cells carry the explicit marker; the sorted column goes empty
/// when re-ranking was not configured (not computed, not undefined).
fn sweep_csv(curve: &SweepCurve, reranked: bool) -> Result<Vec<u8>, Error> {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| UNDEF.into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "delta_cflips", "delta_ndccf", "delta_ndccf_sorted", "partial"])?;
    for p in &curve.points {
        w.write_record([
            p.k.to_string(),
            cell(p.delta_cflips),
            cell(p.delta_ndccf),
            if reranked { cell(p.delta_ndccf_sorted) } else { String::new() },
            p.partial.to_string(),
        ])?;
    }
    Ok(w.into_inner().expect("vec writer"))
}

fn dispatch(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Run { config } => {
            let config = AuditConfig::from_json_file(&config)?;
            let report = run_audit(&config)?;
            let decisions = report
                .model_eval
                .iter()
                .filter(|r| r.role == Role::Decision)
                .count();
            Ok(format!(
                "audited {decisions} decision model(s): {} fairness cells, {} proxy ranking(s), output in {}",
                report.fairness.len(),
                report.proxy.len(),
                config.output.dir.display()
            ))
        }
        Command::Sweep {
            config,
            model,
            strategy,
            k,
        } => {
            let config = AuditConfig::from_json_file(&config)?;
            let strategy = parse_strategy(&strategy)?;
            let k_values = parse_k(&k)?;
            let curve = sweep_k(&config, &model, strategy, &k_values)?;
            let bytes = sweep_csv(&curve, config.metrics.rerank)?;
            let dir = &config.output.dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(format!("sweep_{}_{}.csv", curve.model, curve.strategy.label()));
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            Ok(format!(
                "wrote {} sweep point(s) to {}",
                curve.points.len(),
                path.display()
            ))
        }
        Command::Report { cache, format, out } => {
            if format.is_empty() {
                return Err(Error::Config("report needs at least one --format".into()));
            }
            let formats = format
                .iter()
                .map(|f| parse_format(f))
                .collect::<Result<Vec<_>, _>>()?;
            let cache = AuditCache::at(&cache);
            let report = cache.load_report()?;
            let dir = out.unwrap_or_else(|| {
                cache
                    .root()
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| cache.root().to_path_buf())
            });
            let manifest = emit_report(&report, &formats, &dir)?;
            Ok(format!(
                "rendered {} file(s) into {}",
                manifest.len(),
                dir.display()
            ))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Schema(_) | Error::Parse(_) | Error::Data(_) | Error::Io { .. } | Error::Csv(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            println!(
                "done in {:.2}s with {} worker(s)",
                started.elapsed().as_secs_f64(),
                par::workers()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
