//! Command-line front end: sampling, flow runs, norms, the oracle suite,
//! named experiments, and report generation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polchinski::error::{Error, Result};
use polchinski::harness::{config::RunConfig, experiments, records::Recorder, report};
use polchinski::lattice::Field;
use polchinski::potential::ModelKind;
use polchinski::rng::derived_rng;
use polchinski::scales::{sample_gaussian, GffPath};
use polchinski::{analysis, flow, verify};

#[derive(Parser)]
#[command(name = "polchinski", version, about = "Lattice exponential-interaction fields coupled to the free field through a scale flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Plain-text key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override (also honours OUTPUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lattice side count override.
    #[arg(long)]
    grid: Option<usize>,
    /// Model override: liouville | sinh-gordon.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    /// Replica count override.
    #[arg(long)]
    replicas: Option<usize>,
}

impl ConfigArgs {
    fn build(&self, start: RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => start,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Ok(dir) = std::env::var("OUTPUT_DIR") {
            if self.out.is_none() {
                cfg.out = PathBuf::from(dir);
            }
        }
        if let Some(n) = self.grid {
            cfg.n = n;
        }
        if let Some(m) = &self.model {
            cfg.model = m.parse()?;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(m) = self.mass {
            cfg.mass = m;
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit sampled fields: the free field, or the interacting measure via
    /// the exact rejection oracle.
    Sample {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `gff` or an interacting model name for the rejection oracle.
        #[arg(long, default_value = "gff")]
        law: String,
    },
    /// Run a coupled flow ensemble and persist path bundles plus summary
    /// statistics.
    Flow {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Persist full path bundles (one file per replica).
        #[arg(long)]
        bundles: bool,
    },
    /// Compute norms of a stored field record.
    Norms {
        /// Binary field record to analyse.
        #[arg(long = "in")]
        input: PathBuf,
        /// Sobolev exponents.
        #[arg(long, value_delimiter = ',', default_value = "0,1,1.3,2")]
        alpha: Vec<f64>,
        /// Hölder exponent (optional).
        #[arg(long)]
        holder: Option<f64>,
        /// Dyadic block decomposition parameter (optional).
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run the tiny-lattice oracle suite; exits nonzero if any check fails.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a named acceptance experiment.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Experiment name; use `list` to enumerate the registry.
        #[arg(long)]
        name: String,
        /// Estimate the wall time instead of running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Aggregate results files into deterministic tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample { cfg, law } => sample(cfg, &law),
        Command::Flow { cfg, bundles } => run_flow(cfg, bundles),
        Command::Norms {
            input,
            alpha,
            holder,
            delta,
        } => norms(&input, &alpha, holder, delta),
        Command::Verify { cfg } => run_verify(cfg),
        Command::Experiment { cfg, name, dry_run } => experiment(cfg, &name, dry_run),
        Command::Report { input, out } => {
            let written = report::generate(&input, &out)?;
            for f in written {
                println!("wrote {}", out.join(f).display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn warn_phase(cfg: &RunConfig) {
    if cfg.beta >= 4.0 * std::f64::consts::PI {
        eprintln!(
            "warning: beta = {:.4} is outside the square-integrable phase (0, 4π); \
             uniformity statements are not claimed there",
            cfg.beta
        );
    }
}

fn sample(args: ConfigArgs, law: &str) -> Result<ExitCode> {
    let cfg = args.build(RunConfig::default())?;
    warn_phase(&cfg);
    std::fs::create_dir_all(&cfg.out)?;
    let scale = cfg.scale_params()?;
    for r in 0..cfg.replicas {
        let mut rng = derived_rng(cfg.seed, &[0x5a4e, r as u64]);
        let field = match law {
            "gff" => {
                let cov = scale.c_hat_table(f64::INFINITY)?;
                sample_gaussian(scale.grid(), &cov, &mut rng)?
            }
            "gff-path" => {
                let grid = cfg.flow_config()?.scale_grid().clone();
                let path = GffPath::sample(scale, &grid, &mut rng)?;
                path.field(0).clone()
            }
            _ => {
                let mut sub = cfg.clone();
                sub.model = law.parse()?;
                let mp = sub.model_params()?;
                verify::rejection_sample_nu_unguarded(&mp, cfg.wick, &mut rng)?
            }
        };
        let stem = cfg.out.join(format!("{law}-n{}-r{r}", cfg.n));
        let mut bin = std::fs::File::create(stem.with_extension("field"))?;
        field.write_binary(&mut bin)?;
        let mut csv = std::fs::File::create(stem.with_extension("csv"))?;
        field.write_csv(&mut csv)?;
        println!("wrote {}", stem.with_extension("field").display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_flow(args: ConfigArgs, bundles: bool) -> Result<ExitCode> {
    let cfg = args.build(RunConfig::default())?;
    warn_phase(&cfg);
    let mp = cfg.model_params()?;
    let fc = cfg.flow_config()?;
    let mut rec = Recorder::new(cfg.hash());
    let paths = verify::flow_ensemble(&mp, cfg.wick, &fc, cfg.seed, cfg.replicas)?;
    let j_last = paths[0].times().len() - 1;
    let budgets: Vec<f64> = paths.iter().map(|p| p.drift_budget(0, j_last)).collect();
    let h1: Vec<f64> = paths
        .iter()
        .map(|p| analysis::sobolev_norm(p.phi_delta(0), 1.0))
        .collect::<Result<_>>()?;
    rec.emit(
        "drift-budget",
        format!("n={}", cfg.n),
        polchinski::stats::mean(&budgets),
        Some(polchinski::stats::se_mean(&budgets)),
        paths.len(),
    );
    rec.emit(
        "difference-h1",
        format!("n={}", cfg.n),
        polchinski::stats::mean(&h1),
        Some(polchinski::stats::se_mean(&h1)),
        paths.len(),
    );
    rec.emit(
        "residual-trace",
        format!("n={}", cfg.n),
        paths[0].residual_trace(),
        None,
        paths.len(),
    );
    for (t, v) in flow::stability_monitor(&paths[0])? {
        rec.emit("stability-monitor", format!("n={};t={t:.6e}", cfg.n), v, None, 1);
    }
    if bundles {
        for (r, path) in paths.iter().enumerate() {
            let file = cfg.out.join(format!("flow-n{}-r{r}.bundle", cfg.n));
            std::fs::create_dir_all(&cfg.out)?;
            let mut w = std::fs::File::create(&file)?;
            path.write_bundle(&mut w, &cfg.canonical_string())?;
            println!("wrote {}", file.display());
        }
    }
    let out = rec.flush(&cfg.out, &cfg.canonical_string())?;
    println!(
        "flow ensemble complete: {} paths, records in {}",
        paths.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn norms(input: &PathBuf, alphas: &[f64], holder: Option<f64>, delta: Option<f64>) -> Result<ExitCode> {
    let mut file = std::fs::File::open(input)?;
    let field = Field::read_binary(&mut file)?;
    for &a in alphas {
        println!("H^{a}: {:.10e}", analysis::sobolev_norm(&field, a)?);
    }
    if let Some(s) = holder {
        println!("C^{s}: {:.10e}", analysis::holder_norm(&field, s)?);
    }
    if let Some(d) = delta {
        let rep = analysis::lp_block_norms(&field, d)?;
        for (i, b) in rep.block_norms.iter().enumerate() {
            println!("block {}: {b:.10e}", i as i32 - 1);
        }
        println!("assembled H^{{-1+{d}}}²: {:.10e}", rep.assembled_sq);
        println!("direct    H^{{-1+{d}}}²: {:.10e}", rep.direct_sq);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: ConfigArgs) -> Result<ExitCode> {
    let mut cfg = args.build(RunConfig::default())?;
    if args.grid.is_none() && args.config.is_none() {
        cfg.n = 4;
    }
    if cfg.n > 8 {
        return Err(Error::Usage(format!(
            "the oracle suite runs on tiny lattices (n <= 8), got n = {}",
            cfg.n
        )));
    }
    cfg.t_max = cfg.t_max.or(Some(10_000.0 / (cfg.mass * cfg.mass)));
    cfg.scale_steps = cfg.scale_steps.max(31);
    warn_phase(&cfg);
    let mp = cfg.model_params()?;
    let fc = cfg.flow_config()?;
    let mut rec = Recorder::new(cfg.hash());
    let mut all_pass = true;
    let mut show = |name: &str, pass: bool, detail: String| {
        all_pass &= pass;
        println!("[{}] {name}: {detail}", if pass { "ok" } else { "FAIL" });
    };

    // partition oracle cross-validation before either value is trusted
    let mut rng = derived_rng(cfg.seed, &[0x9e7]);
    let mc = verify::direct_log_partition(
        &mp,
        cfg.wick,
        verify::PartitionMethod::MonteCarlo,
        400_000,
        &mut rng,
    )?;
    rec.emit("log-partition", format!("n={};method=mc", cfg.n), mc.value, Some(mc.std_error), 400_000);
    match verify::direct_log_partition(&mp, cfg.wick, verify::PartitionMethod::Quadrature, 0, &mut rng) {
        Ok(quad) => {
            let z = (mc.value - quad.value) / mc.std_error.max(f64::MIN_POSITIVE);
            rec.emit("log-partition", format!("n={};method=quadrature", cfg.n), quad.value, None, 1);
            show(
                "partition cross-validation",
                z.abs() <= 3.0,
                format!("mc {:.6} ± {:.1e} vs quadrature {:.6} (z = {z:+.2})", mc.value, mc.std_error, quad.value),
            );
        }
        Err(Error::InfeasibleQuadrature(msg)) => {
            show("partition cross-validation", true, format!("quadrature skipped: {msg}"));
        }
        Err(e) => return Err(e),
    }

    let paths = verify::flow_ensemble(&mp, cfg.wick, &fc, cfg.seed, cfg.replicas.min(2000))?;
    let t_max = cfg.effective_t_max();

    let report = verify::bd_vs_partition(&mp, cfg.wick, &paths, &mc)?;
    rec.emit("bd-cost", format!("n={}", cfg.n), report.subject, Some(report.subject_err), paths.len());
    show("variational cost vs partition", report.pass(), report.summary());

    let zero = verify::zero_drift_competitor_gap(&mp, cfg.wick, t_max, &paths)?;
    show("zero-drift competitor", zero.z >= -3.0, zero.summary());

    let t_mid = paths[0]
        .times()
        .iter()
        .copied()
        .min_by(|a, b| (a - 1.0).abs().partial_cmp(&(b - 1.0).abs()).unwrap())
        .unwrap();
    let energy = verify::energy_identity_residual(&mp, cfg.wick, t_mid, &paths, cfg.mc_samples_diag, cfg.seed ^ 0xee)?;
    rec.emit("energy-residual", format!("n={};t={t_mid:.4}", cfg.n), energy.subject, Some(energy.subject_err), paths.len());
    show("energy identity", energy.pass(), energy.summary());

    let oracle: Vec<Field> = (0..4 * cfg.replicas.min(2000))
        .map(|r| {
            let mut orng = derived_rng(cfg.seed, &[0x04ac, r as u64]);
            verify::rejection_sample_nu(&mp, cfg.wick, &mut orng)
        })
        .collect::<Result<_>>()?;
    for r in verify::marginal_law_check(&mp, cfg.wick, 0.0, &paths, &oracle)? {
        rec.emit("marginal-law-z", format!("n={};{}", cfg.n, r.name), r.z, None, paths.len());
        show("marginal law", r.pass(), r.summary());
    }

    if mp.kind() == ModelKind::SinhGordon {
        let t_probe = paths[0]
            .times()
            .iter()
            .copied()
            .min_by(|a, b| (a - 0.5).abs().partial_cmp(&(b - 0.5).abs()).unwrap())
            .unwrap();
        for r in verify::bl_moment_check(&mp, cfg.wick, t_probe, &paths)? {
            show("exponential-moment domination", r.z <= 3.0, r.summary());
        }
    }

    let gmc = verify::gmc_cauchy_check(mp.kind(), cfg.beta, cfg.mass, &[8, 16, 32, 64], 400, cfg.seed)?;
    for r in &gmc.normalisation {
        show("chaos-mass normalisation", r.pass(), r.summary());
    }
    show(
        "chaos-mass coupled differences",
        gmc.diffs_strictly_decreasing(),
        format!(
            "{:?}",
            gmc.diffs.iter().map(|d| (d.0, d.1, d.2)).collect::<Vec<_>>()
        ),
    );

    rec.flush(&cfg.out, &cfg.canonical_string())?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn experiment(args: ConfigArgs, name: &str, dry_run: bool) -> Result<ExitCode> {
    if name == "list" {
        for e in experiments::registry() {
            println!("{:<24} criteria {:?}\n    {}", e.name, e.criteria, e.description);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let exp = experiments::find(name)?;
    let cfg = args.build((exp.reference)())?;
    warn_phase(&cfg);
    if dry_run {
        let secs = experiments::estimate_seconds(exp, &cfg)?;
        println!("experiment {name}: estimated wall time ≈ {secs:.1} s");
        return Ok(ExitCode::SUCCESS);
    }
    let mut rec = Recorder::new(cfg.hash());
    let started = std::time::Instant::now();
    let outcome = (exp.run)(&cfg, &mut rec)?;
    rec.flush(&cfg.out, &cfg.canonical_string())?;
    println!(
        "experiment {name} [{}] in {:.1} s",
        if outcome.passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    for line in &outcome.lines {
        println!("{line}");
    }
    Ok(if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
