//! Named experiments and their pass predicates.
//!
//! Every acceptance criterion maps to exactly one registered experiment;
//! each experiment is a pure function of its configuration and seed, emits
//! one record per computed statistic, and prints one summary line per
//! sub-check.  Heavy ensembles shared between experiments (the dyadic
//! lattice sweep, the tiny-lattice oracle ensembles) are cached per
//! configuration hash within the process.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use crate::analysis;
use crate::error::{Error, Result};
use crate::exec;
use crate::flow::{self, minimiser_drift, DriftPath, FlowConfig, FlowPath};
use crate::harness::config::RunConfig;
use crate::harness::records::Recorder;
use crate::lattice::{Field, TorusGrid};
use crate::potential::{self, ModelKind, ModelParams, WickConvention};
use crate::rng::derived_rng;
use crate::scales::{sample_gaussian, ScaleGrid, ScaleParams};
use crate::stats;
use crate::tolerances::{SWEEP_STABILITY_FACTOR, Z_CRIT};
use crate::verify;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl ExperimentOutcome {
    fn new() -> Self {
        ExperimentOutcome {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines
            .push(format!("  [{}] {line}", if ok { "ok" } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("  [--] {line}"));
    }
}

pub struct Experiment {
    pub name: &'static str,
    /// What the experiment checks, in plain words.
    pub description: &'static str,
    /// Acceptance criteria covered (1-based).
    pub criteria: &'static [usize],
    pub run: fn(&RunConfig, &mut Recorder) -> Result<ExperimentOutcome>,
    /// Reference configuration pinned to the acceptance parameters.
    pub reference: fn() -> RunConfig,
    /// Work model for the dry-run estimator:
    /// `(lattice n, drift evaluations, spectral field samples)` per phase.
    pub work: fn(&RunConfig) -> Vec<(usize, u64, u64)>,
}

pub fn registry() -> &'static [Experiment] {
    &REGISTRY
}

pub fn find(name: &str) -> Result<&'static Experiment> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Usage(format!("unknown experiment '{name}'")))
}

// ---------------------------------------------------------------------------
// shared ensemble caches
// ---------------------------------------------------------------------------

type EnsembleCache = Mutex<HashMap<String, Arc<Vec<FlowPath>>>>;

fn ensemble_cache() -> &'static EnsembleCache {
    static CACHE: OnceLock<EnsembleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Flow ensemble cached per configuration hash (tiny lattices only; the
/// callers that share these run on n <= 16).
fn cached_ensemble(cfg: &RunConfig, n: usize, model: ModelKind) -> Result<Arc<Vec<FlowPath>>> {
    let mut sub = cfg.clone();
    sub.n = n;
    sub.model = model;
    let key = sub.hash();
    if let Some(found) = ensemble_cache().lock().unwrap().get(&key) {
        return Ok(found.clone());
    }
    let mp = sub.model_params()?;
    let fc = sub.flow_config()?;
    let paths = verify::flow_ensemble(&mp, sub.wick, &fc, sub.seed, sub.replicas)?;
    let arc = Arc::new(paths);
    ensemble_cache()
        .lock()
        .unwrap()
        .insert(key, arc.clone());
    Ok(arc)
}

/// Extracted statistics of one lattice size in the dyadic sweep.
#[derive(Debug, Clone)]
struct SweepStats {
    n: usize,
    budget: (f64, f64),
    h1: (f64, f64),
    h_alpha: (f64, f64),
    h2_t0: (f64, f64),
    t0: f64,
    /// `(t, mean, se)` of `E‖Φ_0^Δ - Φ_t^Δ‖_{H^α}` along dyadic times <= 1.
    continuity: Vec<(f64, f64, f64)>,
}

fn sweep_cache() -> &'static Mutex<HashMap<String, Arc<Vec<SweepStats>>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<Vec<SweepStats>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const SWEEP_ALPHA: f64 = 1.3;

/// The ε-sweep ensemble statistics shared by the budget-uniformity and
/// Sobolev-uniformity experiments.  Paths are reduced replica by replica,
/// so memory stays at one path per worker.
fn sweep_stats(cfg: &RunConfig) -> Result<Arc<Vec<SweepStats>>> {
    let key = format!("sweep:{}", cfg.hash());
    if let Some(found) = sweep_cache().lock().unwrap().get(&key) {
        return Ok(found.clone());
    }
    struct PathReduction {
        budget: f64,
        h1: f64,
        h_alpha: f64,
        h2_t0: f64,
        continuity: Vec<f64>,
    }
    let mut all = Vec::new();
    for &n in &cfg.eps_sweep {
        let mp = cfg.model_params_for(n)?;
        let fc = cfg.flow_config()?;
        let axis = fc.scale_grid().axis();
        let t0 = *axis
            .iter()
            .skip(1)
            .min_by(|a, b| ((**a) - 0.1).abs().partial_cmp(&((**b) - 0.1).abs()).unwrap())
            .unwrap();
        let cont_times: Vec<f64> = axis
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t <= 1.0)
            .collect();
        let reductions: Vec<PathReduction> = exec::try_map_indexed(cfg.replicas, |r| {
            let mut rng = derived_rng(cfg.seed, &[0x5eed, n as u64, r as u64]);
            let path = flow::integrate_flow(&mp, cfg.wick, &fc, &mut rng)?;
            let j_last = path.times().len() - 1;
            let j_t0 = path.axis_index(t0)?;
            let continuity = cont_times
                .iter()
                .map(|&t| {
                    let j = path.axis_index(t)?;
                    analysis::sobolev_norm(
                        &path.phi_delta(0).subtracted(path.phi_delta(j)),
                        SWEEP_ALPHA,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok::<PathReduction, Error>(PathReduction {
                budget: path.drift_budget(0, j_last),
                h1: analysis::sobolev_norm(path.phi_delta(0), 1.0)?,
                h_alpha: analysis::sobolev_norm(path.phi_delta(0), SWEEP_ALPHA)?,
                h2_t0: analysis::sobolev_norm(path.phi_delta(j_t0), 2.0)?,
                continuity,
            })
        })?;
        let collect = |f: &dyn Fn(&PathReduction) -> f64| -> (f64, f64) {
            let vs: Vec<f64> = reductions.iter().map(f).collect();
            (stats::mean(&vs), stats::se_mean(&vs))
        };
        let continuity = (0..cont_times.len())
            .map(|i| {
                let vs: Vec<f64> = reductions.iter().map(|r| r.continuity[i]).collect();
                (cont_times[i], stats::mean(&vs), stats::se_mean(&vs))
            })
            .collect();
        all.push(SweepStats {
            n,
            budget: collect(&|r| r.budget),
            h1: collect(&|r| r.h1),
            h_alpha: collect(&|r| r.h_alpha),
            h2_t0: collect(&|r| r.h2_t0),
            t0,
            continuity,
        });
    }
    let arc = Arc::new(all);
    sweep_cache().lock().unwrap().insert(key, arc.clone());
    Ok(arc)
}

fn effective_steps(cfg: &RunConfig) -> u64 {
    (cfg.scale_steps as u64) << cfg.scale_refine
}

fn factor_band(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn grid_time_near(fc: &FlowConfig, target: f64) -> f64 {
    *fc.scale_grid()
        .times()
        .iter()
        .min_by(|a, b| ((**a) - target).abs().partial_cmp(&((**b) - target).abs()).unwrap())
        .unwrap()
}

// ---------------------------------------------------------------------------
// experiment bodies
// ---------------------------------------------------------------------------

fn run_gff_variance_scaling(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in &cfg.eps_sweep {
        let params = cfg.scale_params_for(n)?;
        let cov = params.c_hat_table(f64::INFINITY)?;
        let vars: Vec<f64> = exec::try_map_indexed(cfg.replicas, |r| {
            let mut rng = derived_rng(cfg.seed, &[0x6ff, n as u64, r as u64]);
            let f = sample_gaussian(params.grid(), &cov, &mut rng)?;
            Ok::<f64, Error>(f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64)
        })?;
        let mean = stats::mean(&vars);
        let se = stats::se_mean(&vars);
        rec.emit(
            "gff-site-variance",
            format!("n={n}"),
            mean,
            Some(se),
            cfg.replicas,
        );
        outcome.note(format!("n = {n}: var = {mean:.5} ± {se:.1e}"));
        xs.push((n as f64).ln());
        ys.push(mean);
    }
    let (slope, intercept) = stats::linear_fit(&xs, &ys)?;
    let target = 1.0 / (2.0 * std::f64::consts::PI);
    rec.emit("gff-variance-log-slope", "sweep", slope, None, cfg.replicas);
    outcome.note(format!("intercept = {intercept:.4} (reported, not asserted)"));
    outcome.check(
        (slope - target).abs() <= 0.1 * target,
        format!("variance log-slope {slope:.5} within 10% of 1/2π = {target:.5}"),
    );
    Ok(outcome)
}

fn run_coupling_exactness(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    // interacting runs: decomposition exact at machine precision
    let paths = cached_ensemble(cfg, cfg.n, cfg.model)?;
    let worst = paths
        .iter()
        .map(|p| p.coupling_defect())
        .fold(0.0f64, f64::max);
    rec.emit("coupling-defect", format!("n={}", cfg.n), worst, None, paths.len());
    outcome.check(
        worst == 0.0,
        format!("decomposition defect over {} paths = {worst:.3e}", paths.len()),
    );
    // λ = 0 degenerates to the free path exactly
    let mp0 = cfg.model_params()?.with_lambda(0.0)?;
    let fc = cfg.flow_config()?;
    let mut rng = derived_rng(cfg.seed, &[0xdead]);
    let free = flow::integrate_flow(&mp0, cfg.wick, &fc, &mut rng)?;
    let mut max_dev = 0.0f64;
    for j in 0..free.times().len() {
        max_dev = max_dev.max(free.phi_delta(j).max_abs());
        let dev = free.phi_e(j).subtracted(free.phi_gff(j)).max_abs();
        max_dev = max_dev.max(dev);
    }
    rec.emit("free-degeneration-defect", format!("n={}", cfg.n), max_dev, None, 1);
    outcome.check(
        max_dev == 0.0,
        format!("λ = 0 path equals the free path exactly (defect {max_dev:.3e})"),
    );
    outcome.note(format!(
        "terminal covariance trace left above t_max: {:.3e}",
        paths[0].residual_trace()
    ));
    Ok(outcome)
}

fn run_liouville_signs(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let paths = cached_ensemble(cfg, cfg.n, ModelKind::Liouville)?;
    let mut delta_violations = 0usize;
    let mut drift_violations = 0usize;
    for path in paths.iter() {
        for j in 0..path.times().len() {
            delta_violations += path
                .phi_delta(j)
                .values()
                .iter()
                .filter(|&&v| v > 0.0)
                .count();
        }
        for j in 0..path.steps() {
            drift_violations += path
                .drift(j)?
                .values()
                .iter()
                .filter(|&&v| v > 0.0)
                .count();
        }
    }
    rec.emit(
        "liouville-delta-sign-violations",
        format!("n={}", cfg.n),
        delta_violations as f64,
        None,
        paths.len(),
    );
    rec.emit(
        "liouville-drift-sign-violations",
        format!("n={}", cfg.n),
        drift_violations as f64,
        None,
        paths.len(),
    );
    outcome.check(
        delta_violations == 0,
        format!(
            "difference field nonpositive componentwise across {} paths ({} violations)",
            paths.len(),
            delta_violations
        ),
    );
    outcome.check(
        drift_violations == 0,
        format!(
            "minimiser drift nonpositive componentwise ({drift_violations} violations)"
        ),
    );
    Ok(outcome)
}

fn run_shg_symmetry(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let mp = cfg.model_params()?;
    let fc = cfg.flow_config()?;
    let fields: Vec<Field> = exec::try_map_indexed(cfg.replicas, |r| {
        let mut rng = derived_rng(cfg.seed, &[0x59a, r as u64]);
        let path = flow::integrate_flow(&mp, cfg.wick, &fc, &mut rng)?;
        Ok::<Field, Error>(path.phi_e(0).clone())
    })?;
    let sites = fields[0].values().len();
    let mut worst_z = 0.0f64;
    let mut failures = 0usize;
    for s in 0..sites {
        let vals: Vec<f64> = fields.iter().map(|f| f.values()[s]).collect();
        let z = stats::mean(&vals) / stats::se_mean(&vals);
        if z.abs() > worst_z {
            worst_z = z.abs();
        }
        if z.abs() > Z_CRIT {
            failures += 1;
        }
    }
    rec.emit(
        "shg-mean-worst-z",
        format!("n={}", cfg.n),
        worst_z,
        None,
        cfg.replicas,
    );
    outcome.check(
        failures == 0,
        format!(
            "per-site mean of the scale-zero field within 3 SE of 0 at all {sites} sites \
             (worst |z| = {worst_z:.2}, {} replicas)",
            cfg.replicas
        ),
    );
    Ok(outcome)
}

fn run_marginal_law(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    for model in [ModelKind::Liouville, ModelKind::SinhGordon] {
        let paths = cached_ensemble(cfg, cfg.n, model)?;
        let mut sub = cfg.clone();
        sub.model = model;
        let mp = sub.model_params()?;
        // oracle ensemble: exact rejection from the free field
        let oracle_n = 4 * cfg.replicas;
        let oracle: Vec<Field> = exec::try_map_indexed(oracle_n, |r| {
            let mut rng = derived_rng(cfg.seed, &[0x0_4ac1e, model as u64, r as u64]);
            verify::rejection_sample_nu(&mp, cfg.wick, &mut rng)
        })?;
        let reports = verify::marginal_law_check(&mp, cfg.wick, 0.0, &paths, &oracle)?;
        for r in &reports {
            rec.emit(
                format!("marginal-{}", r.name.split(": ").last().unwrap_or("stat").replace(' ', "-")),
                format!("model={};n={}", mp.kind().as_str(), cfg.n),
                r.subject,
                Some(r.subject_err),
                paths.len(),
            );
            outcome.check(r.pass(), format!("{}: {}", mp.kind().as_str(), r.summary()));
        }
    }
    Ok(outcome)
}

fn run_bd_optimality(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let paths = cached_ensemble(cfg, cfg.n, cfg.model)?;
    let mp = cfg.model_params()?;
    let t_max = cfg.effective_t_max();

    // J(u*) against the direct Monte Carlo partition value
    let mut rng = derived_rng(cfg.seed, &[0x9a57]);
    let partition = verify::direct_log_partition(
        &mp,
        cfg.wick,
        verify::PartitionMethod::MonteCarlo,
        1_000_000,
        &mut rng,
    )?;
    let report = verify::bd_vs_partition(&mp, cfg.wick, &paths, &partition)?;
    rec.emit(
        "bd-cost-vs-partition",
        format!("n={}", cfg.n),
        report.subject,
        Some(report.subject_err),
        paths.len(),
    );
    outcome.check(report.pass(), report.summary());

    // optimality against contracted competitors and the zero drift
    let zero = verify::zero_drift_competitor_gap(&mp, cfg.wick, t_max, &paths)?;
    outcome.check(
        zero.z >= -Z_CRIT,
        format!("{} (one-sided)", zero.summary()),
    );
    let pert =
        verify::perturbation_suboptimality(&mp, cfg.wick, t_max, &paths, &[0.1, 0.2, 0.5])?;
    for &(h, gap, se) in &pert.gaps {
        rec.emit(
            "bd-contraction-gap",
            format!("h={h};n={}", cfg.n),
            gap,
            Some(se),
            paths.len(),
        );
        outcome.check(
            gap >= -Z_CRIT * se,
            format!("contraction h = {h}: gap {gap:.4e} ± {se:.1e} nonnegative"),
        );
    }
    match pert.response_exponent {
        Some(e) => {
            rec.emit("bd-response-exponent", format!("n={}", cfg.n), e, None, paths.len());
            outcome.check(
                (e - 2.0).abs() <= 0.5,
                format!("quadratic response exponent {e:.3} within 2 ± 0.5"),
            );
        }
        None => outcome.check(false, "response exponent not measurable".into()),
    }
    outcome.check(
        pert.pre_estimate.z <= Z_CRIT,
        format!("{} (one-sided)", pert.pre_estimate.summary()),
    );
    Ok(outcome)
}

fn run_energy_identity(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let mp = cfg.model_params()?;
    let fc = cfg.flow_config()?;
    let t = grid_time_near(&fc, 1.0);

    // coarse run one refinement level below the production grid
    let mut coarse_cfg = cfg.clone();
    coarse_cfg.scale_refine = cfg.scale_refine.saturating_sub(1);
    let coarse_paths = cached_ensemble(&coarse_cfg, cfg.n, cfg.model)?;
    let coarse = verify::energy_identity_residual(
        &mp,
        cfg.wick,
        t,
        &coarse_paths,
        cfg.mc_samples_diag,
        cfg.seed ^ 0xe1,
    )?;
    rec.emit(
        "energy-identity-residual",
        format!("n={};refine={}", cfg.n, coarse_cfg.scale_refine),
        coarse.subject,
        Some(coarse.subject_err),
        coarse_paths.len(),
    );
    outcome.note(coarse.summary());

    let paths = cached_ensemble(cfg, cfg.n, cfg.model)?;
    let fine = verify::energy_identity_residual(
        &mp,
        cfg.wick,
        t,
        &paths,
        cfg.mc_samples_diag,
        cfg.seed ^ 0xe2,
    )?;
    rec.emit(
        "energy-identity-residual",
        format!("n={};refine={}", cfg.n, cfg.scale_refine),
        fine.subject,
        Some(fine.subject_err),
        paths.len(),
    );
    outcome.check(fine.pass(), fine.summary());
    let shrunk = fine.subject.abs()
        <= coarse.subject.abs() + Z_CRIT * (fine.subject_err + coarse.subject_err);
    outcome.check(
        shrunk,
        format!(
            "halving every scale step keeps the residual from growing: |{:.3e}| -> |{:.3e}|",
            coarse.subject, fine.subject
        ),
    );
    Ok(outcome)
}

fn run_drift_budget(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let sweep = sweep_stats(cfg)?;
    let means: Vec<f64> = sweep.iter().map(|s| s.budget.0).collect();
    for s in sweep.iter() {
        rec.emit(
            "drift-budget",
            format!("n={}", s.n),
            s.budget.0,
            Some(s.budget.1),
            cfg.replicas,
        );
        outcome.note(format!("n = {}: E[∫‖u*‖²] = {:.5} ± {:.1e}", s.n, s.budget.0, s.budget.1));
    }
    let band = factor_band(&means);
    outcome.check(
        band <= SWEEP_STABILITY_FACTOR,
        format!("budget stable within factor 2 across the sweep (band {band:.3})"),
    );
    let idx: Vec<f64> = (0..means.len()).map(|i| i as f64).collect();
    let rho = stats::spearman(&idx, &means);
    rec.emit("drift-budget-spearman", "sweep", rho, None, cfg.replicas);
    outcome.check(
        rho.abs() < 0.9,
        format!("no monotone trend across the sweep (Spearman ρ = {rho:+.2})"),
    );
    Ok(outcome)
}

fn run_smallscale_scaling(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let mp = cfg.model_params()?;
    let fc = cfg.flow_config()?;
    let drifts: Vec<DriftPath> = exec::try_map_indexed(cfg.replicas, |r| {
        let mut rng = derived_rng(cfg.seed, &[0x5ca1e, r as u64]);
        let path = flow::integrate_flow(&mp, cfg.wick, &fc, &mut rng)?;
        Ok::<DriftPath, Error>(minimiser_drift(&path))
    })?;
    let delta = 0.5;
    let fit = analysis::smallscale_scaling_fit(&drifts, delta)?;
    if fit.degenerate {
        outcome.check(false, "degenerate all-zero budgets".into());
        return Ok(outcome);
    }
    let slope = fit.slope.unwrap();
    rec.emit(
        "smallscale-slope",
        format!("n={};beta={:.4}", cfg.n, cfg.beta),
        slope,
        None,
        cfg.replicas,
    );
    let floor = delta / 2.0 - 0.1;
    outcome.check(
        slope >= floor,
        format!(
            "small-scale budget slope {slope:.3} >= δ/2 - 0.1 = {floor:.2} over the two smallest decades"
        ),
    );
    Ok(outcome)
}

fn run_h1_uniformity(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let sweep = sweep_stats(cfg)?;
    for s in sweep.iter() {
        rec.emit("difference-h1", format!("n={}", s.n), s.h1.0, Some(s.h1.1), cfg.replicas);
        rec.emit(
            "difference-h-alpha",
            format!("n={};alpha={SWEEP_ALPHA}", s.n),
            s.h_alpha.0,
            Some(s.h_alpha.1),
            cfg.replicas,
        );
        rec.emit(
            "difference-h2-positive-scale",
            format!("n={};t0={:.4}", s.n, s.t0),
            s.h2_t0.0,
            Some(s.h2_t0.1),
            cfg.replicas,
        );
    }
    let h1: Vec<f64> = sweep.iter().map(|s| s.h1.0).collect();
    let ha: Vec<f64> = sweep.iter().map(|s| s.h_alpha.0).collect();
    let h2: Vec<f64> = sweep.iter().map(|s| s.h2_t0.0).collect();
    outcome.check(
        factor_band(&h1) <= SWEEP_STABILITY_FACTOR,
        format!("E‖Φ^Δ_0‖_{{H¹}} stable within factor 2 (band {:.3}): {h1:?}", factor_band(&h1)),
    );
    outcome.check(
        factor_band(&ha) <= SWEEP_STABILITY_FACTOR,
        format!(
            "E‖Φ^Δ_0‖_{{H^{SWEEP_ALPHA}}} stable within factor 2 (band {:.3})",
            factor_band(&ha)
        ),
    );
    outcome.check(
        h2.iter().all(|v| v.is_finite()) && factor_band(&h2) <= SWEEP_STABILITY_FACTOR,
        format!(
            "E‖Φ^Δ_t0‖_{{H²}} finite and stable at t0 ≈ {:.3} (band {:.3})",
            sweep[0].t0,
            factor_band(&h2)
        ),
    );
    // small-time continuity at the finest lattice of the sweep
    let finest = sweep.last().unwrap();
    let mut decreasing = true;
    let mut prev = f64::INFINITY;
    for &(t, mean, se) in finest.continuity.iter() {
        rec.emit(
            "difference-continuity",
            format!("n={};t={t:.6e}", finest.n),
            mean,
            Some(se),
            cfg.replicas,
        );
        if mean > prev {
            decreasing = false;
        }
        prev = mean;
    }
    let first = finest.continuity.last().unwrap().1; // largest t
    let last = finest.continuity.first().unwrap().1; // smallest t
    outcome.check(
        decreasing,
        "small-time increment norm decreases monotonically towards scale zero".into(),
    );
    outcome.check(
        last < 0.25 * first,
        format!("smallest-scale increment {last:.4e} < 25% of the largest {first:.4e}"),
    );
    Ok(outcome)
}

fn run_drift_lemma_constants(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let alphas: [f64; 6] = [0.0, 0.5, 0.9, 1.0, 1.3, 2.0];
    for &n in &[8usize, 16] {
        let scale = cfg.scale_params_for(n)?;
        let grid_sizes = ScaleGrid::dyadic(cfg.effective_t_max(), 12)?;
        let axis = grid_sizes.axis();
        // flow drifts from a small interacting ensemble enter every cell
        let mut sub = cfg.clone();
        sub.replicas = 16;
        sub.scale_steps = 12;
        let flow_paths = cached_ensemble(&sub, n, ModelKind::Liouville)?;
        let flow_drifts: Vec<DriftPath> = flow_paths.iter().map(minimiser_drift).collect();
        for &alpha in &alphas {
            let ratios: Vec<f64> = exec::try_map_indexed(cfg.replicas, |r| {
                let mut rng = derived_rng(cfg.seed, &[0x11a, n as u64, alpha.to_bits(), r as u64]);
                let d = random_drift(scale, &grid_sizes, &mut rng)?;
                let (s, t) = random_span(&axis, alpha, &mut rng);
                Ok::<f64, Error>(analysis::integrated_drift_bound_check(&d, alpha, s, t)?.ratio)
            })?;
            let mut all = ratios;
            for d in &flow_drifts {
                let f_axis = d.axis().to_vec();
                let mut rng = derived_rng(cfg.seed, &[0x11b, n as u64, alpha.to_bits()]);
                let (s, t) = random_span(&f_axis, alpha, &mut rng);
                all.push(analysis::integrated_drift_bound_check(d, alpha, s, t)?.ratio);
            }
            let max = all.iter().cloned().fold(f64::MIN, f64::max);
            let med = stats::median(&all);
            rec.emit(
                "drift-bound-ratio-max",
                format!("n={n};alpha={alpha}"),
                max,
                None,
                all.len(),
            );
            outcome.check(
                max.is_finite() && max < crate::tolerances::RATIO_SPREAD * med,
                format!(
                    "(α = {alpha}, n = {n}): max ratio {max:.3e} < 10 × median {med:.3e} over {} drifts",
                    all.len()
                ),
            );
        }
    }
    Ok(outcome)
}

fn random_drift(
    scale: ScaleParams,
    grid: &ScaleGrid,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<DriftPath> {
    let flat = vec![1.0; scale.grid().num_sites()];
    let fields: Vec<Field> = (0..grid.steps())
        .map(|_| sample_gaussian(scale.grid(), &flat, rng))
        .collect::<Result<_>>()?;
    DriftPath::from_parts(scale, grid.axis(), fields)
}

fn random_span(axis: &[f64], alpha: f64, rng: &mut rand_chacha::ChaCha8Rng) -> (f64, f64) {
    use rand::Rng as _;
    let lo = if alpha > 1.0 { 1 } else { 0 };
    let a = rng.random_range(lo..axis.len() - 1);
    let b = rng.random_range(a + 1..axis.len());
    (axis[a], axis[b])
}

fn run_wick_regularity(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let delta = 0.5;
    let conv = WickConvention::VarianceSubtraction;
    let mut in_phase = Vec::new();
    let mut out_phase = Vec::new();
    for &n in &cfg.eps_sweep {
        for (beta, bucket, tag) in [
            (std::f64::consts::PI, &mut in_phase, "beta=pi"),
            (6.0 * std::f64::consts::PI, &mut out_phase, "beta=6pi"),
        ] {
            let scale = cfg.scale_params_for(n)?;
            let mp = ModelParams::new(ModelKind::Liouville, beta, 1.0, scale)?;
            let cov = scale.c_hat_table(f64::INFINITY)?;
            let norms: Vec<f64> = exec::try_map_indexed(cfg.replicas, |r| {
                let mut rng = derived_rng(cfg.seed, &[0x1c4, n as u64, beta.to_bits(), r as u64]);
                let y = sample_gaussian(scale.grid(), &cov, &mut rng)?;
                let wick = potential::wick_exp(&y, 1.0, &mp, conv)?;
                analysis::sobolev_norm_sq(&wick, -1.0 + delta)
            })?;
            let mean = stats::mean(&norms);
            rec.emit(
                "wick-hnorm-sq",
                format!("n={n};{tag};delta={delta}"),
                mean,
                Some(stats::se_mean(&norms)),
                cfg.replicas,
            );
            bucket.push(mean);
        }
    }
    let band = factor_band(&in_phase);
    outcome.check(
        band <= SWEEP_STABILITY_FACTOR,
        format!("E‖:e^{{√β Y}}:‖²_{{H^{{-1+δ}}}} stable within factor 2 in the L² phase (band {band:.3})"),
    );
    let growth = out_phase.last().unwrap() / out_phase.first().unwrap();
    outcome.note(format!(
        "outside the L² phase the same statistic grows by ×{growth:.2} across the sweep (reported, not asserted)"
    ));
    Ok(outcome)
}

fn run_brascamp_lieb(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let paths = cached_ensemble(cfg, cfg.n, ModelKind::SinhGordon)?;
    let mut sub = cfg.clone();
    sub.model = ModelKind::SinhGordon;
    let mp = sub.model_params()?;
    let fc = sub.flow_config()?;
    let t = grid_time_near(&fc, 0.5);
    for r in verify::bl_moment_check(&mp, cfg.wick, t, &paths)? {
        rec.emit(
            "bl-exponential-moment",
            format!("n={};t={t:.4};probe={}", cfg.n, r.name.replace(' ', "-")),
            r.subject,
            Some(r.subject_err),
            paths.len(),
        );
        outcome.check(r.z <= Z_CRIT, format!("{} (one-sided)", r.summary()));
    }
    for r in verify::bl_wick_norm_domination(&mp, t, 0.5, &paths, paths.len(), cfg.seed ^ 0xb1)? {
        rec.emit(
            "bl-wick-domination",
            format!("n={};t={t:.4};{}", cfg.n, r.name.replace(' ', "-")),
            r.subject,
            Some(r.subject_err),
            paths.len(),
        );
        outcome.check(r.z <= Z_CRIT, format!("{} (one-sided)", r.summary()));
    }
    Ok(outcome)
}

fn run_gmc_cauchy(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let report = verify::gmc_cauchy_check(
        ModelKind::Liouville,
        cfg.beta,
        cfg.mass,
        &cfg.eps_sweep,
        cfg.replicas,
        cfg.seed,
    )?;
    for r in &report.normalisation {
        rec.emit(
            "gmc-mass-mean",
            r.name.split("n = ").last().map(|n| format!("n={n}")).unwrap_or_default(),
            r.subject,
            Some(r.subject_err),
            cfg.replicas,
        );
        outcome.check(r.pass(), r.summary());
    }
    for &(na, nb, mean, se) in &report.diffs {
        rec.emit(
            "gmc-coupled-diff",
            format!("pair={na}-{nb}"),
            mean,
            Some(se),
            cfg.replicas,
        );
        outcome.note(format!("E|M_{na} - M_{nb}| = {mean:.5} ± {se:.1e}"));
    }
    outcome.check(
        report.diffs_strictly_decreasing(),
        "coupled-resolution differences strictly decreasing along the sweep".into(),
    );
    Ok(outcome)
}

fn run_max_recentering(cfg: &RunConfig, rec: &mut Recorder) -> Result<ExperimentOutcome> {
    let mut outcome = ExperimentOutcome::new();
    let mut gff_iqr = Vec::new();
    let mut lv_iqr = Vec::new();
    for &n in &cfg.eps_sweep {
        let scale = cfg.scale_params_for(n)?;
        let mp = ModelParams::new(ModelKind::Liouville, cfg.beta, cfg.lambda, scale)?;
        let cov = scale.c_hat_table(f64::INFINITY)?;
        let gff_max: Vec<f64> = exec::try_map_indexed(cfg.replicas, |r| {
            let mut rng = derived_rng(cfg.seed, &[0x3a, n as u64, r as u64]);
            let f = sample_gaussian(scale.grid(), &cov, &mut rng)?;
            analysis::max_centered(&f)
        })?;
        let lv_max: Vec<f64> = exec::try_map_indexed(cfg.replicas, |r| {
            let mut rng = derived_rng(cfg.seed, &[0x3b, n as u64, r as u64]);
            let f = verify::rejection_sample_nu_unguarded(&mp, cfg.wick, &mut rng)?;
            analysis::max_centered(&f)
        })?;
        let (gq, lq) = (stats::iqr(&gff_max), stats::iqr(&lv_max));
        let (gm, lm) = (stats::median(&gff_max), stats::median(&lv_max));
        rec.emit("max-centered-iqr", format!("ensemble=gff;n={n}"), gq, None, cfg.replicas);
        rec.emit("max-centered-iqr", format!("ensemble=liouville;n={n}"), lq, None, cfg.replicas);
        rec.emit("max-centered-median", format!("ensemble=gff;n={n}"), gm, None, cfg.replicas);
        rec.emit("max-centered-median", format!("ensemble=liouville;n={n}"), lm, None, cfg.replicas);
        outcome.check(
            lm <= gm,
            format!("n = {n}: interacting median {lm:.4} <= free median {gm:.4}"),
        );
        gff_iqr.push(gq);
        lv_iqr.push(lq);
    }
    outcome.check(
        factor_band(&gff_iqr) <= 1.2,
        format!("free-field recentred-max IQR stable within 20% (band {:.3})", factor_band(&gff_iqr)),
    );
    outcome.check(
        factor_band(&lv_iqr) <= 1.2,
        format!("interacting recentred-max IQR stable within 20% (band {:.3})", factor_band(&lv_iqr)),
    );
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// registry
// ---------------------------------------------------------------------------

fn base(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        ..RunConfig::default()
    }
}

static REGISTRY: [Experiment; 15] = [
    Experiment {
        name: "gff-variance-scaling",
        description: "site variance of the sampled free field grows with the logarithm of the \
                      inverse lattice spacing at rate 1/2π",
        criteria: &[1],
        run: run_gff_variance_scaling,
        reference: || {
            let mut c = base(11);
            c.eps_sweep = vec![16, 32, 64, 128, 256];
            c.replicas = 10_000;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, 0, c.replicas as u64))
                .collect()
        },
    },
    Experiment {
        name: "coupling-exactness",
        description: "the interacting field decomposes exactly into the free field plus the \
                      difference field at every stored scale, and the zero-coupling flow \
                      reproduces the free path bit for bit",
        criteria: &[2],
        run: run_coupling_exactness,
        reference: || {
            let mut c = base(12);
            c.n = 16;
            c.replicas = 4;
            c
        },
        work: |c| vec![(c.n, (c.replicas + 1) as u64 * effective_steps(c), 0)],
    },
    Experiment {
        name: "liouville-signs",
        description: "for the exponential interaction the difference field and the minimiser \
                      drift are nonpositive at every site and scale",
        criteria: &[3],
        run: run_liouville_signs,
        reference: || {
            let mut c = base(13);
            c.n = 16;
            c.replicas = 100;
            c
        },
        work: |c| vec![(c.n, c.replicas as u64 * effective_steps(c), 0)],
    },
    Experiment {
        name: "shg-symmetry",
        description: "the even interaction keeps the scale-zero field centred: per-site ensemble \
                      means vanish within three standard errors",
        criteria: &[4],
        run: run_shg_symmetry,
        reference: || {
            let mut c = base(14);
            c.model = ModelKind::SinhGordon;
            c.n = 16;
            c.replicas = 1000;
            c
        },
        work: |c| vec![(c.n, c.replicas as u64 * effective_steps(c), 0)],
    },
    Experiment {
        name: "marginal-law",
        description: "flow marginals match an exact rejection sampler of the interacting \
                      measure in first and second moments and in the potential observable",
        criteria: &[5],
        run: run_marginal_law,
        reference: || {
            let mut c = base(15);
            c.n = 4;
            c.t_max = Some(10_000.0);
            c.scale_steps = 31;
            c.scale_refine = 2;
            c.replicas = 2500;
            c
        },
        work: |c| {
            vec![(
                c.n,
                2 * c.replicas as u64 * effective_steps(c),
                40 * c.replicas as u64,
            )]
        },
    },
    Experiment {
        name: "bd-optimality",
        description: "the recorded drift realises the variational characterisation of the \
                      log-partition: cost matches the direct value, contracted drifts cost \
                      more with a quadratic response, and the budget obeys the monotone \
                      pre-estimate",
        criteria: &[6],
        run: run_bd_optimality,
        reference: || {
            let mut c = base(15);
            c.n = 4;
            c.t_max = Some(10_000.0);
            c.scale_steps = 31;
            c.scale_refine = 2;
            c.replicas = 2500;
            c
        },
        work: |c| {
            vec![(
                c.n,
                c.replicas as u64 * effective_steps(c),
                1_000_000 / 4,
            )]
        },
    },
    Experiment {
        name: "energy-identity",
        description: "the expected bare potential at scale zero balances the renormalised \
                      potential plus half the quadratic drift cost, with a residual that does \
                      not grow under step refinement",
        criteria: &[7],
        run: run_energy_identity,
        reference: || {
            let mut c = base(15);
            c.n = 4;
            c.t_max = Some(10_000.0);
            c.scale_steps = 31;
            c.scale_refine = 2;
            c.replicas = 2500;
            c
        },
        work: |c| vec![(c.n, 3 * c.replicas as u64 * effective_steps(c) / 2, 0)],
    },
    Experiment {
        name: "drift-budget",
        description: "the expected quadratic drift cost stays in a factor-two band across a \
                      dyadic lattice-spacing sweep with no monotone trend",
        criteria: &[8],
        run: run_drift_budget,
        reference: || {
            let mut c = base(18);
            c.eps_sweep = vec![16, 32, 64];
            c.replicas = 64;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, c.replicas as u64 * effective_steps(c), 0))
                .collect()
        },
    },
    Experiment {
        name: "smallscale-scaling",
        description: "the root drift budget below scale t vanishes at a power-law rate in t \
                      over the smallest two dyadic decades",
        criteria: &[9],
        run: run_smallscale_scaling,
        reference: || {
            let mut c = base(19);
            c.n = 32;
            c.replicas = 200;
            c
        },
        work: |c| vec![(c.n, c.replicas as u64 * effective_steps(c), 0)],
    },
    Experiment {
        name: "h1-uniformity",
        description: "Sobolev norms of the difference field stay in a factor-two band across \
                      the lattice sweep, the high-regularity norm is finite away from scale \
                      zero, and small-scale increments vanish towards scale zero",
        criteria: &[10],
        run: run_h1_uniformity,
        reference: || {
            let mut c = base(18);
            c.eps_sweep = vec![16, 32, 64];
            c.replicas = 64;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, c.replicas as u64 * effective_steps(c), 0))
                .collect()
        },
    },
    Experiment {
        name: "drift-lemma-constants",
        description: "integrated-drift norms divided by their scale budgets admit a uniform \
                      constant over random and flow-produced drifts",
        criteria: &[11],
        run: run_drift_lemma_constants,
        reference: || {
            let mut c = base(20);
            c.replicas = 1000;
            c
        },
        work: |c| vec![(8, 16 * 12, 14 * c.replicas as u64), (16, 16 * 12, 14 * c.replicas as u64)],
    },
    Experiment {
        name: "wick-regularity",
        description: "the negative-regularity norm of the Wick exponential of the free field \
                      is stable across lattice spacings inside the square-integrable phase and \
                      grows outside it",
        criteria: &[12],
        run: run_wick_regularity,
        reference: || {
            let mut c = base(21);
            c.eps_sweep = vec![16, 32, 64, 128];
            c.replicas = 256;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, 0, 2 * c.replicas as u64))
                .collect()
        },
    },
    Experiment {
        name: "brascamp-lieb",
        description: "exponential moments and Wick norms of the even-interaction field are \
                      dominated by their free-field counterparts",
        criteria: &[13],
        run: run_brascamp_lieb,
        reference: || {
            let mut c = base(22);
            c.model = ModelKind::SinhGordon;
            c.n = 8;
            c.replicas = 800;
            c
        },
        work: |c| vec![(c.n, c.replicas as u64 * effective_steps(c), c.replicas as u64)],
    },
    Experiment {
        name: "gmc-cauchy",
        description: "chaos masses keep unit mean at every resolution and, under shared \
                      spectral noise, consecutive-resolution differences shrink",
        criteria: &[14],
        run: run_gmc_cauchy,
        reference: || {
            let mut c = base(23);
            c.eps_sweep = vec![16, 32, 64, 128];
            c.replicas = 1000;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, 0, c.replicas as u64))
                .collect()
        },
    },
    Experiment {
        name: "max-recentering",
        description: "the recentred maximum has a stable interquartile range across lattice \
                      spacings, and the interacting median sits below the free one",
        criteria: &[15],
        run: run_max_recentering,
        reference: || {
            let mut c = base(24);
            c.eps_sweep = vec![32, 64, 128];
            c.replicas = 400;
            c
        },
        work: |c| {
            c.eps_sweep
                .iter()
                .map(|&n| (n, 0, 12 * c.replicas as u64))
                .collect()
        },
    },
];

// ---------------------------------------------------------------------------
// dry-run cost model
// ---------------------------------------------------------------------------

/// Estimated wall seconds for an experiment: each work phase is priced by
/// timing one drift evaluation and one spectral sample at its lattice size.
pub fn estimate_seconds(exp: &Experiment, cfg: &RunConfig) -> Result<f64> {
    let mut total = 0.0;
    for (n, drift_evals, gff_samples) in (exp.work)(cfg) {
        let scale = ScaleParams::new(cfg.mass, TorusGrid::new(n)?)?;
        let mp = ModelParams::new(cfg.model, cfg.beta, cfg.lambda.max(0.5), scale)?;
        let cov = scale.c_hat_table(f64::INFINITY)?;
        let mut rng = derived_rng(0xd27, &[n as u64]);
        let phi = sample_gaussian(scale.grid(), &cov, &mut rng)?;

        let t0 = Instant::now();
        let reps = 3;
        for _ in 0..reps {
            let _ = crate::renorm::grad_vt_estimate(
                &phi,
                1.0,
                &mp,
                cfg.wick,
                cfg.mc_samples_flow,
                &mut rng,
            )?;
        }
        let drift_cost = t0.elapsed().as_secs_f64() / reps as f64;

        let t1 = Instant::now();
        let sample_reps = 20;
        for _ in 0..sample_reps {
            let _ = sample_gaussian(scale.grid(), &cov, &mut rng)?;
        }
        let sample_cost = t1.elapsed().as_secs_f64() / sample_reps as f64;

        total += drift_evals as f64 * drift_cost + gff_samples as f64 * sample_cost;
    }
    // ensembles run data-parallel; price in the active worker count
    #[cfg(feature = "parallel")]
    let workers = rayon::current_num_threads().max(1) as f64;
    #[cfg(not(feature = "parallel"))]
    let workers = 1.0;
    Ok(total / workers)
}
