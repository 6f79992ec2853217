//! Monte Carlo sweeps and the staged convergence experiment.
//!
//! Every realization derives all of its randomness from
//! `realization_seed(base_seed, r)`, independent of sweep point and scheme, so
//! schemes and sweep points see paired channel draws and results do not depend
//! on how realizations are scheduled across threads.

use fim_core::bcd::{initialize_shapes, run_bcd_from};
use fim_core::{BcdConfig, FimChannel, PowerPolicy, Scheme};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::HarnessError;
use crate::scenario::{realization_seed, run_realization, Scenario, SchemeResult};
use crate::table::{gain_db, Metadata, ResultRow, ResultTable, Table, TraceRow, TraceTable};

/// Output of [`run`]: a statistics table or a per-iteration trace table.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Sweep(ResultTable),
    Convergence(TraceTable),
}

impl ExperimentOutput {
    pub fn render(&self, format: crate::table::Format) -> String {
        match self {
            ExperimentOutput::Sweep(t) => t.render(format),
            ExperimentOutput::Convergence(t) => t.render(format),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    match threads {
        Some(0) => Err(HarnessError::Config("threads: must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Config(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs the experiment described by `cfg` on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    match cfg.experiment.kind {
        ExperimentKind::Sweep => run_experiment(cfg).map(ExperimentOutput::Sweep),
        ExperimentKind::Convergence => convergence_trace_experiment(cfg).map(ExperimentOutput::Convergence),
    }
}

/// Per-realization results of every scheme at every sweep point,
/// indexed `[point][realization][scheme]`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Vec<Vec<SchemeResult>>>, HarnessError> {
    cfg.validate()?;
    let schemes = cfg.schemes()?;
    let points = cfg.sweep_points();
    let scenarios = points
        .iter()
        .map(|&v| Scenario::from_config(&cfg.at_sweep_point(v)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = cfg.experiment.realizations;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..n).map(move |r| (p, r))).collect();
    let flat: Vec<Vec<SchemeResult>> = jobs
        .par_iter()
        .map(|&(p, r)| run_realization(&scenarios[p], &schemes, realization_seed(cfg.experiment.seed, r)))
        .collect::<Result<_, _>>()?;
    let mut it = flat.into_iter();
    Ok((0..points.len()).map(|_| it.by_ref().take(n).collect()).collect())
}

/// Aggregates capacities (and optionally eigenchannel gains) per sweep point and scheme.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    let results = simulate(cfg)?;
    let schemes = cfg.schemes()?;
    let points = cfg.sweep_points();
    let mut rows = Vec::with_capacity(points.len() * schemes.len());
    for (p, &value) in points.iter().enumerate() {
        for (s, scheme) in schemes.iter().enumerate() {
            let caps: Vec<f64> = results[p].iter().map(|real| real[s].capacity).collect();
            let mean = caps.iter().sum::<f64>() / caps.len() as f64;
            let min = caps.iter().copied().fold(f64::INFINITY, f64::min);
            let max = caps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let eigen_gains_db = cfg.experiment.eigen_gains.then(|| {
                let modes = results[p][0][s].eigen_gains.len();
                (0..modes)
                    .map(|k| {
                        let mean = results[p].iter().map(|real| real[s].eigen_gains[k]).sum::<f64>() / caps.len() as f64;
                        gain_db(mean)
                    })
                    .collect()
            });
            rows.push(ResultRow {
                sweep_variable: cfg.sweep.variable.name().to_string(),
                sweep_value: value,
                scheme: scheme.name().to_string(),
                realizations: caps.len(),
                // Rounding in the sum can leave the mean a few ulps outside [min, max].
                mean_capacity: mean.clamp(min, max),
                min_capacity: min,
                max_capacity: max,
                eigen_gains_db,
                capacities: cfg.experiment.record_realizations.then_some(caps),
            });
        }
    }
    Ok(Table {
        meta: Metadata::for_config(cfg, "sweep"),
        rows,
    })
}

/// Staged FIM-WPA optimization: each stage runs a fixed number of outer
/// iterations with its own morphing range, warm-started from the previous
/// stage's shapes. Deformations are reported in wavelengths.
pub fn convergence_trace_experiment(cfg: &ExperimentConfig) -> Result<TraceTable, HarnessError> {
    cfg.validate()?;
    let scenario = Scenario::from_config(cfg)?;
    let stages = &cfg.convergence.stage_ranges_wavelengths;
    let per_stage = cfg.convergence.iterations_per_stage;
    let lambda = scenario.wavelength();
    let per_realization: Vec<Vec<TraceRow>> = (0..cfg.experiment.realizations)
        .into_par_iter()
        .map(|r| -> Result<Vec<TraceRow>, HarnessError> {
            let seed = realization_seed(cfg.experiment.seed, r);
            let (truth, _) = scenario.environments(seed)?;
            let channel = FimChannel::new(&truth, &scenario.link);
            let base = BcdConfig {
                max_outer_iterations: per_stage,
                power: PowerPolicy::WaterFilling,
                ..scenario.bcd_config(seed)
            };
            let first = stages[0] * lambda;
            let init = initialize_shapes(
                &channel,
                (first, first),
                scenario.power_budget,
                scenario.noise_power,
                base.init,
                base.power,
                base.seed,
            )?;
            let (mut zeta, mut xi) = (init.zeta, init.xi);
            let mut rows = Vec::new();
            let mut iteration = 0;
            for (stage, &range) in stages.iter().enumerate() {
                let bound = range * lambda;
                zeta = zeta.with_bound(bound);
                xi = xi.with_bound(bound);
                let report =
                    run_bcd_from(&channel, &zeta, &xi, scenario.power_budget, scenario.noise_power, &base, false)?;
                // Entry 0 of later stages repeats the previous stage's final shapes.
                let skip = usize::from(stage > 0);
                for (cap, (z, x)) in report.capacity_trace.iter().zip(&report.shape_trace).skip(skip) {
                    rows.push(TraceRow {
                        realization: r,
                        iteration,
                        stage: stage + 1,
                        range_wavelengths: range,
                        capacity: *cap,
                        tx_deformations_wavelengths: z.deformations.iter().map(|d| d / lambda).collect(),
                        rx_deformations_wavelengths: x.deformations.iter().map(|d| d / lambda).collect(),
                    });
                    iteration += 1;
                }
                zeta = report.zeta;
                xi = report.xi;
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    Ok(Table {
        meta: Metadata::for_config(cfg, "convergence"),
        rows: per_realization.into_iter().flatten().collect(),
    })
}

/// Runs all four schemes on realization 0 of the base configuration.
pub fn demo(cfg: &ExperimentConfig) -> Result<Vec<SchemeResult>, HarnessError> {
    let scenario = Scenario::from_config(cfg)?;
    run_realization(&scenario, &Scheme::ALL, realization_seed(cfg.experiment.seed, 0))
}
