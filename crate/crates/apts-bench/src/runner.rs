//! Deterministic experiment runs.
//!
//! A run trains one problem with one optimizer over a list of seeds and
//! writes a metrics CSV: one block of rows per seed (including an epoch-0
//! row for the initial state), then per-epoch rows averaged across the
//! seeds that finished. With the wall clock disabled (the default) the
//! file is byte-identical across reruns; measured time still reaches the
//! run summary.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use apts::apts::{AptsConfig, AptsDriver, LocalSolver};
use apts::data::{batches, load_idx, two_moons, BatchMode, BatchSchedule, Dataset, Targets};
use apts::decomp::PartitionStrategy;
use apts::iapts::{IaptsConfig, IaptsDriver};
use apts::net::{Activation, MlpSpec, NetObjective};
use apts::objective::{BatchRef, Objective, QuadraticObjective, RosenbrockObjective};
use apts::trust_region::{tr_step, TrParams, TrState};
use apts::vector::ParamVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{AdamState, SgdState};
use crate::config::{BatchModeKind, DatasetKind, OptimizerKind, RunConfig};
use crate::HarnessError;

pub const CSV_HEADER: &str =
    "seed,epoch,train_loss,train_accuracy,delta_G,accepted_ratio,wall_time_s";

/// One CSV row's numeric payload. `accuracy` is NaN for problems without
/// class labels.
#[derive(Clone, Copy, Debug)]
pub struct EpochMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub delta: f64,
    pub accepted_ratio: f64,
    pub wall_s: f64,
}

pub fn format_row(seed_field: &str, epoch: u64, m: &EpochMetrics) -> String {
    format!(
        "{seed_field},{epoch},{:.9},{:.6},{:.9},{:.6},{:.3}",
        m.loss, m.accuracy, m.delta, m.accepted_ratio, m.wall_s
    )
}

/// Outcome of a full experiment, after the CSV has been written.
#[derive(Clone, Debug)]
pub struct RunSummary {
    /// `(seed, final loss, final accuracy)` for each seed that finished.
    pub per_seed_final: Vec<(u64, f64, f64)>,
    /// Seeds whose run errored, with the message.
    pub failed_seeds: Vec<(u64, String)>,
    pub mean_final_loss: f64,
    pub mean_final_accuracy: f64,
    pub epochs: u64,
    /// Always measured, independent of the `wall_clock` switch.
    pub total_wall_s: f64,
}

/// The problem a run trains, fixed across seeds.
enum Problem {
    Net {
        spec: MlpSpec,
        obj: NetObjective,
        data: Arc<Dataset>,
    },
    Func {
        obj: Box<dyn Objective>,
        /// A conventional start point; seeds draw one from [−2, 2)ᵈ when
        /// absent.
        fixed_start: Option<Vec<f64>>,
    },
}

impl Problem {
    fn objective(&self) -> &dyn Objective {
        match self {
            Problem::Net { obj, .. } => obj,
            Problem::Func { obj, .. } => obj.as_ref(),
        }
    }

    /// Full-dataset loss and accuracy (NaN when labels don't apply).
    fn metrics(&self, theta: &ParamVector) -> Result<(f64, f64), HarnessError> {
        let loss = self.objective().loss(theta, &BatchRef::Full)?;
        let accuracy = match self {
            Problem::Net { obj, data, .. } => match data.targets() {
                Targets::Labels { .. } => obj.accuracy(theta, &BatchRef::Full)?,
                Targets::Values(_) => f64::NAN,
            },
            Problem::Func { .. } => f64::NAN,
        };
        Ok((loss, accuracy))
    }

    fn initial_theta(&self, seed: u64) -> ParamVector {
        match self {
            Problem::Net { spec, .. } => spec.init_params(seed),
            Problem::Func { obj, fixed_start } => {
                if let Some(start) = fixed_start {
                    return ParamVector::from_slice(start).expect("finite start point");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let vals: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
                ParamVector::from_slice(&vals).expect("finite start point")
            }
        }
    }
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, HarnessError> {
    match &cfg.dataset {
        DatasetKind::TwoMoons => {
            let data = Arc::new(two_moons(cfg.samples, cfg.noise, cfg.data_seed)?);
            net_problem(cfg, data)
        }
        DatasetKind::Idx { images, labels } => {
            let data = Arc::new(load_idx(images, labels)?);
            net_problem(cfg, data)
        }
        DatasetKind::Rosenbrock => Ok(Problem::Func {
            obj: Box::new(RosenbrockObjective),
            fixed_start: Some(vec![-1.2, 1.0]),
        }),
        DatasetKind::Quadratic { dim } => {
            if *dim == 0 {
                return Err(HarnessError::invalid("`dim` must be at least 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
            let a: Vec<f64> = (0..*dim).map(|_| rng.random_range(0.5..1.5)).collect();
            let a = ParamVector::from_slice(&a)?;
            let b = ParamVector::zeros(*dim);
            Ok(Problem::Func {
                obj: Box::new(QuadraticObjective::new(a, b)?),
                fixed_start: None,
            })
        }
    }
}

fn net_problem(cfg: &RunConfig, data: Arc<Dataset>) -> Result<Problem, HarnessError> {
    let mut sizes = vec![data.input_dim()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(data.output_dim());
    let layers = sizes.len() - 1;
    let mut activations = vec![cfg.activation; layers];
    let head = match data.targets() {
        Targets::Labels { .. } => Activation::SoftmaxXent,
        Targets::Values(_) => Activation::Identity,
    };
    activations[layers - 1] = head;
    let spec = MlpSpec::new(sizes, activations)?;
    let obj = NetObjective::new(spec.clone(), Arc::clone(&data))?;
    Ok(Problem::Net { spec, obj, data })
}

fn tr_params_from(cfg: &RunConfig) -> TrParams {
    TrParams {
        eta1: cfg.eta1,
        eta2: cfg.eta2,
        gamma_dec: cfg.gamma_dec,
        gamma_inc: cfg.gamma_inc,
        norm: cfg.tr_norm,
        proxy: cfg.tr_proxy,
        ..TrParams::default()
    }
}

fn apts_config_from(cfg: &RunConfig) -> AptsConfig {
    AptsConfig {
        subdomain_count: cfg.subdomains,
        inner_iters: cfg.inner_iters,
        global_tr_iters: cfg.global_tr_iters,
        delta_init: cfg.delta_init,
        tr: tr_params_from(cfg),
        local_solver: LocalSolver::TrustRegion,
        partition: PartitionStrategy::EvenBlocks,
        moment_policy: cfg.moment_policy,
        radius_feedback: cfg.radius_feedback,
    }
}

fn iapts_config_from(cfg: &RunConfig) -> IaptsConfig {
    IaptsConfig {
        subdomain_count: cfg.subdomains,
        local_iters: cfg.local_iters,
        global_tr_iters: cfg.global_tr_iters,
        lr_init: cfg.lr_init,
        lr_min: cfg.lr_min,
        lr_max: cfg.lr_max,
        tr: tr_params_from(cfg),
        moment_policy: cfg.moment_policy,
        radius_feedback: cfg.radius_feedback,
    }
}

/// Batches for one epoch; functions always train on the full "batch".
fn epoch_batches(
    cfg: &RunConfig,
    problem: &Problem,
    seed: u64,
    epoch: u64,
) -> Result<Vec<BatchRef>, HarnessError> {
    match problem {
        Problem::Func { .. } => Ok(vec![BatchRef::Full]),
        Problem::Net { data, .. } => {
            let schedule = BatchSchedule {
                mode: match cfg.batch_mode {
                    BatchModeKind::Full => BatchMode::Full,
                    BatchModeKind::Sequential => BatchMode::Sequential,
                    BatchModeKind::Shuffled => BatchMode::Shuffled,
                },
                batch_size: cfg.batch_size,
                seed,
            };
            Ok(batches(data, &schedule, epoch)?)
        }
    }
}

/// Per-epoch step statistics fed into the CSV row.
struct EpochStats {
    delta: f64,
    accepted: usize,
    total: usize,
}

impl EpochStats {
    fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.accepted as f64 / self.total as f64
        }
    }
}

fn run_seed(
    cfg: &RunConfig,
    problem: &Problem,
    seed: u64,
) -> Result<Vec<EpochMetrics>, HarnessError> {
    let theta0 = problem.initial_theta(seed);
    let initial_delta = match cfg.optimizer {
        OptimizerKind::Adam | OptimizerKind::Sgd => cfg.lr,
        OptimizerKind::Tr | OptimizerKind::Apts => cfg.delta_init,
        OptimizerKind::Iapts => cfg.lr_init,
    };

    let (loss0, acc0) = problem.metrics(&theta0)?;
    let mut rows = vec![EpochMetrics {
        loss: loss0,
        accuracy: acc0,
        delta: initial_delta,
        accepted_ratio: 0.0,
        wall_s: 0.0,
    }];

    // per-optimizer driver state, created once per seed
    enum Driver<'p> {
        Adam {
            theta: Vec<f64>,
            state: AdamState,
        },
        Sgd {
            theta: Vec<f64>,
            state: SgdState,
        },
        Tr {
            state: TrState,
            params: TrParams,
        },
        Apts(AptsDriver<'p>),
        Iapts(IaptsDriver),
    }

    let dim = theta0.len();
    let mut driver = match cfg.optimizer {
        OptimizerKind::Adam => Driver::Adam {
            theta: theta0.as_slice().to_vec(),
            state: AdamState::new(dim, cfg.lr),
        },
        OptimizerKind::Sgd => Driver::Sgd {
            theta: theta0.as_slice().to_vec(),
            state: SgdState::new(dim, cfg.lr, cfg.momentum),
        },
        OptimizerKind::Tr => {
            let params = tr_params_from(cfg);
            Driver::Tr {
                state: TrState::new(theta0.clone(), cfg.delta_init, &params)?,
                params,
            }
        }
        OptimizerKind::Apts => Driver::Apts(AptsDriver::new(
            problem.objective(),
            theta0.clone(),
            apts_config_from(cfg),
        )?),
        OptimizerKind::Iapts => match problem {
            Problem::Net { spec, data, .. } => Driver::Iapts(IaptsDriver::new(
                spec.clone(),
                Arc::clone(data),
                theta0.clone(),
                iapts_config_from(cfg),
            )?),
            Problem::Func { .. } => {
                return Err(HarnessError::invalid(
                    "optimizer `iapts` needs a network dataset (two_moons or idx)",
                ))
            }
        },
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut stats = EpochStats {
            delta: initial_delta,
            accepted: 0,
            total: 0,
        };

        for batch in epoch_batches(cfg, problem, seed, epoch)? {
            match &mut driver {
                Driver::Adam { theta, state } => {
                    let tv = ParamVector::from_slice(theta)?;
                    let (_, grad) = problem.objective().eval(&tv, &batch)?;
                    state.step(theta, grad.as_slice());
                    stats.accepted += 1;
                    stats.total += 1;
                    stats.delta = cfg.lr;
                }
                Driver::Sgd { theta, state } => {
                    let tv = ParamVector::from_slice(theta)?;
                    let (_, grad) = problem.objective().eval(&tv, &batch)?;
                    state.step(theta, grad.as_slice());
                    stats.accepted += 1;
                    stats.total += 1;
                    stats.delta = cfg.lr;
                }
                Driver::Tr { state, params } => {
                    let it = tr_step(problem.objective(), &batch, state, params)?;
                    stats.accepted += it.accepted as usize;
                    stats.total += 1;
                    stats.delta = state.delta();
                }
                Driver::Apts(driver) => {
                    let rec = driver.outer_iteration(&batch)?;
                    stats.accepted += rec.accepted as usize;
                    stats.total += 1;
                    stats.delta = driver.delta();
                }
                Driver::Iapts(driver) => {
                    let rec = driver.outer_iteration(&batch)?;
                    stats.accepted += rec.accepted as usize;
                    stats.total += 1;
                    stats.delta = driver.delta();
                }
            }
        }

        let theta_now;
        let theta_ref: &ParamVector = match &driver {
            Driver::Adam { theta, .. } | Driver::Sgd { theta, .. } => {
                theta_now = ParamVector::from_slice(theta)?;
                &theta_now
            }
            Driver::Tr { state, .. } => state.theta(),
            Driver::Apts(d) => d.theta(),
            Driver::Iapts(d) => d.theta(),
        };
        let (loss, accuracy) = problem.metrics(theta_ref)?;
        let elapsed = started.elapsed().as_secs_f64();
        rows.push(EpochMetrics {
            loss,
            accuracy,
            delta: stats.delta,
            accepted_ratio: stats.ratio(),
            wall_s: if cfg.wall_clock { elapsed } else { 0.0 },
        });
    }
    Ok(rows)
}

fn mean_rows(per_seed: &[Vec<EpochMetrics>]) -> Vec<EpochMetrics> {
    if per_seed.is_empty() {
        return Vec::new();
    }
    let epochs = per_seed.iter().map(|r| r.len()).min().unwrap_or(0);
    let n = per_seed.len() as f64;
    (0..epochs)
        .map(|e| {
            let mut m = EpochMetrics {
                loss: 0.0,
                accuracy: 0.0,
                delta: 0.0,
                accepted_ratio: 0.0,
                wall_s: 0.0,
            };
            for rows in per_seed {
                m.loss += rows[e].loss;
                m.accuracy += rows[e].accuracy;
                m.delta += rows[e].delta;
                m.accepted_ratio += rows[e].accepted_ratio;
                m.wall_s += rows[e].wall_s;
            }
            m.loss /= n;
            m.accuracy /= n;
            m.delta /= n;
            m.accepted_ratio /= n;
            m.wall_s /= n;
            m
        })
        .collect()
}

/// Runs every seed, renders the CSV text, and returns it with the summary.
/// Seeds that fail leave an `error:<seed>` marker row and are excluded
/// from the mean block; at least one seed must finish.
pub fn run_to_csv(cfg: &RunConfig) -> Result<(String, RunSummary), HarnessError> {
    let started = Instant::now();
    let problem = build_problem(cfg)?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');

    let mut finished: Vec<Vec<EpochMetrics>> = Vec::new();
    let mut per_seed_final = Vec::new();
    let mut failed_seeds = Vec::new();

    for &seed in &cfg.seeds {
        match run_seed(cfg, &problem, seed) {
            Ok(rows) => {
                for (epoch, m) in rows.iter().enumerate() {
                    csv.push_str(&format_row(&seed.to_string(), epoch as u64, m));
                    csv.push('\n');
                }
                if let Some(last) = rows.last() {
                    per_seed_final.push((seed, last.loss, last.accuracy));
                }
                finished.push(rows);
            }
            Err(err) => {
                let nan = EpochMetrics {
                    loss: f64::NAN,
                    accuracy: f64::NAN,
                    delta: f64::NAN,
                    accepted_ratio: f64::NAN,
                    wall_s: 0.0,
                };
                csv.push_str(&format_row(&format!("error:{seed}"), 0, &nan));
                csv.push('\n');
                failed_seeds.push((seed, err.to_string()));
            }
        }
    }

    for (epoch, m) in mean_rows(&finished).iter().enumerate() {
        csv.push_str(&format_row("mean", epoch as u64, m));
        csv.push('\n');
    }

    if finished.is_empty() {
        let detail = failed_seeds
            .first()
            .map(|(s, e)| format!("seed {s}: {e}"))
            .unwrap_or_default();
        return Err(HarnessError::invalid(format!(
            "every seed failed ({detail})"
        )));
    }

    let n = per_seed_final.len() as f64;
    let summary = RunSummary {
        mean_final_loss: per_seed_final.iter().map(|r| r.1).sum::<f64>() / n,
        mean_final_accuracy: per_seed_final.iter().map(|r| r.2).sum::<f64>() / n,
        per_seed_final,
        failed_seeds,
        epochs: cfg.epochs,
        total_wall_s: started.elapsed().as_secs_f64(),
    };
    Ok((csv, summary))
}

/// Runs the experiment and writes the CSV to `cfg.output`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    let (csv, summary) = run_to_csv(cfg)?;
    write_text(&cfg.output, &csv)?;
    Ok(summary)
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
