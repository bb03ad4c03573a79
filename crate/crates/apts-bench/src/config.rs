//! Flat `key = value` run configuration with `#` comments.
//!
//! Unknown keys are rejected with the key name and line number; duplicate
//! keys are rejected the same way so typos never silently lose a setting.

use std::path::{Path, PathBuf};

use apts::apts::MomentPolicy;
use apts::net::Activation;
use apts::vector::Norm;
use apts::trust_region::ProxyKind;

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
    Tr,
    Apts,
    Iapts,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Tr => "tr",
            OptimizerKind::Apts => "apts",
            OptimizerKind::Iapts => "iapts",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetKind {
    TwoMoons,
    Idx { images: PathBuf, labels: PathBuf },
    Rosenbrock,
    Quadratic { dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchModeKind {
    Full,
    Sequential,
    Shuffled,
}

/// Everything a benchmark run needs, resolved to concrete values.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub optimizer: OptimizerKind,
    pub dataset: DatasetKind,
    /// Hidden layer widths for network datasets.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub samples: usize,
    pub noise: f64,
    pub data_seed: u64,
    pub seeds: Vec<u64>,
    pub epochs: u64,
    pub batch_size: usize,
    pub batch_mode: BatchModeKind,
    /// Baseline learning rate; per-optimizer default when absent.
    pub lr: f64,
    pub momentum: f64,
    pub subdomains: usize,
    pub inner_iters: usize,
    pub local_iters: usize,
    pub global_tr_iters: usize,
    pub delta_init: f64,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma_dec: f64,
    pub gamma_inc: f64,
    pub tr_norm: Norm,
    pub tr_proxy: ProxyKind,
    pub moment_policy: MomentPolicy,
    pub radius_feedback: bool,
    /// When off (the default) the CSV's wall_time_s column is a fixed 0.000
    /// so reruns are byte-identical; measured time still reaches stdout.
    pub wall_clock: bool,
    pub output: PathBuf,
}

const ADAM_DEFAULT_LR: f64 = 0.0025;
const SGD_DEFAULT_LR: f64 = 0.1;

pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let mut optimizer: Option<OptimizerKind> = None;
    let mut dataset: Option<String> = None;
    let mut idx_images: Option<PathBuf> = None;
    let mut idx_labels: Option<PathBuf> = None;
    let mut dim = 8usize;
    let mut hidden = vec![16usize];
    let mut activation = Activation::Tanh;
    let mut samples = 1000usize;
    let mut noise = 0.1f64;
    let mut data_seed = 0u64;
    let mut seeds = vec![1u64, 2, 3, 4, 5];
    let mut epochs = 50u64;
    let mut batch_size = 100usize;
    let mut batch_mode = BatchModeKind::Shuffled;
    let mut lr: Option<f64> = None;
    let mut momentum = 0.9f64;
    let mut subdomains = 2usize;
    let mut inner_iters = 3usize;
    let mut local_iters = 5usize;
    let mut global_tr_iters = 1usize;
    let mut delta_init = 1.0f64;
    let mut lr_init = 0.01f64;
    let mut lr_min = 0.001f64;
    let mut lr_max = 1.0f64;
    let mut eta1 = 0.1f64;
    let mut eta2 = 0.75f64;
    let mut gamma_dec = 0.5f64;
    let mut gamma_inc = 2.0f64;
    let mut tr_norm: Option<Norm> = None;
    let mut tr_proxy = "identity".to_string();
    let mut lbfgs_memory = 10usize;
    let mut moment_policy = MomentPolicy::Reset;
    let mut radius_feedback = true;
    let mut wall_clock = false;
    let mut output = PathBuf::from("metrics.csv");

    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::config(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(HarnessError::config(line_no, "empty key"));
        }
        if seen.iter().any(|k| k == key) {
            return Err(HarnessError::config(
                line_no,
                format!("duplicate key `{key}`"),
            ));
        }
        seen.push(key.to_string());

        let bad = |msg: String| HarnessError::config(line_no, msg);
        macro_rules! parse_as {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|_| {
                    bad(format!(
                        "key `{key}`: cannot parse `{value}` as {}",
                        stringify!($ty)
                    ))
                })?
            };
        }

        match key {
            "optimizer" => {
                optimizer = Some(match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    "tr" => OptimizerKind::Tr,
                    "apts" => OptimizerKind::Apts,
                    "iapts" => OptimizerKind::Iapts,
                    _ => {
                        return Err(bad(format!(
                            "key `optimizer`: unknown optimizer `{value}` \
                             (expected adam, sgd, tr, apts, or iapts)"
                        )))
                    }
                })
            }
            "dataset" => dataset = Some(value.to_string()),
            "idx_images" => idx_images = Some(PathBuf::from(value)),
            "idx_labels" => idx_labels = Some(PathBuf::from(value)),
            "dim" => dim = parse_as!(usize),
            "hidden" => {
                hidden = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| {
                        bad(format!(
                            "key `hidden`: expected comma-separated widths, got `{value}`"
                        ))
                    })?
            }
            "activation" => {
                activation = match value {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    "identity" => Activation::Identity,
                    _ => {
                        return Err(bad(format!(
                            "key `activation`: unknown activation `{value}`"
                        )))
                    }
                }
            }
            "samples" => samples = parse_as!(usize),
            "noise" => noise = parse_as!(f64),
            "data_seed" => data_seed = parse_as!(u64),
            "seeds" => {
                seeds = value
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| {
                        bad(format!(
                            "key `seeds`: expected comma-separated integers, got `{value}`"
                        ))
                    })?
            }
            "epochs" => epochs = parse_as!(u64),
            "batch_size" => batch_size = parse_as!(usize),
            "batch_mode" => {
                batch_mode = match value {
                    "full" => BatchModeKind::Full,
                    "sequential" => BatchModeKind::Sequential,
                    "shuffled" => BatchModeKind::Shuffled,
                    _ => {
                        return Err(bad(format!(
                            "key `batch_mode`: unknown mode `{value}`"
                        )))
                    }
                }
            }
            "lr" => lr = Some(parse_as!(f64)),
            "momentum" => momentum = parse_as!(f64),
            "subdomains" => subdomains = parse_as!(usize),
            "inner_iters" => inner_iters = parse_as!(usize),
            "local_iters" => local_iters = parse_as!(usize),
            "global_tr_iters" => global_tr_iters = parse_as!(usize),
            "delta_init" => delta_init = parse_as!(f64),
            "lr_init" => lr_init = parse_as!(f64),
            "lr_min" => lr_min = parse_as!(f64),
            "lr_max" => lr_max = parse_as!(f64),
            "eta1" => eta1 = parse_as!(f64),
            "eta2" => eta2 = parse_as!(f64),
            "gamma_dec" => gamma_dec = parse_as!(f64),
            "gamma_inc" => gamma_inc = parse_as!(f64),
            "tr_norm" => {
                tr_norm = Some(match value {
                    "l2" => Norm::L2,
                    "linf" => Norm::Linf,
                    _ => return Err(bad(format!("key `tr_norm`: unknown norm `{value}`"))),
                })
            }
            "tr_proxy" => {
                if value != "identity" && value != "lbfgs" {
                    return Err(bad(format!("key `tr_proxy`: unknown proxy `{value}`")));
                }
                tr_proxy = value.to_string();
            }
            "lbfgs_memory" => lbfgs_memory = parse_as!(usize),
            "moment_policy" => {
                moment_policy = match value {
                    "reset" => MomentPolicy::Reset,
                    "persist" => MomentPolicy::Persist,
                    _ => {
                        return Err(bad(format!(
                            "key `moment_policy`: expected reset or persist, got `{value}`"
                        )))
                    }
                }
            }
            "radius_feedback" => radius_feedback = parse_as!(bool),
            "wall_clock" => wall_clock = parse_as!(bool),
            "output" => output = PathBuf::from(value),
            _ => {
                return Err(HarnessError::config(
                    line_no,
                    format!("unknown key `{key}`"),
                ))
            }
        }
    }

    let optimizer =
        optimizer.ok_or_else(|| HarnessError::invalid("missing required key `optimizer`"))?;
    let dataset = match dataset.as_deref() {
        None => return Err(HarnessError::invalid("missing required key `dataset`")),
        Some("two_moons") => DatasetKind::TwoMoons,
        Some("rosenbrock") => DatasetKind::Rosenbrock,
        Some("quadratic") => DatasetKind::Quadratic { dim },
        Some("idx") => {
            let images = idx_images.ok_or_else(|| {
                HarnessError::invalid("dataset `idx` requires the `idx_images` key")
            })?;
            let labels = idx_labels.ok_or_else(|| {
                HarnessError::invalid("dataset `idx` requires the `idx_labels` key")
            })?;
            DatasetKind::Idx { images, labels }
        }
        Some(other) => {
            return Err(HarnessError::invalid(format!(
                "unknown dataset `{other}` (expected two_moons, idx, quadratic, or rosenbrock)"
            )))
        }
    };

    if seeds.is_empty() {
        return Err(HarnessError::invalid("`seeds` must not be empty"));
    }
    if hidden.iter().any(|&h| h == 0) {
        return Err(HarnessError::invalid("`hidden` widths must be positive"));
    }
    if batch_size == 0 {
        return Err(HarnessError::invalid("`batch_size` must be at least 1"));
    }

    let lr = lr.unwrap_or(match optimizer {
        OptimizerKind::Sgd => SGD_DEFAULT_LR,
        _ => ADAM_DEFAULT_LR,
    });
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(HarnessError::invalid(format!(
            "`lr` must be positive and finite, got {lr}"
        )));
    }

    // plain trust-region descent defaults to the Euclidean ball; the
    // decomposed strategies default to the max norm
    let tr_norm = tr_norm.unwrap_or(match optimizer {
        OptimizerKind::Tr => Norm::L2,
        _ => Norm::Linf,
    });
    let tr_proxy = if tr_proxy == "lbfgs" {
        if lbfgs_memory == 0 {
            return Err(HarnessError::invalid("`lbfgs_memory` must be at least 1"));
        }
        ProxyKind::Lbfgs {
            memory: lbfgs_memory,
        }
    } else {
        ProxyKind::Identity
    };

    Ok(RunConfig {
        optimizer,
        dataset,
        hidden,
        activation,
        samples,
        noise,
        data_seed,
        seeds,
        epochs,
        batch_size,
        batch_mode,
        lr,
        momentum,
        subdomains,
        inner_iters,
        local_iters,
        global_tr_iters,
        delta_init,
        lr_init,
        lr_min,
        lr_max,
        eta1,
        eta2,
        gamma_dec,
        gamma_inc,
        tr_norm,
        tr_proxy,
        moment_policy,
        radius_feedback,
        wall_clock,
        output,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("optimizer = adam\ndataset = two_moons\n").unwrap();
        assert_eq!(cfg.optimizer, OptimizerKind::Adam);
        assert_eq!(cfg.lr, ADAM_DEFAULT_LR);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.epochs, 50);
        assert!(!cfg.wall_clock);

        let cfg = parse_config("optimizer = sgd\ndataset = two_moons\n").unwrap();
        assert_eq!(cfg.lr, SGD_DEFAULT_LR);
        assert_eq!(cfg.momentum, 0.9);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\noptimizer = iapts   # trailing comment\n dataset = two_moons \n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.optimizer, OptimizerKind::Iapts);
    }

    #[test]
    fn unknown_keys_name_key_and_line() {
        let err = parse_config("optimizer = adam\ndataset = two_moons\nlernrate = 3\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("lernrate"), "{msg}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err =
            parse_config("optimizer = adam\noptimizer = sgd\ndataset = two_moons\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key `optimizer`"));
    }

    #[test]
    fn value_parse_errors_name_the_key() {
        let err = parse_config("optimizer = adam\ndataset = two_moons\nepochs = soon\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epochs"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn missing_required_keys() {
        assert!(parse_config("dataset = two_moons\n").is_err());
        assert!(parse_config("optimizer = adam\n").is_err());
        assert!(parse_config("optimizer = adam\ndataset = idx\n").is_err());
    }

    #[test]
    fn norm_defaults_depend_on_optimizer() {
        let tr = parse_config("optimizer = tr\ndataset = rosenbrock\n").unwrap();
        assert_eq!(tr.tr_norm, Norm::L2);
        let apts = parse_config("optimizer = apts\ndataset = rosenbrock\n").unwrap();
        assert_eq!(apts.tr_norm, Norm::Linf);
        let explicit =
            parse_config("optimizer = tr\ndataset = rosenbrock\ntr_norm = linf\n").unwrap();
        assert_eq!(explicit.tr_norm, Norm::Linf);
    }

    #[test]
    fn lists_and_enums_parse() {
        let cfg = parse_config(
            "optimizer = iapts\ndataset = two_moons\nseeds = 7, 8,9\nhidden = 32, 16\n\
             moment_policy = persist\ntr_proxy = lbfgs\nbatch_mode = sequential\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![7, 8, 9]);
        assert_eq!(cfg.hidden, vec![32, 16]);
        assert_eq!(cfg.moment_policy, MomentPolicy::Persist);
        assert_eq!(cfg.tr_proxy, ProxyKind::Lbfgs { memory: 10 });
        assert_eq!(cfg.batch_mode, BatchModeKind::Sequential);
    }
}
