//! The inexact variant for MLP training.
//!
//! One global forward/backward pass per outer iteration caches every
//! boundary activation and downstream gradient. Layer-block subdomains then
//! take a few unconditional clipped-Adam steps against gradients
//! reconstructed from the cache: the block re-runs its own layers forward
//! from the frozen input activation and backpropagates the frozen downstream
//! factor, so no further global passes are needed until the acceptance test.
//! At the first local iteration the reconstruction is exact.
//!
//! Only the global level adapts the radius, which doubles as the clipped-
//! Adam learning rate (`Δ_G / local_iters` per local step) and stays within
//! `[lr_min, lr_max]`. The acceptance denominator is the first-order model
//! decrease `−⟨∇f(θᵏ), s⟩` of the recombined step.

use std::ops::Range;
use std::sync::Arc;

use crate::apts::{assemble_step, AptsIterationRecord, MomentPolicy};
use crate::cadam::{cadam_step, CAdamState};
use crate::data::Dataset;
use crate::decomp::{layer_block_ranges, Partition};
use crate::error::{Error, Result};
use crate::net::{local_grad_from_cache, LayerCache, MlpSpec, NetObjective};
use crate::objective::{BatchRef, Objective};
use crate::trust_region::{radius_update, rho, tr_run, TrParams};
use crate::vector::{Norm, ParamVector};

#[derive(Clone, Debug)]
pub struct IaptsConfig {
    pub subdomain_count: usize,
    /// Clipped-Adam steps per block per outer iteration.
    pub local_iters: usize,
    /// Plain trust-region smoothing steps after acceptance.
    pub global_tr_iters: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Acceptance thresholds, radius factors, and the step norm. The radius
    /// bounds are overridden by `lr_min`/`lr_max`.
    pub tr: TrParams,
    pub moment_policy: MomentPolicy,
    pub radius_feedback: bool,
}

impl Default for IaptsConfig {
    fn default() -> Self {
        IaptsConfig {
            subdomain_count: 2,
            local_iters: 5,
            global_tr_iters: 1,
            lr_init: 0.01,
            lr_min: 0.001,
            lr_max: 1.0,
            tr: TrParams {
                norm: Norm::Linf,
                ..TrParams::default()
            },
            moment_policy: MomentPolicy::Reset,
            radius_feedback: true,
        }
    }
}

impl IaptsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subdomain_count == 0 {
            return Err(Error::domain("subdomain count must be at least 1"));
        }
        if self.local_iters == 0 {
            return Err(Error::domain("local solves need at least 1 iteration"));
        }
        let bounds_ok = self.lr_min > 0.0
            && self.lr_min <= self.lr_init
            && self.lr_init <= self.lr_max
            && self.lr_max.is_finite();
        if !bounds_ok {
            return Err(Error::domain(format!(
                "learning-rate bounds must satisfy 0 < lr_min ≤ lr_init ≤ lr_max, got {} ≤ {} ≤ {}",
                self.lr_min, self.lr_init, self.lr_max
            )));
        }
        self.bounded_tr().validate()
    }

    /// Trust-region parameters with the radius confined to the
    /// learning-rate window.
    pub fn bounded_tr(&self) -> TrParams {
        let mut p = self.tr.clone();
        p.delta_min = self.lr_min;
        p.delta_max = self.lr_max;
        p
    }
}

/// A contiguous group of weight layers and its slice of the flat parameter
/// vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubdomainBlock {
    pub index: usize,
    pub layers: Range<usize>,
    pub params: Range<usize>,
}

/// Groups the network's weight layers into `blocks` contiguous subdomains,
/// balancing parameter counts.
pub fn layer_blocks(spec: &MlpSpec, blocks: usize) -> Result<Vec<SubdomainBlock>> {
    let counts = spec.layer_param_counts();
    let ranges = layer_block_ranges(&counts, blocks)?;
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    offsets.push(0usize);
    for &c in &counts {
        offsets.push(offsets.last().unwrap() + c);
    }
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(index, layers)| SubdomainBlock {
            index,
            params: offsets[layers.start]..offsets[layers.end],
            layers,
        })
        .collect())
}

fn blocks_to_partition(dim: usize, blocks: &[SubdomainBlock]) -> Result<Partition> {
    Partition::new(
        dim,
        blocks.iter().map(|b| b.params.clone().collect()).collect(),
    )
}

/// The single full-network pass per outer iteration: loss, gradient, and the
/// boundary cache the local phase reads from.
pub fn global_pass_and_cache(
    net: &NetObjective,
    theta: &ParamVector,
    batch: &BatchRef,
) -> Result<(f64, ParamVector, LayerCache)> {
    net.forward_backward(theta, batch)
}

fn solve_block(
    spec: &MlpSpec,
    block: &SubdomainBlock,
    theta: &ParamVector,
    cache: &LayerCache,
    delta_g: f64,
    cfg: &IaptsConfig,
    moments: &mut Option<CAdamState>,
) -> Result<ParamVector> {
    let m = cfg.local_iters;
    let lr = delta_g / m as f64;
    let x0 = ParamVector::from_slice(&theta.as_slice()[block.params.clone()])?;
    let mut state = match moments.take() {
        Some(mut st) => {
            st.set_lr(lr)?;
            st
        }
        None => CAdamState::new(x0.len(), lr)?,
    };
    let mut x = x0.clone();
    for _ in 0..m {
        let g = local_grad_from_cache(spec, &x, cache, block.layers.clone())?;
        let s = cadam_step(&mut state, &g, lr, cfg.tr.norm)?;
        x = x.add(&s)?;
    }
    *moments = Some(state);
    x.sub(&x0)
}

fn run_local_phase(
    spec: &MlpSpec,
    blocks: &[SubdomainBlock],
    theta: &ParamVector,
    cache: &LayerCache,
    delta_g: f64,
    cfg: &IaptsConfig,
    moments: &mut [Option<CAdamState>],
) -> Result<Vec<ParamVector>> {
    let mut results: Vec<Option<Result<ParamVector>>> =
        (0..blocks.len()).map(|_| None).collect();
    if blocks.len() == 1 {
        results[0] = Some(solve_block(
            spec,
            &blocks[0],
            theta,
            cache,
            delta_g,
            cfg,
            &mut moments[0],
        ));
    } else {
        std::thread::scope(|scope| {
            for ((block, slot), result) in
                blocks.iter().zip(moments.iter_mut()).zip(results.iter_mut())
            {
                scope.spawn(move || {
                    *result = Some(solve_block(
                        spec, block, theta, cache, delta_g, cfg, slot,
                    ));
                });
            }
        });
    }
    let mut steps = Vec::with_capacity(blocks.len());
    for (d, slot) in results.into_iter().enumerate() {
        let step = slot
            .unwrap_or_else(|| Err(Error::state("block solver did not report a result")))
            .map_err(|e| e.in_subdomain(d))?;
        steps.push(step);
    }
    Ok(steps)
}

/// Runs every block's clipped-Adam loop against the shared cache and returns
/// the block-local steps in block order. Moment estimates are fresh per call.
pub fn iapts_local_phase(
    spec: &MlpSpec,
    blocks: &[SubdomainBlock],
    theta: &ParamVector,
    cache: &LayerCache,
    delta_g: f64,
    cfg: &IaptsConfig,
) -> Result<Vec<ParamVector>> {
    cfg.validate()?;
    if blocks.is_empty() {
        return Err(Error::domain("at least one layer block is required"));
    }
    if !(delta_g > 0.0) || !delta_g.is_finite() {
        return Err(Error::domain(format!(
            "global radius must be positive and finite, got {delta_g}"
        )));
    }
    let mut moments: Vec<Option<CAdamState>> = (0..blocks.len()).map(|_| None).collect();
    run_local_phase(spec, blocks, theta, cache, delta_g, cfg, &mut moments)
}

/// Stateful inexact outer loop over an MLP objective.
pub struct IaptsDriver {
    obj: NetObjective,
    cfg: IaptsConfig,
    blocks: Vec<SubdomainBlock>,
    partition: Partition,
    theta: ParamVector,
    delta: f64,
    iteration: usize,
    moments: Vec<Option<CAdamState>>,
}

impl IaptsDriver {
    pub fn new(
        spec: MlpSpec,
        data: Arc<Dataset>,
        theta0: ParamVector,
        cfg: IaptsConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let blocks = layer_blocks(&spec, cfg.subdomain_count)?;
        let obj = NetObjective::new(spec, data)?;
        if theta0.len() != obj.dim() {
            return Err(Error::Dimension {
                context: "initial iterate",
                expected: obj.dim(),
                actual: theta0.len(),
            });
        }
        let partition = blocks_to_partition(obj.dim(), &blocks)?;
        let moments = (0..blocks.len()).map(|_| None).collect();
        let delta = cfg.lr_init.clamp(cfg.lr_min, cfg.lr_max);
        Ok(IaptsDriver {
            obj,
            cfg,
            blocks,
            partition,
            theta: theta0,
            delta,
            iteration: 0,
            moments,
        })
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn blocks(&self) -> &[SubdomainBlock] {
        &self.blocks
    }

    pub fn objective(&self) -> &NetObjective {
        &self.obj
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One inexact outer iteration on `batch`.
    pub fn outer_iteration(&mut self, batch: &BatchRef) -> Result<AptsIterationRecord> {
        let (f0, g0, cache) = global_pass_and_cache(&self.obj, &self.theta, batch)?;
        if !f0.is_finite() {
            return Err(Error::NonFinite("objective value at the current iterate"));
        }
        if self.cfg.moment_policy == MomentPolicy::Reset {
            self.moments.iter_mut().for_each(|m| *m = None);
        }
        let steps = run_local_phase(
            self.obj.spec(),
            &self.blocks,
            &self.theta,
            &cache,
            self.delta,
            &self.cfg,
            &mut self.moments,
        )?;
        let local_decreases: Vec<f64> = self
            .blocks
            .iter()
            .zip(&steps)
            .map(|(b, s)| {
                let g_block = ParamVector::from_slice(&g0.as_slice()[b.params.clone()])?;
                Ok(-g_block.dot(s)?)
            })
            .collect::<Result<_>>()?;
        let step = assemble_step(&self.partition, &steps)?;

        // first-order model decrease of the recombined step
        let predicted = -g0.dot(&step)?;
        let trial = self.theta.add(&step)?;
        let f_trial = self.obj.loss(&trial, batch)?;
        let rho_val = if f_trial.is_finite() {
            rho(f0, f_trial, predicted)
        } else {
            f64::NEG_INFINITY
        };
        let tr = self.cfg.bounded_tr();
        let delta_before = self.delta;
        let (accepted, mut delta_next) = radius_update(rho_val, self.delta, &tr);
        let mut f_after = f0;
        if accepted {
            self.theta = trial;
            f_after = f_trial;
        }

        let mut sweep_accepted = 0;
        if self.cfg.global_tr_iters > 0 {
            let state = tr_run(
                &self.obj,
                batch,
                self.theta.clone(),
                delta_next,
                &tr,
                self.cfg.global_tr_iters,
            )?;
            sweep_accepted = state.accepted_count();
            self.theta = state.theta().clone();
            f_after = state.f_value();
            if self.cfg.radius_feedback {
                delta_next = state.delta();
            }
        }
        self.delta = delta_next.clamp(self.cfg.lr_min, self.cfg.lr_max);

        let record = AptsIterationRecord {
            iteration: self.iteration,
            f_before: f0,
            f_after,
            rho: rho_val,
            accepted,
            delta_before,
            delta_after: self.delta,
            step_norm: step.norm(self.cfg.tr.norm),
            local_decreases,
            sweep_accepted,
        };
        self.iteration += 1;
        Ok(record)
    }
}

/// Runs one inexact outer iteration per batch.
pub fn iapts_run(
    spec: MlpSpec,
    data: Arc<Dataset>,
    theta0: ParamVector,
    cfg: IaptsConfig,
    batches: &[BatchRef],
) -> Result<(ParamVector, Vec<AptsIterationRecord>)> {
    let mut driver = IaptsDriver::new(spec, data, theta0, cfg)?;
    let mut records = Vec::with_capacity(batches.len());
    for batch in batches {
        records.push(driver.outer_iteration(batch)?);
    }
    Ok((driver.theta.clone(), records))
}
