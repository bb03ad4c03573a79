//! The additively preconditioned trust-region outer loop.
//!
//! Each outer iteration: (1) solve a corrected local problem per subdomain
//! in parallel, each confined so the recombined step cannot leave the global
//! radius; (2) recombine the local steps additively; (3) run the global
//! acceptance test with the summed realized local decreases as the predicted
//! decrease; (4) optionally smooth with a few plain trust-region steps.
//!
//! Recombination and the decrease sum always run in ascending subdomain
//! order, so results are independent of thread scheduling.

use crate::cadam::{cadam_step, CAdamState};
use crate::decomp::{make_partition, prolong, Partition, PartitionStrategy};
use crate::error::{Error, Result};
use crate::local::LocalObjective;
use crate::objective::{BatchRef, Objective};
use crate::trust_region::{radius_update, rho, tr_run, tr_step, TrParams, TrState};
use crate::vector::{Norm, ParamVector};

/// What solves each subdomain problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalSolver {
    /// A full trust-region loop on the corrected local objective.
    TrustRegion,
    /// Unconditional clipped-Adam steps on the corrected local gradient.
    CAdam,
}

/// Whether clipped-Adam moment estimates survive across outer iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentPolicy {
    Reset,
    Persist,
}

#[derive(Clone, Debug)]
pub struct AptsConfig {
    pub subdomain_count: usize,
    /// Local iterations per subdomain per outer iteration (`m` below).
    pub inner_iters: usize,
    /// Plain trust-region smoothing steps after acceptance.
    pub global_tr_iters: usize,
    pub delta_init: f64,
    pub tr: TrParams,
    pub local_solver: LocalSolver,
    pub partition: PartitionStrategy,
    pub moment_policy: MomentPolicy,
    /// Whether the smoothing sweep's final radius becomes the next outer
    /// radius.
    pub radius_feedback: bool,
}

impl Default for AptsConfig {
    fn default() -> Self {
        AptsConfig {
            subdomain_count: 2,
            inner_iters: 3,
            global_tr_iters: 1,
            delta_init: 1.0,
            tr: TrParams {
                norm: Norm::Linf,
                ..TrParams::default()
            },
            local_solver: LocalSolver::TrustRegion,
            partition: PartitionStrategy::EvenBlocks,
            moment_policy: MomentPolicy::Reset,
            radius_feedback: true,
        }
    }
}

impl AptsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subdomain_count == 0 {
            return Err(Error::domain("subdomain count must be at least 1"));
        }
        if self.inner_iters == 0 {
            return Err(Error::domain("local solves need at least 1 iteration"));
        }
        if !(self.delta_init > 0.0) || !self.delta_init.is_finite() {
            return Err(Error::domain(format!(
                "initial radius must be positive and finite, got {}",
                self.delta_init
            )));
        }
        self.tr.validate()
    }
}

/// A subdomain's recombination contribution: its local step (in subdomain
/// coordinates) and the realized decrease of its corrected objective.
#[derive(Clone, Debug)]
pub struct SubdomainOutcome {
    pub step: ParamVector,
    pub decrease: f64,
}

/// One outer iteration, as recorded by the drivers.
#[derive(Clone, Debug)]
pub struct AptsIterationRecord {
    pub iteration: usize,
    pub f_before: f64,
    pub f_after: f64,
    pub rho: f64,
    pub accepted: bool,
    pub delta_before: f64,
    pub delta_after: f64,
    /// Recombined trial step length in the configured norm.
    pub step_norm: f64,
    pub local_decreases: Vec<f64>,
    /// Accepted steps in the smoothing sweep.
    pub sweep_accepted: usize,
}

fn local_tr_params(tr: &TrParams, local_delta: f64) -> TrParams {
    let mut p = tr.clone();
    // growth off and the radius capped: after m accepted steps of at most
    // Δ_G/m each, the combined step still fits the global radius
    p.gamma_inc = 1.0;
    p.delta_max = local_delta;
    p.delta_min = p.delta_min.min(local_delta);
    p
}

fn solve_subdomain(
    obj: &dyn Objective,
    partition: &Partition,
    d: usize,
    theta: &ParamVector,
    global_grad: &ParamVector,
    delta_g: f64,
    cfg: &AptsConfig,
    batch: &BatchRef,
    moments: &mut Option<CAdamState>,
) -> Result<SubdomainOutcome> {
    let local = LocalObjective::new(obj, partition, d, theta, global_grad, batch)?;
    let x0 = local.anchor_restricted().clone();
    let f0 = local.anchor_value();
    let m = cfg.inner_iters;
    let local_delta = delta_g / m as f64;

    match cfg.local_solver {
        LocalSolver::TrustRegion => {
            let params = local_tr_params(&cfg.tr, local_delta);
            let state = tr_run(&local, batch, x0.clone(), local_delta, &params, m)?;
            let step = state.theta().sub(&x0)?;
            let f_end = if state.accepted_count() == 0 {
                f0
            } else {
                state.f_value()
            };
            Ok(SubdomainOutcome {
                step,
                decrease: f0 - f_end,
            })
        }
        LocalSolver::CAdam => {
            let mut state = match moments.take() {
                Some(mut st) => {
                    st.set_lr(local_delta)?;
                    st
                }
                None => CAdamState::new(x0.len(), local_delta)?,
            };
            let mut x = x0.clone();
            for _ in 0..m {
                let (_, g) = local.consistent_eval(&x, batch)?;
                let s = cadam_step(&mut state, &g, local_delta, cfg.tr.norm)?;
                x = x.add(&s)?;
            }
            *moments = Some(state);
            let f_end = local.loss(&x, batch)?;
            let decrease = if f_end.is_finite() { f0 - f_end } else { f64::NEG_INFINITY };
            Ok(SubdomainOutcome {
                step: x.sub(&x0)?,
                decrease,
            })
        }
    }
}

fn run_local_phase(
    obj: &dyn Objective,
    partition: &Partition,
    theta: &ParamVector,
    global_grad: &ParamVector,
    delta_g: f64,
    cfg: &AptsConfig,
    batch: &BatchRef,
    moments: &mut [Option<CAdamState>],
) -> Result<Vec<SubdomainOutcome>> {
    let n_sub = partition.subdomain_count();
    let mut results: Vec<Option<Result<SubdomainOutcome>>> =
        (0..n_sub).map(|_| None).collect();
    if n_sub == 1 {
        results[0] = Some(solve_subdomain(
            obj,
            partition,
            0,
            theta,
            global_grad,
            delta_g,
            cfg,
            batch,
            &mut moments[0],
        ));
    } else {
        std::thread::scope(|scope| {
            for ((d, slot), result) in moments.iter_mut().enumerate().zip(results.iter_mut()) {
                scope.spawn(move || {
                    *result = Some(solve_subdomain(
                        obj,
                        partition,
                        d,
                        theta,
                        global_grad,
                        delta_g,
                        cfg,
                        batch,
                        slot,
                    ));
                });
            }
        });
    }
    let mut outcomes = Vec::with_capacity(n_sub);
    for (d, slot) in results.into_iter().enumerate() {
        let outcome = slot
            .unwrap_or_else(|| Err(Error::state("local solver did not report a result")))
            .map_err(|e| e.in_subdomain(d))?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Runs every subdomain's local solve (in parallel for more than one
/// subdomain) and returns the outcomes in subdomain order. Clipped-Adam
/// moment estimates are fresh per call.
pub fn local_phase(
    obj: &dyn Objective,
    partition: &Partition,
    theta: &ParamVector,
    global_grad: &ParamVector,
    delta_g: f64,
    cfg: &AptsConfig,
    batch: &BatchRef,
) -> Result<Vec<SubdomainOutcome>> {
    cfg.validate()?;
    if partition.subdomain_count() != cfg.subdomain_count {
        return Err(Error::Dimension {
            context: "local phase subdomains",
            expected: cfg.subdomain_count,
            actual: partition.subdomain_count(),
        });
    }
    if !(delta_g > 0.0) || !delta_g.is_finite() {
        return Err(Error::domain(format!(
            "global radius must be positive and finite, got {delta_g}"
        )));
    }
    let mut moments: Vec<Option<CAdamState>> =
        (0..partition.subdomain_count()).map(|_| None).collect();
    run_local_phase(
        obj,
        partition,
        theta,
        global_grad,
        delta_g,
        cfg,
        batch,
        &mut moments,
    )
}

/// Sums the prolonged local steps in ascending subdomain order:
/// `s = Σ_d R_dᵀ s_d`.
pub fn assemble_step(partition: &Partition, steps: &[ParamVector]) -> Result<ParamVector> {
    if steps.len() != partition.subdomain_count() {
        return Err(Error::Dimension {
            context: "step recombination",
            expected: partition.subdomain_count(),
            actual: steps.len(),
        });
    }
    let mut total = ParamVector::zeros(partition.dim());
    for (d, step) in steps.iter().enumerate() {
        total = total.add(&prolong(partition, d, step)?)?;
    }
    Ok(total)
}

/// Result of the global acceptance test.
#[derive(Clone, Debug)]
pub struct GlobalAcceptance {
    pub theta: ParamVector,
    pub f_value: f64,
    pub delta: f64,
    pub rho: f64,
    pub accepted: bool,
}

/// Tests the recombined step: ρ is the actual global decrease over the sum
/// of realized local decreases. A non-positive sum or a non-finite trial
/// value rejects via the −∞ sentinel.
pub fn global_acceptance(
    obj: &dyn Objective,
    batch: &BatchRef,
    theta: &ParamVector,
    f_value: f64,
    step: &ParamVector,
    local_decreases: &[f64],
    delta_g: f64,
    tr: &TrParams,
) -> Result<GlobalAcceptance> {
    let predicted: f64 = local_decreases.iter().sum();
    let trial = theta.add(step)?;
    let f_trial = obj.loss(&trial, batch)?;
    let rho_val = if f_trial.is_finite() {
        rho(f_value, f_trial, predicted)
    } else {
        f64::NEG_INFINITY
    };
    let (accepted, delta) = radius_update(rho_val, delta_g, tr);
    Ok(if accepted {
        GlobalAcceptance {
            theta: trial,
            f_value: f_trial,
            delta,
            rho: rho_val,
            accepted,
        }
    } else {
        GlobalAcceptance {
            theta: theta.clone(),
            f_value,
            delta,
            rho: rho_val,
            accepted,
        }
    })
}

/// Stateful outer loop over a shared objective.
pub struct AptsDriver<'a> {
    obj: &'a dyn Objective,
    cfg: AptsConfig,
    partition: Partition,
    theta: ParamVector,
    delta: f64,
    iteration: usize,
    moments: Vec<Option<CAdamState>>,
}

impl<'a> AptsDriver<'a> {
    pub fn new(obj: &'a dyn Objective, theta0: ParamVector, cfg: AptsConfig) -> Result<Self> {
        let partition = make_partition(obj.dim(), &cfg.partition, cfg.subdomain_count)?;
        Self::with_partition(obj, theta0, cfg, partition)
    }

    /// Uses an explicit partition instead of building one from the
    /// configured strategy.
    pub fn with_partition(
        obj: &'a dyn Objective,
        theta0: ParamVector,
        cfg: AptsConfig,
        partition: Partition,
    ) -> Result<Self> {
        cfg.validate()?;
        if theta0.len() != obj.dim() {
            return Err(Error::Dimension {
                context: "initial iterate",
                expected: obj.dim(),
                actual: theta0.len(),
            });
        }
        if partition.dim() != obj.dim() {
            return Err(Error::Dimension {
                context: "driver partition",
                expected: obj.dim(),
                actual: partition.dim(),
            });
        }
        if partition.subdomain_count() != cfg.subdomain_count {
            return Err(Error::Dimension {
                context: "driver subdomains",
                expected: cfg.subdomain_count,
                actual: partition.subdomain_count(),
            });
        }
        let moments = (0..cfg.subdomain_count).map(|_| None).collect();
        let delta = cfg
            .delta_init
            .clamp(cfg.tr.delta_min, cfg.tr.delta_max);
        Ok(AptsDriver {
            obj,
            cfg,
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

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One full outer iteration on `batch`.
    pub fn outer_iteration(&mut self, batch: &BatchRef) -> Result<AptsIterationRecord> {
        let (f0, g0) = self.obj.eval(&self.theta, batch)?;
        if !f0.is_finite() {
            return Err(Error::NonFinite("objective value at the current iterate"));
        }
        if self.cfg.moment_policy == MomentPolicy::Reset {
            self.moments.iter_mut().for_each(|m| *m = None);
        }
        let outcomes = run_local_phase(
            self.obj,
            &self.partition,
            &self.theta,
            &g0,
            self.delta,
            &self.cfg,
            batch,
            &mut self.moments,
        )?;
        let steps: Vec<ParamVector> = outcomes.iter().map(|o| o.step.clone()).collect();
        let local_decreases: Vec<f64> = outcomes.iter().map(|o| o.decrease).collect();
        let step = assemble_step(&self.partition, &steps)?;

        let delta_before = self.delta;
        let acc = global_acceptance(
            self.obj,
            batch,
            &self.theta,
            f0,
            &step,
            &local_decreases,
            self.delta,
            &self.cfg.tr,
        )?;
        self.theta = acc.theta;
        self.delta = acc.delta;
        let mut f_after = acc.f_value;

        let mut sweep_accepted = 0;
        if self.cfg.global_tr_iters > 0 {
            let mut state = TrState::new(self.theta.clone(), self.delta, &self.cfg.tr)?;
            for _ in 0..self.cfg.global_tr_iters {
                tr_step(self.obj, batch, &mut state, &self.cfg.tr)?;
            }
            sweep_accepted = state.accepted_count();
            self.theta = state.theta().clone();
            f_after = state.f_value();
            if self.cfg.radius_feedback {
                self.delta = state.delta();
            }
        }

        let record = AptsIterationRecord {
            iteration: self.iteration,
            f_before: f0,
            f_after,
            rho: acc.rho,
            accepted: acc.accepted,
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

/// Runs one outer iteration per batch and returns the final iterate with
/// the per-iteration records.
pub fn apts_run(
    obj: &dyn Objective,
    theta0: ParamVector,
    cfg: AptsConfig,
    batches: &[BatchRef],
) -> Result<(ParamVector, Vec<AptsIterationRecord>)> {
    let mut driver = AptsDriver::new(obj, theta0, cfg)?;
    let mut records = Vec::with_capacity(batches.len());
    for batch in batches {
        records.push(driver.outer_iteration(batch)?);
    }
    Ok((driver.theta.clone(), records))
}
