//! Classical trust-region iteration over a quadratic model
//! `m(s) = ⟨g, s⟩ + ½⟨s, Bs⟩` with an identity or L-BFGS Hessian proxy.
//!
//! Acceptance uses the realized-over-predicted decrease ratio ρ: reject and
//! shrink when ρ ≤ η₁, accept and hold when η₁ < ρ < η₂, accept and grow
//! when ρ ≥ η₂. A non-positive predicted decrease or a non-finite trial
//! value forces rejection through a −∞ sentinel instead of dividing by a
//! garbage denominator.

use crate::error::{Error, Result};
use crate::objective::{BatchRef, Objective};
use crate::vector::{axpy, Norm, ParamVector};

/// Denominator floor for the ρ ratio.
pub const RHO_GUARD: f64 = 1e-16;

/// Curvature threshold below which an L-BFGS pair is discarded.
const LBFGS_CURVATURE_SKIP: f64 = 1e-10;

/// Which quadratic-model Hessian the solver uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxyKind {
    /// `B = I`; the subproblem is solved exactly in either norm.
    Identity,
    /// Limited-memory BFGS built from accepted steps; the subproblem is
    /// solved by truncated conjugate gradients.
    Lbfgs { memory: usize },
}

#[derive(Clone, Debug)]
pub struct TrParams {
    pub eta1: f64,
    pub eta2: f64,
    pub gamma_dec: f64,
    pub gamma_inc: f64,
    pub norm: Norm,
    pub delta_min: f64,
    pub delta_max: f64,
    pub proxy: ProxyKind,
}

impl Default for TrParams {
    fn default() -> Self {
        TrParams {
            eta1: 0.1,
            eta2: 0.75,
            gamma_dec: 0.5,
            gamma_inc: 2.0,
            norm: Norm::L2,
            delta_min: 1e-12,
            delta_max: 1e12,
            proxy: ProxyKind::Identity,
        }
    }
}

impl TrParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.eta1,
            self.eta2,
            self.gamma_dec,
            self.gamma_inc,
            self.delta_min,
            self.delta_max,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trust-region parameters"));
        }
        if !(0.0 < self.eta1 && self.eta1 < self.eta2 && self.eta2 < 1.0) {
            return Err(Error::domain(format!(
                "acceptance thresholds must satisfy 0 < η₁ < η₂ < 1, got η₁={}, η₂={}",
                self.eta1, self.eta2
            )));
        }
        if !(0.0 < self.gamma_dec && self.gamma_dec < 1.0) {
            return Err(Error::domain(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.gamma_dec
            )));
        }
        if self.gamma_inc < 1.0 {
            return Err(Error::domain(format!(
                "growth factor must be at least 1, got {}",
                self.gamma_inc
            )));
        }
        if !(0.0 < self.delta_min && self.delta_min <= self.delta_max) {
            return Err(Error::domain(format!(
                "radius bounds must satisfy 0 < δ_min ≤ δ_max, got [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        if let ProxyKind::Lbfgs { memory } = self.proxy {
            if memory == 0 {
                return Err(Error::domain("L-BFGS memory must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Limited-memory direct BFGS Hessian approximation.
///
/// `B` starts as the identity and, once pairs exist, as `γI` with
/// `γ = ⟨y, y⟩/⟨s, y⟩` from the newest pair, plus the rank-two BFGS terms
/// of each stored pair. Each pair caches `u_j = B_j s_j` so applying `B`
/// costs one pass over the memory.
#[derive(Clone, Debug, Default)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: Vec<(ParamVector, ParamVector)>,
    gamma: f64,
    terms: Vec<BfgsTerm>,
}

#[derive(Clone, Debug)]
struct BfgsTerm {
    u: ParamVector,
    su: f64,
    y: ParamVector,
    sy: f64,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::domain("L-BFGS memory must be at least 1"));
        }
        Ok(LbfgsMemory {
            capacity,
            pairs: Vec::new(),
            gamma: 1.0,
            terms: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Records a step/gradient-difference pair. Pairs with non-positive or
    /// negligible curvature (`⟨s,y⟩ ≤ 1e-10 ‖s‖‖y‖`) are skipped to keep the
    /// proxy positive definite. Returns whether the pair was stored.
    pub fn push(&mut self, s: ParamVector, y: ParamVector) -> Result<bool> {
        let sy = s.dot(&y)?;
        if sy <= LBFGS_CURVATURE_SKIP * s.norm(Norm::L2) * y.norm(Norm::L2) {
            return Ok(false);
        }
        if self.pairs.len() == self.capacity {
            self.pairs.remove(0);
        }
        self.pairs.push((s, y));
        self.rebuild()?;
        Ok(true)
    }

    fn rebuild(&mut self) -> Result<()> {
        self.terms.clear();
        let Some((s_new, y_new)) = self.pairs.last() else {
            self.gamma = 1.0;
            return Ok(());
        };
        self.gamma = y_new.dot(y_new)? / s_new.dot(y_new)?;
        for k in 0..self.pairs.len() {
            let (s, y) = self.pairs[k].clone();
            let u = self.apply(&s)?;
            let su = s.dot(&u)?;
            let sy = s.dot(&y)?;
            if su <= 0.0 {
                // numerically indefinite contribution; drop it
                continue;
            }
            self.terms.push(BfgsTerm { u, su, y, sy });
        }
        Ok(())
    }

    /// `B · v` using the terms built so far.
    pub fn apply(&self, v: &ParamVector) -> Result<ParamVector> {
        let mut out = v.scale(if self.pairs.is_empty() { 1.0 } else { self.gamma })?;
        for term in &self.terms {
            let uv = term.u.dot(v)?;
            let yv = term.y.dot(v)?;
            out = axpy(-uv / term.su, &term.u, &out)?;
            out = axpy(yv / term.sy, &term.y, &out)?;
        }
        Ok(out)
    }
}

/// The quadratic model at the current iterate.
pub struct TrModel<'a> {
    grad: &'a ParamVector,
    hessian: Option<&'a LbfgsMemory>,
}

impl<'a> TrModel<'a> {
    pub fn new(grad: &'a ParamVector, hessian: Option<&'a LbfgsMemory>) -> Self {
        TrModel { grad, hessian }
    }

    pub fn grad(&self) -> &ParamVector {
        self.grad
    }

    pub fn apply_hessian(&self, v: &ParamVector) -> Result<ParamVector> {
        match self.hessian {
            None => Ok(v.clone()),
            Some(mem) => mem.apply(v),
        }
    }

    /// `m(s) = ⟨g, s⟩ + ½ ⟨s, Bs⟩`.
    pub fn value(&self, s: &ParamVector) -> Result<f64> {
        Ok(self.grad.dot(s)? + 0.5 * s.dot(&self.apply_hessian(s)?)?)
    }

    /// Predicted decrease `−m(s)`.
    pub fn decrease(&self, s: &ParamVector) -> Result<f64> {
        Ok(-self.value(s)?)
    }
}

/// Step length τ ≥ 0 with `‖p + τ d‖ = delta`, assuming `p` is strictly
/// inside the ball and `d` is nonzero.
fn boundary_tau(p: &ParamVector, d: &ParamVector, delta: f64, norm: Norm) -> Result<f64> {
    match norm {
        Norm::L2 => {
            let dd = d.dot(d)?;
            let pd = p.dot(d)?;
            let pp = p.dot(p)?;
            if dd <= 0.0 {
                return Err(Error::state("degenerate direction in boundary step"));
            }
            let disc = (pd * pd - dd * (pp - delta * delta)).max(0.0);
            Ok((-pd + disc.sqrt()) / dd)
        }
        Norm::Linf => {
            let mut tau = f64::INFINITY;
            for i in 0..p.len() {
                let di = d[i];
                if di == 0.0 {
                    continue;
                }
                let bound = if di > 0.0 { delta } else { -delta };
                tau = tau.min((bound - p[i]) / di);
            }
            if !tau.is_finite() {
                return Err(Error::state("degenerate direction in boundary step"));
            }
            Ok(tau.max(0.0))
        }
    }
}

fn rescale_into_ball(s: ParamVector, delta: f64, norm: Norm) -> Result<ParamVector> {
    let n = s.norm(norm);
    if n > delta && n > 0.0 {
        s.scale(delta / n)
    } else {
        Ok(s)
    }
}

/// Steihaug-Toint truncated conjugate gradients, stopping at the ball
/// boundary, at negative curvature, or at residual tolerance
/// `min(0.1, √‖g‖)·‖g‖`.
fn steihaug(model: &TrModel, delta: f64, norm: Norm) -> Result<ParamVector> {
    let g = model.grad();
    let gnorm = g.norm(Norm::L2);
    let n = g.len();
    let mut p = ParamVector::zeros(n);
    if gnorm == 0.0 {
        return Ok(p);
    }
    let rtol = gnorm.sqrt().min(0.1) * gnorm;
    let mut r = g.clone();
    let mut d = g.scale(-1.0)?;
    let mut rr = r.dot(&r)?;
    for _ in 0..2 * n + 5 {
        let bd = model.apply_hessian(&d)?;
        let dbd = d.dot(&bd)?;
        if dbd <= 0.0 {
            let tau = boundary_tau(&p, &d, delta, norm)?;
            return rescale_into_ball(axpy(tau, &d, &p)?, delta, norm);
        }
        let alpha = rr / dbd;
        let p_next = axpy(alpha, &d, &p)?;
        if p_next.norm(norm) >= delta {
            let tau = boundary_tau(&p, &d, delta, norm)?;
            return rescale_into_ball(axpy(tau, &d, &p)?, delta, norm);
        }
        let r_next = axpy(alpha, &bd, &r)?;
        let rr_next = r_next.dot(&r_next)?;
        if rr_next.sqrt() <= rtol {
            return Ok(p_next);
        }
        let beta = rr_next / rr;
        d = axpy(beta, &d, &r_next.scale(-1.0)?)?;
        p = p_next;
        r = r_next;
        rr = rr_next;
    }
    Ok(p)
}

/// Minimizes the model over the radius-`delta` ball.
///
/// With the identity proxy the solution is exact: the scaled negative
/// gradient in L2, the componentwise clamp of `−g` in L∞. With L-BFGS it is
/// the Steihaug-Toint point.
pub fn solve_subproblem(model: &TrModel, delta: f64, norm: Norm) -> Result<ParamVector> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!(
            "trust-region radius must be positive and finite, got {delta}"
        )));
    }
    let g = model.grad();
    match model.hessian {
        Some(_) => steihaug(model, delta, norm),
        None => match norm {
            Norm::L2 => {
                let gnorm = g.norm(Norm::L2);
                let s = if gnorm <= delta {
                    g.scale(-1.0)?
                } else {
                    g.scale(-delta / gnorm)?
                };
                rescale_into_ball(s, delta, norm)
            }
            Norm::Linf => {
                let s = g
                    .as_slice()
                    .iter()
                    .map(|&gi| (-gi).clamp(-delta, delta))
                    .collect();
                ParamVector::checked(s, "subproblem step")
            }
        },
    }
}

/// The acceptance ratio `(f_old − f_new)/max(model_decrease, RHO_GUARD)`.
/// A non-positive or non-finite predicted decrease yields −∞, which every
/// acceptance test treats as a rejection.
pub fn rho(f_old: f64, f_new: f64, model_decrease: f64) -> f64 {
    if !(model_decrease > 0.0) || !model_decrease.is_finite() {
        return f64::NEG_INFINITY;
    }
    (f_old - f_new) / model_decrease.max(RHO_GUARD)
}

/// Acceptance decision and radius update shared by every level of the
/// strategy. ρ = η₁ rejects.
pub(crate) fn radius_update(rho: f64, delta: f64, p: &TrParams) -> (bool, f64) {
    if rho >= p.eta2 {
        (true, (delta * p.gamma_inc).clamp(p.delta_min, p.delta_max))
    } else if rho > p.eta1 {
        (true, delta)
    } else {
        (false, (delta * p.gamma_dec).clamp(p.delta_min, p.delta_max))
    }
}

/// One iteration's outcome, recorded in [`TrState::history`].
#[derive(Clone, Copy, Debug)]
pub struct TrIteration {
    pub rho: f64,
    pub accepted: bool,
    pub delta_before: f64,
    pub delta_after: f64,
    /// Step length in the configured norm (the trial step, even if rejected).
    pub step_norm: f64,
}

/// Iterate, radius, last objective value, and the per-iteration history.
#[derive(Clone, Debug)]
pub struct TrState {
    theta: ParamVector,
    delta: f64,
    f_value: f64,
    history: Vec<TrIteration>,
    lbfgs: Option<LbfgsMemory>,
    pending_pair: Option<(ParamVector, ParamVector)>,
}

impl TrState {
    /// Starts at `theta` with radius `delta0` clamped into the configured
    /// bounds. `f_value` is NaN until the first step evaluates the objective.
    pub fn new(theta: ParamVector, delta0: f64, params: &TrParams) -> Result<Self> {
        params.validate()?;
        if !(delta0 > 0.0) || !delta0.is_finite() {
            return Err(Error::domain(format!(
                "initial radius must be positive and finite, got {delta0}"
            )));
        }
        let lbfgs = match params.proxy {
            ProxyKind::Identity => None,
            ProxyKind::Lbfgs { memory } => Some(LbfgsMemory::new(memory)?),
        };
        Ok(TrState {
            theta,
            delta: delta0.clamp(params.delta_min, params.delta_max),
            f_value: f64::NAN,
            history: Vec::new(),
            lbfgs,
            pending_pair: None,
        })
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Objective value at `theta` as of the most recent evaluation.
    pub fn f_value(&self) -> f64 {
        self.f_value
    }

    pub fn history(&self) -> &[TrIteration] {
        &self.history
    }

    pub fn accepted_count(&self) -> usize {
        self.history.iter().filter(|it| it.accepted).count()
    }
}

/// One trust-region iteration: evaluate, solve the subproblem, test the
/// trial point, move and/or rescale the radius.
///
/// Errors leave the iterate unchanged; in particular a non-finite objective
/// value *at the current iterate* is an error, while a non-finite value at
/// the trial point is an ordinary rejection.
pub fn tr_step(
    obj: &dyn Objective,
    batch: &BatchRef,
    state: &mut TrState,
    params: &TrParams,
) -> Result<TrIteration> {
    params.validate()?;
    let (f, g) = obj.eval(&state.theta, batch)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("objective value at the current iterate"));
    }
    state.f_value = f;
    if let Some((s_prev, g_prev)) = state.pending_pair.take() {
        if let Some(mem) = state.lbfgs.as_mut() {
            mem.push(s_prev, g.sub(&g_prev)?)?;
        }
    }

    let model = TrModel::new(&g, state.lbfgs.as_ref());
    let s = solve_subproblem(&model, state.delta, params.norm)?;
    let predicted = model.decrease(&s)?;
    let trial = state.theta.add(&s)?;
    let f_trial = obj.loss(&trial, batch)?;
    let rho_val = if f_trial.is_finite() {
        rho(f, f_trial, predicted)
    } else {
        f64::NEG_INFINITY
    };

    let delta_before = state.delta;
    let (accepted, delta_after) = radius_update(rho_val, state.delta, params);
    if accepted {
        if state.lbfgs.is_some() {
            state.pending_pair = Some((s.clone(), g));
        }
        state.theta = trial;
        state.f_value = f_trial;
    }
    state.delta = delta_after;

    let iteration = TrIteration {
        rho: rho_val,
        accepted,
        delta_before,
        delta_after,
        step_norm: s.norm(params.norm),
    };
    state.history.push(iteration);
    Ok(iteration)
}

/// Runs `iters` trust-region steps from `theta0`.
pub fn tr_run(
    obj: &dyn Objective,
    batch: &BatchRef,
    theta0: ParamVector,
    delta0: f64,
    params: &TrParams,
    iters: usize,
) -> Result<TrState> {
    let mut state = TrState::new(theta0, delta0, params)?;
    for _ in 0..iters {
        tr_step(obj, batch, &mut state, params)?;
    }
    Ok(state)
}
