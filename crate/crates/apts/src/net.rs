//! Multilayer perceptrons over a flat parameter vector, with manual
//! backpropagation and a cache of per-boundary activations and downstream
//! gradients.
//!
//! Parameters pack layer by layer: weights (row-major, `out × in`) then
//! biases. The cache makes one global forward/backward pass reusable by
//! layer-block subdomains: boundary `b` stores the activation `A_b` and,
//! after a backward pass, the loss gradient `∂f/∂A_b`.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::{BatchRef, Objective};
use crate::vector::ParamVector;

/// Per-layer nonlinearity. `SoftmaxXent` is a fused softmax +
/// cross-entropy head and is only legal on the final layer; the stored
/// activation for that boundary is the raw logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    SoftmaxXent,
}

/// Network shape: `sizes` are the layer widths (input first), and
/// `activations[l]` follows weight layer `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

/// Where one layer's weights and biases live in the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSlice {
    pub weights: Range<usize>,
    pub biases: Range<usize>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::domain("an MLP needs an input and an output layer"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::domain("layer widths must be positive"));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Dimension {
                context: "activations per weight layer",
                expected: sizes.len() - 1,
                actual: activations.len(),
            });
        }
        if activations[..activations.len() - 1]
            .iter()
            .any(|&a| a == Activation::SoftmaxXent)
        {
            return Err(Error::domain(
                "the softmax cross-entropy head is only valid on the final layer",
            ));
        }
        Ok(MlpSpec { sizes, activations })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of weight layers.
    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn activation(&self, layer: usize) -> Activation {
        self.activations[layer]
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    /// `(in + 1) * out` per weight layer, in order.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        (0..self.layer_count())
            .map(|l| (self.sizes[l] + 1) * self.sizes[l + 1])
            .collect()
    }

    pub fn layer_slice(&self, layer: usize) -> Result<LayerSlice> {
        if layer >= self.layer_count() {
            return Err(Error::Range {
                what: "weight layers",
                index: layer,
                len: self.layer_count(),
            });
        }
        let mut offset = 0;
        for l in 0..layer {
            offset += (self.sizes[l] + 1) * self.sizes[l + 1];
        }
        let (in_dim, out_dim) = (self.sizes[layer], self.sizes[layer + 1]);
        Ok(LayerSlice {
            weights: offset..offset + in_dim * out_dim,
            biases: offset + in_dim * out_dim..offset + (in_dim + 1) * out_dim,
            in_dim,
            out_dim,
        })
    }

    /// Seeded Glorot-uniform weights (`±√(6/(fan_in+fan_out))`), zero biases.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.param_count()];
        for l in 0..self.layer_count() {
            let slice = self.layer_slice(l).expect("layer in range");
            let bound = (6.0 / (slice.in_dim + slice.out_dim) as f64).sqrt();
            for w in &mut theta[slice.weights] {
                *w = rng.random_range(-bound..bound);
            }
        }
        ParamVector::checked(theta, "parameter initialization").expect("finite by construction")
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::Dimension {
                context: "network parameters",
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }
}

/// Activations `A_0..A_L` from a forward pass and, once a backward pass has
/// run, the loss gradients `∂f/∂A_b` at every boundary.
#[derive(Clone, Debug)]
pub struct LayerCache {
    activations: Vec<Matrix>,
    downstream: Vec<Matrix>,
}

impl LayerCache {
    pub fn batch_size(&self) -> usize {
        self.activations[0].rows()
    }

    /// `A_b`: the input for `b = 0`, layer outputs after that (raw logits at
    /// a softmax cross-entropy head).
    pub fn activation(&self, boundary: usize) -> Result<&Matrix> {
        self.activations.get(boundary).ok_or(Error::Range {
            what: "cache boundaries",
            index: boundary,
            len: self.activations.len(),
        })
    }

    /// `∂f/∂A_b`, available only after a backward pass.
    pub fn downstream(&self, boundary: usize) -> Result<&Matrix> {
        if self.downstream.is_empty() {
            return Err(Error::state(
                "downstream gradients requested before a backward pass",
            ));
        }
        self.downstream.get(boundary).ok_or(Error::Range {
            what: "cache boundaries",
            index: boundary,
            len: self.downstream.len(),
        })
    }

    pub fn has_downstream(&self) -> bool {
        !self.downstream.is_empty()
    }
}

fn linear_forward(a: &Matrix, w: &[f64], bias: &[f64], out_dim: usize) -> Matrix {
    let in_dim = a.cols();
    let mut z = Matrix::zeros(a.rows(), out_dim);
    for s in 0..a.rows() {
        let row = a.row(s);
        let zrow = z.row_mut(s);
        for o in 0..out_dim {
            let wrow = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = bias[o];
            for k in 0..in_dim {
                acc += row[k] * wrow[k];
            }
            zrow[o] = acc;
        }
    }
    z
}

fn apply_activation(z: &mut Matrix, act: Activation) {
    match act {
        // logits pass through; the softmax lives in the loss head
        Activation::Identity | Activation::SoftmaxXent => {}
        Activation::Tanh => {
            for s in 0..z.rows() {
                for v in z.row_mut(s) {
                    *v = v.tanh();
                }
            }
        }
        Activation::Relu => {
            for s in 0..z.rows() {
                for v in z.row_mut(s) {
                    *v = v.max(0.0);
                }
            }
        }
    }
}

/// `ΔZ = delta ⊙ σ'(A)` where `A` is the stored post-activation.
fn gate_by_derivative(delta: &Matrix, a: &Matrix, act: Activation) -> Matrix {
    let mut dz = delta.clone();
    match act {
        Activation::Identity | Activation::SoftmaxXent => {}
        Activation::Tanh => {
            for s in 0..dz.rows() {
                let arow = a.row(s);
                for (v, &av) in dz.row_mut(s).iter_mut().zip(arow) {
                    *v *= 1.0 - av * av;
                }
            }
        }
        Activation::Relu => {
            for s in 0..dz.rows() {
                let arow = a.row(s);
                for (v, &av) in dz.row_mut(s).iter_mut().zip(arow) {
                    if av <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }
    dz
}

/// Accumulates `∂f/∂W = ΔZᵀ A` and `∂f/∂b = colsum ΔZ`, sample-major so the
/// reduction order is fixed.
fn weight_grads(dz: &Matrix, a: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (out_dim, in_dim) = (dz.cols(), a.cols());
    let mut dw = vec![0.0; out_dim * in_dim];
    let mut db = vec![0.0; out_dim];
    for s in 0..dz.rows() {
        let dzr = dz.row(s);
        let ar = a.row(s);
        for o in 0..out_dim {
            let c = dzr[o];
            db[o] += c;
            let dwr = &mut dw[o * in_dim..(o + 1) * in_dim];
            for k in 0..in_dim {
                dwr[k] += c * ar[k];
            }
        }
    }
    (dw, db)
}

/// `∂f/∂A_prev = ΔZ · W`.
fn downstream_prev(dz: &Matrix, w: &[f64], in_dim: usize) -> Matrix {
    let out_dim = dz.cols();
    let mut da = Matrix::zeros(dz.rows(), in_dim);
    for s in 0..dz.rows() {
        let dzr = dz.row(s);
        let dar = da.row_mut(s);
        for o in 0..out_dim {
            let c = dzr[o];
            let wrow = &w[o * in_dim..(o + 1) * in_dim];
            for k in 0..in_dim {
                dar[k] += c * wrow[k];
            }
        }
    }
    da
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for s in 0..p.rows() {
        let row = p.row_mut(s);
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    p
}

/// Runs the network on `inputs`. Returns predictions (softmax probabilities
/// under a cross-entropy head, raw outputs otherwise) and the boundary cache.
pub fn forward(spec: &MlpSpec, theta: &ParamVector, inputs: &Matrix) -> Result<(Matrix, LayerCache)> {
    spec.check_theta(theta)?;
    if inputs.cols() != spec.input_dim() {
        return Err(Error::Dimension {
            context: "network inputs",
            expected: spec.input_dim(),
            actual: inputs.cols(),
        });
    }
    if inputs.rows() == 0 {
        return Err(Error::domain("forward pass needs at least one sample"));
    }
    let t = theta.as_slice();
    let mut activations = Vec::with_capacity(spec.layer_count() + 1);
    activations.push(inputs.clone());
    for l in 0..spec.layer_count() {
        let slice = spec.layer_slice(l)?;
        let mut z = linear_forward(
            activations.last().unwrap(),
            &t[slice.weights.clone()],
            &t[slice.biases.clone()],
            slice.out_dim,
        );
        apply_activation(&mut z, spec.activation(l));
        activations.push(z);
    }
    let last = activations.last().unwrap();
    let predictions = if *spec.activations.last().unwrap() == Activation::SoftmaxXent {
        softmax_rows(last)
    } else {
        last.clone()
    };
    Ok((
        predictions,
        LayerCache {
            activations,
            downstream: Vec::new(),
        },
    ))
}

/// Loss and head gradient `∂f/∂A_L` for the cached final boundary.
fn head_loss_and_grad(
    spec: &MlpSpec,
    last: &Matrix,
    targets: &Targets,
) -> Result<(f64, Matrix)> {
    let m = last.rows();
    if targets.len() != m {
        return Err(Error::Dimension {
            context: "loss targets",
            expected: m,
            actual: targets.len(),
        });
    }
    let head = *spec.activations.last().unwrap();
    match (head, targets) {
        (Activation::SoftmaxXent, Targets::Labels { labels, classes }) => {
            if *classes != spec.output_dim() {
                return Err(Error::Dimension {
                    context: "label classes",
                    expected: spec.output_dim(),
                    actual: *classes,
                });
            }
            let mut grad = softmax_rows(last);
            let mut loss = 0.0;
            let scale = 1.0 / m as f64;
            for (s, &y) in labels.iter().enumerate() {
                if y >= *classes {
                    return Err(Error::Range {
                        what: "classes",
                        index: y,
                        len: *classes,
                    });
                }
                let row = last.row(s);
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
                loss += lse - row[y];
                let grow = grad.row_mut(s);
                grow[y] -= 1.0;
                for v in grow.iter_mut() {
                    *v *= scale;
                }
            }
            Ok((loss * scale, grad))
        }
        (Activation::SoftmaxXent, Targets::Values(_)) => Err(Error::domain(
            "a softmax cross-entropy head requires label targets",
        )),
        (_, Targets::Values(y)) => {
            if y.cols() != spec.output_dim() {
                return Err(Error::Dimension {
                    context: "target values",
                    expected: spec.output_dim(),
                    actual: y.cols(),
                });
            }
            let scale = 1.0 / m as f64;
            let mut grad = Matrix::zeros(m, y.cols());
            let mut loss = 0.0;
            for s in 0..m {
                let (pr, yr) = (last.row(s), y.row(s));
                let grow = grad.row_mut(s);
                for k in 0..pr.len() {
                    let diff = pr[k] - yr[k];
                    loss += 0.5 * diff * diff;
                    grow[k] = diff * scale;
                }
            }
            Ok((loss * scale, grad))
        }
        (_, Targets::Labels { .. }) => Err(Error::domain(
            "label targets require a softmax cross-entropy head",
        )),
    }
}

/// Backward pass over a cache produced by [`forward`]. Fills the cache's
/// downstream gradients and returns the mean loss and the parameter gradient.
pub fn backward(
    spec: &MlpSpec,
    theta: &ParamVector,
    cache: &mut LayerCache,
    targets: &Targets,
) -> Result<(f64, ParamVector)> {
    spec.check_theta(theta)?;
    if cache.activations.len() != spec.layer_count() + 1 {
        return Err(Error::state(
            "cache does not match the network depth",
        ));
    }
    let t = theta.as_slice();
    let (loss, head_grad) = head_loss_and_grad(spec, cache.activations.last().unwrap(), targets)?;

    let mut grad = vec![0.0; spec.param_count()];
    let mut downstream = vec![Matrix::zeros(0, 0); spec.layer_count() + 1];
    downstream[spec.layer_count()] = head_grad;
    for l in (0..spec.layer_count()).rev() {
        let slice = spec.layer_slice(l)?;
        let dz = gate_by_derivative(
            &downstream[l + 1],
            &cache.activations[l + 1],
            spec.activation(l),
        );
        let (dw, db) = weight_grads(&dz, &cache.activations[l]);
        grad[slice.weights.clone()].copy_from_slice(&dw);
        grad[slice.biases.clone()].copy_from_slice(&db);
        downstream[l] = downstream_prev(&dz, &t[slice.weights], slice.in_dim);
    }
    cache.downstream = downstream;
    Ok((loss, ParamVector::checked(grad, "network gradient")?))
}

/// Gradient of the loss with respect to one contiguous block of weight
/// layers, using the cached input activation at the block's lower boundary
/// and the cached (frozen) downstream gradient at its upper boundary.
///
/// `theta_local` holds just the block's parameters in packing order. When it
/// equals the block's slice of the parameters the cache was built with, the
/// result equals that slice of the full gradient.
pub fn local_grad_from_cache(
    spec: &MlpSpec,
    theta_local: &ParamVector,
    cache: &LayerCache,
    layers: Range<usize>,
) -> Result<ParamVector> {
    if layers.start >= layers.end || layers.end > spec.layer_count() {
        return Err(Error::domain(format!(
            "layer block {}..{} is not a non-empty range within {} layers",
            layers.start,
            layers.end,
            spec.layer_count()
        )));
    }
    if cache.activations.len() != spec.layer_count() + 1 {
        return Err(Error::state("cache does not match the network depth"));
    }
    let counts = spec.layer_param_counts();
    let local_len: usize = counts[layers.clone()].iter().sum();
    if theta_local.len() != local_len {
        return Err(Error::Dimension {
            context: "block parameters",
            expected: local_len,
            actual: theta_local.len(),
        });
    }
    let t = theta_local.as_slice();

    // forward through the block from the frozen input activation
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(cache.activation(layers.start)?.clone());
    let mut offset = 0;
    for l in layers.clone() {
        let (in_dim, out_dim) = (spec.sizes[l], spec.sizes[l + 1]);
        let w = &t[offset..offset + in_dim * out_dim];
        let b = &t[offset + in_dim * out_dim..offset + (in_dim + 1) * out_dim];
        let mut z = linear_forward(acts.last().unwrap(), w, b, out_dim);
        apply_activation(&mut z, spec.activation(l));
        acts.push(z);
        offset += counts[l];
    }

    // backward from the frozen downstream factor
    let mut grad = vec![0.0; local_len];
    let mut delta = cache.downstream(layers.end)?.clone();
    let mut offset = local_len;
    for (i, l) in layers.clone().enumerate().rev() {
        let (in_dim, out_dim) = (spec.sizes[l], spec.sizes[l + 1]);
        offset -= counts[l];
        let w = &t[offset..offset + in_dim * out_dim];
        let dz = gate_by_derivative(&delta, &acts[i + 1], spec.activation(l));
        let (dw, db) = weight_grads(&dz, &acts[i]);
        grad[offset..offset + in_dim * out_dim].copy_from_slice(&dw);
        grad[offset + in_dim * out_dim..offset + (in_dim + 1) * out_dim].copy_from_slice(&db);
        if i > 0 {
            delta = downstream_prev(&dz, w, in_dim);
        }
    }
    ParamVector::checked(grad, "block gradient")
}

/// An MLP bound to a dataset, exposed as an [`Objective`] over the flat
/// parameter vector.
pub struct NetObjective {
    spec: MlpSpec,
    data: Arc<Dataset>,
}

impl NetObjective {
    pub fn new(spec: MlpSpec, data: Arc<Dataset>) -> Result<Self> {
        if spec.input_dim() != data.input_dim() {
            return Err(Error::Dimension {
                context: "network input width",
                expected: data.input_dim(),
                actual: spec.input_dim(),
            });
        }
        if spec.output_dim() != data.output_dim() {
            return Err(Error::Dimension {
                context: "network output width",
                expected: data.output_dim(),
                actual: spec.output_dim(),
            });
        }
        let head = *spec.activations.last().unwrap();
        match (head, data.targets()) {
            (Activation::SoftmaxXent, Targets::Labels { .. }) => {}
            (Activation::SoftmaxXent, Targets::Values(_)) => {
                return Err(Error::domain(
                    "a softmax cross-entropy head requires label targets",
                ))
            }
            (_, Targets::Labels { .. }) => {
                return Err(Error::domain(
                    "label targets require a softmax cross-entropy head",
                ))
            }
            (_, Targets::Values(_)) => {}
        }
        Ok(NetObjective { spec, data })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    /// Loss, gradient, and boundary cache in one pass over the batch.
    pub fn forward_backward(
        &self,
        theta: &ParamVector,
        batch: &BatchRef,
    ) -> Result<(f64, ParamVector, LayerCache)> {
        let (inputs, targets) = self.data.select_batch(batch)?;
        let (_, mut cache) = forward(&self.spec, theta, &inputs)?;
        let (loss, grad) = backward(&self.spec, theta, &mut cache, &targets)?;
        Ok((loss, grad, cache))
    }

    /// Fraction of batch samples whose arg-max prediction matches the
    /// target (the target's arg-max row for value targets). Ties resolve to
    /// the lowest index.
    pub fn accuracy(&self, theta: &ParamVector, batch: &BatchRef) -> Result<f64> {
        let (inputs, targets) = self.data.select_batch(batch)?;
        let (pred, _) = forward(&self.spec, theta, &inputs)?;
        let argmax = |row: &[f64]| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        };
        let mut hits = 0usize;
        match &targets {
            Targets::Labels { labels, .. } => {
                for (s, &y) in labels.iter().enumerate() {
                    if argmax(pred.row(s)) == y {
                        hits += 1;
                    }
                }
            }
            Targets::Values(y) => {
                for s in 0..y.rows() {
                    if argmax(pred.row(s)) == argmax(y.row(s)) {
                        hits += 1;
                    }
                }
            }
        }
        Ok(hits as f64 / pred.rows() as f64)
    }
}

impl Objective for NetObjective {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn eval(&self, theta: &ParamVector, batch: &BatchRef) -> Result<(f64, ParamVector)> {
        let (loss, grad, _) = self.forward_backward(theta, batch)?;
        Ok((loss, grad))
    }

    fn loss(&self, theta: &ParamVector, batch: &BatchRef) -> Result<f64> {
        let (inputs, targets) = self.data.select_batch(batch)?;
        let (_, cache) = forward(&self.spec, theta, &inputs)?;
        let (loss, _) = head_loss_and_grad(&self.spec, cache.activations.last().unwrap(), &targets)?;
        Ok(loss)
    }
}
