//! Compact model descriptions like `64x32x10`, `2x16x2:relu`, or
//! `8x8x1:tanh:mse` for the gradient-check command.
//!
//! The first segment is the layer sizes separated by `x`. Optional `:`
//! suffixes select the hidden activation (`tanh`, `relu`, `identity`) and
//! an `mse` flag that swaps the default softmax/cross-entropy head for an
//! identity-output squared-error head.

use apts::net::{Activation, MlpSpec};

use crate::HarnessError;

/// Widest layer accepted from a spec string.
pub const MAX_WIDTH: usize = 4096;
/// Most size entries (layers + 1) accepted from a spec string.
pub const MAX_SIZES: usize = 16;

#[derive(Clone, Debug)]
pub struct ParsedModel {
    pub spec: MlpSpec,
    /// True when the head is identity + mean squared error.
    pub mse_head: bool,
}

pub fn parse_model_spec(text: &str) -> Result<ParsedModel, HarnessError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(HarnessError::invalid("model spec is empty"));
    }
    let mut parts = text.split(':');
    let sizes_part = parts.next().unwrap_or("");

    let mut sizes = Vec::new();
    for tok in sizes_part.split('x') {
        let tok = tok.trim();
        let n: usize = tok.parse().map_err(|_| {
            HarnessError::invalid(format!(
                "model spec `{text}`: `{tok}` is not a layer size"
            ))
        })?;
        if n == 0 || n > MAX_WIDTH {
            return Err(HarnessError::invalid(format!(
                "model spec `{text}`: layer size {n} outside 1..={MAX_WIDTH}"
            )));
        }
        sizes.push(n);
    }
    if sizes.len() < 2 || sizes.len() > MAX_SIZES {
        return Err(HarnessError::invalid(format!(
            "model spec `{text}`: need between 2 and {MAX_SIZES} sizes, got {}",
            sizes.len()
        )));
    }

    let mut hidden_act: Option<Activation> = None;
    let mut mse_head = false;
    for flag in parts {
        match flag.trim() {
            "tanh" | "relu" | "identity" => {
                if hidden_act.is_some() {
                    return Err(HarnessError::invalid(format!(
                        "model spec `{text}`: activation given twice"
                    )));
                }
                hidden_act = Some(match flag.trim() {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    _ => Activation::Identity,
                });
            }
            "mse" => {
                if mse_head {
                    return Err(HarnessError::invalid(format!(
                        "model spec `{text}`: `mse` given twice"
                    )));
                }
                mse_head = true;
            }
            other => {
                return Err(HarnessError::invalid(format!(
                    "model spec `{text}`: unknown flag `{other}`"
                )))
            }
        }
    }
    let hidden_act = hidden_act.unwrap_or(Activation::Tanh);

    let layers = sizes.len() - 1;
    let mut activations = vec![hidden_act; layers];
    if let Some(last) = activations.last_mut() {
        *last = if mse_head {
            Activation::Identity
        } else {
            Activation::SoftmaxXent
        };
    }

    let spec = MlpSpec::new(sizes, activations)?;
    Ok(ParsedModel { spec, mse_head })
}
