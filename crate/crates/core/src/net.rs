//! Two-hidden-layer tanh perceptron with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat buffer laid out as
//! `W1 | b1 | W2 | b2 | W3 | b3`, weights row-major (`out x in`).

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TanhNet {
    input: usize,
    hidden: [usize; 2],
    output: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

fn param_count(input: usize, hidden: [usize; 2], output: usize) -> usize {
    hidden[0] * input + hidden[0] + hidden[1] * hidden[0] + hidden[1] + output * hidden[1] + output
}

impl TanhNet {
    pub fn zeros(input: usize, hidden: [usize; 2], output: usize) -> Result<TanhNet> {
        if input == 0 || output == 0 || hidden.iter().any(|&h| h == 0 || h > MAX_WIDTH) {
            return Err(Error::InvalidConfig(format!(
                "net widths must be in 1..={MAX_WIDTH}, got {hidden:?}"
            )));
        }
        Ok(TanhNet {
            input,
            hidden,
            output,
            params: vec![0.0; param_count(input, hidden, output)],
        })
    }

    /// Glorot-uniform weights, small Gaussian biases.
    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: [usize; 2],
        output: usize,
        rng: &mut R,
    ) -> Result<TanhNet> {
        let mut net = TanhNet::zeros(input, hidden, output)?;
        let bias = Normal::new(0.0, 0.1).expect("valid normal");
        let shapes = net.layer_shapes();
        let mut off = 0;
        for (rows, cols) in shapes {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let w = Uniform::new_inclusive(-limit, limit).expect("valid range");
            for p in &mut net.params[off..off + rows * cols] {
                *p = w.sample(rng);
            }
            off += rows * cols;
            for p in &mut net.params[off..off + rows] {
                *p = bias.sample(rng);
            }
            off += rows;
        }
        Ok(net)
    }

    pub fn from_params(
        input: usize,
        hidden: [usize; 2],
        output: usize,
        params: Vec<f64>,
    ) -> Result<TanhNet> {
        let mut net = TanhNet::zeros(input, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    fn layer_shapes(&self) -> [(usize, usize); 3] {
        [
            (self.hidden[0], self.input),
            (self.hidden[1], self.hidden[0]),
            (self.output, self.hidden[1]),
        ]
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn hidden(&self) -> [usize; 2] {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn dense(params: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
        let (w, b) = params.split_at(rows * cols);
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            out[r] = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_traced(x).0
    }

    pub fn forward_traced(&self, x: &[f64]) -> (Vec<f64>, Trace) {
        debug_assert_eq!(x.len(), self.input);
        let [h1, h2] = self.hidden;
        let mut off = 0;
        let mut a1 = vec![0.0; h1];
        Self::dense(&self.params[off..], h1, self.input, x, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        off += h1 * self.input + h1;
        let mut a2 = vec![0.0; h2];
        Self::dense(&self.params[off..], h2, h1, &a1, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.tanh());
        off += h2 * h1 + h2;
        let mut out = vec![0.0; self.output];
        Self::dense(&self.params[off..], self.output, h2, &a2, &mut out);
        (
            out,
            Trace {
                input: x.to_vec(),
                a1,
                a2,
            },
        )
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`,
    /// and returns `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let [h1, h2] = self.hidden;
        let n_in = self.input;
        let o1 = 0;
        let o2 = o1 + h1 * n_in + h1;
        let o3 = o2 + h2 * h1 + h2;

        // output layer
        let mut d_a2 = vec![0.0; h2];
        for r in 0..self.output {
            let g = grad_out[r];
            let row = o3 + r * h2;
            for c in 0..h2 {
                grad[row + c] += g * trace.a2[c];
                d_a2[c] += g * self.params[row + c];
            }
            grad[o3 + self.output * h2 + r] += g;
        }
        // second hidden layer
        let mut d_a1 = vec![0.0; h1];
        for r in 0..h2 {
            let g = d_a2[r] * (1.0 - trace.a2[r] * trace.a2[r]);
            let row = o2 + r * h1;
            for c in 0..h1 {
                grad[row + c] += g * trace.a1[c];
                d_a1[c] += g * self.params[row + c];
            }
            grad[o2 + h2 * h1 + r] += g;
        }
        // first hidden layer
        let mut d_in = vec![0.0; n_in];
        for r in 0..h1 {
            let g = d_a1[r] * (1.0 - trace.a1[r] * trace.a1[r]);
            let row = o1 + r * n_in;
            for c in 0..n_in {
                grad[row + c] += g * trace.input[c];
                d_in[c] += g * self.params[row + c];
            }
            grad[o1 + h1 * n_in + r] += g;
        }
        d_in
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LayerRepr {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl TanhNet {
    pub(crate) fn to_layers(&self) -> Vec<LayerRepr> {
        let mut off = 0;
        self.layer_shapes()
            .iter()
            .map(|&(rows, cols)| {
                let weights = (0..rows)
                    .map(|r| self.params[off + r * cols..off + (r + 1) * cols].to_vec())
                    .collect();
                off += rows * cols;
                let bias = self.params[off..off + rows].to_vec();
                off += rows;
                LayerRepr { weights, bias }
            })
            .collect()
    }

    pub(crate) fn from_layers(layers: Vec<LayerRepr>) -> Result<TanhNet> {
        let bad = |msg: &str| Error::InvalidConfig(format!("parametric_net: {msg}"));
        if layers.len() != 3 {
            return Err(bad("expected exactly 3 layers"));
        }
        let input = layers[0].weights.first().map_or(0, Vec::len);
        let hidden = [layers[0].weights.len(), layers[1].weights.len()];
        let output = layers[2].weights.len();
        let mut net = TanhNet::zeros(input, hidden, output)?;
        let shapes = net.layer_shapes();
        let mut params = Vec::with_capacity(net.params.len());
        for (layer, (rows, cols)) in layers.into_iter().zip(shapes) {
            if layer.weights.len() != rows || layer.bias.len() != rows {
                return Err(bad("inconsistent layer shapes"));
            }
            for row in layer.weights {
                if row.len() != cols {
                    return Err(bad("inconsistent layer shapes"));
                }
                params.extend(row);
            }
            params.extend(layer.bias);
        }
        net.params = params;
        Ok(net)
    }
}

impl Serialize for TanhNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_layers().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TanhNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let layers = Vec::<LayerRepr>::deserialize(d)?;
        TanhNet::from_layers(layers).map_err(serde::de::Error::custom)
    }
}
