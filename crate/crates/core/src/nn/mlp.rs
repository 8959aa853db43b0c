//! Fully connected network with SiLU activations and a hand-written reverse pass.
//!
//! Parameters live in one flat buffer, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias vector. Optimizers, EMA and
//! checkpoints all operate on that buffer directly.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{ensure_dim, Error, Result};

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub(crate) fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
pub(crate) fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    fn len(&self) -> usize {
        self.weight_len() + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Pre-activations of every layer from a forward pass, kept for the reverse pass.
#[derive(Debug)]
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

fn layout(widths: &[usize]) -> Result<(Vec<LayerShape>, usize)> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "network widths must list at least input and output sizes, all positive: {widths:?}"
        )));
    }
    let mut offset = 0;
    let layers = widths
        .windows(2)
        .map(|w| {
            let l = LayerShape {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += l.len();
            l
        })
        .collect();
    Ok((layers, offset))
}

impl ForwardCache {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.post.last().expect("at least one layer").view()
    }
}

impl Mlp {
    /// All-zero parameters; the network is identically zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        let (layers, total) = layout(widths)?;
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            params: vec![0.0; total],
        })
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for l in net.layers.clone() {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for p in &mut net.params[l.offset..l.offset + l.len()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let (layers, total) = layout(widths)?;
        ensure_dim(total, params.len())?;
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            params,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
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

    /// `(name, shape, values)` for every weight and bias array.
    pub fn named_arrays(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let w = &self.params[l.offset..l.offset + l.weight_len()];
            let b = &self.params[l.offset + l.weight_len()..l.offset + l.len()];
            out.push((format!("layers.{i}.weight"), vec![l.outputs, l.inputs], w));
            out.push((format!("layers.{i}.bias"), vec![l.outputs], b));
        }
        out
    }

    fn weight(&self, l: &LayerShape) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((l.outputs, l.inputs), &self.params[l.offset..l.offset + l.weight_len()])
            .expect("layout")
    }

    fn bias(&self, l: &LayerShape) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[l.offset + l.weight_len()..l.offset + l.len()])
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(input)?.post.pop().expect("at least one layer"))
    }

    /// Forward pass keeping every intermediate. The output is `post.last()`.
    pub fn forward_cached(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        ensure_dim(self.input_dim(), input.ncols())?;
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let a = if i == 0 { input } else { post[i - 1].view() };
            let mut z = Array2::zeros((a.nrows(), l.outputs));
            general_mat_mul(1.0, &a, &self.weight(l).t(), 0.0, &mut z);
            z += &self.bias(l);
            let act = if i == last { z.clone() } else { z.mapv(silu) };
            pre.push(z);
            post.push(act);
        }
        Ok(ForwardCache {
            input: input.to_owned(),
            pre,
            post,
        })
    }

    /// Reverse pass: given `dL/d(output)`, returns `dL/d(params)` in the flat layout.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        ensure_dim(self.output_dim(), grad_out.ncols())?;
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = grad_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            let l = self.layers[i];
            let a = if i == 0 { cache.input.view() } else { cache.post[i - 1].view() };
            let (gw, gb) = grad[l.offset..l.offset + l.len()].split_at_mut(l.weight_len());
            let mut gw = ArrayViewMut2::from_shape((l.outputs, l.inputs), gw).expect("layout");
            general_mat_mul(1.0, &delta.t(), &a, 0.0, &mut gw);
            let mut gb = ArrayViewMut1::from(gb);
            gb.assign(&delta.sum_axis(Axis(0)));
            if i > 0 {
                let mut da = Array2::zeros((delta.nrows(), l.inputs));
                general_mat_mul(1.0, &delta, &self.weight(&l), 0.0, &mut da);
                da.zip_mut_with(&cache.pre[i - 1], |g, &z| *g *= silu_grad(z));
                delta = da;
            }
        }
        Ok(grad)
    }
}
