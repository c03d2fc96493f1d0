use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::NnError;

/// Fully connected network with `tanh` on every hidden layer and a linear
/// output layer.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs with a weight
/// matrix of shape `(sizes[l + 1], sizes[l])`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations recorded by a forward pass; `activations[0]` is the input
/// batch and `activations[l]` the output of layer `l - 1`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

impl MlpParams {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::BadLayerSizes(sizes.to_vec()));
        }
        let weights = sizes
            .windows(2)
            .map(|w| Array2::zeros((w[1], w[0])))
            .collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Weights uniform in `±sqrt(1 / fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut p = Self::zeros(sizes)?;
        for w in &mut p.weights {
            let bound = (1.0 / w.ncols() as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
        }
        Ok(p)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes).expect("sizes already validated")
    }

    /// Parameter slices in storage order: for each layer, weights then biases.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| {
            [
                w.as_slice().expect("standard layout"),
                b.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| {
                [
                    w.as_slice_mut().expect("standard layout"),
                    b.as_slice_mut().expect("standard layout"),
                ]
            })
    }

    pub fn is_finite(&self) -> bool {
        self.slices().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let cache = self.forward_batch(x)?;
        let out = cache.output().row(0).to_vec();
        Ok((out, cache))
    }

    /// Forward pass over a batch with one sample per row.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache, NnError> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let last = self.num_layers() - 1;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(input.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Reverse-mode pass. `output_grad` holds the gradient of a scalar loss
    /// with respect to each output (same shape as the cached output); the
    /// result holds its gradient with respect to every parameter, summed over
    /// the batch.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> Result<MlpParams, NnError> {
        let shape_ok = cache.activations.len() == self.num_layers() + 1
            && cache
                .activations
                .iter()
                .zip(&self.sizes)
                .all(|(a, &n)| a.ncols() == n && a.nrows() == cache.batch_size());
        if !shape_ok || output_grad.dim() != cache.output().dim() {
            return Err(NnError::CacheMismatch);
        }
        let mut grads = self.zeros_like();
        let mut delta = output_grad.to_owned();
        for l in (0..self.num_layers()).rev() {
            // delta is dL/dz for layer l.
            let a_prev = &cache.activations[l];
            grads.weights[l] = delta.t().dot(a_prev);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut d_prev = delta.dot(&self.weights[l]);
                d_prev.zip_mut_with(a_prev, |d, &a| *d *= 1.0 - a * a);
                delta = d_prev;
            }
        }
        Ok(grads)
    }
}
