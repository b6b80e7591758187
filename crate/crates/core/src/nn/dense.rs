use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{prefixed, Parameters, Tensor};
use crate::error::{Error, Result};

/// Affine map `y = x·Wᵀ + b` applied row-wise; `weights` is out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    /// Uniform initialization in ±1/√fan_in.
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Dense {
        let bound = 1.0 / (input as f64).sqrt();
        Dense {
            weights: Array2::from_shape_fn((output, input), |_| rng.gen_range(-bound..=bound)),
            biases: Array1::from_shape_fn(output, |_| rng.gen_range(-bound..=bound)),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Dense {
        Dense { weights: Array2::zeros((output, input)), biases: Array1::zeros(output) }
    }

    pub fn identity(dim: usize) -> Dense {
        Dense { weights: Array2::eye(dim), biases: Array1::zeros(dim) }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("dense expects {} inputs, got {}", self.input_dim(), x.ncols())));
        }
        Ok(x.dot(&self.weights.t()) + &self.biases)
    }

    /// Returns parameter gradients and the gradient with respect to `x`.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<(Dense, Array2<f64>)> {
        if x.ncols() != self.input_dim() || upstream.ncols() != self.output_dim() || x.nrows() != upstream.nrows() {
            return Err(Error::Shape(format!(
                "dense backward: x {:?}, upstream {:?}, weights {:?}",
                x.dim(),
                upstream.dim(),
                self.weights.dim()
            )));
        }
        let mut weights = Array2::zeros(self.weights.dim());
        weights.assign(&upstream.t().dot(&x));
        let grad = Dense { weights, biases: upstream.sum_axis(Axis(0)) };
        Ok((grad, upstream.dot(&self.weights)))
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        vec![
            Tensor {
                name: "weights".into(),
                shape: self.weights.shape().to_vec(),
                data: self.weights.as_slice().expect("standard layout"),
            },
            Tensor {
                name: "biases".into(),
                shape: self.biases.shape().to_vec(),
                data: self.biases.as_slice().expect("standard layout"),
            },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.weights.as_slice_mut().expect("standard layout"),
            self.biases.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Stack of dense layers with tanh between them (none after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and the final output of a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl Mlp {
    /// `sizes` lists the input width, hidden widths and output width.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Mlp {
        assert!(sizes.len() >= 2, "an MLP needs at least an input and output size");
        Mlp { layers: sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect() }
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp { layers: self.layers.iter().map(|l| Dense::zeros(l.input_dim(), l.output_dim())).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<MlpCache> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(h.view())?;
            if k + 1 < self.layers.len() {
                y.mapv_inplace(f64::tanh);
            }
            inputs.push(h);
            h = y;
        }
        Ok(MlpCache { inputs, output: h })
    }

    pub fn backward(&self, cache: &MlpCache, upstream: ArrayView2<f64>) -> Result<(Mlp, Array2<f64>)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.to_owned();
        for k in (0..self.layers.len()).rev() {
            if k + 1 < self.layers.len() {
                // The input of layer k+1 is tanh of layer k's output.
                let act = &cache.inputs[k + 1];
                g.zip_mut_with(act, |g, a| *g *= 1.0 - a * a);
            }
            let (grad, gx) = self.layers[k].backward(cache.inputs[k].view(), g.view())?;
            grads.push(grad);
            g = gx;
        }
        grads.reverse();
        Ok((Mlp { layers: grads }, g))
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| prefixed(&format!("layer{k}"), l.tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let d = Dense::identity(3);
        let x = array![[1.0, -2.0, 0.5], [0.0, 3.0, 4.0]];
        assert_eq!(d.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dense::new(4, 3, &mut rng);
        let x = Array2::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let (g, gx) = d.backward(x.view(), Array2::zeros((2, 3)).view()).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let d = Dense::zeros(3, 2);
        assert!(d.forward(Array2::zeros((1, 4)).view()).is_err());
        assert!(d.backward(Array2::zeros((1, 3)).view(), Array2::zeros((2, 2)).view()).is_err());
    }

    #[test]
    fn forward_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mlp::new(&[5, 16, 1], &mut rng);
        let x = Array2::from_shape_fn((7, 5), |_| rng.gen_range(-1.0..1.0));
        assert_eq!(m.forward(x.view()).unwrap(), m.forward(x.view()).unwrap());
    }
}
