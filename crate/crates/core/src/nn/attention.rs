use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::{softmax, Parameters, Tensor};
use crate::error::{Error, Result};

/// Multi-head scaled dot-product attention with learned Q/K/V projections.
///
/// Projections are d_in × (head_count·d_k); head outputs are concatenated
/// without a further output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub head_count: usize,
    pub d_k: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    queries: Array2<f64>,
    keys: Array2<f64>,
    values: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights per head, each n_q × n_k.
    pub weights: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl MultiHeadAttention {
    pub fn new(d_in: usize, head_count: usize, d_k: usize, rng: &mut impl Rng) -> MultiHeadAttention {
        let bound = 1.0 / (d_in as f64).sqrt();
        let d_model = head_count * d_k;
        let mut init = || Array2::from_shape_fn((d_in, d_model), |_| rng.gen_range(-bound..=bound));
        MultiHeadAttention { w_q: init(), w_k: init(), w_v: init(), head_count, d_k }
    }

    pub fn zeros_like(&self) -> MultiHeadAttention {
        MultiHeadAttention {
            w_q: Array2::zeros(self.w_q.dim()),
            w_k: Array2::zeros(self.w_k.dim()),
            w_v: Array2::zeros(self.w_v.dim()),
            head_count: self.head_count,
            d_k: self.d_k,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn model_dim(&self) -> usize {
        self.head_count * self.d_k
    }

    pub fn forward(&self, queries: ArrayView2<f64>, keys: ArrayView2<f64>, values: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(queries, keys, values)?.output)
    }

    pub fn forward_cached(
        &self,
        queries: ArrayView2<f64>,
        keys: ArrayView2<f64>,
        values: ArrayView2<f64>,
    ) -> Result<AttentionCache> {
        let d_in = self.input_dim();
        if queries.ncols() != d_in || keys.ncols() != d_in || values.ncols() != d_in {
            return Err(Error::Shape(format!("attention expects {d_in}-wide tokens")));
        }
        if keys.nrows() == 0 || queries.nrows() == 0 || keys.nrows() != values.nrows() {
            return Err(Error::Shape(format!(
                "attention over {} queries, {} keys, {} values",
                queries.nrows(),
                keys.nrows(),
                values.nrows()
            )));
        }
        let q = queries.dot(&self.w_q);
        let k = keys.dot(&self.w_k);
        let v = values.dot(&self.w_v);
        let scale = 1.0 / (self.d_k as f64).sqrt();
        let mut output = Array2::zeros((queries.nrows(), self.model_dim()));
        let mut weights = Vec::with_capacity(self.head_count);
        for h in 0..self.head_count {
            let cols = s![.., h * self.d_k..(h + 1) * self.d_k];
            let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for mut row in a.rows_mut() {
                let p = softmax(row.as_slice().expect("contiguous row"));
                row.iter_mut().zip(p).for_each(|(r, p)| *r = p);
            }
            output.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
            weights.push(a);
        }
        Ok(AttentionCache {
            queries: queries.to_owned(),
            keys: keys.to_owned(),
            values: values.to_owned(),
            q,
            k,
            v,
            weights,
            output,
        })
    }

    /// Parameter gradients plus gradients for queries, keys and values.
    pub fn backward(
        &self,
        cache: &AttentionCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(MultiHeadAttention, [Array2<f64>; 3])> {
        if upstream.dim() != cache.output.dim() {
            return Err(Error::Shape(format!(
                "attention upstream {:?} vs output {:?}",
                upstream.dim(),
                cache.output.dim()
            )));
        }
        let scale = 1.0 / (self.d_k as f64).sqrt();
        let mut dq = Array2::zeros(cache.q.dim());
        let mut dk = Array2::zeros(cache.k.dim());
        let mut dv = Array2::zeros(cache.v.dim());
        for h in 0..self.head_count {
            let cols = s![.., h * self.d_k..(h + 1) * self.d_k];
            let a = &cache.weights[h];
            let d_out = upstream.slice(cols);
            let d_a = d_out.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&a.t().dot(&d_out));
            // Row-wise softmax backward.
            let mut d_s = a * &d_a;
            for (mut row, (a_row, da_row)) in d_s.rows_mut().into_iter().zip(a.rows().into_iter().zip(d_a.rows())) {
                let dot: f64 = a_row.iter().zip(da_row).map(|(a, d)| a * d).sum();
                row.iter_mut().zip(a_row).for_each(|(r, a)| *r -= a * dot);
            }
            d_s *= scale;
            dq.slice_mut(cols).assign(&d_s.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&d_s.t().dot(&cache.q.slice(cols)));
        }
        let mut grad = self.zeros_like();
        grad.w_q.assign(&cache.queries.t().dot(&dq));
        grad.w_k.assign(&cache.keys.t().dot(&dk));
        grad.w_v.assign(&cache.values.t().dot(&dv));
        let inputs = [dq.dot(&self.w_q.t()), dk.dot(&self.w_k.t()), dv.dot(&self.w_v.t())];
        Ok((grad, inputs))
    }
}

impl Parameters for MultiHeadAttention {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)]
            .into_iter()
            .map(|(name, w)| Tensor {
                name: name.into(),
                shape: w.shape().to_vec(),
                data: w.as_slice().expect("standard layout"),
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_q.as_slice_mut().expect("standard layout"),
            self.w_k.as_slice_mut().expect("standard layout"),
            self.w_v.as_slice_mut().expect("standard layout"),
        ]
    }
}
