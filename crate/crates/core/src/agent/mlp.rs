//! Small dense tanh network with a hand-written backward pass.
//!
//! Weights are stored input-major (`w[i * n_out + o]`) so that a forward pass
//! over sparse one-hot inputs only touches the rows of non-zero inputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations from one forward pass; `acts[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct Activations<T> {
    pub acts: Vec<Vec<T>>,
}

impl<T: Scalar> Activations<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output layer");
        let n = (0..sizes.len() - 1)
            .map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1])
            .sum();
        Self {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); n],
        }
    }

    /// Orthogonal weights scaled by `gains[l]` per layer, zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], gains: &[f64], rng: &mut R) -> Self {
        assert_eq!(gains.len(), sizes.len() - 1);
        let mut m = Self::zeros(sizes);
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let q = orthogonal_matrix(n_out, n_in, rng);
            let (w, _) = m.layer_mut(l);
            for o in 0..n_out {
                for i in 0..n_in {
                    w[i * n_out + o] = T::of(gains[l] * q[o * n_in + i]);
                }
            }
        }
        m
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Option<Self> {
        let m = Self::zeros(sizes);
        (m.params.len() == params.len()).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1])
            .sum()
    }

    fn split(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let off = self.offset(l);
        let nw = self.sizes[l] * self.sizes[l + 1];
        (off..off + nw, off + nw..off + nw + self.sizes[l + 1])
    }

    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (w, b) = self.split(l);
        (&self.params[w], &self.params[b])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        let (w, b) = self.split(l);
        let (head, tail) = self.params.split_at_mut(b.start);
        (&mut head[w], &mut tail[..b.end - b.start])
    }

    pub fn forward(&self, x: &[T], cache: &mut Activations<T>) {
        assert_eq!(x.len(), self.sizes[0], "input width");
        let layers = self.n_layers();
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let n_out = self.sizes[l + 1];
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            out.extend_from_slice(b);
            for (i, &xi) in input.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                let row = &w[i * n_out..(i + 1) * n_out];
                for (o, &wv) in out.iter_mut().zip(row) {
                    *o += xi * wv;
                }
            }
            if l + 1 < layers {
                for o in out.iter_mut() {
                    *o = o.tanh();
                }
            }
        }
    }

    /// Accumulates parameter gradients for one sample given `d_out = dL/d(output)`.
    pub fn backward(&self, cache: &Activations<T>, d_out: &[T], grad: &mut [T]) {
        let layers = self.n_layers();
        let mut delta = d_out.to_vec();
        let mut next = Vec::new();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wr, br) = self.split(l);
            let input = &cache.acts[l];
            {
                let gb = &mut grad[br];
                for (g, &d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            let gw = &mut grad[wr.clone()];
            for (i, &xi) in input.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                let row = &mut gw[i * n_out..(i + 1) * n_out];
                for (g, &d) in row.iter_mut().zip(&delta) {
                    *g += xi * d;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[wr];
            next.clear();
            next.resize(n_in, T::zero());
            for (i, n) in next.iter_mut().enumerate() {
                let row = &w[i * n_out..(i + 1) * n_out];
                let s: T = row.iter().zip(&delta).map(|(&a, &b)| a * b).sum();
                let a = input[i];
                *n = s * (T::one() - a * a);
            }
            std::mem::swap(&mut delta, &mut next);
        }
    }
}

/// Row-major `rows x cols` matrix with orthonormal rows or columns.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    // `short` orthonormal vectors of length `tall`, by modified Gram-Schmidt.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..tall).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    let mut m = vec![0.0; rows * cols];
    for (k, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            if rows >= cols {
                m[j * cols + k] = x;
            } else {
                m[k * cols + j] = x;
            }
        }
    }
    m
}
