use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::substream;
use crate::scalar::Scalar;

/// Fully connected ReLU network. Hidden layers output
/// `sqrt(2/n_{l−1}) relu(W f + b)`; the last layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub widths: Vec<usize>,
    pub weights: Vec<Mat<T>>,
    pub biases: Vec<Vec<T>>,
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Pre-activations `h^l`, one per layer.
    pub h: Vec<Vec<T>>,
    /// Layer outputs `f^0 = x, …, f^L`.
    pub f: Vec<Vec<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Gaussian(0, 1) weights and zero biases.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::ConfigError(format!("invalid widths {widths:?}")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::ConfigError("output width must be 1".into()));
        }
        let mut rng = substream(seed, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..widths.len() {
            let mut w = Mat::zeros(widths[l], widths[l - 1]);
            for v in w.data.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = T::c(z);
            }
            weights.push(w);
            biases.push(vec![T::zero(); widths[l]]);
        }
        Ok(Mlp { widths: widths.to_vec(), weights, biases })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().zip(&self.biases).map(|(w, b)| w.data.len() + b.len()).sum()
    }

    fn scale(&self, l: usize) -> T {
        // layer index l is 0-based over weights; fan-in width is widths[l]
        (T::c(2.0) / T::from_usize_lossy(self.widths[l])).sqrt()
    }

    pub fn forward_cached(&self, x: &[T]) -> ForwardCache<T> {
        let depth = self.depth();
        let mut h = Vec::with_capacity(depth);
        let mut f = Vec::with_capacity(depth + 1);
        f.push(x.to_vec());
        for l in 0..depth {
            let mut pre = self.weights[l].matvec(&f[l]);
            for (p, &b) in pre.iter_mut().zip(&self.biases[l]) {
                *p += b;
            }
            let out = if l + 1 == depth {
                pre.clone()
            } else {
                let s = self.scale(l);
                pre.iter().map(|&v| s * v.max(T::zero())).collect()
            };
            h.push(pre);
            f.push(out);
        }
        ForwardCache { h, f }
    }

    pub fn forward(&self, x: &[T]) -> T {
        self.forward_cached(x).f.last().unwrap()[0]
    }

    /// Last hidden layer output `f^{L−1}`.
    pub fn last_hidden(&self, x: &[T]) -> Vec<T> {
        let c = self.forward_cached(x);
        c.f[self.depth() - 1].clone()
    }

    /// Gradient of the scalar output with respect to all parameters, scaled by `dout`,
    /// accumulated into `grad`.
    pub fn accumulate_grad(&self, cache: &ForwardCache<T>, dout: T, grad: &mut Gradient<T>) {
        let depth = self.depth();
        let mut delta = vec![dout];
        for l in (0..depth).rev() {
            // delta is dL/dh^l
            let inp = &cache.f[l];
            let gw = &mut grad.weights[l];
            for (i, &di) in delta.iter().enumerate() {
                if di == T::zero() {
                    continue;
                }
                for (g, &v) in gw.row_mut(i).iter_mut().zip(inp) {
                    *g += di * v;
                }
                grad.biases[l][i] += di;
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut up = vec![T::zero(); w.cols];
            for (i, &di) in delta.iter().enumerate() {
                if di == T::zero() {
                    continue;
                }
                for (u, &wv) in up.iter_mut().zip(w.row(i)) {
                    *u += di * wv;
                }
            }
            let s = self.scale(l - 1);
            let hprev = &cache.h[l - 1];
            delta = up.iter().zip(hprev).map(|(&u, &hv)| if hv > T::zero() { u * s } else { T::zero() }).collect();
        }
    }

    pub fn zero_grad(&self) -> Gradient<T> {
        Gradient {
            weights: self.weights.iter().map(|w| Mat::zeros(w.rows, w.cols)).collect(),
            biases: self.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    /// `∇_θ f(x)` flattened layer by layer (weights row-major, then biases).
    pub fn param_gradient(&self, x: &[T]) -> Vec<T> {
        let cache = self.forward_cached(x);
        let mut g = self.zero_grad();
        self.accumulate_grad(&cache, T::one(), &mut g);
        g.flatten()
    }

    pub fn apply(&mut self, grad: &Gradient<T>, lr: T) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            for (a, &b) in w.data.iter_mut().zip(&g.data) {
                *a -= lr * b;
            }
        }
        for (w, g) in self.biases.iter_mut().zip(&grad.biases) {
            for (a, &b) in w.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
    }

    pub fn params(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(&w.data);
            v.extend_from_slice(b);
        }
        v
    }

    pub fn set_params(&mut self, p: &[T]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.data.len();
            w.data.copy_from_slice(&p[k..k + n]);
            k += n;
            let m = b.len();
            b.copy_from_slice(&p[k..k + m]);
            k += m;
        }
    }

    /// Mean-squared-error loss `1/(2n) Σ (y − f)²` and its parameter gradient.
    pub fn loss_and_grad(&self, xs: &Mat<T>, ys: &[T], idx: &[usize]) -> (T, Gradient<T>) {
        let mut g = self.zero_grad();
        let mut loss = T::zero();
        let n = T::from_usize_lossy(idx.len());
        for &i in idx {
            let cache = self.forward_cached(xs.row(i));
            let out = cache.f.last().unwrap()[0];
            let r = out - ys[i];
            loss += r * r;
            self.accumulate_grad(&cache, r / n, &mut g);
        }
        (loss / (T::c(2.0) * n), g)
    }

    pub fn loss(&self, xs: &Mat<T>, ys: &[T]) -> T {
        let n = T::from_usize_lossy(ys.len());
        (0..ys.len()).map(|i| (self.forward(xs.row(i)) - ys[i]).powi(2)).sum::<T>() / (T::c(2.0) * n)
    }
}

#[derive(Debug, Clone)]
pub struct Gradient<T> {
    pub weights: Vec<Mat<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Gradient<T> {
    pub fn flatten(&self) -> Vec<T> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(&w.data);
            v.extend_from_slice(b);
        }
        v
    }
}
