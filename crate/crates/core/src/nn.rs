//! Dense ReLU networks with a hand-written backward pass and an Adam
//! optimizer, on `ndarray` matrices. Inputs are batches of row vectors.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One affine layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }
}

/// Feed-forward network: ReLU on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Intermediate values of a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

/// Parameter-shaped gradient (or moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Mlp {
    /// Uniform fan-in initialization: weights and biases in
    /// `±1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)),
                    b: Array1::from_shape_simple_fn(w[1], || rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                w: Array2::zeros((w[0], w[1])),
                b: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    /// Scale the last layer, e.g. to start a policy head near zero.
    pub fn scale_output_layer(&mut self, k: f64) {
        if let Some(l) = self.layers.last_mut() {
            l.w *= k;
            l.b *= k;
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.w);
            z += &l.b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(x).into_raw_vec_and_offset().0
    }

    /// Forward pass keeping what the backward pass needs. With `dropout`,
    /// hidden layer `i` drops units with probability `rates[i]` and scales
    /// survivors by `1/(1-p)`.
    pub fn forward_cached(
        &self,
        x: ArrayView2<f64>,
        mut dropout: Option<(&[f64], &mut ChaCha8Rng)>,
    ) -> (Array2<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.w);
            z += &l.b;
            cache.inputs.push(a);
            if i == last {
                cache.pre.push(z.clone());
                cache.masks.push(None);
                a = z;
                break;
            }
            let mut h = z.mapv(|v| v.max(0.0));
            let mask = match dropout.as_mut() {
                Some((rates, rng)) if rates.get(i).copied().unwrap_or(0.0) > 0.0 => {
                    let p = rates[i];
                    let keep = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_simple_fn(h.raw_dim(), || if rng.random::<f64>() < p { 0.0 } else { keep });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            cache.pre.push(z);
            cache.masks.push(mask);
            a = h;
        }
        (a, cache)
    }

    /// Gradients of `sum(dy ⊙ y)` with respect to the parameters and the
    /// input batch.
    pub fn backward(&self, cache: &ForwardCache, dy: &Array2<f64>) -> (Grads, Array2<f64>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut dz = dy.clone();
        for i in (0..n).rev() {
            let l = &self.layers[i];
            let gw = cache.inputs[i].t().dot(&dz);
            let gb = dz.sum_axis(Axis(0));
            grads.push((gw, gb));
            let mut da = dz.dot(&l.w.t());
            if i > 0 {
                if let Some(m) = &cache.masks[i - 1] {
                    da *= m;
                }
                Zip::from(&mut da).and(&cache.pre[i - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            dz = da;
        }
        grads.reverse();
        (Grads { layers: grads }, dz)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter count");
        let mut it = p.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
    }

    /// `self ← tau·src + (1 − tau)·self`.
    pub fn soft_update_from(&mut self, src: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&src.layers) {
            Zip::from(&mut t.w).and(&s.w).for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
            Zip::from(&mut t.b).and(&s.b).for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
    }
}

impl Grads {
    pub fn zeros_like(m: &Mlp) -> Self {
        Self {
            layers: m
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn scale(&mut self, k: f64) {
        for (w, b) in &mut self.layers {
            *w *= k;
            *b *= k;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub t: u64,
    pub m: Grads,
    pub v: Grads,
}

impl Adam {
    pub fn new(model: &Mlp, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            t: 0,
            m: Grads::zeros_like(model),
            v: Grads::zeros_like(model),
        }
    }

    /// One descent step along `g`.
    pub fn step(&mut self, model: &mut Mlp, g: &Grads) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let (gw, gb) = &g.layers[i];
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            Zip::from(&mut layer.w).and(gw).and(mw).and(vw).for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.b).and(gb).and(mb).and(vb).for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Scalar Adam state, for temperature and similar single parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdam {
    pub cfg: AdamConfig,
    pub t: u64,
    pub m: f64,
    pub v: f64,
}

impl ScalarAdam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, t: 0, m: 0.0, v: 0.0 }
    }

    pub fn step(&mut self, p: &mut f64, g: f64) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        self.m = beta1 * self.m + (1.0 - beta1) * g;
        self.v = beta2 * self.v + (1.0 - beta2) * g * g;
        let mh = self.m / (1.0 - beta1.powi(self.t as i32));
        let vh = self.v / (1.0 - beta2.powi(self.t as i32));
        *p -= lr * mh / (vh.sqrt() + eps);
    }
}

/// Max over components of `|a - b| / max(1e-8, |a| + |b|)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / (a.abs() + b.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 1]);
        assert_eq!(m.forward_one(&[1.0, -2.0, 3.0]), vec![0.0]);
    }

    #[test]
    fn hand_computed_single_unit() {
        let m = Mlp {
            layers: vec![
                Dense { w: array![[2.0], [-1.0]], b: array![0.5] },
                Dense { w: array![[3.0]], b: array![-1.0] },
            ],
        };
        // relu(2*1 - 1*0.5 + 0.5) = 2; 3*2 - 1 = 5
        assert_eq!(m.forward_one(&[1.0, 0.5]), vec![5.0]);
        // relu(-2 - 1 + 0.5) = 0 -> -1
        assert_eq!(m.forward_one(&[-1.0, 1.0]), vec![-1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Mlp::new(&[4, 6, 5, 2], &mut rng);
            let x = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
            let dy = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
            let loss = |m: &Mlp, x: &Array2<f64>| (&m.forward(x.view()) * &dy).sum();
            let (_, cache) = m.forward_cached(x.view(), None);
            let (g, dx) = m.backward(&cache, &dy);
            let p0 = m.flat_params();
            let num = numeric_gradient(&p0, 1e-6, |p| {
                let mut mm = m.clone();
                mm.set_flat_params(p);
                loss(&mm, &x)
            });
            assert!(max_relative_error(&g.flat(), &num) < 1e-5);
            let xf: Vec<f64> = x.iter().copied().collect();
            let num_x = numeric_gradient(&xf, 1e-6, |p| loss(&m, &Array2::from_shape_vec((3, 4), p.to_vec()).unwrap()));
            assert!(max_relative_error(&dx.iter().copied().collect::<Vec<_>>(), &num_x) < 1e-5);
        }
    }

    #[test]
    fn dropout_is_seeded_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[2, 50, 1], &mut rng);
        let x = array![[0.3, -0.2]];
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            m.forward_cached(x.view(), Some((&[0.5], &mut r))).0
        };
        assert_eq!(run(9), run(9));
        let (_, cache) = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            m.forward_cached(x.view(), Some((&[0.5], &mut r)))
        };
        let mask = cache.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|v| *v == 0.0 || *v == 2.0));
    }

    #[test]
    fn soft_update_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Mlp::new(&[3, 4, 1], &mut rng);
        let mut b = Mlp::new(&[3, 4, 1], &mut rng);
        let before = b.flat_params();
        b.soft_update_from(&a, 0.005);
        for ((t, o), n) in before.iter().zip(a.flat_params()).zip(b.flat_params()) {
            assert!((n - (0.005 * o + 0.995 * t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut m = Mlp { layers: vec![Dense { w: array![[3.0]], b: array![-2.0] }] };
        let mut opt = Adam::new(&m, AdamConfig::with_lr(0.05));
        for _ in 0..2000 {
            let g = Grads { layers: vec![(m.layers[0].w.clone(), m.layers[0].b.clone())] };
            opt.step(&mut m, &g);
        }
        assert!(m.flat_params().iter().all(|p| p.abs() < 1e-2));
        let mut p = 5.0;
        let mut s = ScalarAdam::new(AdamConfig::with_lr(0.05));
        for _ in 0..2000 {
            let g = 2.0 * p;
            s.step(&mut p, g);
        }
        assert!(p.abs() < 1e-2);
    }
}
