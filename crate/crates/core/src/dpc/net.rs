//! Pointwise voting network: an MLP backbone, two 3-wide head layers, and a
//! batch normalization over points that yields the votes.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const INPUT_DIM: usize = 9;
pub const VOTE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.1;

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => (x > 0.0) as u8 as f64,
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::LeakyRelu => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::LeakyRelu,
            2 => Activation::Tanh,
            3 => Activation::Identity,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Activation::Relu,
            Activation::LeakyRelu,
            Activation::Tanh,
            Activation::Identity,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::input(format!("unknown activation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Hidden widths of the backbone; the last one is the feature size.
    pub backbone: Vec<usize>,
    pub backbone_activation: Activation,
    pub head_activation: Activation,
    /// Initial batch-norm scale, i.e. the initial vote spread in meters.
    pub vote_scale: f64,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            backbone: vec![64, 128],
            backbone_activation: Activation::Relu,
            head_activation: Activation::LeakyRelu,
            vote_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Linear {
    fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut rng::Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound)),
            bias: Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound)),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    fn new(dim: usize, scale: f64) -> Self {
        Self {
            gamma: Array1::from_elem(dim, scale),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with batch statistics.
    Train,
    /// Normalize with running statistics.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotingNet {
    /// Backbone layers followed by the two head layers.
    pub layers: Vec<Linear>,
    pub norm: BatchNorm,
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    normalized: Array2<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
    inv_std: Array1<f64>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().into_iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl VotingNet {
    pub fn new(config: &NetConfig) -> Result<Self> {
        if config.backbone.is_empty() || config.backbone.contains(&0) {
            return Err(Error::input("backbone widths must be non-empty and positive"));
        }
        if !(config.vote_scale > 0.0) {
            return Err(Error::input("vote_scale must be > 0"));
        }
        let mut rng = rng::rng(config.seed);
        let mut layers = Vec::new();
        let mut width = INPUT_DIM;
        for &w in &config.backbone {
            layers.push(Linear::init(width, w, config.backbone_activation, &mut rng));
            width = w;
        }
        layers.push(Linear::init(width, VOTE_DIM, config.head_activation, &mut rng));
        layers.push(Linear::init(VOTE_DIM, VOTE_DIM, config.head_activation, &mut rng));
        Ok(Self {
            layers,
            norm: BatchNorm::new(VOTE_DIM, config.vote_scale),
        })
    }

    /// Rebuilds a network from explicit parts, checking shapes.
    pub fn from_parts(layers: Vec<Linear>, norm: BatchNorm) -> Result<Self> {
        let mut width = INPUT_DIM;
        for l in &layers {
            if l.inputs() != width || l.bias.len() != l.outputs() {
                return Err(Error::input("layer shapes do not chain"));
            }
            width = l.outputs();
        }
        let d = norm.gamma.len();
        if layers.len() < 2
            || width != VOTE_DIM
            || [norm.beta.len(), norm.running_mean.len(), norm.running_var.len()] != [d; 3]
            || d != VOTE_DIM
        {
            return Err(Error::input("network must end in a 3-wide head and normalization"));
        }
        Ok(Self { layers, norm })
    }

    /// Feature width of the backbone.
    pub fn feature_dim(&self) -> usize {
        self.layers[self.layers.len() - 3].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>() + 2 * VOTE_DIM
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out.extend(self.norm.gamma.iter());
        out.extend(self.norm.beta.iter());
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for a net of {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weight
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|p| *p = it.next().unwrap());
        }
        self.norm
            .gamma
            .iter_mut()
            .chain(self.norm.beta.iter_mut())
            .for_each(|p| *p = it.next().unwrap());
        Ok(())
    }

    fn check_input(input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != INPUT_DIM {
            return Err(Error::Dimension(format!(
                "expected {INPUT_DIM} feature columns, got {}",
                input.ncols()
            )));
        }
        if input.nrows() == 0 {
            return Err(Error::EmptyCloud);
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite network input"));
        }
        Ok(())
    }

    fn dense(layer: &Linear, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let pre = x.dot(&layer.weight.t()) + &layer.bias;
        let post = pre.mapv(|v| layer.activation.apply(v));
        (pre, post)
    }

    /// Per-point votes, `N × 3`.
    pub fn forward(&self, input: ArrayView2<f64>, mode: Mode) -> Result<Array2<f64>> {
        match mode {
            Mode::Train => self.forward_train(input).map(|(v, _)| v),
            Mode::Eval => {
                Self::check_input(&input)?;
                let mut x = input.to_owned();
                for l in &self.layers {
                    x = Self::dense(l, &x).1;
                }
                let bn = &self.norm;
                let inv_std = bn.running_var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                Ok((x - &bn.running_mean) * &(inv_std * &bn.gamma) + &bn.beta)
            }
        }
    }

    /// Training-mode forward pass keeping what `backward` needs.
    pub fn forward_train(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        Self::check_input(&input)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for l in &self.layers {
            let (a, h) = Self::dense(l, &x);
            pre.push(a);
            post.push(h.clone());
            x = h;
        }
        let bn = &self.norm;
        let mean = x.mean_axis(Axis(0)).unwrap();
        let centered = &x - &mean;
        let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
        let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
        let normalized = centered * &inv_std;
        let votes = &normalized * &bn.gamma + &bn.beta;
        Ok((
            votes,
            ForwardCache {
                input: input.to_owned(),
                pre,
                post,
                normalized,
                batch_mean: mean,
                batch_var: var,
                inv_std,
            },
        ))
    }

    /// Moves the running statistics toward the batch statistics of `cache`.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let n = cache.normalized.nrows() as f64;
        let unbiased = if n > 1.0 {
            &cache.batch_var * (n / (n - 1.0))
        } else {
            cache.batch_var.clone()
        };
        let m = self.norm.momentum;
        self.norm.running_mean = &self.norm.running_mean * (1.0 - m) + &cache.batch_mean * m;
        self.norm.running_var = &self.norm.running_var * (1.0 - m) + unbiased * m;
    }

    /// Reverse pass from the gradient of the loss with respect to the votes.
    pub fn backward(&self, cache: &ForwardCache, d_votes: &Array2<f64>) -> Gradients {
        let n = d_votes.nrows() as f64;
        let xhat = &cache.normalized;
        let d_gamma = (d_votes * xhat).sum_axis(Axis(0));
        let d_beta = d_votes.sum_axis(Axis(0));
        let d_xhat = d_votes * &self.norm.gamma;
        let sum_d = d_xhat.sum_axis(Axis(0));
        let sum_dx = (&d_xhat * xhat).sum_axis(Axis(0));
        let mut grad = (d_xhat * n - &sum_d - xhat * &sum_dx) * &(&cache.inv_std / n);

        let mut layers = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        for (i, l) in self.layers.iter().enumerate().rev() {
            let mut d_pre = grad;
            Zip::from(&mut d_pre)
                .and(&cache.pre[i])
                .and(&cache.post[i])
                .for_each(|g, &a, &h| *g *= l.activation.derivative(a, h));
            let x = if i == 0 { &cache.input } else { &cache.post[i - 1] };
            layers[i] = (d_pre.t().dot(x), d_pre.sum_axis(Axis(0)));
            grad = d_pre.dot(&l.weight);
        }
        Gradients {
            layers,
            gamma: d_gamma,
            beta: d_beta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn input(n: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::rng(seed);
        Array2::from_shape_simple_fn((n, INPUT_DIM), || r.random_range(-1.0..1.0))
    }

    #[test]
    fn vote_shape_and_determinism() {
        let net = VotingNet::new(&NetConfig::default()).unwrap();
        for n in [1, 2, 17] {
            let x = input(n, n as u64);
            assert_eq!(net.forward(x.view(), Mode::Eval).unwrap().dim(), (n, 3));
            assert_eq!(net.forward(x.view(), Mode::Train).unwrap().dim(), (n, 3));
        }
        let x = input(50, 1);
        assert_eq!(
            net.forward(x.view(), Mode::Eval).unwrap(),
            net.forward(x.view(), Mode::Eval).unwrap()
        );
        assert_eq!(net.feature_dim(), 128);
    }

    #[test]
    fn zero_final_layer_gives_constant_votes() {
        let mut net = VotingNet::new(&NetConfig {
            head_activation: Activation::Tanh,
            ..NetConfig::default()
        })
        .unwrap();
        let last = net.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        let votes = net.forward(input(20, 2).view(), Mode::Eval).unwrap();
        for row in votes.rows() {
            assert_eq!(row, votes.row(0));
        }
    }

    #[test]
    fn permutation_equivariant() {
        let net = VotingNet::new(&NetConfig::default()).unwrap();
        let x = input(30, 3);
        let perm: Vec<usize> = (0..30).rev().collect();
        let xp = x.select(Axis(0), &perm);
        for mode in [Mode::Eval, Mode::Train] {
            let a = net.forward(x.view(), mode).unwrap();
            let b = net.forward(xp.view(), mode).unwrap();
            for (i, &p) in perm.iter().enumerate() {
                for c in 0..3 {
                    assert!((b[[i, c]] - a[[p, c]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let net = VotingNet::new(&NetConfig::default()).unwrap();
        let mut x = input(4, 0);
        x[[1, 2]] = f64::NAN;
        assert!(matches!(net.forward(x.view(), Mode::Eval), Err(Error::Input(_))));
        assert!(matches!(
            net.forward(Array2::zeros((3, 4)).view(), Mode::Eval),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = VotingNet::new(&NetConfig::default()).unwrap();
        let mut p = net.flat_params();
        assert_eq!(p.len(), net.parameter_count());
        p[0] = 42.0;
        net.set_flat_params(&p).unwrap();
        assert_eq!(net.layers[0].weight[[0, 0]], 42.0);
        assert_eq!(net.flat_params(), p);
    }

    #[test]
    fn backward_matches_finite_differences_for_linear_objective() {
        // objective sum(c ⊙ votes) with smooth activations has no kinks
        let config = NetConfig {
            backbone: vec![6],
            backbone_activation: Activation::Tanh,
            head_activation: Activation::Tanh,
            ..NetConfig::default()
        };
        let net = VotingNet::new(&config).unwrap();
        let x = input(12, 9);
        let c = input(12, 10).slice(ndarray::s![.., 0..3]).to_owned();
        let objective = |n: &VotingNet| (n.forward(x.view(), Mode::Train).unwrap() * &c).sum();
        let (_, cache) = net.forward_train(x.view()).unwrap();
        let analytic = net.backward(&cache, &c).flat();
        let base = net.flat_params();
        let h = 1e-5;
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = base.clone();
            p[i] += h;
            plus.set_flat_params(&p).unwrap();
            p[i] -= 2.0 * h;
            minus.set_flat_params(&p).unwrap();
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            assert!((fd - g).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {g}");
        }
    }
}
