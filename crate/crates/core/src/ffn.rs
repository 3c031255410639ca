//! Shallow feedforward networks `f: [0,u] → ℝ^d` used as drift generators.
//!
//! A network is `t ↦ W² ψ(W¹ t + b¹) + b²` with one hidden layer of width `l`
//! and an affine output layer. Gradients are derived by hand and the
//! parameters are updated with Adam.
//!
//! The flat parameter order is `W¹ (l), b¹ (l), W² (d×l, row-major), b² (d)`.
//! Checkpoint files depend on it.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const SCALED_TANH_GAIN: f64 = 1.7159;
const SCALED_TANH_SLOPE: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `1.7159 · tanh(2x/3)`
    #[default]
    ScaledTanh,
    Tanh,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::ScaledTanh => SCALED_TANH_GAIN * (SCALED_TANH_SLOPE * x).tanh(),
            Activation::Tanh => x.tanh(),
            Activation::Logistic => logistic(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::ScaledTanh => {
                let th = (SCALED_TANH_SLOPE * x).tanh();
                SCALED_TANH_GAIN * SCALED_TANH_SLOPE * (1.0 - th * th)
            }
            Activation::Tanh => {
                let th = x.tanh();
                1.0 - th * th
            }
            Activation::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
        }
    }

    /// A primitive `Ψ` with `Ψ' = ψ`: `log cosh` for tanh, softplus for the
    /// logistic function.
    pub fn antiderivative(self, x: f64) -> f64 {
        match self {
            Activation::ScaledTanh => {
                SCALED_TANH_GAIN / SCALED_TANH_SLOPE * log_cosh(SCALED_TANH_SLOPE * x)
            }
            Activation::Tanh => log_cosh(x),
            Activation::Logistic => softplus(x),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::ScaledTanh => "scaled_tanh",
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled_tanh" => Ok(Activation::ScaledTanh),
            "tanh" => Ok(Activation::Tanh),
            "logistic" => Ok(Activation::Logistic),
            other => Err(Error::Unsupported(format!("activation `{other}`"))),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// One-hidden-layer network of a scalar time input.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    hidden: usize,
    output: usize,
    activation: Activation,
    params: Vec<f64>,
}

impl ShallowNet {
    pub fn param_count(hidden: usize, output: usize) -> usize {
        hidden * (output + 2) + output
    }

    /// All-zero network (`f ≡ 0`).
    pub fn zeros(hidden: usize, output: usize, activation: Activation) -> Self {
        ShallowNet {
            hidden,
            output,
            activation,
            params: vec![0.0; Self::param_count(hidden, output)],
        }
    }

    /// Hidden layer drawn uniformly from `±√(6/(1+l))`, output layer zero, so
    /// the network starts at `f ≡ 0`.
    pub fn init<R: Rng + ?Sized>(
        hidden: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(hidden, output, activation);
        let bound = (6.0 / (1.0 + hidden as f64)).sqrt();
        for v in &mut net.params[..2 * hidden] {
            *v = rng.random_range(-bound..=bound);
        }
        net
    }

    pub fn from_params(
        hidden: usize,
        output: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        if hidden == 0 || output == 0 {
            return Err(Error::InvalidParameter {
                name: "network width",
                reason: "hidden and output widths must be positive".into(),
            });
        }
        let mut net = Self::zeros(hidden, output, activation);
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::dims("network parameters", self.params.len(), params.len()));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.params[..self.hidden]
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.params[self.hidden..2 * self.hidden]
    }

    /// Row-major `d × l`.
    pub fn output_weights(&self) -> &[f64] {
        &self.params[2 * self.hidden..2 * self.hidden + self.output * self.hidden]
    }

    pub fn output_biases(&self) -> &[f64] {
        &self.params[2 * self.hidden + self.output * self.hidden..]
    }

    /// Multiplies the output layer by `factor`, i.e. `f ↦ factor · f`.
    pub fn scale_output(&mut self, factor: f64) {
        let start = 2 * self.hidden;
        self.params[start..].iter_mut().for_each(|v| *v *= factor);
    }

    pub fn forward(&self, t: f64) -> Result<Vec<f64>> {
        if !t.is_finite() {
            return Err(Error::NonFinite("network input"));
        }
        let mut out = vec![0.0; self.output];
        self.forward_into(t, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn forward_into(&self, t: f64, out: &mut [f64]) {
        let l = self.hidden;
        let (w1, b1, w2, b2) = (
            self.hidden_weights(),
            self.hidden_biases(),
            self.output_weights(),
            self.output_biases(),
        );
        out.copy_from_slice(b2);
        for j in 0..l {
            let a = self.activation.value(w1[j] * t + b1[j]);
            for (i, o) in out.iter_mut().enumerate() {
                *o += w2[i * l + j] * a;
            }
        }
    }

    /// Gradient of `upstreamᵀ · forward(t)` with respect to the flat parameters.
    pub fn backward(&self, t: f64, upstream: &[f64]) -> Result<ParamGradient> {
        if upstream.len() != self.output {
            return Err(Error::dims("upstream gradient", self.output, upstream.len()));
        }
        if !t.is_finite() || upstream.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("backward input"));
        }
        let mut grad = ParamGradient::zeros(self.params.len());
        self.backward_accumulate(t, upstream, &mut grad.0);
        Ok(grad)
    }

    /// Adds the gradient of `upstreamᵀ · forward(t)` into `grad`.
    pub fn backward_accumulate(&self, t: f64, upstream: &[f64], grad: &mut [f64]) {
        let l = self.hidden;
        let d = self.output;
        let w1 = self.hidden_weights();
        let b1 = self.hidden_biases();
        let w2 = self.output_weights();
        let (g_hidden, g_out) = grad.split_at_mut(2 * l);
        let (g_w2, g_b2) = g_out.split_at_mut(d * l);
        for (g, u) in g_b2.iter_mut().zip(upstream) {
            *g += u;
        }
        for j in 0..l {
            let z = w1[j] * t + b1[j];
            let a = self.activation.value(z);
            let mut back = 0.0;
            for i in 0..d {
                g_w2[i * l + j] += upstream[i] * a;
                back += upstream[i] * w2[i * l + j];
            }
            let dz = back * self.activation.derivative(z);
            g_hidden[j] += dz * t;
            g_hidden[l + j] += dz;
        }
    }

    pub fn to_checkpoint(&self) -> String {
        let mut body = String::new();
        writeln!(body, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}").unwrap();
        writeln!(body, "hidden {}", self.hidden).unwrap();
        writeln!(body, "output {}", self.output).unwrap();
        writeln!(body, "activation {}", self.activation.tag()).unwrap();
        writeln!(body, "params {}", self.params.len()).unwrap();
        for p in &self.params {
            writeln!(body, "{p:?}").unwrap();
        }
        let digest = hex_digest(body.as_bytes());
        body.push_str("sha256 ");
        body.push_str(&digest);
        body.push('\n');
        body
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let split = text
            .rfind("sha256 ")
            .ok_or_else(|| bad("missing checksum line"))?;
        let (body, trailer) = text.split_at(split);
        let expected = trailer["sha256 ".len()..].trim();
        if hex_digest(body.as_bytes()) != expected {
            return Err(bad("checksum mismatch"));
        }
        let mut lines = body.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(&format!("unsupported header `{header}`")));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected `{name}` line")))
        };
        let parse_usize = |s: String| s.parse::<usize>().map_err(|e| bad(&e.to_string()));
        let hidden = parse_usize(field("hidden")?)?;
        let output = parse_usize(field("output")?)?;
        let activation: Activation = field("activation")?.parse()?;
        let count = parse_usize(field("params")?)?;
        let params = lines
            .map(|l| l.parse::<f64>().map_err(|e| bad(&e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if params.len() != count {
            return Err(bad("parameter count mismatch"));
        }
        Self::from_params(hidden, output, activation, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

const CHECKPOINT_MAGIC: &str = "isdrift-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
}

/// Flat gradient aligned with [`ShallowNet::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

impl ParamGradient {
    pub fn zeros(len: usize) -> Self {
        ParamGradient(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::dims("adam parameters", self.m.len(), params.len()));
        }
        if grad.len() != self.m.len() {
            return Err(Error::dims("adam gradient", self.m.len(), grad.len()));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Closed-form `h(t) = ∫₀ᵗ f(s) ds` for a scalar-output network; equals the
/// Cameron–Martin image of `f` when `π ≡ 1` and the clock is Lebesgue.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    net: ShallowNet,
}

pub fn antiderivative_net(net: &ShallowNet) -> Result<Antiderivative> {
    if net.output() != 1 {
        return Err(Error::Unsupported(format!(
            "closed-form antiderivative needs output width 1, got {}",
            net.output()
        )));
    }
    Ok(Antiderivative { net: net.clone() })
}

impl Antiderivative {
    pub fn eval(&self, t: f64) -> f64 {
        let net = &self.net;
        let psi = net.activation();
        let w2 = net.output_weights();
        let mut h = net.output_biases()[0] * t;
        for (j, (&alpha, &eta)) in net
            .hidden_weights()
            .iter()
            .zip(net.hidden_biases())
            .enumerate()
        {
            let unit = if alpha != 0.0 {
                (psi.antiderivative(alpha * t + eta) - psi.antiderivative(eta)) / alpha
            } else {
                psi.value(eta) * t
            };
            h += w2[j] * unit;
        }
        h
    }
}
