//! Finite-width Monte-Carlo networks.
//!
//! A trial pushes a batch of inputs through `depth` random layers of width
//! `d`, sampling each weight matrix row by row and discarding it after use,
//! and records the average inner products `<h(x), h(y)>_avg` per layer.
//! Trials draw from independent random streams keyed by
//! `(seed, trial_index)` and are reduced in index order, so results do not
//! depend on how many threads execute them.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::activations::Activation;
use crate::dynamics::iterate;
use crate::error::{Error, Result};
use crate::kernel::{KernelMap, NormalizationMode};
use crate::quadrature::GaussianQuadrature;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`, which has unit variance.
    UniformUnitVar,
    Rademacher,
}

impl WeightDist {
    pub const ALL: [WeightDist; 3] = [WeightDist::Gaussian, WeightDist::UniformUnitVar, WeightDist::Rademacher];

    pub fn as_str(&self) -> &'static str {
        match self {
            WeightDist::Gaussian => "gaussian",
            WeightDist::UniformUnitVar => "uniform_unit_var",
            WeightDist::Rademacher => "rademacher",
        }
    }

    /// Fill `out` with i.i.d. zero-mean unit-variance draws.
    pub fn fill<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            WeightDist::Gaussian => out.iter_mut().for_each(|w| *w = rng.sample(StandardNormal)),
            WeightDist::UniformUnitVar => out
                .iter_mut()
                .for_each(|w| *w = SQRT_3 * (2.0 * rng.random::<f64>() - 1.0)),
            WeightDist::Rademacher => {
                for chunk in out.chunks_mut(64) {
                    let mut bits: u64 = rng.random();
                    for w in chunk {
                        *w = if bits & 1 == 1 { 1.0 } else { -1.0 };
                        bits >>= 1;
                    }
                }
            }
        }
    }
}

impl FromStr for WeightDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" | "uniform_unit_var" => Ok(Self::UniformUnitVar),
            "rademacher" => Ok(Self::Rademacher),
            _ => Err(Error::InvalidConfig(format!(
                "unknown weight distribution `{s}` (expected gaussian, uniform_unit_var or rademacher)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub activation: String,
    pub width: usize,
    pub depth: usize,
    pub rho0: f64,
    pub trials: usize,
    pub weight_dist: WeightDist,
    pub residual: Option<f64>,
    pub norm_mode: Option<NormalizationMode>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(activation: impl Into<String>, width: usize, depth: usize, rho0: f64, trials: usize) -> Self {
        Self {
            activation: activation.into(),
            width,
            depth,
            rho0,
            trials,
            weight_dist: WeightDist::Gaussian,
            residual: None,
            norm_mode: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::InvalidConfig(format!("width {} must be at least 2", self.width)));
        }
        if self.depth < 1 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho0) {
            return Err(Error::InvalidConfig(format!("rho0 {} outside [-1, 1]", self.rho0)));
        }
        if let Some(r) = self.residual {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("residual strength {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Stream seed for one trial.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(seed: u64, trial: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(trial_seed(seed, trial))
}

pub fn avg_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Two vectors with exact sample statistics `<x,x>_avg = <y,y>_avg = 1`
/// and `<x,y>_avg = rho0`.
pub fn make_input_pair(d: usize, rho0: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if d < 2 {
        return Err(Error::InvalidConfig(format!("width {d} must be at least 2")));
    }
    if !(-1.0..=1.0).contains(&rho0) {
        return Err(Error::InvalidConfig(format!("rho0 {rho0} outside [-1, 1]")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(splitmix64(seed ^ 0xA076_1D64_78BD_642F));
    let mut x = vec![0.0; d];
    WeightDist::Gaussian.fill(&mut rng, &mut x);
    let nx = avg_dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    if rho0.abs() == 1.0 {
        let y = x.iter().map(|v| rho0 * v).collect();
        return Ok((x, y));
    }
    let mut v = vec![0.0; d];
    loop {
        WeightDist::Gaussian.fill(&mut rng, &mut v);
        let proj = avg_dot(&v, &x);
        v.iter_mut().zip(&x).for_each(|(vi, xi)| *vi -= proj * xi);
        // Second pass removes what rounding left of the x component.
        let proj = avg_dot(&v, &x);
        v.iter_mut().zip(&x).for_each(|(vi, xi)| *vi -= proj * xi);
        let nv = avg_dot(&v, &v).sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|vi| *vi /= nv);
            break;
        }
    }
    let s = (1.0 - rho0 * rho0).sqrt();
    let y = x.iter().zip(&v).map(|(xi, vi)| rho0 * xi + s * vi).collect();
    Ok((x, y))
}

/// Per-layer statistics of one trial. Index 0 is the input layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialKernels {
    pub kernels: Vec<f64>,
    pub norms_x: Vec<f64>,
    pub norms_y: Vec<f64>,
}

fn layer_norm(v: &mut [f64]) -> Result<()> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::DegenerateTrial);
    }
    let sd = var.sqrt();
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    Ok(())
}

fn rms_norm(v: &mut [f64]) -> Result<()> {
    let ms = avg_dot(v, v);
    if ms.is_nan() || ms <= 0.0 {
        return Err(Error::DegenerateTrial);
    }
    let rms = ms.sqrt();
    v.iter_mut().for_each(|x| *x /= rms);
    Ok(())
}

/// A random network of fixed width, consumed layer by layer.
pub struct Network<'a> {
    act: &'a Activation,
    width: usize,
    weight_dist: WeightDist,
    residual: Option<f64>,
    norm_mode: Option<NormalizationMode>,
}

impl<'a> Network<'a> {
    pub fn new(act: &'a Activation, config: &SimConfig) -> Self {
        Self {
            act,
            width: config.width,
            weight_dist: config.weight_dist,
            residual: config.residual.filter(|r| *r > 0.0),
            norm_mode: config.norm_mode,
        }
    }

    /// `out_j = M h_j / sqrt(d)` for a freshly sampled `d x d` matrix `M`.
    fn random_projection<R: Rng>(&self, rng: &mut R, inputs: &[Vec<f64>], row: &mut [f64]) -> Vec<Vec<f64>> {
        let d = self.width;
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut out = vec![vec![0.0; d]; inputs.len()];
        for i in 0..d {
            self.weight_dist.fill(rng, row);
            for (o, h) in out.iter_mut().zip(inputs) {
                o[i] = row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() * inv_sqrt_d;
            }
        }
        out
    }

    /// One layer applied jointly to every input.
    pub fn layer<R: Rng>(&self, rng: &mut R, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut row = vec![0.0; self.width];
        let mut pre = self.random_projection(rng, inputs, &mut row);
        for z in pre.iter_mut() {
            match self.norm_mode {
                Some(NormalizationMode::LnBefore) => layer_norm(z)?,
                Some(NormalizationMode::RnBefore) => rms_norm(z)?,
                _ => {}
            }
            z.iter_mut().for_each(|v| *v = self.act.eval(*v));
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateTrial);
            }
            match self.norm_mode {
                Some(NormalizationMode::LnAfter) => layer_norm(z)?,
                Some(NormalizationMode::RnAfter) => rms_norm(z)?,
                _ => {}
            }
        }
        if let Some(r) = self.residual {
            let skip = self.random_projection(rng, inputs, &mut row);
            let a = (1.0 - r * r).sqrt();
            for (h, s) in pre.iter_mut().zip(&skip) {
                h.iter_mut().zip(s).for_each(|(hv, sv)| *hv = a * *hv + r * sv);
            }
        }
        Ok(pre)
    }

    /// Push `inputs` through `depth` layers and return the final
    /// representations.
    pub fn forward_batch<R: Rng>(&self, rng: &mut R, inputs: &[Vec<f64>], depth: usize) -> Result<Vec<Vec<f64>>> {
        let mut h = inputs.to_vec();
        for _ in 0..depth {
            h = self.layer(rng, &h)?;
        }
        Ok(h)
    }
}

/// One trial on the pair `(x, y)`, recording kernels and norms per layer.
pub fn forward<R: Rng>(
    config: &SimConfig,
    act: &Activation,
    x: &[f64],
    y: &[f64],
    rng: &mut R,
) -> Result<TrialKernels> {
    let net = Network::new(act, config);
    let mut h = vec![x.to_vec(), y.to_vec()];
    let mut out = TrialKernels {
        kernels: vec![avg_dot(x, y)],
        norms_x: vec![avg_dot(x, x)],
        norms_y: vec![avg_dot(y, y)],
    };
    for _ in 0..config.depth {
        h = net.layer(rng, &h)?;
        out.kernels.push(avg_dot(&h[0], &h[1]));
        out.norms_x.push(avg_dot(&h[0], &h[0]));
        out.norms_y.push(avg_dot(&h[1], &h[1]));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerStats {
    pub layer: usize,
    pub mean_kernel: f64,
    pub stderr: f64,
    pub meanfield_kernel: f64,
    pub mean_norm_x: f64,
    pub mean_norm_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub layers: Vec<LayerStats>,
    pub degenerate_trials: usize,
}

/// Kernel map the simulated network follows in the mean-field limit.
pub fn meanfield_map(
    config: &SimConfig,
    act: &Activation,
    truncation: usize,
    quad: &GaussianQuadrature,
) -> Result<KernelMap> {
    KernelMap::for_activation(act, truncation, quad)?.transformed(config.norm_mode, config.residual)
}

/// Run all trials and aggregate them into per-layer mean and standard error.
pub fn run(config: &SimConfig, truncation: usize, quad: &GaussianQuadrature) -> Result<SimResult> {
    config.validate()?;
    let act = Activation::lookup(&config.activation, quad)?;
    let km = meanfield_map(config, &act, truncation, quad)?;
    let reference = iterate(&km, config.rho0, config.depth)?.values;
    let (x, y) = make_input_pair(config.width, config.rho0, config.seed)?;

    let outcomes: Vec<Result<TrialKernels>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            forward(config, &act, &x, &y, &mut rng)
        })
        .collect();

    let mut trials = Vec::with_capacity(outcomes.len());
    let mut degenerate = 0;
    for o in outcomes {
        match o {
            Ok(t) => trials.push(t),
            Err(Error::DegenerateTrial) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if degenerate as f64 > 0.01 * config.trials as f64 || trials.is_empty() {
        return Err(Error::TooManyDegenerateTrials {
            degenerate,
            trials: config.trials,
        });
    }

    let m = trials.len() as f64;
    let layers = (0..=config.depth)
        .map(|l| {
            let ks: Vec<f64> = trials.iter().map(|t| t.kernels[l]).collect();
            let mean = ks.iter().sum::<f64>() / m;
            let stderr = if trials.len() > 1 {
                let var = ks.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            } else {
                0.0
            };
            LayerStats {
                layer: l,
                mean_kernel: mean,
                stderr,
                meanfield_kernel: reference[l],
                mean_norm_x: trials.iter().map(|t| t.norms_x[l]).sum::<f64>() / m,
                mean_norm_y: trials.iter().map(|t| t.norms_y[l]).sum::<f64>() / m,
            }
        })
        .collect();
    Ok(SimResult {
        config: config.clone(),
        layers,
        degenerate_trials: degenerate,
    })
}

/// Average inner-product Gram matrix of a set of representations.
pub fn gram(reps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    reps.iter()
        .map(|a| reps.iter().map(|b| avg_dot(a, b)).collect())
        .collect()
}
