//! Prompt-conditioned expert routing and spatial-spectral fusion.
//!
//! The router projects concat(global-mean-pooled features, prompt embedding)
//! to per-expert logits, optionally perturbs them with seeded Gaussian noise
//! (train mode only), softmaxes, and keeps the top-k gates. Sparsified gates
//! are NOT renormalized by default; a flag enables that variant.
//!
//! Fusion combines a spatial branch (per-band 3×3 convolution) and a spectral
//! branch (per-pixel length-3 convolution along bands) with weights
//! λ_s = σ(α), λ_c = 1 − λ_s, so the pair sums to 1 for every α by
//! construction. [`ssam_alpha_gradient`] is the analytic derivative of that
//! blend with respect to α, checkable against finite differences.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::degrade::convolve2d;
use crate::error::{Error, Result};
use crate::metrics::DegradationPrompt;
use crate::rng::stream_rng;

/// A named dense weight block: row-major values with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(Error::dimension(format!(
                "tensor shape {shape:?} wants {expect} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("tensor contains non-finite values".to_string()));
        }
        Ok(Tensor { shape, values })
    }

    fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::dimension(format!("{what} shape {:?}, expected {shape:?}", self.shape)));
        }
        if self.values.len() != shape.iter().product::<usize>() {
            return Err(Error::dimension(format!(
                "{what} has {} values for shape {:?}",
                self.values.len(),
                self.shape
            )));
        }
        Ok(())
    }
}

fn seeded_tensor(shape: Vec<usize>, fan_in: usize, seed: u64, stream: u64) -> Tensor {
    let mut rng = stream_rng(seed, stream);
    let scale = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let values = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    Tensor { shape, values }
}

/// Router hyperparameters and weights. `proj_weights` maps the pooled
/// scalar plus the prompt embedding to expert logits; `embed_weights` maps
/// the 6 prompt metrics to the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub n_experts: usize,
    pub top_k: usize,
    pub noise_std: f64,
    pub renormalize_gates: bool,
    pub embed_dim: usize,
    /// n_experts × (1 + embed_dim)
    pub proj_weights: Tensor,
    /// embed_dim × 6
    pub embed_weights: Tensor,
}

impl RouterConfig {
    /// Defaults (4 experts, top-1, noise 0.01, no renormalization, 64-dim
    /// embedding) with weights drawn N(0, 1/fan_in) from `seed`.
    pub fn seeded(seed: u64) -> Self {
        Self::seeded_with(4, 1, 64, seed)
    }

    pub fn seeded_with(n_experts: usize, top_k: usize, embed_dim: usize, seed: u64) -> Self {
        RouterConfig {
            n_experts,
            top_k,
            noise_std: 0.01,
            renormalize_gates: false,
            embed_dim,
            proj_weights: seeded_tensor(vec![n_experts, 1 + embed_dim], 1 + embed_dim, seed, 1),
            embed_weights: seeded_tensor(vec![embed_dim, PROMPT_DIM], PROMPT_DIM, seed, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_experts == 0 {
            return Err(Error::invalid_param("n_experts must be positive".to_string()));
        }
        if self.top_k == 0 || self.top_k > self.n_experts {
            return Err(Error::invalid_param(format!(
                "top_k {} out of 1..={}",
                self.top_k, self.n_experts
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid_param(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if self.embed_dim == 0 {
            return Err(Error::invalid_param("embed_dim must be positive".to_string()));
        }
        self.proj_weights.expect_shape(&[self.n_experts, 1 + self.embed_dim], "proj_weights")?;
        self.embed_weights.expect_shape(&[self.embed_dim, PROMPT_DIM], "embed_weights")
    }
}

const PROMPT_DIM: usize = 6;

/// Routing mode: train adds seeded Gaussian logit noise, infer is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
}

/// One routing decision: the (possibly noised) logits, the sparsified gates,
/// and the selected expert indices (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub logits: Vec<f64>,
    pub gates: Vec<f64>,
    pub selected: Vec<usize>,
    pub mode: Mode,
}

/// Numerically-stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Linear prompt embedding (no bias): `embed_weights · dp`.
pub fn embed_prompt(dp: &DegradationPrompt, config: &RouterConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let p = dp.to_array();
    let w = &config.embed_weights.values;
    Ok((0..config.embed_dim)
        .map(|i| (0..PROMPT_DIM).map(|j| w[i * PROMPT_DIM + j] * p[j]).sum())
        .collect())
}

/// Softmax + top-k sparsification of given logits. Ties keep the lowest
/// expert index; kept gates are renormalized to sum 1 only if asked.
pub fn gate_from_logits(logits: &[f64], top_k: usize, renormalize: bool, mode: Mode) -> Result<GateResult> {
    if top_k == 0 || top_k > logits.len() {
        return Err(Error::invalid_param(format!("top_k {top_k} out of 1..={}", logits.len())));
    }
    let full = softmax(logits);
    let mut order: Vec<usize> = (0..full.len()).collect();
    // Descending gate, ascending index on ties.
    order.sort_by(|a, b| full[*b].partial_cmp(&full[*a]).expect("finite gates").then(a.cmp(b)));
    let mut selected: Vec<usize> = order[..top_k].to_vec();
    selected.sort_unstable();
    let mut gates = vec![0.0; full.len()];
    for i in &selected {
        gates[*i] = full[*i];
    }
    if renormalize {
        let kept: f64 = gates.iter().sum();
        gates.iter_mut().for_each(|g| *g /= kept);
    }
    Ok(GateResult { logits: logits.to_vec(), gates, selected, mode })
}

/// Raw expert logits for (features, prompt embedding): the projection of
/// [global mean of features, embedding…], no noise.
pub fn gate_logits(features: &HsiCube, dp_embedding: &[f64], config: &RouterConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if dp_embedding.len() != config.embed_dim {
        return Err(Error::dimension(format!(
            "embedding length {} != embed_dim {}",
            dp_embedding.len(),
            config.embed_dim
        )));
    }
    let pooled = features.data().iter().sum::<f64>() / features.data().len() as f64;
    let w = &config.proj_weights.values;
    let cols = 1 + config.embed_dim;
    Ok((0..config.n_experts)
        .map(|e| {
            let row = &w[e * cols..(e + 1) * cols];
            row[0] * pooled + row[1..].iter().zip(dp_embedding).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect())
}

/// Full routing step. Train mode adds iid N(0, noise_std²) to the logits,
/// drawn from `seed`; infer mode ignores the seed entirely.
pub fn gate(
    features: &HsiCube,
    dp_embedding: &[f64],
    config: &RouterConfig,
    mode: Mode,
    seed: u64,
) -> Result<GateResult> {
    let mut logits = gate_logits(features, dp_embedding, config)?;
    if mode == Mode::Train && config.noise_std > 0.0 {
        let mut rng = stream_rng(seed, 0);
        for l in logits.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *l += config.noise_std * z;
        }
    }
    gate_from_logits(&logits, config.top_k, config.renormalize_gates, mode)
}

/// Gate-weighted sum of the selected experts' outputs: Σ_{i∈K} g_i·f_i.
pub fn mix_experts(expert_outputs: &[HsiCube], gate: &GateResult) -> Result<HsiCube> {
    let Some(first) = expert_outputs.first() else {
        return Err(Error::data("no expert outputs".to_string()));
    };
    if let Some(bad) = gate.selected.iter().find(|i| **i >= expert_outputs.len()) {
        return Err(Error::dimension(format!(
            "selected expert {bad} but only {} outputs given",
            expert_outputs.len()
        )));
    }
    let dims = (first.height(), first.width(), first.bands());
    let mut acc = vec![0.0f64; first.data().len()];
    for i in &gate.selected {
        let f = &expert_outputs[*i];
        if (f.height(), f.width(), f.bands()) != dims {
            return Err(Error::dimension(format!("expert {i} shape mismatch")));
        }
        let g = gate.gates[*i];
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += g * v;
        }
    }
    first.with_data(acc)
}

/// Channel-concatenate two equal-shape feature cubes and apply a 1×1
/// convolution mapping 2C→C channels: `fuse_weights` has shape [C, 2C].
pub fn fuse(shared: &HsiCube, deg: &HsiCube, fuse_weights: &Tensor) -> Result<HsiCube> {
    let dims = (shared.height(), shared.width(), shared.bands());
    if dims != (deg.height(), deg.width(), deg.bands()) {
        return Err(Error::dimension("fuse inputs differ in shape".to_string()));
    }
    let c = shared.bands();
    fuse_weights.expect_shape(&[c, 2 * c], "fuse_weights")?;
    let plane = shared.height() * shared.width();
    let w = &fuse_weights.values;
    let mut out = vec![0.0f64; shared.data().len()];
    for oc in 0..c {
        let row = &w[oc * 2 * c..(oc + 1) * 2 * c];
        for ic in 0..c {
            let (ws, wd) = (row[ic], row[c + ic]);
            let (bs, bd) = (shared.band(ic), deg.band(ic));
            let dst = &mut out[oc * plane..(oc + 1) * plane];
            for p in 0..plane {
                dst[p] += ws * bs[p] + wd * bd[p];
            }
        }
    }
    shared.with_data(out)
}

/// Fusion parameters: one unconstrained scalar α plus the two branch
/// kernels. λ_s = σ(α) and λ_c = 1 − λ_s sum to 1 by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsamParams {
    pub alpha: f64,
    /// 3×3 per-band spatial kernel.
    pub spatial_weights: Tensor,
    /// Length-3 per-pixel spectral kernel.
    pub spectral_weights: Tensor,
}

impl SsamParams {
    pub fn seeded(seed: u64) -> Self {
        SsamParams {
            alpha: 0.0,
            spatial_weights: seeded_tensor(vec![3, 3], 9, seed, 0),
            spectral_weights: seeded_tensor(vec![3], 3, seed, 1),
        }
    }

    /// Center-one kernels: both branches are the identity map.
    pub fn identity(alpha: f64) -> Self {
        SsamParams {
            alpha,
            spatial_weights: Tensor { shape: vec![3, 3], values: vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0] },
            spectral_weights: Tensor { shape: vec![3], values: vec![0.0, 1.0, 0.0] },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::invalid_param(format!("alpha {} must be finite", self.alpha)));
        }
        self.spatial_weights.expect_shape(&[3, 3], "spatial_weights")?;
        self.spectral_weights.expect_shape(&[3], "spectral_weights")
    }

    /// (λ_s, λ_c) = (σ(α), 1 − σ(α)).
    pub fn lambdas(&self) -> (f64, f64) {
        let ls = 1.0 / (1.0 + (-self.alpha).exp());
        (ls, 1.0 - ls)
    }
}

fn check_ssam_dims(f: &HsiCube) -> Result<()> {
    if f.height() < 3 || f.width() < 3 || f.bands() < 3 {
        return Err(Error::dimension(format!(
            "fusion kernels need at least 3x3x3 features, got {}x{}x{}",
            f.height(),
            f.width(),
            f.bands()
        )));
    }
    Ok(())
}

/// Spatial branch: per-band 3×3 convolution, reflect borders.
fn spatial_branch(f: &HsiCube, params: &SsamParams) -> Result<HsiCube> {
    convolve2d(f, &params.spatial_weights.values, 3)
}

/// Spectral branch: per-pixel length-3 convolution along bands, reflecting
/// at the first and last band.
fn spectral_branch(f: &HsiCube, params: &SsamParams) -> Result<HsiCube> {
    let (h, w, c) = (f.height(), f.width(), f.bands());
    let plane = h * w;
    let k = &params.spectral_weights.values;
    let mut out = vec![0.0f64; f.data().len()];
    for band in 0..c {
        let lo = if band == 0 { 0 } else { band - 1 };
        let hi = if band + 1 == c { c - 1 } else { band + 1 };
        let (b0, b1, b2) = (f.band(lo), f.band(band), f.band(hi));
        let dst = &mut out[band * plane..(band + 1) * plane];
        for p in 0..plane {
            dst[p] = k[0] * b0[p] + k[1] * b1[p] + k[2] * b2[p];
        }
    }
    f.with_data(out)
}

/// λ_s·E_s(F) + λ_c·E_c(F).
pub fn ssam_forward(f: &HsiCube, params: &SsamParams) -> Result<HsiCube> {
    params.validate()?;
    check_ssam_dims(f)?;
    let (ls, lc) = params.lambdas();
    let es = spatial_branch(f, params)?;
    let ec = spectral_branch(f, params)?;
    let data = es.data().iter().zip(ec.data()).map(|(s, c)| ls * s + lc * c).collect();
    f.with_data(data)
}

/// Analytic d⟨cotangent, ssam_forward(F)⟩/dα
/// = σ(α)(1−σ(α)) · ⟨cotangent, E_s(F) − E_c(F)⟩.
pub fn ssam_alpha_gradient(f: &HsiCube, params: &SsamParams, cotangent: &HsiCube) -> Result<f64> {
    params.validate()?;
    check_ssam_dims(f)?;
    if (cotangent.height(), cotangent.width(), cotangent.bands()) != (f.height(), f.width(), f.bands()) {
        return Err(Error::dimension("cotangent shape mismatch".to_string()));
    }
    let (ls, _) = params.lambdas();
    let es = spatial_branch(f, params)?;
    let ec = spectral_branch(f, params)?;
    let inner: f64 = cotangent
        .data()
        .iter()
        .zip(es.data().iter().zip(ec.data()))
        .map(|(ct, (s, c))| ct * (s - c))
        .sum();
    Ok(ls * (1.0 - ls) * inner)
}

/// Selection frequencies per expert and the Shannon entropy (nats) of that
/// histogram over a batch of routing decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadBalanceReport {
    pub frequencies: Vec<f64>,
    pub entropy: f64,
}

pub fn load_balance_report(gate_results: &[GateResult]) -> Result<LoadBalanceReport> {
    let Some(first) = gate_results.first() else {
        return Err(Error::data("no gate results".to_string()));
    };
    let n = first.gates.len();
    let mut counts = vec![0usize; n];
    for g in gate_results {
        if g.gates.len() != n {
            return Err(Error::dimension("gate results disagree on expert count".to_string()));
        }
        for i in &g.selected {
            counts[*i] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let frequencies: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
    let entropy =
        (-frequencies.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()).max(0.0);
    Ok(LoadBalanceReport { frequencies, entropy })
}
