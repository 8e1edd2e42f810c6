//! Seven seeded degradation operators behind one recipe type.
//!
//! Each operator is a pure function of (cube, parameters, seed). Randomized
//! operators derive per-band generators through [`crate::rng::stream_seed`],
//! so outputs do not depend on evaluation order, and additive noise fields and
//! masks depend only on (seed, dims) — never on cube content.
//!
//! [`apply`] drives an operator from a [`DegradationRecipe`] and clamps the
//! result to [0, 1] (for Poisson noise: after scaling back). The bare
//! operator functions do not clamp beyond what their definition requires, so
//! e.g. [`poisson_noise`] keeps its exact `E[y] = x` moment structure.

use rand::seq::index::sample as sample_without_replacement;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, stream_seed};

/// Degradation kind and its parameters. Serialized adjacently tagged, e.g.
/// `{"kind": "gaussian_blur", "params": {"kernel_size": 9}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Degradation {
    /// Additive Gaussian noise with σ quoted on the 8-bit scale (applied as
    /// σ/255 in normalized units, then clamped). Exactly one of `sigma255`
    /// (fixed) or `sigma255_range` (uniform draw per application) is set.
    GaussianNoise {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma255: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma255_range: Option<(f64, f64)>,
    },
    /// Shot noise: `y = Poisson(x·scale)/scale`.
    PoissonNoise { scale: f64 },
    /// Isotropic Gaussian blur; σ follows from the kernel size.
    GaussianBlur { kernel_size: usize },
    /// Linear motion blur: a rasterized line of length 2·radius+1 through the
    /// kernel center.
    MotionBlur { radius: usize, angle_deg: f64 },
    /// Bicubic downsample by `scale` then nearest-neighbor upsample back.
    SuperRes { scale: usize },
    /// Bernoulli pixel mask (shared across bands) zeroing `mask_rate` of the
    /// pixels in expectation.
    Inpaint { mask_rate: f64 },
    /// Zero out exactly round(drop_rate·C) whole bands, sampled without
    /// replacement.
    BandDrop { drop_rate: f64 },
}

impl Degradation {
    /// The serialized kind tag, usable as a class label.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Degradation::GaussianNoise { .. } => "gaussian_noise",
            Degradation::PoissonNoise { .. } => "poisson_noise",
            Degradation::GaussianBlur { .. } => "gaussian_blur",
            Degradation::MotionBlur { .. } => "motion_blur",
            Degradation::SuperRes { .. } => "super_res",
            Degradation::Inpaint { .. } => "inpaint",
            Degradation::BandDrop { .. } => "band_drop",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Degradation::GaussianNoise { sigma255, sigma255_range } => match (sigma255, sigma255_range) {
                (Some(_), Some(_)) | (None, None) => Err(Error::invalid_param(
                    "gaussian_noise takes exactly one of sigma255 / sigma255_range".to_string(),
                )),
                (Some(s), None) => {
                    if !(s.is_finite() && *s > 0.0 && *s <= 255.0) {
                        return Err(Error::invalid_param(format!("sigma255 {s} out of (0, 255]")));
                    }
                    Ok(())
                }
                (None, Some((lo, hi))) => {
                    if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi && *hi <= 255.0) {
                        return Err(Error::invalid_param(format!("sigma255_range ({lo}, {hi}) out of (0, 255]")));
                    }
                    Ok(())
                }
            },
            Degradation::PoissonNoise { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::invalid_param(format!("poisson scale {scale} must be positive")));
                }
                Ok(())
            }
            Degradation::GaussianBlur { kernel_size } => {
                if *kernel_size < 3 || kernel_size % 2 == 0 {
                    return Err(Error::invalid_param(format!("kernel_size {kernel_size} must be odd and >= 3")));
                }
                Ok(())
            }
            Degradation::MotionBlur { radius, angle_deg } => {
                if *radius < 1 {
                    return Err(Error::invalid_param("motion blur radius must be >= 1".to_string()));
                }
                if !(angle_deg.is_finite() && (0.0..360.0).contains(angle_deg)) {
                    return Err(Error::invalid_param(format!("angle_deg {angle_deg} out of [0, 360)")));
                }
                Ok(())
            }
            Degradation::SuperRes { scale } => {
                if *scale != 2 && *scale != 4 {
                    return Err(Error::invalid_param(format!("super_res scale {scale} must be 2 or 4")));
                }
                Ok(())
            }
            Degradation::Inpaint { mask_rate } => {
                if !(mask_rate.is_finite() && *mask_rate > 0.0 && *mask_rate < 1.0) {
                    return Err(Error::invalid_param(format!("mask_rate {mask_rate} out of (0, 1)")));
                }
                Ok(())
            }
            Degradation::BandDrop { drop_rate } => {
                if !(drop_rate.is_finite() && *drop_rate > 0.0 && *drop_rate < 1.0) {
                    return Err(Error::invalid_param(format!("drop_rate {drop_rate} out of (0, 1)")));
                }
                Ok(())
            }
        }
    }
}

/// A degradation plus the seed that makes it reproducible. JSON form:
/// `{"kind": "...", "params": {...}, "seed": 42}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecipe {
    #[serde(flatten)]
    pub degradation: Degradation,
    pub seed: u64,
}

impl DegradationRecipe {
    pub fn new(degradation: Degradation, seed: u64) -> Self {
        DegradationRecipe { degradation, seed }
    }

    pub fn kind_name(&self) -> &'static str {
        self.degradation.kind_name()
    }
}

/// Which positions a masking degradation removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DegradationMask {
    /// Row-major H×W pixel mask; `true` = zeroed in every band.
    Pixels { height: usize, width: usize, masked: Vec<bool> },
    /// Sorted indices of zeroed bands.
    Bands { dropped: Vec<usize> },
}

/// Result of [`apply`]: the input, the degraded output, the recipe that
/// produced it, and the mask for masking kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradedPair {
    pub clean: HsiCube,
    pub degraded: HsiCube,
    pub recipe: DegradationRecipe,
    pub mask: Option<DegradationMask>,
}

// Substream purposes inside one recipe seed: parameter draws (e.g. σ from a
// range) use one stream, the noise field / mask uses another, so a drawn and
// a fixed parameterization produce the same field for the same seed.
const STREAM_FIELD: u64 = 0;
const STREAM_PARAM: u64 = 1;

/// Run a recipe on a unit-range cube and clamp the result to [0, 1].
pub fn apply(recipe: &DegradationRecipe, cube: &HsiCube) -> Result<DegradedPair> {
    recipe.degradation.validate()?;
    let field_seed = stream_seed(recipe.seed, STREAM_FIELD);
    let mut mask = None;
    let degraded = match &recipe.degradation {
        Degradation::GaussianNoise { sigma255, sigma255_range } => {
            let sigma = match (sigma255, sigma255_range) {
                (Some(s), None) => *s,
                (None, Some((lo, hi))) => {
                    let mut rng = stream_rng(recipe.seed, STREAM_PARAM);
                    rng.random_range(*lo..=*hi)
                }
                _ => unreachable!("validated above"),
            };
            gaussian_noise(cube, sigma, field_seed)?
        }
        Degradation::PoissonNoise { scale } => poisson_noise(cube, *scale, field_seed)?,
        Degradation::GaussianBlur { kernel_size } => gaussian_blur(cube, *kernel_size)?,
        Degradation::MotionBlur { radius, angle_deg } => motion_blur(cube, *radius, *angle_deg)?,
        Degradation::SuperRes { scale } => super_res_degrade(cube, *scale)?,
        Degradation::Inpaint { mask_rate } => {
            let pixel_mask = inpaint_mask(cube.height(), cube.width(), *mask_rate, field_seed);
            let out = inpaint(cube, *mask_rate, field_seed)?;
            mask = Some(DegradationMask::Pixels {
                height: cube.height(),
                width: cube.width(),
                masked: pixel_mask,
            });
            out
        }
        Degradation::BandDrop { drop_rate } => {
            let dropped = band_drop_indices(cube.bands(), *drop_rate, field_seed);
            let out = band_drop(cube, *drop_rate, field_seed)?;
            mask = Some(DegradationMask::Bands { dropped });
            out
        }
    };
    let clamped: Vec<f64> = degraded.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(DegradedPair {
        clean: cube.clone(),
        degraded: degraded.with_data(clamped)?,
        recipe: recipe.clone(),
        mask,
    })
}

/// The σ (8-bit scale) a Gaussian-noise recipe applies: the fixed value, or
/// the draw [`apply`] takes from the range under this seed. `None` for other
/// kinds.
pub fn effective_sigma255(recipe: &DegradationRecipe) -> Option<f64> {
    match &recipe.degradation {
        Degradation::GaussianNoise { sigma255: Some(s), .. } => Some(*s),
        Degradation::GaussianNoise { sigma255: None, sigma255_range: Some((lo, hi)) } => {
            let mut rng = stream_rng(recipe.seed, STREAM_PARAM);
            Some(rng.random_range(*lo..=*hi))
        }
        _ => None,
    }
}

/// Blur σ as a function of kernel size: `0.3·((K-1)/2 - 1) + 0.8`.
pub fn blur_sigma_from_kernel(kernel_size: usize) -> Result<f64> {
    if kernel_size < 3 || kernel_size.is_multiple_of(2) {
        return Err(Error::invalid_param(format!("kernel_size {kernel_size} must be odd and >= 3")));
    }
    Ok(0.3 * ((kernel_size - 1) / 2 - 1) as f64 + 0.8)
}

/// Half-sample reflection of index `i` into `0..n` (…, 1, 0 | 0, 1, …, n-1 |
/// n-1, n-2, …).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Convolve every band with a full 2D kernel (row-major, odd side length),
/// reflect borders. For kernels that are not separable, e.g. motion lines.
pub(crate) fn convolve2d(cube: &HsiCube, kernel: &[f64], ksize: usize) -> Result<HsiCube> {
    let (h, w) = (cube.height(), cube.width());
    let r = (ksize / 2) as isize;
    let mut out = vec![0.0f64; cube.data().len()];
    let plane = h * w;
    for c in 0..cube.bands() {
        let b = cube.band(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in -r..=r {
                    let sy = reflect(y as isize + ky, h);
                    for kx in -r..=r {
                        let sx = reflect(x as isize + kx, w);
                        acc += kernel[((ky + r) * ksize as isize + kx + r) as usize] * b[sy * w + sx];
                    }
                }
                out[c * plane + y * w + x] = acc;
            }
        }
    }
    cube.with_data(out)
}

/// Per-band isotropic Gaussian blur, σ = [`blur_sigma_from_kernel`], reflect
/// borders. Separable: rows then columns with the normalized 1D profile.
pub fn gaussian_blur(cube: &HsiCube, kernel_size: usize) -> Result<HsiCube> {
    let sigma = blur_sigma_from_kernel(kernel_size)?;
    if kernel_size > cube.height().min(cube.width()) {
        return Err(Error::invalid_param(format!(
            "kernel_size {kernel_size} exceeds min image side {}",
            cube.height().min(cube.width())
        )));
    }
    let c = (kernel_size - 1) as f64 / 2.0;
    let mut k: Vec<f64> = (0..kernel_size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);

    let (h, w) = (cube.height(), cube.width());
    let r = (kernel_size / 2) as isize;
    let plane = h * w;
    let mut tmp = vec![0.0f64; plane];
    let mut out = vec![0.0f64; cube.data().len()];
    for band in 0..cube.bands() {
        let b = cube.band(band);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let sx = reflect(x as isize + i as isize - r, w);
                    acc += kv * b[y * w + sx];
                }
                tmp[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let sy = reflect(y as isize + i as isize - r, h);
                    acc += kv * tmp[sy * w + x];
                }
                out[band * plane + y * w + x] = acc;
            }
        }
    }
    cube.with_data(out)
}

/// Rasterized-line motion kernel: ones on the segment of half-length
/// `radius` through the center at `angle_deg` (counterclockwise from +x,
/// rows increasing downward), normalized to sum 1.
fn motion_kernel(radius: usize, angle_deg: f64) -> Vec<f64> {
    let side = 2 * radius + 1;
    let mut k = vec![0.0f64; side * side];
    let theta = angle_deg.to_radians();
    let (dx, dy) = (theta.cos(), theta.sin());
    for s in -(radius as isize)..=(radius as isize) {
        let x = (radius as f64 + s as f64 * dx).round() as usize;
        let y = (radius as f64 + s as f64 * dy).round() as usize;
        k[y * side + x] = 1.0;
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Per-band linear motion blur with reflect borders.
pub fn motion_blur(cube: &HsiCube, radius: usize, angle_deg: f64) -> Result<HsiCube> {
    Degradation::MotionBlur { radius, angle_deg }.validate()?;
    let side = 2 * radius + 1;
    if side > cube.height().min(cube.width()) {
        return Err(Error::invalid_param(format!(
            "motion kernel side {side} exceeds min image side {}",
            cube.height().min(cube.width())
        )));
    }
    convolve2d(cube, &motion_kernel(radius, angle_deg), side)
}

/// Additive Gaussian noise with σ = `sigma255`/255 in normalized units,
/// clamped to [0, 1]. Band `c` draws from substream `c` of `seed`.
pub fn gaussian_noise(cube: &HsiCube, sigma255: f64, seed: u64) -> Result<HsiCube> {
    let data = gaussian_noise_unclamped(cube, sigma255, seed)?;
    cube.with_data(data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// The additive step alone (no clamp); the noise field depends only on
/// (seed, dims).
fn gaussian_noise_unclamped(cube: &HsiCube, sigma255: f64, seed: u64) -> Result<Vec<f64>> {
    Degradation::GaussianNoise { sigma255: Some(sigma255), sigma255_range: None }.validate()?;
    let sigma = sigma255 / 255.0;
    let mut out = Vec::with_capacity(cube.data().len());
    for c in 0..cube.bands() {
        let mut rng = stream_rng(seed, c as u64);
        for &v in cube.band(c) {
            let n: f64 = StandardNormal.sample(&mut rng);
            out.push(v + sigma * n);
        }
    }
    Ok(out)
}

/// Shot noise `y = Poisson(x·scale)/scale`, elementwise, unclamped, so
/// `E[y] = x` and `Var[y] = x/scale`. Band `c` draws from substream `c`.
/// Requires nonnegative input.
pub fn poisson_noise(cube: &HsiCube, scale: f64, seed: u64) -> Result<HsiCube> {
    Degradation::PoissonNoise { scale }.validate()?;
    if let Some(v) = cube.data().iter().find(|v| **v < 0.0) {
        return Err(Error::data(format!("poisson noise requires nonnegative values, found {v}")));
    }
    let mut out = Vec::with_capacity(cube.data().len());
    for c in 0..cube.bands() {
        let mut rng = stream_rng(seed, c as u64);
        for &v in cube.band(c) {
            let lambda = v * scale;
            if lambda == 0.0 {
                out.push(0.0);
            } else {
                let draw: f64 = Poisson::new(lambda)
                    .map_err(|e| Error::invalid_param(format!("poisson lambda {lambda}: {e}")))?
                    .sample(&mut rng);
                out.push(draw / scale);
            }
        }
    }
    cube.with_data(out)
}

/// Catmull-Rom cubic weight (a = -0.5).
fn bicubic_weight(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Bicubic downsample by `scale` (half-pixel centers, reflect borders), then
/// nearest-neighbor upsample back to the original size.
pub fn super_res_degrade(cube: &HsiCube, scale: usize) -> Result<HsiCube> {
    if scale < 2 {
        return Err(Error::invalid_param(format!("super_res scale {scale} must be >= 2")));
    }
    let (h, w) = (cube.height(), cube.width());
    if h % scale != 0 || w % scale != 0 {
        return Err(Error::dimension(format!("dims {h}x{w} not divisible by scale {scale}")));
    }
    let (dh, dw) = (h / scale, w / scale);
    let plane = h * w;
    let mut out = vec![0.0f64; cube.data().len()];
    let mut down = vec![0.0f64; dh * dw];
    for c in 0..cube.bands() {
        let b = cube.band(c);
        for oy in 0..dh {
            let sy = (oy as f64 + 0.5) * scale as f64 - 0.5;
            let y0 = sy.floor() as isize;
            let fy = sy - y0 as f64;
            let wy = [bicubic_weight(fy + 1.0), bicubic_weight(fy), bicubic_weight(1.0 - fy), bicubic_weight(2.0 - fy)];
            for ox in 0..dw {
                let sx = (ox as f64 + 0.5) * scale as f64 - 0.5;
                let x0 = sx.floor() as isize;
                let fx = sx - x0 as f64;
                let wx = [bicubic_weight(fx + 1.0), bicubic_weight(fx), bicubic_weight(1.0 - fx), bicubic_weight(2.0 - fx)];
                let mut acc = 0.0;
                for (a, wya) in wy.iter().enumerate() {
                    let yy = reflect(y0 - 1 + a as isize, h);
                    for (g, wxg) in wx.iter().enumerate() {
                        let xx = reflect(x0 - 1 + g as isize, w);
                        acc += wya * wxg * b[yy * w + xx];
                    }
                }
                down[oy * dw + ox] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                out[c * plane + y * w + x] = down[(y / scale) * dw + x / scale];
            }
        }
    }
    cube.with_data(out)
}

/// The Bernoulli pixel mask used by [`inpaint`]: `true` = zeroed. Depends
/// only on (dims, rate, seed).
pub fn inpaint_mask(height: usize, width: usize, mask_rate: f64, seed: u64) -> Vec<bool> {
    let mut rng = stream_rng(seed, 0);
    (0..height * width).map(|_| rng.random::<f64>() < mask_rate).collect()
}

/// Zero out masked pixel positions in every band (one shared spatial mask).
pub fn inpaint(cube: &HsiCube, mask_rate: f64, seed: u64) -> Result<HsiCube> {
    Degradation::Inpaint { mask_rate }.validate()?;
    let mask = inpaint_mask(cube.height(), cube.width(), mask_rate, seed);
    let plane = cube.height() * cube.width();
    let mut out = cube.data().to_vec();
    for c in 0..cube.bands() {
        for (p, masked) in mask.iter().enumerate() {
            if *masked {
                out[c * plane + p] = 0.0;
            }
        }
    }
    cube.with_data(out)
}

/// The sorted band indices [`band_drop`] zeroes: exactly round(rate·C)
/// distinct indices sampled without replacement.
pub fn band_drop_indices(bands: usize, drop_rate: f64, seed: u64) -> Vec<usize> {
    let k = (drop_rate * bands as f64).round() as usize;
    let k = k.min(bands);
    let mut rng = stream_rng(seed, 0);
    let mut idx: Vec<usize> = sample_without_replacement(&mut rng, bands, k).into_iter().collect();
    idx.sort_unstable();
    idx
}

/// Zero out whole spectral bands.
pub fn band_drop(cube: &HsiCube, drop_rate: f64, seed: u64) -> Result<HsiCube> {
    Degradation::BandDrop { drop_rate }.validate()?;
    let plane = cube.height() * cube.width();
    let mut out = cube.data().to_vec();
    for c in band_drop_indices(cube.bands(), drop_rate, seed) {
        out[c * plane..(c + 1) * plane].fill(0.0);
    }
    cube.with_data(out)
}
