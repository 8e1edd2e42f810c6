//! Reference quality metrics: PSNR and band-averaged SSIM.
//!
//! PSNR is `10·log10(peak²/MSE)` over all voxels and returns `f64::INFINITY`
//! for identical cubes. SSIM follows the standard single-scale formulation:
//! an 11×11 Gaussian window (σ = 1.5), stabilizers C1 = (0.01·peak)² and
//! C2 = (0.03·peak)², averaged over all fully-interior window positions of a
//! band, then averaged over bands.

use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// PSNR (dB) plus band-averaged SSIM for one cube pair. Infinite PSNR
/// serializes as the JSON string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    #[serde(with = "psnr_sentinel")]
    pub psnr_db: f64,
    pub ssim: f64,
}

mod psnr_sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

fn check_pair(x: &HsiCube, y: &HsiCube, peak: f64) -> Result<()> {
    if (x.height(), x.width(), x.bands()) != (y.height(), y.width(), y.bands()) {
        return Err(Error::dimension(format!(
            "cube dims {}x{}x{} vs {}x{}x{}",
            x.height(),
            x.width(),
            x.bands(),
            y.height(),
            y.width(),
            y.bands()
        )));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid_param(format!("peak {peak} must be positive")));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all voxels; identical cubes give
/// `f64::INFINITY`.
pub fn psnr(x: &HsiCube, y: &HsiCube, peak: f64) -> Result<f64> {
    check_pair(x, y, peak)?;
    let n = x.data().len() as f64;
    let mse: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Normalized 1D Gaussian window profile.
fn window_profile() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW - 1) as f64 / 2.0;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    g
}

/// Single-scale SSIM per band (mean over interior window positions), then
/// mean over bands. Requires min(H, W) ≥ 11.
pub fn ssim(x: &HsiCube, y: &HsiCube, peak: f64) -> Result<f64> {
    check_pair(x, y, peak)?;
    let (h, w) = (x.height(), x.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::dimension(format!(
            "image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let g = window_profile();
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    let r = SSIM_WINDOW / 2;
    let mut band_mean = 0.0;
    for c in 0..x.bands() {
        let (bx, by) = (x.band(c), y.band(c));
        let mut acc = 0.0;
        let mut windows = 0usize;
        for cy in r..h - r {
            for cx in r..w - r {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, gi) in g.iter().enumerate() {
                    let row = (cy + i - r) * w;
                    for (j, gj) in g.iter().enumerate() {
                        let wgt = gi * gj;
                        let a = bx[row + cx + j - r];
                        let b = by[row + cx + j - r];
                        mx += wgt * a;
                        my += wgt * b;
                        mxx += wgt * a * a;
                        myy += wgt * b * b;
                        mxy += wgt * a * b;
                    }
                }
                let (vx, vy, cov) = (mxx - mx * mx, myy - my * my, mxy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                windows += 1;
            }
        }
        band_mean += acc / windows as f64;
    }
    Ok(band_mean / x.bands() as f64)
}

/// PSNR and SSIM in one call.
pub fn evaluate(x: &HsiCube, y: &HsiCube, peak: f64) -> Result<QualityScore> {
    Ok(QualityScore { psnr_db: psnr(x, y, peak)?, ssim: ssim(x, y, peak)? })
}
