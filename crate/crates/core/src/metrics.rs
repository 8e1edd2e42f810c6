//! Degradation-prompt metrics and the candidate-metric registry.
//!
//! The six prompt metrics condense what a degradation did to a cube:
//!
//! | metric | sensitive to |
//! |--------|--------------|
//! | `hfer` | high-frequency spatial energy (drops under blur)            |
//! | `stu`  | spectral flatness of the spatial spectrum (high for noise)  |
//! | `scm`  | mean absolute curvature of the mean spectrum                |
//! | `scsd` | spread of that curvature (spiky for band loss)              |
//! | `gsd`  | heterogeneity of spatial gradient magnitudes                |
//! | `scc`  | pixel-to-neighbor correlation (negative for salt noise)     |
//!
//! All metric functions are pure and deterministic. Raw cubes may live on any
//! value range, so the aggregate entry points ([`degradation_prompt`],
//! [`MetricRegistry::evaluate_all`]) min-max normalize once up front and hand
//! every metric the same unit-range cube; the individual functions compute on
//! exactly the cube they are given.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

/// Radial normalized-frequency cutoff separating the "high" band in [`hfer`].
pub const HIGH_FREQ_CUTOFF: f64 = 0.25;

/// Magnitude floor inside [`stu`]'s logarithm.
pub const STU_EPS: f64 = 1e-12;

/// The six-metric degradation prompt, in fixed order
/// (HFER, STU, SCM, SCSD, GSD, SCC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationPrompt {
    pub hfer: f64,
    pub stu: f64,
    pub scm: f64,
    pub scsd: f64,
    pub gsd: f64,
    pub scc: f64,
}

impl DegradationPrompt {
    pub const NAMES: [&'static str; 6] = ["hfer", "stu", "scm", "scsd", "gsd", "scc"];

    pub fn to_array(self) -> [f64; 6] {
        [self.hfer, self.stu, self.scm, self.scsd, self.gsd, self.scc]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        DegradationPrompt { hfer: a[0], stu: a[1], scm: a[2], scsd: a[3], gsd: a[4], scc: a[5] }
    }

    /// Check the prompt invariants: all entries finite, `hfer`/`stu` in
    /// [0, 1], `scc` in [-1, 1], the rest nonnegative.
    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("prompt has non-finite entry: {a:?}")));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.hfer) || !in_unit(self.stu) {
            return Err(Error::data(format!("hfer/stu out of [0,1]: {} {}", self.hfer, self.stu)));
        }
        if !(-1.0..=1.0).contains(&self.scc) {
            return Err(Error::data(format!("scc out of [-1,1]: {}", self.scc)));
        }
        if self.scm < 0.0 || self.scsd < 0.0 || self.gsd < 0.0 {
            return Err(Error::data(format!("negative scm/scsd/gsd: {a:?}")));
        }
        Ok(())
    }
}

/// Unnormalized forward 2D DFT magnitudes of one row-major H×W plane,
/// returned in layout `mags[u * h + v]` where `u` indexes frequency along
/// width and `v` along height.
fn fft2_mags(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut rows: Vec<Complex<f64>> = plane.iter().map(|v| Complex::new(*v, 0.0)).collect();
    for row in rows.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    // Transpose so columns become contiguous, then FFT those.
    let mut cols = vec![Complex::new(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            cols[x * h + y] = rows[y * w + x];
        }
    }
    for col in cols.chunks_exact_mut(h) {
        col_fft.process(col);
    }
    cols.iter().map(|c| c.norm()).collect()
}

/// Normalized frequency of DFT bin `k` out of `n`, in (-0.5, 0.5].
#[inline]
fn bin_freq(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// High-frequency energy ratio: per band, the fraction of spectral energy at
/// radial normalized frequency >= [`HIGH_FREQ_CUTOFF`]; an all-zero band
/// contributes 0. Mean over bands.
pub fn hfer(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    let mut acc = 0.0;
    for c in 0..cube.bands() {
        let mags = fft2_mags(cube.band(c), h, w);
        let mut high = 0.0;
        let mut total = 0.0;
        for u in 0..w {
            let fu = bin_freq(u, w);
            for v in 0..h {
                let fv = bin_freq(v, h);
                let e = mags[u * h + v] * mags[u * h + v];
                total += e;
                if (fu * fu + fv * fv).sqrt() >= HIGH_FREQ_CUTOFF {
                    high += e;
                }
            }
        }
        if total > 0.0 {
            acc += (high / total).clamp(0.0, 1.0);
        }
    }
    Ok(acc / cube.bands() as f64)
}

/// Spatial texture uniformity: per band, the ratio of geometric to arithmetic
/// mean of the DFT magnitudes (spectral flatness), with magnitudes floored at
/// [`STU_EPS`] inside the log. A band whose arithmetic mean falls below the
/// floor contributes 0. Mean over bands. By the AM-GM inequality the ratio
/// lies in [0, 1].
pub fn stu(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    let n = (h * w) as f64;
    let mut acc = 0.0;
    for c in 0..cube.bands() {
        let mags = fft2_mags(cube.band(c), h, w);
        let am = mags.iter().sum::<f64>() / n;
        if am < STU_EPS {
            continue;
        }
        let log_mean = mags.iter().map(|m| m.max(STU_EPS).ln()).sum::<f64>() / n;
        acc += (log_mean.exp() / am).clamp(0.0, 1.0);
    }
    Ok(acc / cube.bands() as f64)
}

/// Mean spectrum: spatial average per band.
fn mean_spectrum(cube: &HsiCube) -> Vec<f64> {
    let n = (cube.height() * cube.width()) as f64;
    (0..cube.bands())
        .map(|c| cube.band(c).iter().sum::<f64>() / n)
        .collect()
}

/// Spectral curvature of the spatially averaged spectrum `s`: second
/// differences `k_i = s[i-1] - 2 s[i] + s[i+1]` over the C-2 interior bands.
/// Returns (SCM, SCSD) = (mean |k|, sample standard deviation of the signed
/// k with denominator C-3). Requires at least 4 bands.
pub fn spectral_curvature(cube: &HsiCube) -> Result<(f64, f64)> {
    let nb = cube.bands();
    if nb < 4 {
        return Err(Error::dimension(format!("spectral curvature needs >= 4 bands, got {nb}")));
    }
    let s = mean_spectrum(cube);
    let kappa: Vec<f64> = (1..nb - 1).map(|i| s[i - 1] - 2.0 * s[i] + s[i + 1]).collect();
    let scm = kappa.iter().map(|k| k.abs()).sum::<f64>() / kappa.len() as f64;
    let mean = kappa.iter().sum::<f64>() / kappa.len() as f64;
    let var = kappa.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (kappa.len() - 1) as f64;
    Ok((scm, var.sqrt()))
}

pub fn scm(cube: &HsiCube) -> Result<f64> {
    spectral_curvature(cube).map(|(m, _)| m)
}

pub fn scsd(cube: &HsiCube) -> Result<f64> {
    spectral_curvature(cube).map(|(_, s)| s)
}

/// Gradient standard deviation: per band, central-difference gradient
/// magnitudes `sqrt(dx^2 + dy^2)` at interior pixels (borders excluded), then
/// the sample standard deviation over those magnitudes (denominator n-1);
/// mean over bands. Requires at least 2 interior pixels per band.
pub fn gsd(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    if h < 3 || w < 3 || (h - 2) * (w - 2) < 2 {
        return Err(Error::dimension(format!(
            "gsd needs at least 2 interior pixels, got {h}x{w}"
        )));
    }
    let mut acc = 0.0;
    let mut mags = Vec::with_capacity((h - 2) * (w - 2));
    for c in 0..cube.bands() {
        let b = cube.band(c);
        mags.clear();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let dx = (b[y * w + x + 1] - b[y * w + x - 1]) / 2.0;
                let dy = (b[(y + 1) * w + x] - b[(y - 1) * w + x]) / 2.0;
                mags.push((dx * dx + dy * dy).sqrt());
            }
        }
        let n = mags.len() as f64;
        let mean = mags.iter().sum::<f64>() / n;
        let var = mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
        acc += var.sqrt();
    }
    Ok(acc / cube.bands() as f64)
}

/// Pearson correlation between two equal-length views; `None` when either
/// side has (numerically) zero variance.
fn pearson(a: impl Iterator<Item = f64> + Clone, b: impl Iterator<Item = f64> + Clone, n: usize) -> Option<f64> {
    let nf = n as f64;
    let ma = a.clone().sum::<f64>() / nf;
    let mb = b.clone().sum::<f64>() / nf;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    if saa * sbb < 1e-24 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spatial correlation coefficient: per band, the mean of the Pearson
/// correlations between the band and its one-pixel horizontal and vertical
/// shifts. A shift pair with zero variance on either side counts as 1.0
/// (a constant region is perfectly spatially redundant). Mean over bands.
/// Requires height and width >= 2.
pub fn scc(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    if h < 2 || w < 2 {
        return Err(Error::dimension(format!("scc needs h, w >= 2, got {h}x{w}")));
    }
    let mut acc = 0.0;
    for c in 0..cube.bands() {
        let b = cube.band(c);
        // Horizontal: (y, x) vs (y, x+1).
        let left = (0..h).flat_map(|y| (0..w - 1).map(move |x| (y, x)));
        let rh = pearson(
            left.clone().map(|(y, x)| b[y * w + x]),
            left.map(|(y, x)| b[y * w + x + 1]),
            h * (w - 1),
        )
        .unwrap_or(1.0);
        // Vertical: (y, x) vs (y+1, x).
        let top = (0..h - 1).flat_map(|y| (0..w).map(move |x| (y, x)));
        let rv = pearson(
            top.clone().map(|(y, x)| b[y * w + x]),
            top.map(|(y, x)| b[(y + 1) * w + x]),
            (h - 1) * w,
        )
        .unwrap_or(1.0);
        acc += (rh + rv) / 2.0;
    }
    Ok(acc / cube.bands() as f64)
}

/// Compute the six-metric prompt on the min-max normalized cube.
pub fn degradation_prompt(cube: &HsiCube) -> Result<DegradationPrompt> {
    let n = cube.normalize();
    let (scm_v, scsd_v) = spectral_curvature(&n)?;
    Ok(DegradationPrompt {
        hfer: hfer(&n)?,
        stu: stu(&n)?,
        scm: scm_v,
        scsd: scsd_v,
        gsd: gsd(&n)?,
        scc: scc(&n)?,
    })
}

/// Prompts for a batch of cubes on `threads` workers. Each cube is processed
/// independently and sequentially, so the result is bit-identical for any
/// worker count; outputs are in input order.
pub fn prompts_parallel(cubes: &[HsiCube], threads: usize) -> Result<Vec<DegradationPrompt>> {
    if threads == 0 {
        return Err(Error::invalid_param("thread count must be at least 1".to_string()));
    }
    if threads == 1 || cubes.len() <= 1 {
        return cubes.iter().map(degradation_prompt).collect();
    }
    let chunk = cubes.len().div_ceil(threads);
    let results: Vec<Result<Vec<DegradationPrompt>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cubes
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(degradation_prompt).collect()))
            .collect();
        handles.into_iter().map(|jh| jh.join().expect("prompt worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(cubes.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Auxiliary candidate metrics
// ---------------------------------------------------------------------------

/// Mean central-difference gradient magnitude over interior pixels, mean over
/// bands. Same stencil as [`gsd`], first moment instead of spread.
pub fn mean_gradient_magnitude(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    if h < 3 || w < 3 {
        return Err(Error::dimension(format!("gradient needs h, w >= 3, got {h}x{w}")));
    }
    let mut acc = 0.0;
    for c in 0..cube.bands() {
        let b = cube.band(c);
        let mut sum = 0.0;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let dx = (b[y * w + x + 1] - b[y * w + x - 1]) / 2.0;
                let dy = (b[(y + 1) * w + x] - b[(y - 1) * w + x]) / 2.0;
                sum += (dx * dx + dy * dy).sqrt();
            }
        }
        acc += sum / ((h - 2) * (w - 2)) as f64;
    }
    Ok(acc / cube.bands() as f64)
}

/// Fraction of voxels that are exactly zero (masked-out pixels and dropped
/// bands stay at zero through min-max normalization).
pub fn missing_data_ratio(cube: &HsiCube) -> Result<f64> {
    let zeros = cube.data().iter().filter(|v| **v == 0.0).count();
    Ok(zeros as f64 / cube.data().len() as f64)
}

/// Effective rank (Roy & Vetterli): exp of the Shannon entropy of the
/// singular-value distribution of the C×(H·W) band matrix. 1 for a rank-one
/// cube, up to min(C, H·W) for a flat spectrum.
pub fn effective_rank(cube: &HsiCube) -> Result<f64> {
    let nb = cube.bands();
    let hw = cube.height() * cube.width();
    let m = nalgebra::DMatrix::from_row_slice(nb, hw, cube.data());
    let sv = m.singular_values();
    let total: f64 = sv.iter().sum();
    if total <= 0.0 {
        return Ok(1.0);
    }
    let entropy: f64 = sv
        .iter()
        .map(|s| {
            let p = s / total;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum();
    Ok(entropy.exp())
}

/// Mean Pearson correlation between adjacent spectral bands viewed as H·W
/// vectors; a pair with zero variance counts as 1.0. Requires >= 2 bands.
pub fn mean_adjacent_correlation(cube: &HsiCube) -> Result<f64> {
    let nb = cube.bands();
    if nb < 2 {
        return Err(Error::dimension("adjacent band correlation needs >= 2 bands".to_string()));
    }
    let n = cube.height() * cube.width();
    let mut acc = 0.0;
    for c in 0..nb - 1 {
        let a = cube.band(c);
        let b = cube.band(c + 1);
        acc += pearson(a.iter().copied(), b.iter().copied(), n).unwrap_or(1.0);
    }
    Ok(acc / (nb - 1) as f64)
}

/// Mean per-pixel entropy of the spectrum, normalized by ln(C) into [0, 1].
/// Values are treated as nonnegative intensities (clamped below at zero);
/// an all-zero spectrum contributes 0. Requires >= 2 bands.
pub fn spectral_entropy(cube: &HsiCube) -> Result<f64> {
    let nb = cube.bands();
    if nb < 2 {
        return Err(Error::dimension("spectral entropy needs >= 2 bands".to_string()));
    }
    let hw = cube.height() * cube.width();
    let norm = (nb as f64).ln();
    let mut acc = 0.0;
    for p in 0..hw {
        let mut total = 0.0;
        for c in 0..nb {
            total += cube.band(c)[p].max(0.0);
        }
        if total <= 0.0 {
            continue;
        }
        let mut entropy = 0.0;
        for c in 0..nb {
            let v = cube.band(c)[p].max(0.0) / total;
            if v > 0.0 {
                entropy -= v * v.ln();
            }
        }
        acc += entropy / norm;
    }
    Ok((acc / hw as f64).clamp(0.0, 1.0))
}

/// Strength of the single strongest non-DC spatial frequency: per band, the
/// largest non-DC bin energy divided by total non-DC energy (0 when the band
/// has no non-DC energy). Mean over bands.
pub fn dominant_frequency_strength(cube: &HsiCube) -> Result<f64> {
    let (h, w) = (cube.height(), cube.width());
    let mut acc = 0.0;
    for c in 0..cube.bands() {
        let mags = fft2_mags(cube.band(c), h, w);
        let mut best = 0.0f64;
        let mut total = 0.0f64;
        for (i, m) in mags.iter().enumerate() {
            if i == 0 {
                continue; // layout puts DC at index 0 (u = 0, v = 0)
            }
            let e = m * m;
            total += e;
            best = best.max(e);
        }
        if total > 0.0 {
            acc += (best / total).clamp(0.0, 1.0);
        }
    }
    Ok(acc / cube.bands() as f64)
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

pub type MetricFn = fn(&HsiCube) -> Result<f64>;

/// Ordered, uniquely named collection of candidate metrics. The first six are
/// the prompt metrics in prompt order; the rest are auxiliary candidates.
pub struct MetricRegistry {
    entries: Vec<(String, MetricFn)>,
}

impl MetricRegistry {
    /// The standard registry: 6 prompt metrics + 6 auxiliary candidates.
    pub fn standard() -> Self {
        let mut r = MetricRegistry { entries: Vec::new() };
        let all: [(&str, MetricFn); 12] = [
            ("hfer", hfer),
            ("stu", stu),
            ("scm", scm),
            ("scsd", scsd),
            ("gsd", gsd),
            ("scc", scc),
            ("mean_gradient_magnitude", mean_gradient_magnitude),
            ("missing_data_ratio", missing_data_ratio),
            ("effective_rank", effective_rank),
            ("mean_adjacent_correlation", mean_adjacent_correlation),
            ("spectral_entropy", spectral_entropy),
            ("dominant_frequency_strength", dominant_frequency_strength),
        ];
        for (name, f) in all {
            r.register(name, f).expect("standard names are unique");
        }
        r
    }

    pub fn register(&mut self, name: impl Into<String>, f: MetricFn) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::invalid_param(format!("metric name {name:?} already registered")));
        }
        self.entries.push((name, f));
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<MetricFn> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, f)| *f)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Evaluate every metric on the min-max normalized cube, in registry
    /// order.
    pub fn evaluate_all(&self, cube: &HsiCube) -> Result<Vec<f64>> {
        let n = cube.normalize();
        self.entries.iter().map(|(_, f)| f(&n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{synth_scene, SynthSpec};
    use rand_distr::{Distribution, StandardNormal};

    fn band_cube(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> HsiCube {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        HsiCube::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn hfer_splits_energy_by_radial_frequency() {
        // Nyquist cosine along x (f = 0.5, all "high") with unit amplitude
        // carries double the per-sample energy of a regular cosine (its DFT
        // line is self-conjugate), so the expected ratio is 2/3, not 1/2.
        let mixed = band_cube(16, 16, |_, x| {
            let nyq = if x % 2 == 0 { 1.0 } else { -1.0 };
            nyq + (2.0 * std::f64::consts::PI * x as f64 / 16.0).cos()
        });
        assert!((hfer(&mixed).unwrap() - 2.0 / 3.0).abs() < 1e-9);

        // A frequency sitting exactly on the cutoff counts as high.
        let at_cutoff = band_cube(16, 16, |_, x| (2.0 * std::f64::consts::PI * 4.0 * x as f64 / 16.0).cos());
        assert!((hfer(&at_cutoff).unwrap() - 1.0).abs() < 1e-9);

        // Constant and all-zero bands contribute 0.
        assert_eq!(hfer(&band_cube(8, 8, |_, _| 0.7)).unwrap(), 0.0);
        assert_eq!(hfer(&band_cube(8, 8, |_, _| 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn stu_matches_iid_noise_expectation() {
        // For iid noise the DFT magnitudes are Rayleigh-like; the flatness
        // expectation is exp((ln 2 - gamma)/2) / sqrt(pi/2) ~= 0.8456.
        let mut rng = crate::rng::rng_from_seed(11);
        let c = band_cube(64, 64, |_, _| StandardNormal.sample(&mut rng));
        let v = stu(&c).unwrap();
        assert!((0.82..0.88).contains(&v), "stu of iid noise = {v}");
    }

    #[test]
    fn stu_degenerate_bands() {
        assert_eq!(stu(&band_cube(8, 8, |_, _| 0.0)).unwrap(), 0.0);
        // Constant band: everything at DC, geometric mean collapses.
        assert!(stu(&band_cube(8, 8, |_, _| 0.9)).unwrap() < 1e-6);
    }

    #[test]
    fn spectral_curvature_hand_case() {
        // Constant 4x4 bands with spectrum [0, 0, 1, 0, 0]:
        // kappa = [1, -2, 1], SCM = 4/3, SCSD = sqrt(3).
        let mut data = Vec::new();
        for s in [0.0, 0.0, 1.0, 0.0, 0.0] {
            data.extend(std::iter::repeat(s).take(16));
        }
        let c = HsiCube::new(4, 4, 5, data).unwrap();
        let (m, sd) = spectral_curvature(&c).unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-15);
        assert!((sd - 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spectral_curvature_of_affine_spectrum_is_exactly_zero() {
        // Dyadic affine spectrum on a power-of-two grid: all arithmetic is
        // exact, so the invariant holds bit-for-bit.
        let mut data = Vec::new();
        for c in 0..6 {
            data.extend(std::iter::repeat(0.125 + 0.0625 * c as f64).take(64));
        }
        let c = HsiCube::new(8, 8, 6, data).unwrap();
        assert_eq!(spectral_curvature(&c).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn spectral_curvature_needs_four_bands() {
        let c = HsiCube::new(2, 2, 3, vec![0.0; 12]).unwrap();
        assert!(spectral_curvature(&c).is_err());
    }

    #[test]
    fn gsd_zero_for_constant_and_ramp() {
        assert_eq!(gsd(&band_cube(5, 5, |_, _| 0.3)).unwrap(), 0.0);
        // Linear ramp: every interior gradient magnitude is 1, spread 0.
        assert_eq!(gsd(&band_cube(5, 7, |_, x| x as f64)).unwrap(), 0.0);
        assert!(gsd(&band_cube(3, 3, |_, _| 0.0)).is_err());
        assert!(gsd(&band_cube(2, 9, |_, _| 0.0)).is_err());
    }

    #[test]
    fn scc_hand_cases() {
        assert_eq!(scc(&band_cube(4, 4, |_, _| 0.2)).unwrap(), 1.0);
        let checker = band_cube(6, 6, |y, x| if (y + x) % 2 == 0 { 1.0 } else { 0.0 });
        assert!((scc(&checker).unwrap() + 1.0).abs() < 1e-12);
        let ramp = band_cube(4, 5, |_, x| x as f64);
        assert!((scc(&ramp).unwrap() - 1.0).abs() < 1e-12);
        assert!(scc(&HsiCube::new(1, 4, 1, vec![0.0; 4]).unwrap()).is_err());
    }

    #[test]
    fn prompt_is_valid_and_parallel_is_bit_identical() {
        let cubes: Vec<HsiCube> = (0..8)
            .map(|i| synth_scene(&SynthSpec { seed: i, height: 12, width: 12, bands: 8, ..SynthSpec::default() }).unwrap())
            .collect();
        let sequential = prompts_parallel(&cubes, 1).unwrap();
        for p in &sequential {
            p.validate().unwrap();
        }
        for threads in [2, 3, 8] {
            let par = prompts_parallel(&cubes, threads).unwrap();
            for (a, b) in par.iter().zip(&sequential) {
                assert_eq!(a.to_array(), b.to_array(), "threads={threads}");
            }
        }
        assert!(prompts_parallel(&cubes, 0).is_err());
    }

    #[test]
    fn synth_scene_is_spectrally_smooth_but_textured() {
        let spec = SynthSpec { seed: 7, ..SynthSpec::default() };
        let p = degradation_prompt(&synth_scene(&spec).unwrap()).unwrap();
        assert!(p.scm < 0.05, "scm = {}", p.scm);
        assert!(p.gsd > 0.0, "gsd = {}", p.gsd);
    }

    #[test]
    fn auxiliary_metric_hand_cases() {
        // missing_data_ratio counts exact zeros.
        let c = HsiCube::new(1, 4, 1, vec![0.0, 0.5, 0.0, 1.0]).unwrap();
        assert_eq!(missing_data_ratio(&c).unwrap(), 0.5);

        // Identical bands: spectral rank one, adjacent correlation one.
        let plane: Vec<f64> = (0..16).map(|i| (i % 5) as f64 * 0.2).collect();
        let mut data = plane.clone();
        data.extend(&plane);
        data.extend(&plane);
        let rank1 = HsiCube::new(4, 4, 3, data).unwrap();
        assert!((effective_rank(&rank1).unwrap() - 1.0).abs() < 1e-9);
        assert!((mean_adjacent_correlation(&rank1).unwrap() - 1.0).abs() < 1e-12);

        // Anti-correlated adjacent bands.
        let mut flip = plane.clone();
        flip.extend(plane.iter().map(|v| 1.0 - v));
        let anti = HsiCube::new(4, 4, 2, flip).unwrap();
        assert!((mean_adjacent_correlation(&anti).unwrap() + 1.0).abs() < 1e-12);

        // Flat spectrum at every pixel: normalized entropy is 1.
        let uniform = HsiCube::new(2, 2, 4, vec![0.3; 16]).unwrap();
        assert!((spectral_entropy(&uniform).unwrap() - 1.0).abs() < 1e-12);

        // Single Nyquist line holds all non-DC energy in one bin.
        let nyq = band_cube(8, 8, |_, x| if x % 2 == 0 { 1.0 } else { 0.0 });
        assert!((dominant_frequency_strength(&nyq).unwrap() - 1.0).abs() < 1e-9);
        // A regular cosine splits between two conjugate bins.
        let cosine = band_cube(8, 8, |_, x| (2.0 * std::f64::consts::PI * x as f64 / 8.0).cos());
        assert!((dominant_frequency_strength(&cosine).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn registry_contract() {
        let reg = MetricRegistry::standard();
        assert_eq!(reg.len(), 12);
        assert_eq!(&reg.names()[..6], &DegradationPrompt::NAMES);
        let mut seen = std::collections::HashSet::new();
        assert!(reg.names().iter().all(|n| seen.insert(*n)), "duplicate names");
        assert!(reg.get("stu").is_some());
        assert!(reg.get("nope").is_none());

        let cube = synth_scene(&SynthSpec { height: 8, width: 8, bands: 6, ..SynthSpec::default() }).unwrap();
        let vals = reg.evaluate_all(&cube).unwrap();
        assert_eq!(vals.len(), 12);
        assert!(vals.iter().all(|v| v.is_finite()));

        let mut reg2 = MetricRegistry::standard();
        assert!(reg2.register("stu", stu).is_err());
        assert!(reg2.register("stu2", stu).is_ok());
    }
}
