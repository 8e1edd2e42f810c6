//! Band-sequential hyperspectral cube, synthetic scene generation, and the
//! HSC v1 binary format.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// An H×W×C cube stored band-sequentially: band `c` occupies one contiguous
/// row-major H×W plane. `value_range` is nominal metadata (PSNR/SSIM peak,
/// normalization target); values may exceed it, e.g. after Poisson noise.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
    value_range: (f64, f64),
    wavelengths: Option<Vec<f64>>,
}

impl HsiCube {
    /// Build a cube with the default (0, 1) value range and no wavelengths.
    ///
    /// `data` must hold `height·width·bands` finite values, band-sequential.
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::dimension(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|hw| hw.checked_mul(bands))
            .ok_or_else(|| Error::dimension("cube dimensions overflow".to_string()))?;
        if data.len() != expected {
            return Err(Error::dimension(format!(
                "data length {} does not match {height}x{width}x{bands} = {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite value at flat index {i}")));
        }
        Ok(HsiCube { height, width, bands, data, value_range: (0.0, 1.0), wavelengths: None })
    }

    /// Replace the nominal value range (`lo < hi`, both finite).
    pub fn with_value_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid_param(format!("value range ({lo}, {hi}) must be finite with lo < hi")));
        }
        self.value_range = (lo, hi);
        Ok(self)
    }

    /// Attach per-band wavelengths (length = bands, strictly increasing).
    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.bands {
            return Err(Error::dimension(format!(
                "wavelength count {} does not match band count {}",
                wavelengths.len(),
                self.bands
            )));
        }
        if wavelengths.iter().any(|w| !w.is_finite())
            || wavelengths.windows(2).any(|p| p[0] >= p[1])
        {
            return Err(Error::invalid_param("wavelengths must be finite and strictly increasing".to_string()));
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    /// Full band-sequential payload.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// A cube with the same dims, value range, and wavelengths but a new
    /// payload (validated like [`HsiCube::new`]).
    pub fn with_data(&self, data: Vec<f64>) -> Result<HsiCube> {
        let mut out = HsiCube::new(self.height, self.width, self.bands, data)?;
        out.value_range = self.value_range;
        out.wavelengths = self.wavelengths.clone();
        Ok(out)
    }

    /// Flat index of (row y, column x, band c).
    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.idx(y, x, c)]
    }

    /// One band as a row-major H×W slice.
    pub fn band(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Min-max rescale to [0, 1]; a constant cube maps to all 0.5. The result
    /// carries the default (0, 1) range. Idempotent bit-for-bit.
    pub fn normalize(&self) -> HsiCube {
        let lo = self.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let data = if span <= 0.0 {
            vec![0.5; self.data.len()]
        } else {
            self.data.iter().map(|v| (v - lo) / span).collect()
        };
        HsiCube {
            height: self.height,
            width: self.width,
            bands: self.bands,
            data,
            value_range: (0.0, 1.0),
            wavelengths: self.wavelengths.clone(),
        }
    }
}

/// Parameters for [`synth_scene`].
///
/// Scenes are convex per-pixel mixtures of `n_materials` smooth endmember
/// spectra; abundances vary spatially through cosine textures at the listed
/// frequencies (cycles per image) plus a smooth random field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub seed: u64,
    pub n_materials: usize,
    pub texture_freqs: Vec<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 32,
            width: 32,
            bands: 31,
            seed: 0,
            n_materials: 4,
            texture_freqs: vec![2.0, 5.0, 11.0],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::dimension(format!(
                "scene dimensions must be positive, got {}x{}x{}",
                self.height, self.width, self.bands
            )));
        }
        if self.n_materials == 0 {
            return Err(Error::invalid_param("n_materials must be at least 1".to_string()));
        }
        if self.texture_freqs.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::invalid_param("texture frequencies must be positive and finite".to_string()));
        }
        Ok(())
    }
}

// Generator shape constants. The endmember range keeps mixtures away from the
// clamp boundaries; field sigma/amplitude and the softmax temperature set how
// much smooth spatial variation the abundance maps carry.
const ENDMEMBER_LO: f64 = 0.05;
const ENDMEMBER_HI: f64 = 0.95;
const FIELD_SIGMA: f64 = 2.0;
const FIELD_AMP: f64 = 1.2;
const SOFTMAX_TEMP: f64 = 1.5;

/// Deterministic synthetic scene.
///
/// Spatial texture is built entirely from `cos(2πm(i+0.5)/n)` modes, which are
/// simultaneously periodic and half-sample symmetric. Tiles therefore have no
/// seam at the borders: a reflect-padded convolution equals the circular one,
/// and the per-band DFT carries no windowing leakage that would mask what the
/// degradation operators do to the spectrum.
///
/// An empty `texture_freqs` list yields spatially constant abundances, i.e. a
/// cube that is constant within each band.
pub fn synth_scene(spec: &SynthSpec) -> Result<HsiCube> {
    spec.validate()?;
    let (h, w, nb, nm) = (spec.height, spec.width, spec.bands, spec.n_materials);
    let mut rng = rng_from_seed(spec.seed);

    // Endmembers: 1..=3 Gaussian bumps over the band index, rescaled into
    // [ENDMEMBER_LO, ENDMEMBER_HI] so every mixture stays inside (0, 1).
    let mut endmembers = Vec::with_capacity(nm);
    for _ in 0..nm {
        let n_bumps = rng.random_range(1..=3usize);
        let mut s = vec![0.0f64; nb];
        for _ in 0..n_bumps {
            let center = rng.random_range(0.0..=(nb - 1) as f64);
            let width = rng.random_range(nb as f64 / 10.0..=nb as f64 / 3.0);
            let amp = rng.random_range(0.3..=1.0);
            for (c, v) in s.iter_mut().enumerate() {
                let d = c as f64 - center;
                *v += amp * (-d * d / (2.0 * width * width)).exp();
            }
        }
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            s.iter_mut().for_each(|v| *v = 0.5);
        } else {
            s.iter_mut().for_each(|v| *v = ENDMEMBER_LO + (*v - lo) / (hi - lo) * (ENDMEMBER_HI - ENDMEMBER_LO));
        }
        endmembers.push(s);
    }

    // cos(2πm(i+0.5)/n) lookup per axis.
    let cos_table = |n: usize, m: usize| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * m as f64 * (i as f64 + 0.5) / n as f64).cos())
            .collect()
    };

    // Per-material abundance logits.
    let mut logits = vec![vec![0.0f64; h * w]; nm];
    for logit in logits.iter_mut() {
        for f in &spec.texture_freqs {
            let theta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let mut kx = (f * theta.cos()).round() as usize;
            let ky = (f * theta.sin()).round() as usize;
            if kx == 0 && ky == 0 {
                kx = (f.round() as usize).max(1);
            }
            let mag = rng.random_range(0.5..=1.0);
            let amp = if rng.random::<bool>() { mag } else { -mag };
            let cy = cos_table(h, ky);
            let cx = cos_table(w, kx);
            for y in 0..h {
                for x in 0..w {
                    logit[y * w + x] += amp * cy[y] * cx[x];
                }
            }
        }
        if !spec.texture_freqs.is_empty() {
            // Random field from the same mode family, gaussian low-pass
            // weighted, normalized to unit standard deviation. Separable
            // accumulation: collapse the mx sum per my first.
            let mut field = vec![0.0f64; h * w];
            let m_rows = (h / 2).max(usize::from(h == 1));
            let m_cols = (w / 2).max(usize::from(w == 1));
            for my in 0..m_rows {
                let mut row_profile = vec![0.0f64; w];
                for mx in 0..m_cols {
                    if my == 0 && mx == 0 {
                        continue;
                    }
                    let coef: f64 = StandardNormal.sample(&mut rng);
                    let wgt = (-((mx * mx + my * my) as f64) / (2.0 * FIELD_SIGMA * FIELD_SIGMA)).exp();
                    let cx = cos_table(w, mx);
                    for x in 0..w {
                        row_profile[x] += coef * wgt * cx[x];
                    }
                }
                let cy = cos_table(h, my);
                for y in 0..h {
                    for x in 0..w {
                        field[y * w + x] += cy[y] * row_profile[x];
                    }
                }
            }
            let mean = field.iter().sum::<f64>() / field.len() as f64;
            let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / field.len() as f64;
            if var.sqrt() > 1e-12 {
                let inv = FIELD_AMP / var.sqrt();
                for (l, f) in logit.iter_mut().zip(&field) {
                    *l += f * inv;
                }
            }
        }
    }

    // Pixelwise softmax over materials, then mix the endmembers.
    let mut data = vec![0.0f64; h * w * nb];
    let mut weights = vec![0.0f64; nm];
    for p in 0..h * w {
        let mut max_l = f64::NEG_INFINITY;
        for logit in &logits {
            max_l = max_l.max(SOFTMAX_TEMP * logit[p]);
        }
        let mut total = 0.0;
        for (m, logit) in logits.iter().enumerate() {
            let e = (SOFTMAX_TEMP * logit[p] - max_l).exp();
            weights[m] = e;
            total += e;
        }
        for (m, endmember) in endmembers.iter().enumerate() {
            let wgt = weights[m] / total;
            for (c, em) in endmember.iter().enumerate() {
                data[c * h * w + p] += wgt * em;
            }
        }
    }

    HsiCube::new(h, w, nb, data)
}

// ---------------------------------------------------------------------------
// HSC v1 binary format (little-endian)
//
//   bytes 0..4    magic "HSC1"
//   bytes 4..16   u32 height, u32 width, u32 bands
//   byte  16      dtype: 1 = f32, 2 = f64
//   byte  17      flags: bit0 = wavelengths present (other bits reserved, 0)
//   bytes 18..20  reserved, zero
//   if flag bit0: bands × f64 wavelengths
//   payload:      height·width·bands values, band-sequential, row-major
//
// The format carries raw values only; value_range is not persisted and
// readers assume the default unit range.
// ---------------------------------------------------------------------------

const HSC_MAGIC: &[u8; 4] = b"HSC1";

/// Write `cube` as HSC v1 with f64 payload (bit-exact round-trip).
pub fn write_hsc(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_hsc_to(cube, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Format the cube into any writer. Payload dtype is always f64.
pub fn write_hsc_to(cube: &HsiCube, out: &mut impl Write) -> Result<()> {
    let dim_ok = u32::try_from(cube.height).is_ok()
        && u32::try_from(cube.width).is_ok()
        && u32::try_from(cube.bands).is_ok();
    if !dim_ok {
        return Err(Error::dimension("cube dimensions exceed u32, not representable in HSC".to_string()));
    }
    out.write_all(HSC_MAGIC)?;
    out.write_all(&(cube.height as u32).to_le_bytes())?;
    out.write_all(&(cube.width as u32).to_le_bytes())?;
    out.write_all(&(cube.bands as u32).to_le_bytes())?;
    let flags: u8 = if cube.wavelengths.is_some() { 1 } else { 0 };
    out.write_all(&[2u8, flags, 0, 0])?;
    if let Some(wl) = &cube.wavelengths {
        for v in wl {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for v in &cube.data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_hsc(path: impl AsRef<Path>) -> Result<HsiCube> {
    let file = std::fs::File::open(path)?;
    read_hsc_from(&mut BufReader::new(file))
}

/// Parse an HSC v1 stream; errors carry the byte offset of the first
/// inconsistency. Trailing bytes after the payload are rejected.
pub fn read_hsc_from(input: &mut impl Read) -> Result<HsiCube> {
    let mut header = [0u8; 20];
    read_exact_at(input, &mut header, 0)?;
    if &header[0..4] != HSC_MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}, expected \"HSC1\"", &header[0..4])));
    }
    let height = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let bands = u32::from_le_bytes(header[12..16].try_into().unwrap());
    if height == 0 {
        return Err(Error::format(4, "height must be positive".to_string()));
    }
    if width == 0 {
        return Err(Error::format(8, "width must be positive".to_string()));
    }
    if bands == 0 {
        return Err(Error::format(12, "bands must be positive".to_string()));
    }
    let dtype = header[16];
    if dtype != 1 && dtype != 2 {
        return Err(Error::format(16, format!("unknown dtype code {dtype}")));
    }
    let flags = header[17];
    if flags & !1 != 0 {
        return Err(Error::format(17, format!("unknown flag bits 0x{flags:02x}")));
    }
    if header[18] != 0 || header[19] != 0 {
        return Err(Error::format(18, "reserved bytes must be zero".to_string()));
    }

    let n_values = (height as u64)
        .checked_mul(width as u64)
        .and_then(|hw| hw.checked_mul(bands as u64))
        .filter(|n| usize::try_from(*n).is_ok())
        .ok_or_else(|| Error::format(4, format!("dimensions {height}x{width}x{bands} overflow")))?
        as usize;

    let mut offset = 20u64;
    let wavelengths = if flags & 1 != 0 {
        let mut wl = Vec::with_capacity(bands as usize);
        let mut buf = [0u8; 8];
        for i in 0..bands as usize {
            read_exact_at(input, &mut buf, offset)?;
            let v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::format(offset, format!("wavelength {i} is not finite")));
            }
            if let Some(prev) = wl.last() {
                if *prev >= v {
                    return Err(Error::format(offset, format!("wavelengths not strictly increasing at index {i}")));
                }
            }
            wl.push(v);
            offset += 8;
        }
        Some(wl)
    } else {
        None
    };

    let value_size = if dtype == 1 { 4 } else { 8 };
    let mut data = Vec::with_capacity(n_values);
    let mut buf = [0u8; 8];
    for i in 0..n_values {
        let chunk = &mut buf[..value_size];
        read_exact_at(input, chunk, offset)?;
        let v = if dtype == 1 {
            f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64
        } else {
            f64::from_le_bytes(buf)
        };
        if !v.is_finite() {
            return Err(Error::format(offset, format!("payload value {i} is not finite")));
        }
        data.push(v);
        offset += value_size as u64;
    }

    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::format(offset, "trailing bytes after payload".to_string()));
    }

    let cube = HsiCube::new(height as usize, width as usize, bands as usize, data)?;
    match wavelengths {
        Some(wl) => cube.with_wavelengths(wl),
        None => Ok(cube),
    }
}

/// `read_exact` that reports EOF as a truncation at `offset`.
fn read_exact_at(input: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = input.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::format(
                offset + filled as u64,
                format!("unexpected end of stream, needed {} more bytes", buf.len() - filled),
            ));
        }
        filled += n;
    }
    Ok(())
}
