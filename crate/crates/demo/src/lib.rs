//! WebAssembly demo bindings: synthesize a scene, degrade it with a recipe,
//! and inspect the result (false-color renders, the six-metric degradation
//! prompt, PSNR/SSIM, expert routing) from a static browser page.
//!
//! All logic lives in plain Rust functions over [`DemoState`] so it also
//! compiles and tests on the host; the `#[wasm_bindgen]` layer is a thin
//! wrapper that converts errors into JS exceptions. No `web-sys`: the page
//! builds its `ImageData` from the returned RGBA buffers.

use wasm_bindgen::prelude::*;

use specdeg::cube::{synth_scene, SynthSpec};
use specdeg::degrade::{apply, DegradationRecipe};
use specdeg::error::{Error, Result};
use specdeg::eval::evaluate;
use specdeg::metrics::degradation_prompt;
use specdeg::route::{embed_prompt, gate, Mode, RouterConfig};
use specdeg::HsiCube;

/// A synthesized clean/degraded pair plus the recipe that links them.
pub struct DemoState {
    clean: HsiCube,
    degraded: HsiCube,
}

impl DemoState {
    /// Synthesize a `size`×`size`×`bands` scene from `scene_seed` and apply
    /// the JSON recipe (`{"kind": ..., "params": {...}, "seed": N}`).
    pub fn build(size: usize, bands: usize, scene_seed: u64, recipe_json: &str) -> Result<Self> {
        let spec = SynthSpec {
            height: size,
            width: size,
            bands,
            seed: scene_seed,
            ..SynthSpec::default()
        };
        let recipe: DegradationRecipe = serde_json::from_str(recipe_json)
            .map_err(|e| Error::data(format!("recipe: {e}")))?;
        let clean = synth_scene(&spec)?;
        let pair = apply(&recipe, &clean)?;
        Ok(DemoState { clean: pair.clean, degraded: pair.degraded })
    }

    pub fn clean_rgba(&self) -> Vec<u8> {
        to_rgba(&self.clean)
    }

    pub fn degraded_rgba(&self) -> Vec<u8> {
        to_rgba(&self.degraded)
    }

    /// Degradation prompt of the degraded cube, as a JSON object.
    pub fn prompt_json(&self) -> Result<String> {
        let prompt = degradation_prompt(&self.degraded)?;
        serde_json::to_string(&prompt).map_err(|e| Error::data(format!("encode: {e}")))
    }

    /// PSNR/SSIM of degraded against clean, as a JSON object.
    pub fn quality_json(&self) -> Result<String> {
        let score = evaluate(&self.clean, &self.degraded, 1.0)?;
        serde_json::to_string(&score).map_err(|e| Error::data(format!("encode: {e}")))
    }

    /// Route the degraded cube through seeded router weights; returns the
    /// logits/gates/selected JSON.
    pub fn route_json(&self, experts: usize, top_k: usize, seed: u64) -> Result<String> {
        let config = RouterConfig::seeded_with(experts, top_k, 64, seed);
        let prompt = degradation_prompt(&self.degraded)?;
        let embedding = embed_prompt(&prompt, &config)?;
        let result = gate(&self.degraded, &embedding, &config, Mode::Infer, seed)?;
        serde_json::to_string(&result).map_err(|e| Error::data(format!("encode: {e}")))
    }
}

/// False-color RGBA (row-major, `ImageData` layout): R/G/B from bands at
/// 5/6, 1/2, and 1/6 of the spectral range, alpha 255.
pub fn to_rgba(cube: &HsiCube) -> Vec<u8> {
    let (h, w, c) = (cube.height(), cube.width(), cube.bands());
    let channels = [c * 5 / 6, c / 2, c / 6];
    let mut rgba = Vec::with_capacity(h * w * 4);
    for y in 0..h {
        for x in 0..w {
            for band in channels {
                let v = cube.get(y, x, band).clamp(0.0, 1.0);
                rgba.push((v * 255.0).round() as u8);
            }
            rgba.push(255);
        }
    }
    rgba
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Browser handle to one clean/degraded pair.
#[wasm_bindgen]
pub struct DemoPair {
    state: DemoState,
    size: usize,
}

#[wasm_bindgen]
impl DemoPair {
    /// Synthesize and degrade in one step. Throws on invalid recipes.
    #[wasm_bindgen(constructor)]
    pub fn new(
        size: u32,
        bands: u32,
        scene_seed: u32,
        recipe_json: &str,
    ) -> std::result::Result<DemoPair, JsError> {
        let state =
            js(DemoState::build(size as usize, bands as usize, scene_seed as u64, recipe_json))?;
        Ok(DemoPair { state, size: size as usize })
    }

    /// Edge length in pixels (renders are square).
    pub fn size(&self) -> u32 {
        self.size as u32
    }

    pub fn clean_rgba(&self) -> Vec<u8> {
        self.state.clean_rgba()
    }

    pub fn degraded_rgba(&self) -> Vec<u8> {
        self.state.degraded_rgba()
    }

    pub fn prompt_json(&self) -> std::result::Result<String, JsError> {
        js(self.state.prompt_json())
    }

    pub fn quality_json(&self) -> std::result::Result<String, JsError> {
        js(self.state.quality_json())
    }

    pub fn route_json(
        &self,
        experts: u32,
        top_k: u32,
        seed: u32,
    ) -> std::result::Result<String, JsError> {
        js(self.state.route_json(experts as usize, top_k as usize, seed as u64))
    }
}
