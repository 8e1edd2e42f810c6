//! End-to-end acceptance checks for the degradation-analysis pipeline.
//!
//! Each test prints one `criterion NN … PASS` line; a failed assertion is the
//! FAIL. Criteria 1, 2, and 9 share one lazily-built 1,000-cube dataset
//! (200 cubes per degradation class at 32×32×31).

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use specdeg::cube::{synth_scene, SynthSpec};
use specdeg::degrade::{
    apply, blur_sigma_from_kernel, gaussian_noise, poisson_noise, Degradation, DegradationRecipe,
};
use specdeg::eval::{psnr, ssim};
use specdeg::metrics::{degradation_prompt, prompts_parallel, DegradationPrompt};
use specdeg::rng::{stream_rng, stream_seed};
use specdeg::route::{
    embed_prompt, gate, gate_from_logits, load_balance_report, softmax, ssam_alpha_gradient,
    ssam_forward, GateResult, Mode, RouterConfig, SsamParams, Tensor,
};
use specdeg::select::{
    accuracy, confusion_matrix, pearson_filter, stratified_split, train_forest, LabeledSamples,
    RfConfig, CLASSES,
};
use specdeg::HsiCube;

const MASTER_SEED: u64 = 0x5EED_CA5E;

struct Dataset {
    samples: LabeledSamples,
    build_seconds: f64,
}

/// 200 cubes per class: noise σ∈[30,70], blur K∈{9,15}, super-res ×{2,4},
/// inpaint rate∈{0.7,0.8,0.9}, band-drop rate∈{0.1,0.2,0.3}.
fn class_recipe(class: usize, i: usize, seed: u64) -> DegradationRecipe {
    let deg = match class {
        0 => Degradation::GaussianNoise { sigma255: None, sigma255_range: Some((30.0, 70.0)) },
        1 => Degradation::GaussianBlur { kernel_size: [9, 15][i % 2] },
        2 => Degradation::SuperRes { scale: [2, 4][i % 2] },
        3 => Degradation::Inpaint { mask_rate: [0.7, 0.8, 0.9][i % 3] },
        4 => Degradation::BandDrop { drop_rate: [0.1, 0.2, 0.3][i % 3] },
        _ => unreachable!(),
    };
    DegradationRecipe::new(deg, seed)
}

fn dataset() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| {
        let start = Instant::now();
        let per_class = 200usize;
        let mut features = Vec::with_capacity(5 * per_class * 6);
        let mut labels = Vec::with_capacity(5 * per_class);
        for class in 0..5 {
            for i in 0..per_class {
                let idx = (class * per_class + i) as u64;
                let spec = SynthSpec {
                    height: 32,
                    width: 32,
                    bands: 31,
                    seed: stream_seed(MASTER_SEED, 2 * idx),
                    ..SynthSpec::default()
                };
                let clean = synth_scene(&spec).expect("synth scene");
                let recipe = class_recipe(class, i, stream_seed(MASTER_SEED, 2 * idx + 1));
                let pair = apply(&recipe, &clean).expect("degrade");
                let dp = degradation_prompt(&pair.degraded).expect("prompt");
                features.extend_from_slice(&dp.to_array());
                labels.push(class);
            }
        }
        let samples = LabeledSamples::new(
            Vec::new(),
            features,
            labels,
            CLASSES.iter().map(|c| c.to_string()).collect(),
            DegradationPrompt::NAMES.iter().map(|n| n.to_string()).collect(),
        )
        .expect("dataset samples");
        Dataset { samples, build_seconds: start.elapsed().as_secs_f64() }
    })
}

fn random_cube(h: usize, w: usize, bands: usize, seed: u64) -> HsiCube {
    let mut rng = stream_rng(seed, 0);
    let data = (0..h * w * bands).map(|_| rng.random::<f64>()).collect();
    HsiCube::new(h, w, bands, data).unwrap()
}

#[test]
fn criterion_01_degradation_classification_accuracy() {
    let data = dataset();
    let (train, test) = stratified_split(&data.samples, 0.2, 1).expect("split");
    let model = train_forest(&train, &RfConfig::new(2)).expect("train");
    let m = confusion_matrix(&model, &test).expect("confusion");
    let acc = accuracy(&m);
    assert!(
        acc >= 0.90,
        "held-out accuracy {acc:.4} below 0.90; confusion = {m:?}"
    );
    assert!(
        data.build_seconds < 180.0,
        "dataset build took {:.1}s, expected under 3 minutes",
        data.build_seconds
    );
    println!(
        "criterion 01 (five-class identification, held-out accuracy {acc:.4}, dataset built in {:.1}s): PASS",
        data.build_seconds
    );
}

#[test]
fn criterion_02_stu_population_ordering() {
    let data = dataset();
    let stu_col = DegradationPrompt::NAMES.iter().position(|n| *n == "stu").unwrap();
    let mut means = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for i in 0..data.samples.len() {
        let class = data.samples.labels()[i];
        means[class] += data.samples.row(i)[stu_col];
        counts[class] += 1;
    }
    for (m, c) in means.iter_mut().zip(&counts) {
        *m /= *c as f64;
    }
    let [noise, blur, low_res, inpaint, band_drop] = means;
    assert!(blur < 0.2, "mean STU(blur) = {blur}");
    assert!(noise > 0.7, "mean STU(noise) = {noise}");
    assert!(inpaint > 0.7, "mean STU(inpaint) = {inpaint}");
    for (name, v) in [("super-res", low_res), ("band-drop", band_drop)] {
        assert!(
            v > blur && v < noise,
            "mean STU({name}) = {v} not strictly between blur {blur} and noise {noise}"
        );
    }
    println!(
        "criterion 02 (STU ordering: blur {blur:.4} < sr {low_res:.4}, bd {band_drop:.4} < noise {noise:.4}; inpaint {inpaint:.4}): PASS"
    );
}

#[test]
fn criterion_03_blur_sigma_closed_form() {
    assert_eq!(blur_sigma_from_kernel(9).unwrap(), 1.7);
    // The binary64 value of the closed form at K=15 sits one ulp below the
    // decimal literal 2.6, so the exact comparison targets the expression.
    let expect_15 = 0.3 * 6.0 + 0.8;
    assert_eq!(blur_sigma_from_kernel(15).unwrap(), expect_15);
    assert!((expect_15 - 2.6).abs() < 1e-15);
    println!("criterion 03 (blur sigma: f(9)=1.7, f(15)=0.3*6+0.8 exactly): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 4: independent brute-force oracles.
// ---------------------------------------------------------------------------

fn gsd_oracle(cube: &HsiCube) -> f64 {
    let (h, w, bands) = (cube.height(), cube.width(), cube.bands());
    let mut total = 0.0;
    for c in 0..bands {
        let mut mags: Vec<f64> = Vec::new();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let gx = (cube.get(y, x + 1, c) - cube.get(y, x - 1, c)) / 2.0;
                let gy = (cube.get(y + 1, x, c) - cube.get(y - 1, x, c)) / 2.0;
                mags.push((gx * gx + gy * gy).sqrt());
            }
        }
        let mean: f64 = mags.iter().sum::<f64>() / mags.len() as f64;
        let var: f64 =
            mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (mags.len() - 1) as f64;
        total += var.sqrt();
    }
    total / bands as f64
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma: f64 = a.iter().sum::<f64>() / n;
    let mb: f64 = b.iter().sum::<f64>() / n;
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let sbb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    if saa * sbb < 1e-24 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

fn scc_oracle(cube: &HsiCube) -> f64 {
    let (h, w, bands) = (cube.height(), cube.width(), cube.bands());
    let mut total = 0.0;
    for c in 0..bands {
        let (mut hl, mut hr, mut vt, mut vb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    hl.push(cube.get(y, x, c));
                    hr.push(cube.get(y, x + 1, c));
                }
                if y + 1 < h {
                    vt.push(cube.get(y, x, c));
                    vb.push(cube.get(y + 1, x, c));
                }
            }
        }
        let rh = pearson_oracle(&hl, &hr).unwrap_or(1.0);
        let rv = pearson_oracle(&vt, &vb).unwrap_or(1.0);
        total += (rh + rv) / 2.0;
    }
    total / bands as f64
}

fn psnr_oracle(x: &HsiCube, y: &HsiCube, peak: f64) -> f64 {
    let mut se = 0.0;
    for c in 0..x.bands() {
        for yy in 0..x.height() {
            for xx in 0..x.width() {
                let d = x.get(yy, xx, c) - y.get(yy, xx, c);
                se += d * d;
            }
        }
    }
    let mse = se / (x.height() * x.width() * x.bands()) as f64;
    10.0 * (peak * peak / mse).log10()
}

fn ssim_oracle(x: &HsiCube, y: &HsiCube, peak: f64) -> f64 {
    // 2D window built directly (not as an outer product of a normalized 1D
    // profile) so the computation path differs from the library's.
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    for row in win.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let (h, w, bands) = (x.height(), x.width(), x.bands());
    let mut band_total = 0.0;
    for c in 0..bands {
        let mut acc = 0.0;
        let mut count = 0;
        for cy in 5..h - 5 {
            for cx in 5..w - 5 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, row) in win.iter().enumerate() {
                    for (j, wij) in row.iter().enumerate() {
                        let a = x.get(cy + i - 5, cx + j - 5, c);
                        let b = y.get(cy + i - 5, cx + j - 5, c);
                        mx += wij * a;
                        my += wij * b;
                        sxx += wij * a * a;
                        syy += wij * b * b;
                        sxy += wij * a * b;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        band_total += acc / count as f64;
    }
    band_total / bands as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn criterion_04_metric_oracle_equivalence() {
    for i in 0..50u64 {
        let x = if i % 2 == 0 {
            random_cube(16, 16, 8, 1000 + i)
        } else {
            synth_scene(&SynthSpec { height: 16, width: 16, bands: 8, seed: 1000 + i, ..SynthSpec::default() })
                .unwrap()
        };
        let y = gaussian_noise(&x, 25.0, 2000 + i).unwrap();

        let e = rel_err(specdeg::metrics::gsd(&x).unwrap(), gsd_oracle(&x));
        assert!(e < 1e-6, "gsd cube {i}: rel err {e}");
        let e = rel_err(specdeg::metrics::scc(&x).unwrap(), scc_oracle(&x));
        assert!(e < 1e-6, "scc cube {i}: rel err {e}");
        let e = rel_err(psnr(&x, &y, 1.0).unwrap(), psnr_oracle(&x, &y, 1.0));
        assert!(e < 1e-6, "psnr cube {i}: rel err {e}");
        let e = rel_err(ssim(&x, &y, 1.0).unwrap(), ssim_oracle(&x, &y, 1.0));
        assert!(e < 1e-7, "ssim cube {i}: rel err {e}");
    }
    println!("criterion 04 (GSD/SCC/PSNR/SSIM vs brute-force oracles, 50 cubes): PASS");
}

#[test]
fn criterion_05_prompt_bounds_and_thread_determinism() {
    let mut cubes = Vec::with_capacity(1000);
    for i in 0..1000u64 {
        let spec = SynthSpec { height: 16, width: 16, bands: 8, seed: stream_seed(7, 2 * i), ..SynthSpec::default() };
        let clean = synth_scene(&spec).unwrap();
        let deg = match i % 7 {
            0 => Degradation::GaussianNoise { sigma255: None, sigma255_range: Some((30.0, 70.0)) },
            1 => Degradation::PoissonNoise { scale: 5.0 + (i % 10) as f64 },
            2 => Degradation::GaussianBlur { kernel_size: [9, 15][(i as usize / 7) % 2] },
            3 => Degradation::MotionBlur { radius: 1 + (i as usize / 7) % 5, angle_deg: (i % 360) as f64 },
            4 => Degradation::SuperRes { scale: [2, 4][(i as usize / 7) % 2] },
            5 => Degradation::Inpaint { mask_rate: [0.7, 0.8, 0.9][(i as usize / 7) % 3] },
            _ => Degradation::BandDrop { drop_rate: [0.1, 0.2, 0.3][(i as usize / 7) % 3] },
        };
        let recipe = DegradationRecipe::new(deg, stream_seed(7, 2 * i + 1));
        cubes.push(apply(&recipe, &clean).unwrap().degraded);
    }
    let one = prompts_parallel(&cubes, 1).unwrap();
    for (i, dp) in one.iter().enumerate() {
        dp.validate().unwrap_or_else(|e| panic!("cube {i}: {e}"));
    }
    for threads in [2, 8] {
        let multi = prompts_parallel(&cubes, threads).unwrap();
        for (i, (a, b)) in one.iter().zip(&multi).enumerate() {
            assert_eq!(a.to_array(), b.to_array(), "cube {i} differs at {threads} threads");
        }
    }
    println!("criterion 05 (1000 prompts in-bounds, bit-identical at 1/2/8 threads): PASS");
}

#[test]
fn criterion_06_router_contract() {
    let mut rng = stream_rng(0x6A7E, 0);
    let config = RouterConfig::seeded_with(4, 2, 16, 3);
    let features = random_cube(12, 12, 6, 99);
    for trial in 0..10_000usize {
        let n = 2 + trial % 7;
        let k = 1 + trial % n;
        let logits: Vec<f64> = (0..n).map(|_| 3.0 * (rng.random::<f64>() - 0.5)).collect();

        let full = softmax(&logits);
        let sum: f64 = full.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "trial {trial}: softmax sum {sum}");

        let r = gate_from_logits(&logits, k, false, Mode::Infer).unwrap();
        assert_eq!(r.gates.iter().filter(|g| **g != 0.0).count(), k, "trial {trial}");
        assert_eq!(r.selected.len(), k);

        let c = 100.0 * (rng.random::<f64>() - 0.5);
        let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
        let rs = gate_from_logits(&shifted, k, false, Mode::Infer).unwrap();
        assert_eq!(r.selected, rs.selected, "trial {trial}: selection changed under shift {c}");
        for (a, b) in r.gates.iter().zip(&rs.gates) {
            assert!((a - b).abs() < 1e-9, "trial {trial}: gate moved {a} -> {b} under shift {c}");
        }

        if trial % 100 == 0 {
            let dp = DegradationPrompt::from_array(std::array::from_fn(|_| rng.random()));
            let emb = embed_prompt(&dp, &config).unwrap();
            let g1 = gate(&features, &emb, &config, Mode::Infer, trial as u64).unwrap();
            let g2 = gate(&features, &emb, &config, Mode::Infer, !(trial as u64)).unwrap();
            assert_eq!(g1, g2, "trial {trial}: infer mode not deterministic");
        }
    }
    println!("criterion 06 (10k gate evaluations: softmax sums, top-k counts, shift invariance, infer determinism): PASS");
}

#[test]
fn criterion_07_fusion_gradient_check() {
    let h = 1e-4;
    for i in 0..100u64 {
        let f = synth_scene(&SynthSpec { height: 10, width: 10, bands: 5, seed: 300 + i, ..SynthSpec::default() })
            .unwrap();
        let cot = random_cube(10, 10, 5, 400 + i);
        let mut params = SsamParams::seeded(i);
        let mut rng = stream_rng(500 + i, 0);
        params.alpha = 6.0 * (rng.random::<f64>() - 0.5);

        let (ls, lc) = params.lambdas();
        assert_eq!(ls + lc, 1.0, "instance {i}: lambdas must sum to 1 exactly");

        let analytic = ssam_alpha_gradient(&f, &params, &cot).unwrap();
        let inner = |alpha: f64| {
            let p = SsamParams { alpha, ..params.clone() };
            let out = ssam_forward(&f, &p).unwrap();
            out.data().iter().zip(cot.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let numeric = (inner(params.alpha + h) - inner(params.alpha - h)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / numeric.abs().max(1e-12);
        assert!(rel < 1e-6, "instance {i}: analytic {analytic} vs numeric {numeric} (rel {rel})");
    }
    println!("criterion 07 (100 alpha-gradient checks vs finite differences; λ_s+λ_c=1 exact): PASS");
}

#[test]
fn criterion_08_noise_promotes_load_balance() {
    let mut config = RouterConfig::seeded_with(4, 1, 8, 5);
    config.proj_weights = Tensor::new(vec![4, 9], vec![0.0; 36]).unwrap();
    let features = random_cube(12, 12, 6, 1);
    let emb = embed_prompt(&DegradationPrompt::from_array([0.5; 6]), &config).unwrap();

    let run = |noise_std: f64| -> f64 {
        let mut cfg = config.clone();
        cfg.noise_std = noise_std;
        let gates: Vec<GateResult> =
            (0..10_000).map(|s| gate(&features, &emb, &cfg, Mode::Train, s).unwrap()).collect();
        load_balance_report(&gates).unwrap().entropy
    };
    let silent = run(0.0);
    let noisy = run(0.05);
    assert!(
        noisy > silent,
        "entropy with noise {noisy} not above noiseless {silent}"
    );
    println!("criterion 08 (logit noise lifts selection entropy {silent:.3} -> {noisy:.3}): PASS");
}

#[test]
fn criterion_09_pearson_duplicate_removal() {
    let data = dataset();
    let base = &data.samples;
    let kept_base = pearson_filter(base, 0.8).expect("filter base");

    // Append an exact copy of the HFER column as a 7th feature.
    let d = base.dim();
    let mut features = Vec::with_capacity(base.len() * (d + 1));
    for i in 0..base.len() {
        features.extend_from_slice(base.row(i));
        features.push(base.row(i)[0]);
    }
    let mut names: Vec<String> = base.feature_names().to_vec();
    names.push("hfer_copy".to_string());
    let with_dup = LabeledSamples::new(
        Vec::new(),
        features,
        base.labels().to_vec(),
        base.class_names().to_vec(),
        names,
    )
    .unwrap();

    let kept_dup = pearson_filter(&with_dup, 0.8).expect("filter with duplicate");
    assert_eq!(kept_dup, kept_base, "duplicate insertion must remove exactly the duplicate");
    assert!(!kept_dup.contains(&d), "the appended duplicate column survived");

    let filtered = with_dup.select_columns(&kept_dup).unwrap();
    let again = pearson_filter(&filtered, 0.8).expect("refilter");
    assert_eq!(again, (0..kept_dup.len()).collect::<Vec<_>>(), "filter is idempotent");
    println!(
        "criterion 09 (duplicate HFER column removed, kept {:?}, idempotent): PASS",
        kept_dup
    );
}

#[test]
fn criterion_10_poisson_moments() {
    let cube = HsiCube::new(100, 100, 100, vec![0.5; 1_000_000]).unwrap();
    let out = poisson_noise(&cube, 10.0, 0xB0B).unwrap();
    let n = out.data().len() as f64;
    let mean = out.data().iter().sum::<f64>() / n;
    let var = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert!((mean - 0.5).abs() < 0.003, "mean {mean}");
    assert!((var - 0.05).abs() < 0.002, "variance {var}");
    println!("criterion 10 (Poisson moments over 1e6 voxels: mean {mean:.5}, var {var:.5}): PASS");
}
