//! Acceptance gate for the laboratory: twelve property-level checks, one
//! test per criterion, covering the forward solver, kernel synthesis, patch
//! localization, the hand-rolled FNO gradients, desk-scale learning, noise
//! robustness, forward continuity, law fitting, and noise statistics.
//!
//! Each test prints one `ACCEPTANCE NN PASS — …` line with the measured
//! margins; a failed assertion carries the same numbers. Expensive fixtures
//! are shared: the desk dataset (shape family, 200/50/50 at 32², J=16,
//! R=32) is generated once into a checksum-verified cache directory under
//! the system temp dir and reused across invocations, while trained runs
//! live in a per-process directory so every invocation trains from scratch.
//!
//! Run with `-- --nocapture` to see the margin lines for passing tests.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use eit_core::boundary::{kernel_from_matrix, KernelGrid, NtDMatrix};
use eit_core::conductivity::{phantom, ConductivityField, Family, PhantomKind, SHAPE_RADIUS};
use eit_core::dataset::{self, DatasetConfig, DatasetManifest, Distribution, Split};
use eit_core::fno::net::{backward, fno_forward_tape, relative_l1_loss};
use eit_core::fno::{
    evaluate_with, train, FNOConfig, FNOParams, Sample, Standardizer, TrainConfig, VecSource,
};
use eit_core::forward::{
    assemble_ntd, homogeneous_field, radial_ntd_oracle, radial_two_phase, NeumannSolver,
};
use eit_core::mesh::build_mesh;
use eit_core::grid::SquareField;
use eit_core::metrics::{fit_law, FitKind};
use eit_core::noise::{coefficient_sum, sample_noise_field, NoiseLaw, NoiseSpec};
use eit_core::patches::{build_atlas, global_to_local, local_to_global, Atlas};
use eit_core::pipeline::{run_eval, run_training, RunConfig, RunRecord};
use rand::Rng;

fn pass(criterion: usize, start: Instant, detail: &str) {
    println!(
        "ACCEPTANCE {criterion:02} PASS — {detail} ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Shared fixtures.
// ---------------------------------------------------------------------------

/// Desk dataset: shape family, 200 train / 50 valid / 50 test, 32² images,
/// J = 16 boundary modes, R = 32 mesh. Generated into a stable cache
/// directory; `generate_dataset` verifies checksums and regenerates anything
/// missing or stale, so reuse across invocations cannot serve corrupt data.
fn desk_dataset() -> &'static (PathBuf, DatasetManifest) {
    static DS: OnceLock<(PathBuf, DatasetManifest)> = OnceLock::new();
    DS.get_or_init(|| {
        let dir = std::env::temp_dir().join("eit-acceptance-cache").join("desk-shape-v1");
        std::fs::create_dir_all(&dir).expect("create dataset cache dir");
        let config = DatasetConfig {
            distribution: Distribution::Shape,
            train: 200,
            valid: 50,
            test: 50,
            grid_n: 32,
            modes_j: 16,
            mesh_rings: 32,
            seed: 0,
        };
        let manifest = dataset::generate_dataset(&config, &dir).expect("generate desk dataset");
        (dir, manifest)
    })
}

/// Root for trained runs, keyed by this test binary's size and mtime: a
/// rebuilt binary always trains from scratch (runs never outlive the code
/// that produced them), while a re-invocation of the same binary resumes
/// its own finished runs instead of repeating half an hour of training.
fn runs_root() -> &'static PathBuf {
    static ROOT: OnceLock<PathBuf> = OnceLock::new();
    ROOT.get_or_init(|| {
        let fingerprint = std::env::current_exe()
            .and_then(|exe| {
                let meta = std::fs::metadata(&exe)?;
                let mtime = meta
                    .modified()?
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_nanos())
                    .unwrap_or(0);
                Ok(format!("{:x}-{:x}", meta.len(), mtime))
            })
            .unwrap_or_else(|_| format!("pid{}", std::process::id()));
        let dir = std::env::temp_dir().join(format!("eit-acceptance-runs-{fingerprint}"));
        std::fs::create_dir_all(&dir).expect("create runs root");
        dir
    })
}

/// Train (once per process) and evaluate a desk run with matched train/test
/// noise level `delta` and optimizer seed `seed`; memoized so the clean run
/// is shared between the learning-signal and noise-robustness criteria.
fn desk_run(delta: f64, seed: u64) -> RunRecord {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), RunRecord>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = ((delta * 1000.0).round() as u64, seed);
    let mut map = cache.lock().expect("run cache lock");
    if let Some(record) = map.get(&key) {
        return record.clone();
    }
    let (dir, _) = desk_dataset();
    let out = runs_root().join(format!("desk_d{:04}_s{}", key.0, key.1));
    let mut cfg =
        RunConfig::desk(dir.to_string_lossy().into_owned(), out.to_string_lossy().into_owned());
    cfg.delta_train = delta;
    cfg.delta_test = delta;
    cfg.train.seed = seed;
    let report = run_training(&cfg, None).expect("desk training");
    assert!(
        report.diverged_at.is_none(),
        "desk run δ={delta} seed={seed} diverged at epoch {:?}",
        report.diverged_at
    );
    let eval = run_eval(&cfg).expect("desk evaluation");
    map.insert(key, eval.record.clone());
    eval.record
}

// ---------------------------------------------------------------------------
// 1. Homogeneous NtD spectrum: diagonal 1/|j|, clean off-diagonals, and
//    first-order (≥ 2×) error reduction under mesh refinement.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_homogeneous_ntd_spectrum() {
    let start = Instant::now();
    let gamma = homogeneous_field(64);
    let worst = |rings: usize| -> (f64, f64) {
        let mesh = build_mesh(rings).expect("mesh");
        let solver = NeumannSolver::new(mesh, &gamma);
        let assembly = assemble_ntd(&solver, 8).expect("assemble");
        let set = assembly.matrix.index_set();
        let mut diag = 0.0f64;
        let mut off = 0.0f64;
        for j in set.iter() {
            let expected = 1.0 / j.abs() as f64;
            let entry = assembly.matrix.get(j, j).re;
            diag = diag.max((entry - expected).abs() / expected);
            for k in set.iter() {
                if k != j {
                    off = off.max(assembly.matrix.get(j, k).norm());
                }
            }
        }
        (diag, off)
    };

    let (diag32, off32) = worst(32);
    assert!(diag32 <= 0.02, "R=32 worst diagonal error {diag32:.4} > 2%");
    assert!(off32 <= 1e-2, "R=32 worst off-diagonal {off32:.2e} > 1e-2");

    let (diag64, _) = worst(64);
    let gain = diag32 / diag64;
    assert!(
        gain >= 2.0,
        "refinement R=32→64 reduced worst diagonal error only {gain:.2}× ({diag32:.2e} → {diag64:.2e})"
    );

    pass(
        1,
        start,
        &format!(
            "diag err {:.3}% (≤2%), off-diag {:.1e} (≤1e-2), refinement gain {:.1}× (≥2×)",
            100.0 * diag32,
            off32,
            gain
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Radial two-phase inclusion against the closed-form NtD diagonal; FEM
//    entries ordered in the contrast the same way the closed form orders
//    them (the diagonal decreases as the inclusion becomes more conductive).
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_radial_inclusion_oracle() {
    let start = Instant::now();
    let rho = 0.5;
    let contrasts = [0.5, 2.0, 5.0];
    let mesh = build_mesh(32).expect("mesh");

    // fem[ci][m-1] = averaged diagonal entry for mode m at contrast ci. The
    // ±m diagonal entries are equal in exact arithmetic for radial fields;
    // averaging them cancels the antisymmetric half of the mesh error.
    let mut fem = vec![vec![0.0f64; 8]; contrasts.len()];
    let mut worst_rel = 0.0f64;
    for (ci, &c) in contrasts.iter().enumerate() {
        let gamma = radial_two_phase(c, rho, 256);
        let solver = NeumannSolver::new(mesh.clone(), &gamma);
        let assembly = assemble_ntd(&solver, 8).expect("assemble");
        let set = assembly.matrix.index_set();
        for m in 1..=8i64 {
            // The index set is asymmetric at the top mode (+8 has no −8
            // partner in J_16); average the ±m diagonal entries when both
            // exist — they agree in exact arithmetic for radial fields.
            let value = if set.contains(-m) {
                0.5 * (assembly.matrix.get(m, m).re + assembly.matrix.get(-m, -m).re)
            } else {
                assembly.matrix.get(m, m).re
            };
            let oracle = radial_ntd_oracle(c, rho, m as usize).expect("oracle");
            let rel = (value - oracle).abs() / oracle;
            worst_rel = worst_rel.max(rel);
            assert!(
                rel <= 0.05,
                "c={c}, mode {m}: FEM {value:.6} vs oracle {oracle:.6} (rel {rel:.3})"
            );
            fem[ci][(m - 1) as usize] = value;
        }
    }

    // The closed form is strictly decreasing in c at every mode; the FEM
    // entries must come out in the same order.
    for m in 0..8 {
        for ci in 0..contrasts.len() - 1 {
            let (lo_c, hi_c) = (contrasts[ci], contrasts[ci + 1]);
            let oracle_lo = radial_ntd_oracle(lo_c, rho, m + 1).unwrap();
            let oracle_hi = radial_ntd_oracle(hi_c, rho, m + 1).unwrap();
            assert!(oracle_lo > oracle_hi, "oracle ordering broke at mode {}", m + 1);
            assert!(
                fem[ci][m] > fem[ci + 1][m],
                "mode {}: FEM not decreasing in contrast ({} at c={lo_c} vs {} at c={hi_c})",
                m + 1,
                fem[ci][m],
                fem[ci + 1][m]
            );
        }
    }

    pass(
        2,
        start,
        &format!("worst rel err {:.2}% (≤5%) over modes 1..8, contrast ordering matches", 100.0 * worst_rel),
    );
}

// ---------------------------------------------------------------------------
// 3. Kernel synthesis identity: the diag(1/|j|) matrix over |j| ≤ 128 must
//    synthesize to the log-sine kernel −(1/π)·log(2|sin((θ−θ′)/2)|) away
//    from the diagonal, with the known value −log(2)/π at distance π.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_log_sine_kernel_identity() {
    let start = Instant::now();
    let n = 256;
    let matrix = NtDMatrix::diag_inverse_abs(n).expect("analytic matrix");
    let synthesis = kernel_from_matrix(&matrix);
    let kernel = &synthesis.kernel;

    let closed_form = |d: f64| -(1.0 / PI) * (2.0 * (d / 2.0).sin().abs()).ln();
    let mut max_err = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut d = (kernel.theta(a) - kernel.theta(b)).rem_euclid(TAU);
            if d > PI {
                d = TAU - d;
            }
            if d >= PI / 4.0 {
                max_err = max_err.max((kernel.at(a, b) - closed_form(d)).abs());
            }
        }
    }
    assert!(max_err <= 0.01, "max error {max_err:.4} > 0.01 on |θ−θ′| ≥ π/4");

    let at_pi = kernel.at(n / 2, 0);
    let expected_pi = -(2.0f64.ln()) / PI;
    let pi_err = (at_pi - expected_pi).abs();
    assert!(
        pi_err <= 0.01,
        "kernel at distance π is {at_pi:.5}, expected {expected_pi:.5} (err {pi_err:.2e})"
    );

    pass(
        3,
        start,
        &format!(
            "max err {max_err:.4} (≤0.01) on |θ−θ′|≥π/4, value at π {at_pi:.5} vs −log2/π = {expected_pi:.5}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Symmetry and reality across every conductivity family and phantom:
//    Hermitian residual of the assembled NtD ≤ 1e-2 relative and the
//    synthesized kernels carry essentially no imaginary part.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_hermitian_and_reality_residuals() {
    let start = Instant::now();
    let mut fields: Vec<(String, ConductivityField)> = vec![
        ("homogeneous".into(), homogeneous_field(64)),
        ("radial c=2".into(), radial_two_phase(2.0, 0.5, 128)),
        ("phantom realistic".into(), phantom(PhantomKind::Realistic, 64)),
        ("phantom shape_contrast".into(), phantom(PhantomKind::ShapeContrast, 64)),
    ];
    for family in Family::ALL {
        for seed in [11u64, 12] {
            fields.push((format!("{} seed {seed}", family.name()), family.sample(seed, 64)));
        }
    }

    let mesh = build_mesh(16).expect("mesh");
    let mut worst_hermitian = 0.0f64;
    let mut worst_imag = 0.0f64;
    for (name, gamma) in &fields {
        let solver = NeumannSolver::new(mesh.clone(), gamma);
        let assembly = assemble_ntd(&solver, 8).expect("assemble");
        assert!(
            assembly.hermitian_residual <= 1e-2,
            "{name}: Hermitian residual {:.2e} > 1e-2",
            assembly.hermitian_residual
        );
        let synthesis = kernel_from_matrix(&assembly.matrix);
        assert!(
            synthesis.imag_residue <= 1e-12,
            "{name}: kernel imaginary residue {:.2e} > 1e-12",
            synthesis.imag_residue
        );
        worst_hermitian = worst_hermitian.max(assembly.hermitian_residual);
        worst_imag = worst_imag.max(synthesis.imag_residue);
    }

    pass(
        4,
        start,
        &format!(
            "{} matrices: worst Hermitian residual {worst_hermitian:.1e} (≤1e-2), worst imag residue {worst_imag:.1e} (≤1e-12)",
            fields.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Patch localization is a left inverse: ‖L(G(h)) − h‖₂/‖h‖₂ ≤ 1e-3 for
//    trigonometric polynomials of degree ≤ 8 on 256², with the error
//    dropping at least 2× when the grid doubles.
// ---------------------------------------------------------------------------

/// Random trigonometric polynomial of degree ≤ `deg` in each variable.
fn trig_poly(n: usize, deg: usize, seed: u64) -> KernelGrid {
    let mut rng = eit_core::seeds::stream(seed);
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..=deg)
        .flat_map(|p| (0..=deg).map(move |q| (p, q)))
        .map(|(p, q)| {
            (
                p as f64,
                q as f64,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() * TAU,
                rng.gen::<f64>() * TAU,
            )
        })
        .collect();
    let mut grid = KernelGrid::zeros(n);
    for i in 0..n {
        let theta = TAU * i as f64 / n as f64;
        for ip in 0..n {
            let theta_p = TAU * ip as f64 / n as f64;
            grid.values[i * n + ip] = terms
                .iter()
                .map(|&(p, q, amp, d, e)| amp * (p * theta + d).cos() * (q * theta_p + e).cos())
                .sum();
        }
    }
    grid
}

fn round_trip_error(h: &KernelGrid, atlas: &Atlas) -> f64 {
    let stack = global_to_local(h, atlas, h.n).expect("localize");
    let back = local_to_global(&stack, atlas, h.n).expect("globalize");
    let diff: f64 =
        h.values.iter().zip(&back.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / h.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn acceptance_05_patch_round_trip_left_inverse() {
    let start = Instant::now();
    let atlas = build_atlas(2, 0.2).expect("atlas");
    let mut worst_fine = 0.0f64;
    let mut worst_gain = f64::INFINITY;
    for seed in [7u64, 19, 23] {
        let fine = round_trip_error(&trig_poly(256, 8, seed), &atlas);
        let coarse = round_trip_error(&trig_poly(128, 8, seed), &atlas);
        assert!(fine <= 1e-3, "seed {seed}: round-trip error {fine:.2e} > 1e-3 at 256²");
        let gain = coarse / fine;
        assert!(
            gain >= 2.0,
            "seed {seed}: grid doubling reduced error only {gain:.2}× ({coarse:.2e} → {fine:.2e})"
        );
        worst_fine = worst_fine.max(fine);
        worst_gain = worst_gain.min(gain);
    }

    pass(
        5,
        start,
        &format!("worst 256² error {worst_fine:.1e} (≤1e-3), worst doubling gain {worst_gain:.1}× (≥2×)"),
    );
}

// ---------------------------------------------------------------------------
// 6. FNO gradient fidelity: double-precision central differences across
//    every tensor at two small configurations, relative error ≤ 1e-4.
// ---------------------------------------------------------------------------

fn fd_batch(n: usize, seed: u64, count: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    // Smooth band-limited inputs; targets held away from the prediction so
    // the L¹ sign and ReLU gates stay stable under the probes.
    let mut rng = eit_core::seeds::stream(seed);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..count {
        let a: f64 = rng.gen::<f64>() - 0.5;
        let b: f64 = rng.gen::<f64>() - 0.5;
        let c: f64 = rng.gen::<f64>() - 0.5;
        let input: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (x, y) = (idx / n, idx % n);
                let tx = TAU * x as f64 / n as f64;
                let ty = TAU * y as f64 / n as f64;
                a * tx.cos() + b * (2.0 * ty).sin() + c * (tx + ty).cos()
            })
            .collect();
        let target: Vec<f64> =
            (0..n * n).map(|idx| 1.5 + 0.2 * ((idx % 11) as f64 / 11.0)).collect();
        inputs.push(input);
        targets.push(target);
    }
    (inputs, targets)
}

fn batch_loss(
    params: &FNOParams<f64>,
    config: &FNOConfig,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    n: usize,
) -> f64 {
    let b = inputs.len() as f64;
    inputs
        .iter()
        .zip(targets)
        .map(|(inp, tgt)| {
            let (out, tape) = fno_forward_tape(params, config, inp, n).expect("forward");
            relative_l1_loss(&out, tgt, tape.mask(), n).0
        })
        .sum::<f64>()
        / b
}

/// Returns (probe count, worst relative error) for one configuration.
fn fd_check(config: &FNOConfig, n: usize, seed: u64) -> (usize, f64) {
    let params = FNOParams::<f64>::init(config, seed);
    let (inputs, targets) = fd_batch(n, seed.wrapping_add(13), 2);

    let mut grads = FNOParams::<f64>::zeros(config);
    let b = inputs.len() as f64;
    for (inp, tgt) in inputs.iter().zip(&targets) {
        let (out, tape) = fno_forward_tape(&params, config, inp, n).expect("forward");
        let (_, mut dout) = relative_l1_loss(&out, tgt, tape.mask(), n);
        for g in dout.iter_mut() {
            *g /= b;
        }
        backward(&params, config, &tape, &dout, &mut grads);
    }

    let mut rng = eit_core::seeds::stream(seed.wrapping_add(31));
    let mut probes: Vec<(usize, usize)> = Vec::new();
    for (t, tensor) in params.tensors().iter().enumerate() {
        for _ in 0..3 {
            probes.push((t, rng.gen_range(0..tensor.len())));
        }
    }
    probes.dedup();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for &(t, idx) in &probes {
        let mut plus = params.clone();
        plus.tensors_mut()[t][idx] += h;
        let mut minus = params.clone();
        minus.tensors_mut()[t][idx] -= h;
        let fd = (batch_loss(&plus, config, &inputs, &targets, n)
            - batch_loss(&minus, config, &inputs, &targets, n))
            / (2.0 * h);
        let an = grads.tensors()[t][idx];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
        worst = worst.max(rel);
        assert!(
            rel <= 1e-4,
            "tensor {t} index {idx}: analytic {an:.6e} vs central difference {fd:.6e} (rel {rel:.2e})"
        );
    }
    (probes.len(), worst)
}

#[test]
fn acceptance_06_fno_gradient_fidelity() {
    let start = Instant::now();
    let small = FNOConfig { layers: 2, modes: 2, width: 4, mlp_width: 8, ..FNOConfig::default() };
    let wider = FNOConfig { modes: 4, width: 8, ..small };

    let (count_a, worst_a) = fd_check(&small, 16, 901);
    let (count_b, worst_b) = fd_check(&wider, 16, 902);
    let total = count_a + count_b;
    assert!(total >= 25, "only {total} finite-difference probes");

    pass(
        6,
        start,
        &format!(
            "{total} probes over two configs, worst rel err {:.1e} (≤1e-4)",
            worst_a.max(worst_b)
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Optimization capacity: the stock network overfits 8 shape samples at
//    32² to train rel-L¹ ≤ 0.05 within 500 full-batch steps.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_overfit_smoke() {
    let start = Instant::now();
    let (dir, manifest) = desk_dataset();
    let count = 8;
    let kernels: Vec<KernelGrid> = (0..count)
        .map(|i| dataset::load_kernel(dir, manifest, Split::Train, i).expect("kernel"))
        .collect();
    let gammas: Vec<SquareField> = (0..count)
        .map(|i| dataset::load_gamma(dir, manifest, Split::Train, i).expect("gamma"))
        .collect();

    let standardizer = Standardizer::fit(&kernels).expect("standardizer");
    let n = manifest.config.grid_n;
    let samples: Vec<Sample<f32>> = kernels
        .iter()
        .zip(&gammas)
        .map(|(kernel, gamma)| Sample {
            n,
            input: standardizer.apply(kernel),
            target: gamma.values.iter().map(|&v| v as f32).collect(),
        })
        .collect();

    // Full-batch: 8 samples per step, 500 epochs of one step each. The
    // validation set is a single sample — best-epoch selection is unused
    // here; only the training loss matters.
    let valid = VecSource(vec![samples[0].clone()]);
    let train_src = VecSource(samples);
    let tc = TrainConfig {
        epochs: 500,
        batch_size: count,
        lr: 8e-3,
        weight_decay: 0.0,
        seed: 7,
    };
    let out = train::<f32>(&FNOConfig::default(), &train_src, &valid, &tc).expect("train");
    assert!(out.diverged_at.is_none(), "overfit run diverged at {:?}", out.diverged_at);

    let best = out.history.iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min);
    assert!(best <= 0.05, "best train rel-L¹ {best:.4} > 0.05 after 500 steps");

    pass(7, start, &format!("train rel-L¹ reached {best:.4} (≤0.05) in 500 steps"));
}

// ---------------------------------------------------------------------------
// 8. Desk-scale learning signal: 200 train / 50 test at 32², J=16, 30
//    epochs, clean data — the trained model beats the constant-background
//    predictor by ≥ 20% on mean test rel-L¹ and reaches mean Dice ≥ 0.5.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_desk_learning_signal() {
    let start = Instant::now();
    let record = desk_run(0.0, 0);

    // Constant-background predictor: γ ≡ 1 everywhere, scored with the same
    // masked metrics on the same clean test targets.
    let (dir, manifest) = desk_dataset();
    let n = manifest.config.grid_n;
    let samples: Vec<Sample<f64>> = (0..manifest.config.test)
        .map(|i| {
            let gamma = dataset::load_gamma(dir, manifest, Split::Test, i).expect("gamma");
            // The predictor ignores its input; zeros keep the shape honest.
            Sample { n, input: vec![0.0; n * n], target: gamma.values }
        })
        .collect();
    let baseline = evaluate_with(|s: &Sample<f64>| Ok(vec![1.0; s.n * s.n]), &VecSource(samples))
        .expect("baseline evaluation");

    assert!(
        record.rel_l1 <= 0.8 * baseline.mean_rel_l1,
        "trained rel-L¹ {:.4} not ≤ 0.8 × baseline {:.4}",
        record.rel_l1,
        baseline.mean_rel_l1
    );
    assert!(record.dice >= 0.5, "mean Dice {:.3} < 0.5", record.dice);

    pass(
        8,
        start,
        &format!(
            "rel-L¹ {:.4} vs baseline {:.4} (ratio {:.2} ≤ 0.8), Dice {:.3} (≥0.5)",
            record.rel_l1,
            baseline.mean_rel_l1,
            record.rel_l1 / baseline.mean_rel_l1,
            record.dice
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Noise robustness: with matched train/test noise δ ∈ {0, 0.03, 0.10}
//    and 3 optimizer seeds per level, the mean test error is nondecreasing
//    in δ within a two-standard-deviation band: a drop is a violation only
//    if it exceeds 2·√(σ_k² + σ_{k+1}²).
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_noise_robustness_trend() {
    let start = Instant::now();
    let deltas = [0.0, 0.03, 0.10];
    let seeds = [0u64, 1, 2];

    let mut means = Vec::new();
    let mut stds = Vec::new();
    for &delta in &deltas {
        let errs: Vec<f64> = seeds.iter().map(|&s| desk_run(delta, s).rel_l1).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var =
            errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() as f64 - 1.0);
        means.push(mean);
        stds.push(var.sqrt());
    }

    for k in 0..deltas.len() - 1 {
        let band = 2.0 * (stds[k].powi(2) + stds[k + 1].powi(2)).sqrt();
        assert!(
            means[k + 1] >= means[k] - band,
            "mean error dropped from {:.4} (δ={}) to {:.4} (δ={}), beyond the 2-std band {:.4}",
            means[k],
            deltas[k],
            means[k + 1],
            deltas[k + 1],
            band
        );
    }

    pass(
        9,
        start,
        &format!(
            "mean rel-L¹ {:.4}±{:.4} → {:.4}±{:.4} → {:.4}±{:.4} over δ = 0, 0.03, 0.10",
            means[0], stds[0], means[1], stds[1], means[2], stds[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Forward continuity: along γ_t = 1 + t(γ − 1) from the homogeneous
//     background to a shape sample, the kernel distance to the background
//     kernel decreases strictly to 0 as t ↓ 0.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_forward_continuity() {
    let start = Instant::now();
    let (dir, manifest) = desk_dataset();
    let gamma = dataset::load_gamma(dir, manifest, Split::Train, 0).expect("gamma");
    let n = manifest.config.grid_n;
    let mesh = build_mesh(manifest.config.mesh_rings).expect("mesh");

    let kappa_of = |field: &ConductivityField| -> KernelGrid {
        let solver = NeumannSolver::new(mesh.clone(), field);
        let assembly = assemble_ntd(&solver, manifest.config.modes_j).expect("assemble");
        kernel_from_matrix(&assembly.matrix).kernel
    };

    let kappa_hom = kappa_of(&homogeneous_field(n));
    let distance_at = |t: f64| -> f64 {
        let blended: Vec<f64> = gamma.values.iter().map(|&g| 1.0 + t * (g - 1.0)).collect();
        let field = ConductivityField::new(SquareField::new(n, blended), SHAPE_RADIUS);
        let kappa = kappa_of(&field);
        let diff: Vec<f64> =
            kappa.values.iter().zip(&kappa_hom.values).map(|(a, b)| a - b).collect();
        KernelGrid::new(kappa.n, diff).l2_norm()
    };

    let ts = [1.0, 0.5, 0.25, 0.125];
    let distances: Vec<f64> = ts.iter().map(|&t| distance_at(t)).collect();
    for k in 0..ts.len() - 1 {
        assert!(
            distances[k] > distances[k + 1],
            "kernel distance not strictly decreasing: d({}) = {:.3e}, d({}) = {:.3e}",
            ts[k],
            distances[k],
            ts[k + 1],
            distances[k + 1]
        );
    }
    assert!(distances[3] > 0.0, "kernel distance vanished at t = 0.125");

    // The decrease over the listed grid is shallow by nature: the inclusion
    // contrast along the path is c(t) = 1 + t(c−1) with c = 100, and the
    // kernel perturbation of an inclusion scales like (c−1)/(c+1), which is
    // nearly saturated for every listed t. The approach to zero shows up at
    // small t, where (c(t)−1)/(c(t)+1) ≈ 50t; one supplementary point deep
    // in that linear regime pins the limit.
    let small_t = 0.002;
    let d_small = distance_at(small_t);
    assert!(
        d_small > 0.0 && d_small <= 0.2 * distances[0],
        "d({small_t}) = {d_small:.3e} is not small against d(1) = {:.3e}; no decay to 0",
        distances[0]
    );

    pass(
        10,
        start,
        &format!(
            "‖κ_t − κ_1‖ = {:.3e} → {:.3e} → {:.3e} → {:.3e} over t = 1, ½, ¼, ⅛; d({small_t}) = {:.1e} = {:.3}·d(1)",
            distances[0],
            distances[1],
            distances[2],
            distances[3],
            d_small,
            d_small / distances[0]
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Law-fit recovery: with 8 log-spaced levels, 5% multiplicative noise,
//     ρ = 0.25 and offset 0.2, the power fit recovers ρ within ±15% and the
//     correct family wins on residual, each in ≥ 90 of 100 trials.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_11_law_fit_recovery() {
    let start = Instant::now();
    let points = 8;
    let (lo, hi) = (1e-5f64, 0.3f64);
    let xs: Vec<f64> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            10f64.powf(lo.log10() + f * (hi.log10() - lo.log10()))
        })
        .collect();

    let rho = 0.25;
    let offset = 0.2;
    let trials = 100;
    let mut rho_recovered = 0;
    let mut power_wins = 0;
    let mut log_wins = 0;
    fn noisy(clean: f64, rng: &mut impl Rng) -> f64 {
        clean * (1.0 + 0.05 * (2.0 * rng.gen::<f64>() - 1.0))
    }
    for trial in 0..trials {
        let mut rng = eit_core::seeds::stream(5000 + trial as u64);

        let ys_power: Vec<f64> =
            xs.iter().map(|&x| offset + noisy(x.powf(rho), &mut rng)).collect();
        let power_fit = fit_law(&xs, &ys_power, FitKind::Power).expect("power fit");
        let log_fit_on_power = fit_law(&xs, &ys_power, FitKind::Log).expect("log fit");
        if (power_fit.rho - rho).abs() <= 0.15 * rho {
            rho_recovered += 1;
        }
        if power_fit.residual < log_fit_on_power.residual {
            power_wins += 1;
        }

        let ys_log: Vec<f64> =
            xs.iter().map(|&x| offset + noisy((1.0 / x).ln().powf(-rho), &mut rng)).collect();
        let log_fit = fit_law(&xs, &ys_log, FitKind::Log).expect("log fit");
        let power_fit_on_log = fit_law(&xs, &ys_log, FitKind::Power).expect("power fit");
        if log_fit.residual < power_fit_on_log.residual {
            log_wins += 1;
        }
    }

    assert!(rho_recovered >= 90, "ρ within ±15% in only {rho_recovered}/100 trials");
    assert!(power_wins >= 90, "power law won residual in only {power_wins}/100 trials");
    assert!(log_wins >= 90, "log law won residual in only {log_wins}/100 trials");

    pass(
        11,
        start,
        &format!(
            "ρ recovered {rho_recovered}/100, power family won {power_wins}/100, log family won {log_wins}/100 (all ≥90)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 12. Noise-field statistics: the empirical energy E‖ξ‖² over 200 seeds
//     matches the truncated coefficient sum within 10% for both laws, and
//     the bounded law respects its almost-sure norm bound √(3·Σc).
// ---------------------------------------------------------------------------

#[test]
fn acceptance_12_noise_field_statistics() {
    let start = Instant::now();
    let n = 32;
    let seeds = 200;

    let mut details = Vec::new();
    for law in [NoiseLaw::Gaussian, NoiseLaw::UniformBounded] {
        let spec = NoiseSpec::new(1.0, law, n).expect("spec");
        let expected = coefficient_sum(&spec);
        let mean_energy: f64 = (0..seeds)
            .map(|seed| sample_noise_field(&spec, 7000 + seed).l2_norm().powi(2))
            .sum::<f64>()
            / seeds as f64;
        let rel = (mean_energy - expected).abs() / expected;
        assert!(
            rel <= 0.10,
            "{}: empirical E‖ξ‖² = {mean_energy:.4e} vs coefficient sum {expected:.4e} (rel {rel:.3})",
            law.name()
        );
        details.push(format!("{} energy within {:.1}%", law.name(), 100.0 * rel));
    }

    let spec = NoiseSpec::new(1.0, NoiseLaw::UniformBounded, n).expect("spec");
    let bound = (3.0 * coefficient_sum(&spec)).sqrt();
    let mut worst_ratio = 0.0f64;
    for seed in 0..seeds {
        let norm = sample_noise_field(&spec, 7000 + seed).l2_norm();
        assert!(norm <= bound, "seed {seed}: ‖ξ‖ = {norm:.4e} exceeds a.s. bound {bound:.4e}");
        worst_ratio = worst_ratio.max(norm / bound);
    }

    pass(
        12,
        start,
        &format!(
            "{}; bounded-law max ‖ξ‖ at {:.0}% of the a.s. bound over {seeds} seeds",
            details.join(", "),
            100.0 * worst_ratio
        ),
    );
}
