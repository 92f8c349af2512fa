//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use tvrestore::imaging::{decode_image, encode_pgm, encode_png, evaluate_patches, DEFAULT_PATCH, DEFAULT_SIGMA};
use tvrestore::optics::REFERENCE_NOISE_POWERS;
use tvrestore::Algorithm::{Admm, Pds};
use tvrestore::{
    admm_tv, admm_tv_noisy, beam_splitter_combine, degrade, depatchify, load_image, patchify, pds_tv, pds_tv_noisy,
    prox_group_l12, prox_numeric_oracle, psnr, restore_image, AmplifierNoiseModel, ComplexAmplitude,
    DifferenceOperator, GridShape, GroupedVector, ImageTensor, Method, Observation, SolverConfig, SsimMode,
    TvProblem,
};

use common::{data_dir, dense_difference, random_vec, rng, tv_denoise_oracle};

const TABLE_REL_TOL: f64 = 0.01;
const SPLITTER_TOL: f64 = 1e-12;
const PROX_TOL: f64 = 1e-4;
const OPERATOR_TOL: f64 = 1e-12;
const OBJECTIVE_TOL: f64 = 1e-6;
const AGREEMENT_REL_TOL: f64 = 1e-3;
const MIN_UPLIFT_DB: f64 = 2.0;
const OBSERVED_PSNR_RANGE: (f64, f64) = (27.8, 28.5);
const ADMM_NOISE_GAP_DB: f64 = 1.0;
const PDS_NOISE_GAP_DB: f64 = 2.5;
const SEEDS: u64 = 20;
const TEST_IMAGE: &str = "camera256.pgm";
const OTHER_IMAGES: [&str; 2] = ["brick256.pgm", "coins256.pgm"];
const OBSERVATION_SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_noise_table() -> Outcome {
    let m = AmplifierNoiseModel::default();
    let worst = REFERENCE_NOISE_POWERS
        .iter()
        .map(|&(g, want)| ((m.ase_noise_power(g).unwrap() - want) / want).abs())
        .fold(0.0, f64::max);
    outcome(worst < TABLE_REL_TOL, format!("max relative error {:.3}% (tol 1%)", 100.0 * worst))
}

fn c2_beam_splitter() -> Outcome {
    let mut r = rng(2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a = ComplexAmplitude::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0));
        let b = ComplexAmplitude::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0));
        let (o1, o2) = beam_splitter_combine(a, b);
        let e1 = (o1.re - (a.re + b.re) * s).abs().max((o1.im - (a.im + b.im) * s).abs());
        let e2 = (o2.re - (a.re - b.re) * s).abs().max((o2.im - (a.im - b.im) * s).abs());
        let pin = a.power() + b.power();
        let ep = (o1.power() + o2.power() - pin).abs() / pin.max(1.0);
        worst = worst.max(e1).max(e2).max(ep);
    }
    outcome(worst <= SPLITTER_TOL, format!("10000 pairs, max error {worst:.2e} (tol 1e-12)"))
}

fn c3_prox_oracle() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        let tau = r.random_range(0.05..2.0);
        let got = prox_group_l12(&GroupedVector::new(z.to_vec()).unwrap(), tau).unwrap();
        let want = prox_numeric_oracle(|u| u[0].hypot(u[1]), tau, &z).unwrap();
        for (a, b) in got.as_slice().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < PROX_TOL, format!("100 groups, max deviation {worst:.2e} (tol 1e-4)"))
}

fn c4_operator() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for n1 in 2..=4 {
        for n2 in 2..=4 {
            let d = dense_difference(n1, n2);
            let dt = d.transpose();
            let op = DifferenceOperator::new(GridShape::new(n1, n2).unwrap());
            let n = n1 * n2;
            for _ in 0..5 {
                let x = random_vec(&mut r, n);
                let z = random_vec(&mut r, 2 * n);
                let want = &d * DVector::from_column_slice(&x);
                for (a, b) in op.apply(&x).unwrap().iter().zip(want.iter()) {
                    worst = worst.max((a - b).abs());
                }
                let want = &dt * DVector::from_column_slice(&z);
                for (a, b) in op.apply_t(&z).unwrap().iter().zip(want.iter()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let mut adj: f64 = 0.0;
    for k in 0..100 {
        let op = DifferenceOperator::new(GridShape::new(2 + k % 3, 2 + (k / 3) % 3).unwrap());
        let x = random_vec(&mut r, op.dim());
        let z = random_vec(&mut r, 2 * op.dim());
        let lhs: f64 = op.apply(&x).unwrap().iter().zip(&z).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(op.apply_t(&z).unwrap()).map(|(a, b)| a * b).sum();
        adj = adj.max((lhs - rhs).abs());
    }
    outcome(
        worst <= OPERATOR_TOL && adj <= OPERATOR_TOL,
        format!("dense mismatch {worst:.2e}, adjoint gap {adj:.2e} (tol 1e-12)"),
    )
}

fn c5_optimality() -> Outcome {
    let lambda = 0.03;
    let a = Observation::Identity;
    let op = DifferenceOperator::new(GridShape::new(4, 4).unwrap());
    let d = dense_difference(4, 4);
    let rows: Vec<(f64, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = random_vec(&mut rng(500 + k), 16).iter().map(|v| 0.5 + 0.4 * v).collect();
            let xo = tv_denoise_oracle(&y, 4, 4, lambda, 100_000);
            let fo = common::objective(&xo, &y, &d, lambda);
            let p = TvProblem::new(&y, &a, op).unwrap();
            let admm = admm_tv(&p, &SolverConfig { lambda, gamma: 10.0, iterations: 500, ..Default::default() }, None, None)
                .unwrap();
            let pds = pds_tv(
                &p,
                &SolverConfig { lambda, gamma1: 0.1, gamma2: 1.0, iterations: 2000, ..Default::default() },
                None,
                None,
            )
            .unwrap();
            let ea = (p.objective(&admm.x, lambda).unwrap() - fo).abs();
            let ep = (p.objective(&pds.x, lambda).unwrap() - fo).abs();
            let num: f64 = admm.x.iter().zip(&pds.x).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let den: f64 = pds.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            (ea, ep, num / den)
        })
        .collect();
    let ea = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let ep = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let rel = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    outcome(
        ea < OBJECTIVE_TOL && ep < OBJECTIVE_TOL && rel < AGREEMENT_REL_TOL,
        format!("20 instances: ADMM gap {ea:.2e}, PDS gap {ep:.2e} (tol 1e-6), x disagreement {rel:.2e} (tol 1e-3)"),
    )
}

fn c6_degeneracy(truth: &ImageTensor) -> Outcome {
    let patch = &patchify(truth, DEFAULT_PATCH).unwrap().patches()[37].clone();
    let y = degrade(patch, DEFAULT_SIGMA, 6).unwrap();
    let a = Observation::Identity;
    let p = TvProblem::new(y.as_slice(), &a, DifferenceOperator::new(patch.shape())).unwrap();
    let silent = AmplifierNoiseModel::default().with_sim_scale(0.0);
    let mut ok = true;
    for gamma in [0.5, 10.0] {
        let clean = SolverConfig { gamma, ..Default::default() };
        let noisy = SolverConfig { noise_enabled: true, noise_model: silent, seed: 6, ..clean };
        ok &= admm_tv(&p, &clean, None, None).unwrap().x == admm_tv_noisy(&p, &noisy, None, None).unwrap().x;
    }
    for gamma2 in [1.0, 5.0] {
        let clean = SolverConfig { gamma2, ..Default::default() };
        let noisy = SolverConfig { noise_enabled: true, noise_model: silent, seed: 6, ..clean };
        ok &= pds_tv(&p, &clean, None, None).unwrap().x == pds_tv_noisy(&p, &noisy, None, None).unwrap().x;
    }
    outcome(ok, "ADMM at gamma 0.5, 10 and PDS at gamma2 1, 5 bit-identical with sim_scale=0".into())
}

fn c7_uplift(truth: &ImageTensor, observed: &ImageTensor) -> Outcome {
    let obs = psnr(truth.as_slice(), observed.as_slice(), 1.0).unwrap().db().unwrap();
    let obs_patch = evaluate_patches(truth, observed, DEFAULT_PATCH, SsimMode::Windowed).unwrap();
    let cfg = SolverConfig { gamma: 10.0, lambda: 0.03, iterations: 50, ..Default::default() };
    let out = restore_image(observed, Method::new(Admm, false), &cfg, DEFAULT_PATCH, None).unwrap();
    let rest = evaluate_patches(truth, &out.image, DEFAULT_PATCH, SsimMode::Windowed).unwrap();
    let gain = rest.mean_psnr.unwrap() - obs_patch.mean_psnr.unwrap();
    let in_range = (OBSERVED_PSNR_RANGE.0..=OBSERVED_PSNR_RANGE.1).contains(&obs);
    outcome(
        gain >= MIN_UPLIFT_DB && in_range,
        format!(
            "observed {obs:.2} dB (range 27.8..28.5), per-patch mean {:.2} -> {:.2} dB, gain {gain:.2} dB (min 2)",
            obs_patch.mean_psnr.unwrap(),
            rest.mean_psnr.unwrap()
        ),
    )
}

/// Mean per-patch final PSNR, averaged over amplifier-noise seeds.
struct Sweep<'a> {
    truth: &'a ImageTensor,
    observed: &'a ImageTensor,
    cache: HashMap<String, f64>,
}

impl Sweep<'_> {
    fn final_psnr(&mut self, method: Method, cfg: SolverConfig) -> f64 {
        let key = format!("{} {} {} {}", method.label(), cfg.gamma, cfg.gamma1, cfg.gamma2);
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let seeds = if method.noisy { SEEDS } else { 1 };
        let total: f64 = (0..seeds)
            .map(|s| {
                let cfg = SolverConfig { seed: s, ..cfg };
                let out = restore_image(self.observed, method, &cfg, DEFAULT_PATCH, None).unwrap();
                evaluate_patches(self.truth, &out.image, DEFAULT_PATCH, SsimMode::Windowed).unwrap().mean_psnr.unwrap()
            })
            .sum();
        let v = total / seeds as f64;
        self.cache.insert(key, v);
        v
    }
}

fn admm_cfg(gamma: f64) -> SolverConfig {
    SolverConfig { gamma, ..Default::default() }
}

fn pds_cfg(gamma2: f64) -> SolverConfig {
    SolverConfig { gamma1: 0.1, gamma2, ..Default::default() }
}

fn c8_noise_gap(sw: &mut Sweep<'_>) -> Outcome {
    let admm_clean = sw.final_psnr(Method::new(Admm, false), admm_cfg(10.0));
    let admm_noisy = sw.final_psnr(Method::new(Admm, true), admm_cfg(10.0));
    let pds_clean = sw.final_psnr(Method::new(Pds, false), pds_cfg(1.0));
    let pds_noisy = sw.final_psnr(Method::new(Pds, true), pds_cfg(5.0));
    let ga = admm_clean - admm_noisy;
    let gp = pds_clean - pds_noisy;
    let mut detail = format!(
        "ADMM {admm_clean:.2} -> {admm_noisy:.2} dB (gap {ga:.2}, tol 1.0); \
         PDS {pds_clean:.2} -> {pds_noisy:.2} dB (gap {gp:.2}, tol 2.5); {SEEDS} seeds"
    );
    // Informational only: the same gaps on the other shipped images.
    for name in OTHER_IMAGES {
        let truth = load_image(data_dir().join(name)).unwrap();
        let observed = degrade(&truth, DEFAULT_SIGMA, OBSERVATION_SEED).unwrap();
        let mut other = Sweep { truth: &truth, observed: &observed, cache: HashMap::new() };
        let ga = other.final_psnr(Method::new(Admm, false), admm_cfg(10.0))
            - other.final_psnr(Method::new(Admm, true), admm_cfg(10.0));
        let gp = other.final_psnr(Method::new(Pds, false), pds_cfg(1.0))
            - other.final_psnr(Method::new(Pds, true), pds_cfg(5.0));
        detail.push_str(&format!("\n    note: {name}: ADMM gap {ga:.2} dB, PDS gap {gp:.2} dB"));
    }
    outcome(ga <= ADMM_NOISE_GAP_DB && gp <= PDS_NOISE_GAP_DB, detail)
}

fn argmax(v: &[(f64, f64)]) -> f64 {
    v.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b }).0
}

fn c9_ranking(sw: &mut Sweep<'_>) -> Outcome {
    let admm: Vec<(f64, f64)> = [0.1, 0.5, 1.0, 5.0, 10.0]
        .iter()
        .map(|&g| (g, sw.final_psnr(Method::new(Admm, true), admm_cfg(g))))
        .collect();
    let pds: Vec<(f64, f64)> =
        [0.5, 1.0, 5.0].iter().map(|&g| (g, sw.final_psnr(Method::new(Pds, true), pds_cfg(g)))).collect();
    let best_admm = argmax(&admm);
    let best_pds = argmax(&pds);
    let admm_top = admm.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let pds_top = pds.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let fmt = |v: &[(f64, f64)]| v.iter().map(|(g, p)| format!("{g}:{p:.2}")).collect::<Vec<_>>().join(" ");
    outcome(
        best_admm == 10.0 && best_pds == 5.0 && admm_top >= pds_top,
        format!(
            "noisy ADMM gamma [{}] best {best_admm}; noisy PDS gamma2 [{}] best {best_pds}; ADMM {admm_top:.2} vs PDS {pds_top:.2}",
            fmt(&admm),
            fmt(&pds)
        ),
    )
}

fn c10_pipeline(truth: &ImageTensor, observed: &ImageTensor) -> Outcome {
    let set = patchify(observed, DEFAULT_PATCH).unwrap();
    let patches_ok = depatchify(&set).unwrap() == *observed;
    let files_ok = decode_image(&encode_pgm(truth)).unwrap() == *truth
        && decode_image(&encode_png(truth).unwrap()).unwrap() == *truth
        && encode_pgm(truth) == std::fs::read(data_dir().join(TEST_IMAGE)).unwrap();
    let cfg = SolverConfig { seed: 10, ..Default::default() };
    let run = || {
        let out = restore_image(observed, Method::new(Pds, true), &cfg, DEFAULT_PATCH, None).unwrap();
        let bits: Vec<u8> = out.image.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        (bits, encode_pgm(&out.image))
    };
    let seeded_ok = run() == run();
    outcome(
        patches_ok && files_ok && seeded_ok,
        format!("patch round-trip {patches_ok}, file round-trip {files_ok}, seeded rerun identical {seeded_ok}"),
    )
}

fn main() -> ExitCode {
    let truth = load_image(data_dir().join(TEST_IMAGE)).expect("shipped test image");
    let observed = degrade(&truth, DEFAULT_SIGMA, OBSERVATION_SEED).unwrap();
    let mut sweep = Sweep { truth: &truth, observed: &observed, cache: HashMap::new() };

    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Sweep<'_>) -> Outcome + '_>)> = vec![
        ("noise model matches reference table", Box::new(|_| c1_noise_table())),
        ("beam splitter identities", Box::new(|_| c2_beam_splitter())),
        ("prox matches brute-force oracle", Box::new(|_| c3_prox_oracle())),
        ("difference operator matches dense matrices", Box::new(|_| c4_operator())),
        ("solvers reach oracle optimum", Box::new(|_| c5_optimality())),
        ("zero-noise degeneracy", Box::new(|_| c6_degeneracy(&truth))),
        ("denoising uplift", Box::new(|_| c7_uplift(&truth, &observed))),
        ("amplifier-noise degradation gap", Box::new(c8_noise_gap)),
        ("parameter ranking", Box::new(c9_ranking)),
        ("pipeline exactness", Box::new(|_| c10_pipeline(&truth, &observed))),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run(&mut sweep);
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {name} [{:.1}s]: {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
