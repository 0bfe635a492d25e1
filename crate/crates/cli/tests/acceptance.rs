//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs with `cargo test --test acceptance`.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use fockwise::circuit::{apply_circuit, mz_effective_reflectivity};
use fockwise::detection::{all_pattern_probabilities, pattern_probability};
use fockwise::distinguishability::build_state_from_gram;
use fockwise::experiments::{
    hom_scan, linspace, mode_overlap_for_visibility, mz_experiment, solve_intra_pair_overlap, three_photon_probability,
    three_photon_scan, three_photon_visibility,
};
use fockwise::{
    fit_dip, fit_mode_mismatch, v_ideal, Circuit, Complex64, DetectionPattern, FockState, ScanConfig, VisibilityPoint,
    WavepacketTemplate,
};
use nalgebra::DMatrix;
use oracle::Element;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn standard_template() -> WavepacketTemplate {
    WavepacketTemplate::new(804.0, 2.0)
}

fn standard_scan(eta: f64, seed: u64) -> ScanConfig {
    let t = standard_template();
    let span = 3.0 * t.coherence_time_s().unwrap();
    let mut cfg = ScanConfig::new(linspace(-span, span, 40), eta, t);
    cfg.rng_seed = seed;
    cfg
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn two_photon_bunching() -> Outcome {
    let run = || -> fockwise::Result<_> {
        let input = FockState::from_terms(2, 1, [(vec![1u8, 1], Complex64::new(1.0, 0.0))])?;
        let out = apply_circuit(&input, &Circuit::new(2)?.coupler(0, 1, 0.5)?)?;
        Ok(all_pattern_probabilities(&out))
    };
    let mut times = Vec::new();
    let mut probs = None;
    for _ in 0..21 {
        let t0 = Instant::now();
        probs = Some(run().map_err(err)?);
        times.push(t0.elapsed());
    }
    let probs = probs.unwrap();
    let expected = [(vec![2, 0], 0.5), (vec![1, 1], 0.0), (vec![0, 2], 0.5)];
    let dev = expected
        .iter()
        .map(|(p, v)| (probs[&DetectionPattern::new(p.clone())] - v).abs())
        .fold(0.0, f64::max);
    let t = median(times);
    ensure(
        dev <= 1e-12 && t < Duration::from_millis(1),
        format!("max deviation {dev:.1e}, median runtime {t:?}"),
    )
}

fn ideal_visibility_curve() -> Outcome {
    let v = v_ideal(0.5128).map_err(err)?;
    let v_half = v_ideal(0.5).map_err(err)?;
    let mut asym: f64 = 0.0;
    for k in 0..1000 {
        let eta = k as f64 / 999.0;
        asym = asym.max((v_ideal(eta).map_err(err)? - v_ideal(1.0 - eta).map_err(err)?).abs());
    }
    ensure(
        (v - 0.9987).abs() <= 1e-4 && (v_half - 1.0).abs() <= 1e-12 && asym <= 1e-12,
        format!("v_ideal(0.5128) = {v:.6}, v_ideal(0.5) = {v_half}, symmetry deviation {asym:.1e}"),
    )
}

fn three_photon_amplitudes() -> Outcome {
    let input = FockState::from_terms(2, 1, [(vec![2u8, 1], Complex64::new(1.0, 0.0))]).map_err(err)?;
    let circuit = Circuit::new(2).and_then(|c| c.coupler(0, 1, 2.0 / 3.0)).map_err(err)?;
    let out = apply_circuit(&input, &circuit).map_err(err)?;
    let expected = [
        (vec![3u8, 0], 2.0 / 3.0),
        (vec![2, 1], 0.0),
        (vec![1, 2], -(3f64.sqrt()) / 3.0),
        (vec![0, 3], -(2f64.sqrt()) / 3.0),
    ];
    let dev = expected
        .iter()
        .map(|(k, a)| (out.amplitude(k) - Complex64::new(*a, 0.0)).norm())
        .fold(0.0, f64::max);
    ensure(dev <= 1e-12, format!("max amplitude deviation {dev:.1e}"))
}

/// Probability of `target` output counts when each photon is routed
/// independently: input mode 0 stays with probability η, mode 1 crosses with
/// probability 1 − η.
fn routing_probability(eta: f64, inputs: &[usize], target: &[usize]) -> f64 {
    let n = inputs.len();
    (0..1u32 << n)
        .map(|routes| {
            let mut counts = [0usize; 2];
            let mut p = 1.0;
            for (k, &mode) in inputs.iter().enumerate() {
                let out = ((routes >> k) & 1) as usize;
                counts[out] += 1;
                p *= if out == mode { eta } else { 1.0 - eta };
            }
            if counts == [target[0], target[1]] {
                p
            } else {
                0.0
            }
        })
        .sum()
}

fn classical_limits() -> Outcome {
    let run = |modes: &[usize], eta: f64, pattern: Vec<usize>| -> fockwise::Result<f64> {
        let gram = DMatrix::<Complex64>::identity(modes.len(), modes.len());
        let state = build_state_from_gram(modes, &gram, 2)?;
        let out = apply_circuit(&state, &Circuit::new(2)?.coupler(0, 1, eta)?)?;
        pattern_probability(&out, &DetectionPattern::new(pattern))
    };
    let p11 = run(&[0, 1], 0.5, vec![1, 1]).map_err(err)?;
    let eta = 2.0 / 3.0;
    let p21 = run(&[0, 0, 1], eta, vec![2, 1]).map_err(err)?;
    let oracle = routing_probability(eta, &[0, 0, 1], &[2, 1]);
    let routing11 = routing_probability(0.5, &[0, 1], &[1, 1]);
    ensure(
        (p11 - 0.5).abs() <= 1e-12 && (routing11 - 0.5).abs() <= 1e-12 && (p21 - oracle).abs() <= 1e-12,
        format!("P(1,1) = {p11:.15}, P(2,1) = {p21:.15} vs routing {oracle:.15} (4/9)"),
    )
}

fn scan_matches_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eta: f64 = rng.random();
        let template = WavepacketTemplate::new(rng.random_range(600.0..1600.0), rng.random_range(0.2..10.0));
        let sigma = template.sigma().map_err(err)?;
        let tau = rng.random_range(-3.0..3.0) / sigma;
        let cfg = ScanConfig::new(vec![tau], eta, template);
        let p = hom_scan(&cfg).map_err(err)?.points[0].expected_probability;
        let formula = eta * eta + (1.0 - eta).powi(2) - 2.0 * eta * (1.0 - eta) * (-(sigma * tau).powi(2)).exp();
        worst = worst.max((p - formula).abs());
    }
    ensure(
        worst <= 1e-10,
        format!("max deviation {worst:.1e} over 100 random (eta, sigma, tau)"),
    )
}

fn dip_fit_round_trip() -> Outcome {
    let t0 = Instant::now();
    let eta = 0.5128;
    let ideal = v_ideal(eta).map_err(err)?;
    let scan = hom_scan(&standard_scan(eta, 2)).map_err(err)?;
    let peak = scan.points.iter().map(|p| p.expected_counts).fold(0.0, f64::max);
    let fit = fit_dip(&scan.dip_points()).map_err(err)?;
    let ok_ideal = (fit.visibility() - ideal).abs() <= 2.0 * fit.visibility_err();

    let mut mismatched = standard_scan(eta, 3);
    mismatched.mode_overlap = mode_overlap_for_visibility(eta, 0.958).map_err(err)?;
    let fit_mm = fit_dip(&hom_scan(&mismatched).map_err(err)?.dip_points()).map_err(err)?;
    let ok_mm = (fit_mm.visibility() - 0.958).abs() <= 2.0 * fit_mm.visibility_err();

    // replicate bias of the mismatched configuration
    let mut vs = Vec::with_capacity(200);
    let mut errs = 0.0;
    for seed in 0..200 {
        let mut cfg = mismatched.clone();
        cfg.rng_seed = 10_000 + seed;
        let f = fit_dip(&hom_scan(&cfg).map_err(err)?.dip_points()).map_err(err)?;
        vs.push(f.visibility());
        errs += f.visibility_err();
    }
    let mean = vs.iter().sum::<f64>() / 200.0;
    let mean_err = errs / 200.0;
    let bias = mean - 0.958;
    let ok_bias = bias.abs() < 0.25 * mean_err;
    let elapsed = t0.elapsed();
    ensure(
        ok_ideal && ok_mm && ok_bias && elapsed < Duration::from_secs(10) && (1800.0..2200.0).contains(&peak),
        format!(
            "peak {peak:.0} counts; V = {:.4} ± {:.4} (ideal {ideal:.4}); mismatched V = {:.4} ± {:.4} (target 0.958); \
             200-replicate bias {bias:+.5} (mean error {mean_err:.4}); {elapsed:.2?}",
            fit.visibility(),
            fit.visibility_err(),
            fit_mm.visibility(),
            fit_mm.visibility_err()
        ),
    )
}

fn mode_mismatch_fit() -> Outcome {
    let etas = [0.28, 0.35, 0.42, 0.5128, 0.55, 0.61, 0.66, 0.74];
    let noise = Normal::new(0.0, 0.005).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pts = Vec::new();
    for &eta in &etas {
        let v = 0.952 * v_ideal(eta).map_err(err)? + noise.sample(&mut rng);
        pts.push(VisibilityPoint::new(eta, v, 0.005));
    }
    let fit = fit_mode_mismatch(&pts).map_err(err)?;
    ensure(
        (fit.m - 0.952).abs() <= 2.0 * fit.uncertainty,
        format!("M = {:.4} ± {:.4} (injected 0.952)", fit.m, fit.uncertainty),
    )
}

fn three_photon_dip() -> Outcome {
    let eta = 0.659;
    let r = solve_intra_pair_overlap(eta, 0.84).map_err(err)?;
    let reference = three_photon_visibility(eta, 1.0, 1.0).map_err(err)?;
    let expected_rel = three_photon_visibility(eta, r, 1.0).map_err(err)? / reference;

    let mut cfg = standard_scan(eta, 4);
    cfg.intra_pair_overlap = r;
    let scan = three_photon_scan(&cfg).map_err(err)?;
    let fit = fit_dip(&scan.dip_points()).map_err(err)?;
    let fitted_rel = fit.visibility() / reference;

    let p0 = three_photon_probability(2.0 / 3.0, &standard_template(), 0.0, 1.0, 1.0).map_err(err)?;
    ensure(
        (expected_rel - 0.84).abs() <= 0.03 && (fitted_rel - 0.84).abs() <= 0.03 && p0.abs() <= 1e-12,
        format!(
            "intra-pair overlap {r:.4}; V_rel expected {expected_rel:.4}, fitted {fitted_rel:.4} ± {:.4}; \
             P(2,1) at eta = 2/3, zero delay = {p0:.1e}",
            fit.visibility_err() / reference
        ),
    )
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fockwise"));
    c.env_remove("FOCKWISE_OUT_DIR");
    c
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn simulate(config: &Path, out: &Path) -> Result<(), String> {
    let o = bin()
        .arg("simulate")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(err)?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{}: {}",
            config.display(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

fn mz_criterion() -> Outcome {
    let balanced = mz_effective_reflectivity(0.5, 0.5, 0.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (e1, e2, phi) = (rng.random(), rng.random(), rng.random_range(-PI..PI));
        let closed = mz_effective_reflectivity(e1, e2, phi).map_err(err)?;
        worst = worst.max((closed - mz_experiment(e1, e2, phi).map_err(err)?).abs());
    }

    let tmp = tempfile::tempdir().map_err(err)?;
    simulate(&configs_dir().join("mz_phase.toml"), tmp.path())?;
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("mz_result.json")).map_err(err)?).map_err(err)?;
    let target = &doc["results"]["target"];
    let (phase, path) = (target["phase_rad"].as_f64(), target["path_difference_nm"].as_f64());
    let recorded = matches!((phase, path), (Some(p), Some(l)) if p.is_finite() && l.is_finite());
    ensure(
        (balanced - 1.0).abs() <= 1e-12 && worst <= 1e-12 && recorded,
        format!(
            "eta_MZ(0.5, 0.5, 0) = {balanced}; simulation vs closed form {worst:.1e}; \
             eta_MZ = 0.960 recorded as phase {:.4} rad, path {:.1} nm",
            phase.unwrap_or(f64::NAN),
            path.unwrap_or(f64::NAN)
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let circuits: Vec<Vec<Element>> = vec![
        vec![Element::Coupler(0, 1, 0.5)],
        vec![Element::Coupler(0, 1, 2.0 / 3.0)],
        vec![Element::Coupler(0, 1, 0.1234), Element::Phase(0, 1.1)],
        vec![
            Element::Coupler(0, 1, 0.3),
            Element::Phase(1, 0.7),
            Element::Coupler(0, 1, 0.8),
        ],
        vec![
            Element::Phase(1, -2.0),
            Element::Coupler(1, 0, 0.95),
            Element::Coupler(0, 1, 0.45),
        ],
    ];
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n_internal in 1..=2 {
        for photons in 1..=3u8 {
            for ket in oracle::occupations(photons, 2 * n_internal) {
                for elements in &circuits {
                    let circuit = elements
                        .iter()
                        .try_fold(Circuit::new(2).map_err(err)?, |c, el| match *el {
                            Element::Coupler(i, j, eta) => c.coupler(i, j, eta).map_err(err),
                            Element::Phase(s, phi) => c.phase_shift(s, phi).map_err(err),
                        })?;
                    let input = vec![(ket.clone(), Complex64::new(1.0, 0.0))];
                    let state = FockState::from_terms(2, n_internal, input.clone()).map_err(err)?;
                    let out = apply_circuit(&state, &circuit).map_err(err)?;
                    let u = oracle::mode_unitary(2, n_internal, elements);
                    let reference = oracle::evolve(&u, &input);
                    for (occ, amp) in &reference {
                        worst = worst.max((out.amplitude(occ) - amp).norm());
                    }
                    for (occ, amp) in out.terms() {
                        if !reference.iter().any(|(o, _)| o.as_slice() == occ.counts()) {
                            worst = worst.max(amp.norm());
                        }
                    }
                    cases += 1;
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    ensure(
        worst <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("{cases} cases, max deviation {worst:.1e}, {elapsed:.2?}"),
    )
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let mut configs: Vec<PathBuf> = fs::read_dir(configs_dir())
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut compared = 0;
    for cfg in &configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let (a, b) = (
            tmp.path().join(format!("{stem}-a")),
            tmp.path().join(format!("{stem}-b")),
        );
        simulate(cfg, &a)?;
        simulate(cfg, &b)?;
        let (fa, fb) = (csv_files(&a)?, csv_files(&b)?);
        if fa.is_empty() || fa.len() != fb.len() {
            return Err(format!("{stem}: CSV sets differ or are empty"));
        }
        for (x, y) in fa.iter().zip(&fb) {
            if fs::read(x).map_err(err)? != fs::read(y).map_err(err)? {
                return Err(format!("{} differs between runs", x.display()));
            }
            compared += 1;
        }
    }
    ensure(
        compared > 0,
        format!(
            "{} configs, {compared} CSV files byte-identical across two runs",
            configs.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("two-photon bunching at a balanced coupler", two_photon_bunching),
        ("ideal visibility curve", ideal_visibility_curve),
        ("three-photon output amplitudes at eta = 2/3", three_photon_amplitudes),
        ("classical limits for distinguishable photons", classical_limits),
        ("scan matches the closed-form dip", scan_matches_formula),
        ("dip fit round trip with bias check", dip_fit_round_trip),
        ("mode-mismatch fit over eight couplers", mode_mismatch_fit),
        ("three-photon dip", three_photon_dip),
        ("Mach-Zehnder effective reflectivity", mz_criterion),
        ("ladder algebra vs permanent oracle", oracle_equivalence),
        ("deterministic CSV output", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
