//! Executes configured experiments and writes their outputs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use fockwise::analysis::relative_visibility;
use fockwise::circuit::{balanced_mz_phase, mz_effective_reflectivity, phase_to_path_difference_nm};
use fockwise::experiments::{
    hom_scan, hom_visibility, linspace, mz_experiment, solve_intra_pair_overlap, three_photon_asymptote,
    three_photon_probability, three_photon_scan, three_photon_visibility,
};
use fockwise::{fit_dip, fit_mode_mismatch, v_ideal, DipFitResult, ScanConfig, ScanResult, VisibilityPoint};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{locate, ExperimentKind, Issue, RunConfig, ScanSection};
use crate::csvio::{fmt_f64, read_dip_points, write_scan, write_table};
use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FOCKWISE_OUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// `key=value` assignments applied in order.
    pub overrides: Vec<String>,
}

/// What a run produced: the printed summary and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Git-style content hash: sha256 over `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

#[derive(Serialize)]
struct Document<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a str,
    input_hash: String,
    config: Value,
    results: Value,
}

fn write_json(path: &Path, doc: &Document) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display(), e))
}

/// Renders rows as a right-aligned text table.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn pm(value: f64, err: f64) -> String {
    format!("{value:.4} ± {err:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

struct Loaded {
    config: RunConfig,
    source: String,
    path: PathBuf,
}

impl Loaded {
    fn issue(&self, issue: Issue) -> CliError {
        let at = match locate(&self.source, issue.section, &issue.key) {
            Some(line) => format!("{}:{line}", self.path.display()),
            None => self.path.display().to_string(),
        };
        let key = match issue.section {
            Some(s) => format!("{s}.{}", issue.key),
            None => issue.key.clone(),
        };
        CliError::Config(format!("{at}: `{key}` {}", issue.message))
    }
}

fn load(path: &Path, opts: &SimulateOptions) -> Result<Loaded, CliError> {
    let source = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut config: RunConfig =
        toml::from_str(&source).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for assignment in &opts.overrides {
        config = config.apply_override(assignment)?;
    }
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let loaded = Loaded {
        config,
        source,
        path: path.to_path_buf(),
    };
    loaded.config.check_structure().map_err(|i| loaded.issue(i))?;
    Ok(loaded)
}

fn output_dir(opts: &SimulateOptions, config: &RunConfig) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs the experiment in `config_path`, writing CSV and JSON outputs.
pub fn simulate(config_path: &Path, opts: &SimulateOptions) -> Result<Outcome, CliError> {
    let loaded = load(config_path, opts)?;
    let out = output_dir(opts, &loaded.config);
    fs::create_dir_all(&out).map_err(|e| CliError::io(out.display(), e))?;

    let canonical = toml::to_string(&loaded.config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut hashed = canonical.into_bytes();
    let kind = loaded.config.experiment;
    let (summary, files, results) = match kind {
        ExperimentKind::HomScan => run_scan(&loaded, &out, false)?,
        ExperimentKind::ThreePhotonScan => run_scan(&loaded, &out, true)?,
        ExperimentKind::VisibilitySweep => run_sweep(&loaded, &out)?,
        ExperimentKind::Mz => run_mz(&loaded, &out)?,
        ExperimentKind::Fit => {
            let section = loaded.config.fit.as_ref().expect("structure checked");
            let base = config_path.parent().unwrap_or(Path::new("."));
            let input = base.join(&section.input);
            let bytes = fs::read(&input).map_err(|e| CliError::io(input.display(), e))?;
            hashed.extend_from_slice(&bytes);
            let fit = fit_points(&bytes)?;
            (fit_summary(&fit), Vec::new(), json!({ "input": input, "fit": fit }))
        }
    };

    let json_path = out.join(format!("{}_result.json", kind.section()));
    let doc = Document {
        tool: "fockwise",
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind.name(),
        input_hash: content_hash(&hashed),
        config: serde_json::to_value(&loaded.config).map_err(|e| CliError::Io(e.to_string()))?,
        results,
    };
    write_json(&json_path, &doc)?;
    let mut files = files;
    files.push(json_path);
    Ok(Outcome { summary, files })
}

fn scan_config(loaded: &Loaded, s: &ScanSection, section: &'static str, three: bool) -> Result<ScanConfig, CliError> {
    let delays = s.validate(section, three).map_err(|i| loaded.issue(i))?;
    let mut cfg = ScanConfig::new(delays, s.eta, s.template());
    cfg.rate_pairs_per_s = s.rate_pairs_per_s;
    cfg.integration_time_s = s.integration_time_s;
    cfg.success_fraction = s.success_fraction;
    cfg.drift_per_s = s.drift_per_s;
    cfg.rng_seed = loaded.config.seed;
    cfg.mode_overlap = s.mode_overlap;
    cfg.intra_pair_overlap = s.intra_pair_overlap;
    if let Some(target) = s.target_relative_visibility {
        cfg.intra_pair_overlap = solve_intra_pair_overlap(s.eta, target).map_err(|e| {
            loaded.issue(Issue {
                section: Some(section),
                key: "target_relative_visibility".into(),
                message: e.to_string(),
            })
        })?;
    }
    if let Some(v) = s.target_visibility {
        // both dips deepen linearly in |mode overlap|²
        let ceiling = if three {
            three_photon_visibility(s.eta, cfg.intra_pair_overlap, 1.0)?
        } else {
            v_ideal(s.eta)?
        };
        if !(ceiling > 0.0 && v <= ceiling) {
            return Err(loaded.issue(Issue {
                section: Some(section),
                key: "target_visibility".into(),
                message: format!("unreachable at eta = {} (ceiling {ceiling:.6})", s.eta),
            }));
        }
        cfg.mode_overlap = (v / ceiling).sqrt();
    }
    Ok(cfg)
}

fn run_scan(loaded: &Loaded, out: &Path, three: bool) -> Result<(String, Vec<PathBuf>, Value), CliError> {
    let (section, s) = if three {
        ("three_photon_scan", loaded.config.three_photon_scan.as_ref())
    } else {
        ("hom_scan", loaded.config.hom_scan.as_ref())
    };
    let s = s.expect("structure checked");
    let cfg = scan_config(loaded, s, section, three)?;
    let scan: ScanResult = if three {
        three_photon_scan(&cfg)?
    } else {
        hom_scan(&cfg)?
    };

    let csv_path = out.join(format!("{section}.csv"));
    write_scan(create(&csv_path)?, &scan.points)?;

    let fit = if s.fit {
        Some(fit_dip(&scan.dip_points())?)
    } else {
        None
    };
    let eta = cfg.eta;
    let (v_expected, v_reference) = if three {
        (
            three_photon_visibility(eta, cfg.intra_pair_overlap, cfg.mode_overlap)?,
            three_photon_visibility(eta, 1.0, 1.0)?,
        )
    } else {
        (hom_visibility(eta, &cfg.template, cfg.mode_overlap)?, v_ideal(eta)?)
    };
    let v_measured = fit.map_or(v_expected, |f| f.visibility());
    let v_rel = if three {
        (v_reference > 0.0).then(|| v_measured / v_reference)
    } else {
        relative_visibility(v_measured, eta).ok()
    };

    let mut header = vec!["eta", "V_fit", "V_expected", "V_ideal", "V_rel"];
    let mut row = vec![
        format!("{eta:.4}"),
        fit.map_or_else(|| "-".into(), |f| pm(f.visibility(), f.visibility_err())),
        format!("{v_expected:.4}"),
        format!("{v_reference:.4}"),
        opt4(v_rel),
    ];
    let mut results = json!({
        "eta": eta,
        "mode_overlap": cfg.mode_overlap,
        "v_expected": v_expected,
        "v_ideal": v_reference,
        "v_rel": v_rel,
        "fit": fit,
        "csv": csv_path.file_name().and_then(|n| n.to_str()),
    });
    if three {
        let p0 = three_photon_probability(eta, &cfg.template, 0.0, cfg.intra_pair_overlap, cfg.mode_overlap)?;
        let p_inf = three_photon_asymptote(eta, cfg.intra_pair_overlap)?;
        header.insert(1, "r_pair");
        row.insert(1, format!("{:.4}", cfg.intra_pair_overlap));
        header.push("P(0)");
        row.push(format!("{p0:.3e}"));
        results["intra_pair_overlap"] = json!(cfg.intra_pair_overlap);
        results["probability_zero_delay"] = json!(p0);
        results["probability_asymptote"] = json!(p_inf);
    }
    let mut summary = render_table(&header, &[row]);
    if let Some(f) = fit {
        summary.push_str(&fit_summary(&f));
    }
    Ok((summary, vec![csv_path], results))
}

fn run_sweep(loaded: &Loaded, out: &Path) -> Result<(String, Vec<PathBuf>, Value), CliError> {
    let s = loaded.config.visibility_sweep.as_ref().expect("structure checked");
    let delays = s.validate().map_err(|i| loaded.issue(i))?;
    let template = s.template();
    let mode_overlap = s.mode_match.sqrt();

    let mut scan_rows = Vec::new();
    let mut table = Vec::new();
    let mut points = Vec::new();
    let mut per_eta = Vec::new();
    for (k, &eta) in s.etas.iter().enumerate() {
        let mut cfg = ScanConfig::new(delays.clone(), eta, template);
        cfg.rate_pairs_per_s = s.rate_pairs_per_s;
        cfg.integration_time_s = s.integration_time_s;
        cfg.mode_overlap = mode_overlap;
        cfg.rng_seed = loaded.config.seed.wrapping_add(k as u64);
        let scan = hom_scan(&cfg)?;
        for p in &scan.points {
            scan_rows.push(vec![
                fmt_f64(eta),
                fmt_f64(p.delay_s),
                fmt_f64(p.expected_probability),
                fmt_f64(p.expected_counts),
                p.sampled_counts.to_string(),
            ]);
        }
        let fit = fit_dip(&scan.dip_points()).map_err(|e| CliError::Fit(format!("dip fit at eta = {eta}: {e}")))?;
        let ideal = v_ideal(eta)?;
        let rel = relative_visibility(fit.visibility(), eta).ok();
        table.push(vec![
            format!("{eta:.4}"),
            pm(fit.visibility(), fit.visibility_err()),
            format!("{ideal:.4}"),
            opt4(rel),
        ]);
        points.push(VisibilityPoint::new(eta, fit.visibility(), fit.visibility_err()));
        per_eta.push(json!({ "eta": eta, "v_ideal": ideal, "v_rel": rel, "fit": fit }));
    }
    let mm = fit_mode_mismatch(&points)?;

    let scans_path = out.join("visibility_sweep_scans.csv");
    write_table(
        create(&scans_path)?,
        &["eta", "tau_s", "expected_prob", "expected_counts", "sampled_counts"],
        &scan_rows,
    )?;
    let csv_path = out.join("visibility_sweep.csv");
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.eta),
                fmt_f64(p.visibility),
                fmt_f64(p.sigma),
                fmt_f64(v_ideal(p.eta).unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    write_table(create(&csv_path)?, &["eta", "v_fit", "v_fit_err", "v_ideal"], &rows)?;

    let mut summary = render_table(&["eta", "V", "V_ideal", "V_rel"], &table);
    summary.push_str(&format!(
        "M = {:.4} ± {:.4} (reduced chi2 {:.3})\n",
        mm.m, mm.uncertainty, mm.reduced_chi2
    ));
    let results = json!({ "couplers": per_eta, "mode_mismatch": mm });
    Ok((summary, vec![csv_path, scans_path], results))
}

fn run_mz(loaded: &Loaded, out: &Path) -> Result<(String, Vec<PathBuf>, Value), CliError> {
    let s = loaded.config.mz.as_ref().expect("structure checked");
    s.validate().map_err(|i| loaded.issue(i))?;
    let closed = mz_effective_reflectivity(s.eta1, s.eta2, s.phi)?;
    let simulated = mz_experiment(s.eta1, s.eta2, s.phi)?;

    let mut files = Vec::new();
    if s.phase_points > 0 {
        let rows = linspace(0.0, 2.0 * std::f64::consts::PI, s.phase_points)
            .into_iter()
            .map(|phi| {
                Ok(vec![
                    fmt_f64(phi),
                    fmt_f64(mz_effective_reflectivity(s.eta1, s.eta2, phi)?),
                    fmt_f64(mz_experiment(s.eta1, s.eta2, phi)?),
                ])
            })
            .collect::<Result<Vec<_>, fockwise::Error>>()?;
        let path = out.join("mz_scan.csv");
        write_table(create(&path)?, &["phi_rad", "eta_mz", "eta_mz_simulated"], &rows)?;
        files.push(path);
    }

    let mut summary = render_table(
        &["eta1", "eta2", "phi", "eta_MZ", "eta_MZ_sim"],
        &[vec![
            format!("{:.4}", s.eta1),
            format!("{:.4}", s.eta2),
            format!("{:.4}", s.phi),
            format!("{closed:.6}"),
            format!("{simulated:.6}"),
        ]],
    );
    let mut results = json!({ "eta_mz": closed, "eta_mz_simulated": simulated });
    if let Some(target) = s.target_eta_mz {
        let phase = balanced_mz_phase(target).map_err(|e| {
            loaded.issue(Issue {
                section: Some("mz"),
                key: "target_eta_mz".into(),
                message: e.to_string(),
            })
        })?;
        let path_nm = phase_to_path_difference_nm(phase, s.wavelength_nm);
        summary.push_str(&format!(
            "eta_MZ = {target} -> phase error {phase:.4} rad, path difference {path_nm:.1} nm at {} nm\n",
            s.wavelength_nm
        ));
        results["target"] = json!({
            "eta_mz": target,
            "phase_rad": phase,
            "path_difference_nm": path_nm,
            "wavelength_nm": s.wavelength_nm,
        });
    }
    Ok((summary, files, results))
}

fn fit_points(bytes: &[u8]) -> Result<DipFitResult, CliError> {
    Ok(fit_dip(&read_dip_points(bytes)?)?)
}

/// `key=value` lines for a dip fit.
pub fn fit_summary(f: &DipFitResult) -> String {
    let p = &f.parameters;
    let u = &f.uncertainties;
    let mut s = String::new();
    for (k, v, e) in [
        ("baseline_a", p.baseline_a, u.baseline_a),
        ("baseline_slope_b", p.baseline_slope_b, u.baseline_slope_b),
        ("visibility", p.visibility, u.visibility),
        ("center_tau0", p.center_tau0, u.center_tau0),
        ("width_w", p.width_w, u.width_w),
    ] {
        s.push_str(&format!("{k}={v:e}\n{k}_err={e:e}\n"));
    }
    s.push_str(&format!(
        "reduced_chi2={:e}\niterations={}\nclamped={}\n",
        f.reduced_chi2, f.iterations, f.clamped
    ));
    s
}

/// Fits a scan CSV. The JSON result goes to `out`, or next to the input
/// (under the default output directory when the environment names one).
pub fn fit_file(csv_path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let bytes = fs::read(csv_path).map_err(|e| CliError::io(csv_path.display(), e))?;
    let fit = fit_points(&bytes)?;
    let json_path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scan");
            let dir = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| csv_path.parent().unwrap_or(Path::new(".")).to_path_buf());
            dir.join(format!("{stem}_fit.json"))
        }
    };
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    let doc = Document {
        tool: "fockwise",
        version: env!("CARGO_PKG_VERSION"),
        experiment: "fit",
        input_hash: content_hash(&bytes),
        config: json!({ "input": csv_path }),
        results: json!({ "fit": fit }),
    };
    write_json(&json_path, &doc)?;
    Ok(Outcome {
        summary: fit_summary(&fit),
        files: vec![json_path],
    })
}
