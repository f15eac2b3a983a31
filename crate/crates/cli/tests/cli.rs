use std::path::Path;
use std::process::{Command, Output};

use sca_cli::config::Config;
use sca_cli::dataset::Dataset;
use sca_cli::error::{EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFCHECK};
use sca_cli::sweep::run_sweep;
use sca_core::montecarlo::{conditioned_counts, simulate_run};
use sca_core::{figures_of_merit, Conditioning, RunSpec};
use tempfile::TempDir;

fn sca(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sca"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("SCA_WORKERS", w),
        None => cmd.env_remove("SCA_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_SWEEP: &str = "[sweep]\nalpha_sq = [0.1, 0.5, 0.94]\nn_states = [2, 4]\n";

#[test]
fn csv_sweep_matches_library_and_reparses() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "sweep.toml", SMALL_SWEEP);
    let out_path = dir.path().join("rows.csv");
    let out = sca(&["sweep", "-c", &cfg_path, "-o", out_path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed = Dataset::read_csv(std::fs::File::open(&out_path).unwrap()).unwrap();
    let expected = run_sweep(&Config::from_toml(SMALL_SWEEP).unwrap()).unwrap();
    assert_eq!(parsed, expected);
    let header = std::fs::read_to_string(&out_path).unwrap();
    assert!(header.starts_with(
        "n_states,alpha_sq,fidelity,correct_state_fraction,success_probability,success_rate,\
         visibility_unconditioned,visibility_d0_silent,visibility_heralded\n"
    ));
}

#[test]
fn json_sweep_echoes_spec() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "sweep.toml", SMALL_SWEEP);
    let out_path = dir.path().join("rows.json");
    let out = sca(&["sweep", "-c", &cfg_path, "-o", out_path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let (spec, rows) = Dataset::read_json(std::fs::File::open(&out_path).unwrap()).unwrap();
    let mut cfg = Config::from_toml(SMALL_SWEEP).unwrap();
    assert_eq!(rows, run_sweep(&cfg).unwrap());
    cfg.output.path = Some(out_path.clone());
    let echoed: Config = serde_json::from_value(spec).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn analytic_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "sweep.toml", SMALL_SWEEP);
    let a = sca(&["sweep", "-c", &cfg_path], Some("1"));
    let b = sca(&["sweep", "-c", &cfg_path], Some("3"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn montecarlo_output_depends_only_on_seed() {
    let dir = TempDir::new().unwrap();
    let text = "[sweep]\nmode = \"montecarlo\"\nalpha_sq = [0.2, 0.6]\nn_states = [2, 8]\nn_pulses = 150000\nseed = 5\n";
    let cfg_path = write(&dir, "mc.toml", text);
    let a = sca(&["sweep", "-c", &cfg_path], Some("1"));
    let b = sca(&["sweep", "-c", &cfg_path], Some("4"));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let other = write(&dir, "mc2.toml", &text.replace("seed = 5", "seed = 6"));
    let c = sca(&["sweep", "-c", &other], Some("4"));
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn montecarlo_estimates_agree_with_analytic_columns() {
    let text = "[sweep]\nmode = \"both\"\nalpha_sq = [0.3, 0.8]\nn_states = [2, 4, 8]\nn_pulses = 400000\nseed = 21\n";
    let data = run_sweep(&Config::from_toml(text).unwrap()).unwrap();
    let accepted = data.values("mc_accepted").unwrap();
    for (exact, mc, se) in [
        ("fidelity", "mc_fidelity", "mc_fidelity_se"),
        ("correct_state_fraction", "mc_correct_state_fraction", "mc_correct_state_fraction_se"),
        ("success_probability", "mc_success_probability", "mc_success_probability_se"),
    ] {
        let exact = data.values(exact).unwrap();
        let mc = data.values(mc).unwrap();
        let se = data.values(se).unwrap();
        for i in 0..exact.len() {
            let (x, m, s) = (exact[i].unwrap(), mc[i].unwrap(), se[i].unwrap());
            // Rare branches may not appear at all, leaving a zero standard
            // error; allow the rule-of-three bound for an unseen event.
            let unseen = 3.0 / accepted[i].unwrap();
            assert!((x - m).abs() <= 5.0 * s + unseen, "row {i}: {x} vs {m} +- {s}");
        }
    }
}

#[test]
fn zero_pulse_montecarlo_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "bad.toml", "[sweep]\nmode = \"montecarlo\"\nn_pulses = 0\n");
    let out = sca(&["sweep", "-c", &cfg_path], None);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("sweep.n_pulses"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "bad.toml", "[detectors.d1]\nefficiencyy = 0.4\n");
    let out = sca(&["sweep", "-c", &cfg_path], None);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("efficiencyy"), "{}", stderr(&out));
}

#[test]
fn bad_worker_override_is_a_config_error() {
    let out = sca(&["figure", "fig3b"], Some("zero"));
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("SCA_WORKERS"));
}

#[test]
fn unwritable_output_reports_path() {
    let out = sca(&["figure", "fig3b", "-o", "/nonexistent-dir/fig.csv"], None);
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME as i32));
    assert!(stderr(&out).contains("/nonexistent-dir/fig.csv"), "{}", stderr(&out));
}

#[test]
fn unknown_figure_rejected() {
    let out = sca(&["figure", "fig5"], None);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
}

#[test]
fn figure_four_json_on_stdout() {
    let out = sca(&["figure", "fig4", "--format", "json"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let (spec, data) = Dataset::read_json(out.stdout.as_slice()).unwrap();
    assert_eq!(spec["figure"], "fig4");
    let a = data.column("alpha_sq").unwrap();
    let r = data.column("success_rate").unwrap();
    let n = data.column("n_states").unwrap();
    let row = data
        .rows
        .iter()
        .find(|row| row[a].as_f64() == Some(0.94) && row[n].as_f64() == Some(2.0))
        .unwrap();
    let rate = row[r].as_f64().unwrap();
    assert!((13_000.0..=39_000.0).contains(&rate), "{rate}");
}

fn estimate(dir: &TempDir, counts: &str, extra: &[&str]) -> Output {
    let path = write(dir, "counts.toml", counts);
    let mut args = vec!["estimate", path.as_str()];
    args.extend_from_slice(extra);
    sca(&args, None)
}

#[test]
fn estimate_all_zero_counts_is_insufficient_signal() {
    let dir = TempDir::new().unwrap();
    let out = estimate(
        &dir,
        "n_a_sig = 0\nn_b_sig = 0\nn_a_vac = 0\nn_b_vac = 0\n",
        &["--alpha-sq", "0.5"],
    );
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME as i32));
    assert!(stderr(&out).contains("insufficient signal"), "{}", stderr(&out));
}

#[test]
fn estimate_malformed_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = estimate(&dir, "n_a_sig = 1\nn_b = 2\n", &["--alpha-sq", "0.5"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
    assert!(stderr(&out).contains("counts.toml"), "{}", stderr(&out));
    let out = estimate(
        &dir,
        "n_a_sig = -1\nn_b_sig = 0\nn_a_vac = 0\nn_b_vac = 0\n",
        &["--alpha-sq", "0.5"],
    );
    assert_eq!(out.status.code(), Some(EXIT_CONFIG as i32));
}

#[test]
fn estimate_recovers_synthetic_counts() {
    // N_sig = 900, N_vac = 100 at x = eta l g^2 alpha^2 = 0.3645, epsilon = 0.05,
    // vacuum row as usually quoted (1 - e^{-2x} per port).
    let (x, eps) = (0.3645f64, 0.05);
    let e2 = (-2.0 * x).exp();
    let counts = format!(
        "n_a_sig = {}\nn_b_sig = {}\nn_a_vac = {}\nn_b_vac = {}\n",
        900.0 * (1.0 - (1.0 + eps) * e2),
        900.0 * eps,
        100.0 * (1.0 - e2),
        100.0 * (1.0 - e2)
    );
    let dir = TempDir::new().unwrap();
    let out = estimate(
        &dir,
        &counts,
        &["--g2a2", "0.9", "--eta-l", "0.405", "--vacuum-row", "doubled-exponent", "--json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n_sig = report["n_sig"].as_f64().unwrap();
    let n_vac = report["n_vac"].as_f64().unwrap();
    assert!((n_sig - 900.0).abs() <= 900.0 * 1e-9, "{n_sig}");
    assert!((n_vac - 100.0).abs() <= 100.0 * 1e-9, "{n_vac}");
    let standard = report["fidelity_standard"].as_f64().unwrap();
    let doubled = report["fidelity_doubled_exponent"].as_f64().unwrap();
    assert!((standard - 0.94066).abs() < 1e-5, "{standard}");
    assert!((doubled - 0.91653).abs() < 1e-5, "{doubled}");
}

#[test]
fn estimate_from_simulated_counts_matches_model() {
    // A noisy D1 lets wrong guesses through, so the heralded output carries a
    // real vacuum component for the estimator to find.
    let text = "[detectors.d1]\ndark_prob_per_gate = 0.02\n";
    let cfg = Config::from_toml(text).unwrap();
    let alpha_sq = 0.3;
    let amp = cfg.amplifier(alpha_sq, 2).unwrap();
    let dets = cfg.detector_set().unwrap();
    let spec = RunSpec::new(amp.clone(), dets, cfg.analysis_template().unwrap(), 2_000_000, 77);
    let tally = simulate_run(&spec).unwrap();
    let heralded = Conditioning::D0SilentAndD1Fires;
    let counts = conditioned_counts(&tally, heralded);

    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "cfg.toml", text);
    let counts_path = dir.path().join("counts.json");
    std::fs::write(&counts_path, serde_json::to_string(&counts.as_real()).unwrap()).unwrap();
    let out = sca(
        &[
            "estimate",
            counts_path.to_str().unwrap(),
            "--alpha-sq",
            &alpha_sq.to_string(),
            "-c",
            &cfg_path,
            "--json",
        ],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimated = report["fidelity_standard"].as_f64().unwrap();

    let exact = figures_of_merit(&amp, &dets.d0, &dets.d1).unwrap();
    let p0 = 1.0 - exact.correct_state_fraction;
    let accepted = tally.accepted(heralded) as f64;
    let (n_sig, n_vac) = (accepted * (1.0 - p0), accepted * p0);
    let g2a2 = amp.target(0).mean_photon_number();
    let eta_l = dets.da.photon_detection_probability();
    let p_sig = 1.0 - (-2.0 * eta_l * g2a2).exp();
    let p_vac = 1.0 - (-eta_l * g2a2 / 2.0).exp();
    let var_sig = n_sig * (1.0 - p_sig) / p_sig;
    let var_vac = n_vac * (1.0 - p_vac) / (2.0 * p_vac);
    let total = accepted;
    let var_p0 = (n_sig / total.powi(2)).powi(2) * var_vac
        + (n_vac / total.powi(2)).powi(2) * var_sig
        + p0 * (1.0 - p0) / total;
    let sigma = (1.0 - (-g2a2).exp()) * var_p0.sqrt();
    assert!(p0 > 0.01, "vacuum share {p0} too small to test");
    assert!(
        (estimated - exact.fidelity).abs() <= 5.0 * sigma,
        "estimated {estimated}, model {}, sigma {sigma}",
        exact.fidelity
    );
}

#[test]
fn selfcheck_reports_every_criterion() {
    let out = sca(&["selfcheck"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("criterion")).collect();
    assert_eq!(lines.len(), 11, "{text}");
    let any_failed = lines.iter().any(|l| l.contains("[FAIL]"));
    let expected = if any_failed { EXIT_SELFCHECK as i32 } else { 0 };
    assert_eq!(out.status.code(), Some(expected));
}

#[test]
fn help_exits_cleanly() {
    let out = sca(&["--help"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["sweep", "estimate", "figure", "selfcheck"] {
        assert!(text.contains(sub), "{text}");
    }
    assert!(Path::new(env!("CARGO_BIN_EXE_sca")).exists());
}
