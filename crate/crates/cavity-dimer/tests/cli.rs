use std::path::Path;

use cavity_dimer::cli::run;
use cavity_dimer::exit;
use cavity_dimer::manifest::{sha256_hex, RunManifest};
use cavity_dimer::table::Table;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["cavity-dimer", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["scatter", "--bogus"]), exit::USAGE);
    assert_eq!(run_in(d.path(), &["no-such-command"]), exit::USAGE);
}

#[test]
fn empty_energy_range_is_a_validation_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["scatter", "--emin", "-5", "--emax", "-5"]), exit::VALIDATION);
    assert!(!d.path().join("scatter.csv").exists());
}

#[test]
fn bad_config_values_and_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\nkappa_a_mhz = -3.0\n").unwrap();
    assert_eq!(run_in(d.path(), &["--config", cfg.to_str().unwrap(), "potentials"]), exit::VALIDATION);
    std::fs::write(&cfg, "[params]\nkappa = 3.0\n").unwrap();
    assert_eq!(run_in(d.path(), &["--config", cfg.to_str().unwrap(), "potentials"]), exit::VALIDATION);
    assert_eq!(run_in(d.path(), &["--config", "/nonexistent/x.toml", "potentials"]), exit::IO);
    assert_eq!(run_in(d.path(), &["--preset", "cs-imaginary", "potentials"]), exit::VALIDATION);
}

#[test]
fn potentials_csv_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["--preset", "cs-optical", "potentials"]), exit::OK);
    let csv = d.path().join("potentials.csv");
    let t = Table::read_numeric_csv(&csv).unwrap();
    assert_eq!(t.header, ["R_a0", "omega1_MHz", "omega2_MHz", "omega3_MHz"]);
    let r = t.column("R_a0").unwrap();
    assert_eq!(r[0], 200.0);
    assert_eq!(*r.last().unwrap(), 20_000.0);
    let w2 = t.column("omega2_MHz").unwrap();
    let min = w2.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((min + 95.5).abs() < 0.1, "{min}");

    let m = RunManifest::read(&d.path().join("potentials.manifest.json")).unwrap();
    assert_eq!(m.subcommand, "potentials");
    assert_eq!(m.preset, "cs-optical");
    assert_eq!(m.overrides.get("preset").map(String::as_str), Some("cs-optical"));
    assert_eq!(m.outputs.len(), 1);
    let bytes = std::fs::read(&csv).unwrap();
    assert_eq!(m.outputs[0].sha256, sha256_hex(&bytes));
    assert_eq!(m.outputs[0].bytes, bytes.len() as u64);
}

#[test]
fn config_file_is_hashed_and_applied() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    let text = "preset = \"cs-optical\"\n[grid]\nn_uniform = 101\n";
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(run_in(d.path(), &["--config", cfg.to_str().unwrap(), "potentials"]), exit::OK);
    let t = Table::read_numeric_csv(&d.path().join("potentials.csv")).unwrap();
    assert_eq!(t.rows.len(), 101);
    let m = RunManifest::read(&d.path().join("potentials.manifest.json")).unwrap();
    assert_eq!(m.config_sha256, sha256_hex(text.as_bytes()));
}

#[test]
fn sweeps_are_thread_count_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["sweep-kappa", "sweep-detuning"] {
        assert_eq!(run_in(a.path(), &["--threads", "1", cmd]), exit::OK);
        assert_eq!(run_in(b.path(), &["--threads", "3", cmd]), exit::OK);
    }
    for f in ["sweep_kappa.csv", "sweep_detuning.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let t = Table::read_numeric_csv(&a.path().join("sweep_kappa.csv")).unwrap();
    let depth = t.column("depth_MHz").unwrap();
    assert!(depth.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn zero_threads_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["--threads", "0", "potentials"]), exit::VALIDATION);
}

#[test]
fn small_scatter_run_with_loss() {
    let d = tempfile::tempdir().unwrap();
    let args = ["scatter", "--emin", "-90", "--emax", "-60", "--points", "16", "--loss", "5"];
    assert_eq!(run_in(d.path(), &args), exit::OK);
    let t = Table::read_numeric_csv(&d.path().join("scatter.csv")).unwrap();
    assert_eq!(t.rows.len(), 16);
    assert_eq!(t.header.last().unwrap(), "sigma11_lossy_cm2");
    let abs = t.column("abs_S11").unwrap();
    assert!(abs.iter().all(|&a| a <= 1.0 + 1e-6));
}

#[test]
fn levels_rows_carry_symmetry_in_file_name() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["levels", "--symmetry", "pi", "--n-theta", "8"]), exit::OK);
    let t = Table::read_numeric_csv(&d.path().join("levels_pi.csv")).unwrap();
    assert!(!t.rows.is_empty());
    assert!(t.column("e_v_MHz").unwrap().iter().all(|&e| e < 0.0));
    assert_eq!(run_in(d.path(), &["levels", "--symmetry", "delta"]), exit::VALIDATION);
}
