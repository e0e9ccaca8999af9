use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contact_duality::cli::{sha256_hex, CACHE_ENV, SCHEMA_VERSION};
use serde_json::Value;

const SMALL_SPECTRUM: &str = "\
n = 2
k = 3
seed = 3
domain.length = 4.0
domain.cells = 16
coupling.a = -1.0
gates.residual = 1e-8
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contact-duality"));
    c.env_remove(CACHE_ENV);
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file in `dir` except the manifest, by name.
fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn report(dir: &Path, command: &str) -> Value {
    let (_, bytes) = artifacts(dir)
        .into_iter()
        .find(|(name, _)| name.starts_with(&format!("{command}-")) && name.ends_with(".json"))
        .expect("report written");
    serde_json::from_slice(&bytes).unwrap()
}

#[test]
fn delta_builder_rejects_the_dirichlet_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "n = 2\nformulations = [\"delta_bose\"]\ndomain.length = 5.0\ndomain.cells = 20\ncoupling.a = 0.0\n",
    );
    let o = run("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("Dirichlet sentinel not valid for delta builder"),
        "{err}"
    );
    assert!(err.contains("coupling.a"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("{SMALL_SPECTRUM}domain.celss = 3\n"),
    );
    let o = run("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("celss"), "{}", stderr(&o));
}

#[test]
fn wrong_type_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &SMALL_SPECTRUM.replace("k = 3", "k = \"three\""),
    );
    let o = run("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`k`"), "{}", stderr(&o));
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("command = \"duality\"\n{SMALL_SPECTRUM}"),
    );
    let o = run("spectrum", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("command"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_and_bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "spectrum",
        &dir.path().join("absent.toml"),
        &dir.path().join("out"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .arg("no-such-command")
        .arg("--config")
        .arg("x")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "c.toml", SMALL_SPECTRUM);
    let o = run(
        "spectrum",
        &cfg,
        &dir.path().join("out"),
        &["--threads", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn passing_run_writes_report_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SPECTRUM);
    let out = dir.path().join("out");
    let o = run("spectrum", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let doc = report(&out, "spectrum");
    assert_eq!(doc["schema_version"], SCHEMA_VERSION);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["seed"], 3);

    let files = artifacts(&out);
    let hash = doc["problem_hash"].as_str().unwrap();
    assert!(files.keys().all(|n| n.contains(hash)), "{files:?}");
    let spectra = files
        .iter()
        .find(|(n, _)| n.starts_with("spectra-"))
        .expect("spectra csv")
        .1;
    let text = String::from_utf8(spectra.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "formulation,refinement_level,h,level_index,eigenvalue,residual"
    );
    // three formulations, three levels each
    assert_eq!(text.lines().count(), 1 + 9);

    let manifest: Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["config_hash"],
        sha256_hex(SMALL_SPECTRUM.as_bytes())
    );
    assert_eq!(manifest["exit_code"], 0);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(
        manifest["versions"]["contact-duality"],
        env!("CARGO_PKG_VERSION")
    );
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), files.len());
}

#[test]
fn failed_gate_exits_1_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "n = 2\nk = 2\nrefinements = 2\ndomain.length = 4.0\ndomain.cells = 12\ncoupling.a = -1.0\n\
         oracle.ground_energy = -10.0\ngates.ground_energy = 0.01\ngates.pair_deviation = 0.005\n",
    );
    let out = dir.path().join("out");
    let o = run("duality", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL ground_energy"), "{}", stderr(&o));
    let doc = report(&out, "duality");
    assert_eq!(doc["passed"], false);
    let gates = doc["gates"].as_array().unwrap();
    let verdicts: Vec<(&str, bool)> = gates
        .iter()
        .map(|g| (g["name"].as_str().unwrap(), g["passed"].as_bool().unwrap()))
        .collect();
    assert!(verdicts.contains(&("ground_energy", false)));
    assert!(verdicts.contains(&("pair_deviation", true)));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "n = 3\nsamples = 3\nseed = 11\ngates.residual = 1e-7\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        run("fold-check", &cfg, &a, &["--threads", "1"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run("fold-check", &cfg, &b, &["--threads", "3"])
            .status
            .code(),
        Some(0)
    );
    let (fa, fb) = (artifacts(&a), artifacts(&b));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);

    let cfg = write_config(dir.path(), "s.toml", SMALL_SPECTRUM);
    let (c, d) = (dir.path().join("c"), dir.path().join("d"));
    assert_eq!(
        run("spectrum", &cfg, &c, &["--threads", "1"]).status.code(),
        Some(0)
    );
    assert_eq!(
        run("spectrum", &cfg, &d, &["--threads", "2"]).status.code(),
        Some(0)
    );
    assert_eq!(artifacts(&c), artifacts(&d));
}

#[test]
fn seed_changes_random_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let one = write_config(dir.path(), "1.toml", "n = 2\nsamples = 2\nseed = 1\n");
    let two = write_config(dir.path(), "2.toml", "n = 2\nsamples = 2\nseed = 2\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("fold-check", &one, &a, &[]).status.code(), Some(0));
    assert_eq!(run("fold-check", &two, &b, &[]).status.code(), Some(0));
    assert_ne!(artifacts(&a), artifacts(&b));
}

#[test]
fn cache_hit_reproduces_a_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write_config(dir.path(), "c.toml", SMALL_SPECTRUM);
    let fresh = dir.path().join("fresh");
    assert_eq!(run("spectrum", &cfg, &fresh, &[]).status.code(), Some(0));
    let mut outs = Vec::new();
    for name in ["cold", "warm"] {
        let out = dir.path().join(name);
        let o = bin()
            .env(CACHE_ENV, &cache)
            .args(["spectrum", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outs.push(out);
    }
    let entries = fs::read_dir(&cache).unwrap().count();
    assert_eq!(entries, 3, "one cached spectrum per formulation");
    assert_eq!(artifacts(&fresh), artifacts(&outs[0]));
    assert_eq!(artifacts(&outs[0]), artifacts(&outs[1]));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let command: contact_duality::cli::Command = text
            .lines()
            .find_map(|l| l.strip_prefix("command = "))
            .map(|c| c.trim_matches('"').parse().unwrap())
            .expect("config names its command");
        let parsed = contact_duality::cli::ExperimentConfig::parse(command, &text);
        if path.file_stem().unwrap() == "delta-dirichlet" {
            assert!(parsed.is_err());
        } else {
            assert!(parsed.is_ok(), "{}: {:?}", path.display(), parsed.err());
        }
        seen += 1;
    }
    assert!(seen >= 10);
}
