use std::path::Path;
use std::process::{Command, Output};

use gk_cli::modules::{read_grid_dump, tiny_pair, StagePair};
use gk_cli::pipeline::PipelineOutcome;
use gk_cli::{Check, ExperimentConfig, ModuleOutput, Stamp};
use wiener_sim::PathEnsemble;

fn gk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn q_cap_of_one_exits_2_and_names_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"caps": {"q_cap": "1"}}"#);
    let out = dir.path().join("out");
    let o = gk(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("caps.q_cap"), "{err}");
    assert!(err.contains("hint"), "{err}");
    assert!(!out.exists());
}

#[test]
fn nonpositive_caps_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"caps": {"q_cap": "0"}}"#,
        r#"{"caps": {"max_paths": 0}}"#,
        r#"{"caps": {"max_grid_nodes": 0}}"#,
    ] {
        let cfg = write(dir.path(), "c.json", body);
        let o = gk(&["stages", "--config", &cfg, "--check-only"]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let cfg = write(dir.path(), "c.json", r#"{"caps": {"max_paths": 10}}"#);
    let o = gk(&["wiener", "--config", &cfg, "--check-only"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("caps.max_paths"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{ not json");
    assert_eq!(gk(&["stages", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn stages_writes_stamped_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = gk(&["stages", "--stages", "3", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("stage_conditions.csv")).unwrap();
    let mut lines = csv.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# config_hash=") && head.ends_with(" seed=5"), "{head}");
    assert_eq!(lines.clone().count(), 5);
    assert!(lines.skip(1).all(|l| !l.contains("false")));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("stages.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    assert!(json["config_hash"].as_str().unwrap().len() == 64);
    // Decimal strings, not truncated integers.
    let q3 = json["data"]["chain"][3]["stage"]["q"].as_str().unwrap();
    assert!(q3.len() > 400);
}

#[test]
fn check_only_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = gk(&["stages", "--check-only", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn torus_vector_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = gk(&[
        "torus", "--vector", "1/3,2/5", "--q", "15", "--resolution", "1/60", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("torus_orbit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 15);
    assert!(csv.contains("\n1,1/3;2/5\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("torus.json")).unwrap()).unwrap();
    // The orbit {k(1/3, 2/5)} is the lattice generated by (1/15)(5, 6): a
    // 15-point subgroup, so the radius is at least 1/(2·15^(1/2)) ~ 0.129.
    let r = gk_base::parse_q(json["data"]["covering_radius_bound"].as_str().unwrap()).unwrap();
    assert!(gk_base::to_f64(&r) >= 0.129 && gk_base::to_f64(&r) <= 0.5);
    assert_eq!(gk(&["torus", "--vector", "1/3,x", "--q", "3", "--check-only"]).status.code(), Some(2));
}

#[test]
fn wiener_stage_file_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let (s1, _) = tiny_pair(&Default::default()).unwrap();
    let sf = write(dir.path(), "s.json", &serde_json::to_string(&s1).unwrap());
    let dump = dir.path().join("ens.bin");
    let out = dir.path().join("o");
    let o = gk(&[
        "wiener", "--stage-file", &sf, "--paths", "4000", "--depth", "3", "--dump-ensemble",
        dump.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ens = PathEnsemble::read_from(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!(ens, wiener_sim::sample_paths(3, 4000, 0).unwrap());
    let cov = std::fs::read_to_string(out.join("wiener_covariance.csv")).unwrap();
    assert_eq!(cov.lines().count(), 2 + 9);
    assert!(cov.lines().skip(2).all(|l| l.starts_with("stage1,")));
}

#[test]
fn conjugacy_grid_dump_layout() {
    let dir = tempfile::tempdir().unwrap();
    let (prev, next) = tiny_pair(&Default::default()).unwrap();
    let pair = StagePair { prev, next };
    let sf = write(dir.path(), "pair.json", &serde_json::to_string(&pair).unwrap());
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"conjugacy": {"assemble": {"res": 6, "norm_samples": 256},
            "volume_boxes": 5, "volume_samples": 20000, "gap_maps": 1, "gap_dims": [2]}}"#,
    );
    let dump = dir.path().join("grid.bin");
    let o = gk(&[
        "conjugacy", "--config", &cfg, "--stage-file", &sf, "--dump-grid",
        dump.to_str().unwrap(), "--check-only",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&dump).unwrap();
    assert_eq!(&bytes[..8], b"GKGRID1\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
    let (res, images) = read_grid_dump(&bytes).unwrap();
    assert_eq!(res, vec![6; 4]);
    assert_eq!(images.len(), 6usize.pow(4) * 4);
    assert_eq!(bytes.len(), 8 + 4 + 4 * 4 + images.len() * 8);
    assert!(images.iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn oversized_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"caps": {"max_grid_nodes": 100}}"#);
    let o = gk(&["conjugacy", "--config", &cfg, "--check-only"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("caps.max_grid_nodes"));
}

#[test]
fn failing_checks_give_exit_1_and_ids() {
    let mut m = ModuleOutput::new("demo");
    m.checks.push(Check::new("demo.ok", true, ""));
    m.checks.push(Check::new("demo.bad", false, "x"));
    let outcome = PipelineOutcome {
        modules: vec![m],
        stamp: Stamp {
            config_hash: String::new(),
            seed: 0,
        },
    };
    assert_eq!(outcome.exit_code(), 1);
    assert_eq!(outcome.failures(), vec!["demo.bad".to_string()]);
}

#[test]
fn config_roundtrip_and_hash() {
    let c = ExperimentConfig::default();
    let text = serde_json::to_string(&c).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let moved = ExperimentConfig {
        out: "elsewhere".into(),
        ..c.clone()
    };
    assert_eq!(moved.hash(), c.hash());
    let reseeded = ExperimentConfig { seed: 1, ..c.clone() };
    assert_ne!(reseeded.hash(), c.hash());
    // Partial configs fill in defaults.
    let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
    assert_eq!(partial, ExperimentConfig { seed: 3, ..c });
}
