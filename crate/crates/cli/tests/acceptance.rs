//! One PASS/FAIL line per acceptance criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use gk_base::par;
use gk_cli::modules;
use gk_cli::{run_pipeline, ExperimentConfig, ModuleOutput};
use num_traits::ToPrimitive;

struct Line {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

/// Checks whose id starts with `prefix`: (count, failing ids).
fn with_prefix(out: &ModuleOutput, prefix: &str) -> (usize, Vec<String>) {
    let sel: Vec<_> = out.checks.iter().filter(|c| c.id.starts_with(prefix)).collect();
    let bad = sel.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
    (sel.len(), bad)
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let base = ExperimentConfig::default();

    // 1. Stage algebra on stages 0..3.
    let cfg3 = ExperimentConfig {
        stages: 3,
        ..base.clone()
    };
    let ((chain3, stages_out), t1) = timed(|| {
        let chain = modules::build_chain(&cfg3).unwrap();
        let out = modules::run_stages(&chain);
        (chain, out)
    });
    let (n1, bad1) = with_prefix(&stages_out, "stages.");
    lines.push(Line {
        id: 1,
        name: "stage algebra",
        passed: chain3.len() == 4 && n1 == 4 * 6 && bad1.is_empty() && t1.as_secs() <= 60,
        detail: format!("{n1} exact checks on stages 0..3, failing {bad1:?}, {t1:.2?}"),
    });

    // 2. Torus witness at t ≤ 3.
    let chain2 = &chain3[..3];
    let (torus, t2) = timed(|| modules::run_torus(chain2).unwrap());
    let small = chain2
        .iter()
        .filter(|l| l.witness.is_some() && l.stage.t <= 3)
        .count();
    let (n2, bad2) = with_prefix(&torus, "torus.n1.witness");
    lines.push(Line {
        id: 2,
        name: "torus condition",
        passed: small >= 1 && n2 == 2 && bad2.is_empty() && t2.as_secs() <= 120,
        detail: format!(
            "{small} witness stage(s) with t ≤ 3, re-certified at half resolution, failing {bad2:?}, {t2:.2?}"
        ),
    });

    // 3 and 4. k search and support containment.
    let (kron, _) = timed(|| modules::run_kronecker(&cfg3, &chain3).unwrap());
    let (n3, bad3) = with_prefix(&kron, "kronecker.target");
    let (_, bad3p) = with_prefix(&kron, "kronecker.probe.condition6");
    lines.push(Line {
        id: 3,
        name: "Kronecker bound",
        passed: n3 == 100 && bad3.is_empty() && bad3p.is_empty(),
        detail: format!(
            "{n3} random targets vs exhaustive k oracle at a condition-6 stage, {} failures",
            bad3.len() + bad3p.len()
        ),
    });
    let (n4, bad4) = with_prefix(&kron, "kronecker.support.");
    lines.push(Line {
        id: 4,
        name: "support containment",
        // pairs n ≤ m over stages 1..3
        passed: n4 == 6 && bad4.is_empty(),
        detail: format!("{n4} (n, m) pairs over stages 1..3, failing {bad4:?}"),
    });

    // 5 and 6. Wiener covariance and symbol dynamics.
    let stages2: Vec<_> = chain2.iter().map(|l| l.stage.clone()).collect();
    let (wiener, t5) = timed(|| modules::run_wiener(&base, &stages2, None).unwrap());
    let (n5, bad5) = with_prefix(&wiener, "wiener.cov.");
    lines.push(Line {
        id: 5,
        name: "Wiener covariance",
        passed: base.wiener.paths == 100_000
            && base.wiener.measures.len() == 3
            && n5 == 27
            && bad5.is_empty()
            && t5.as_secs() <= 120,
        detail: format!("{n5} (measure, p) pairs within 3 SE, failing {bad5:?}, {t5:.2?}"),
    });
    let (n6, bad6) = with_prefix(&wiener, "wiener.shift.");
    let shift_q = &wiener.data["shift_stage"]["q"];
    let excluded: Vec<_> = wiener.data["shift_law"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["excluded_fraction"].as_f64().unwrap())
        .collect();
    let q6: u64 = shift_q.as_str().unwrap().parse().unwrap();
    lines.push(Line {
        id: 6,
        name: "symbol dynamics",
        passed: q6 <= 8 && n6 >= 1 && bad6.is_empty(),
        detail: format!(
            "{n6} powers at q_n = {q6}, agreement ≥ 0.9999, excluded fractions {excluded:?}"
        ),
    });

    // 7 and 8. Diagram, stacking and certificates.
    let (diagram, _) = timed(|| modules::run_diagram(&base).unwrap());
    let (s1, _) = modules::tiny_pair(&base.diagram.tiny).unwrap();
    let (n7a, bad7a) = with_prefix(&diagram, "diagram.square.");
    let (n7b, bad7b) = with_prefix(&diagram, "diagram.stacking.");
    let qmax = base.diagram.stacking_q.iter().max().copied().unwrap_or(0);
    lines.push(Line {
        id: 7,
        name: "diagram commutation",
        passed: s1.q.to_u64().unwrap() <= 3
            && s1.t <= 2
            && n7a >= 1
            && n7b >= 1
            && qmax <= 60
            && bad7a.is_empty()
            && bad7b.is_empty(),
        detail: format!(
            "square at q_n = {}, t_n = {}: {n7a} checks; stacking: {n7b} (q, b) cases up to q = {qmax}; failing {:?}",
            s1.q,
            s1.t,
            [bad7a, bad7b].concat()
        ),
    });
    let (n8, bad8) = with_prefix(&diagram, "diagram.p0.");
    let (n8e, bad8e) = with_prefix(&diagram, "diagram.eta_prime.");
    let feas = &diagram.data["feasible"];
    lines.push(Line {
        id: 8,
        name: "P0 certificate",
        passed: n8 == 1 && n8e == 1 && bad8.is_empty() && bad8e.is_empty(),
        detail: format!(
            "q = {}: measure ≥ {} (target {}), η′ distance ≤ {} (target {})",
            feas["q"].as_str().unwrap(),
            feas["p0"]["lower_bound"].as_str().unwrap(),
            feas["p0"]["target"].as_str().unwrap(),
            feas["eta_prime"]["distance_bound"].as_str().unwrap(),
            feas["eta_prime"]["target"].as_str().unwrap(),
        ),
    });

    // 9. Conjugacy.
    let (conj, _) = timed(|| modules::run_conjugacy(&base, None, None).unwrap());
    let mut bad9 = Vec::new();
    for id in ["conjugacy.a.equivariance", "conjugacy.a.jacobian", "conjugacy.a.transport"] {
        let (n, b) = with_prefix(&conj, id);
        if n != 1 {
            bad9.push(format!("{id} missing"));
        }
        bad9.extend(b);
    }
    let (n9, bad9g) = with_prefix(&conj, "conjugacy.gap.");
    bad9.extend(bad9g);
    let r = &conj.data["report"];
    lines.push(Line {
        id: 9,
        name: "conjugacy properties",
        passed: n9 >= 20 && bad9.is_empty(),
        detail: format!(
            "equivariance {:e}, Jacobian dev {:e}, transport {} (eps {}); gap on {n9} random maps; failing {bad9:?}",
            r["equivariance_residual"].as_f64().unwrap(),
            r["jacobian_max_dev"].as_f64().unwrap(),
            r["transport_fraction"].as_f64().unwrap(),
            r["eps"].as_f64().unwrap(),
        ),
    });

    // 10. Determinism across runs and worker counts.
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    let mut codes = Vec::new();
    for (k, w) in [1usize, 8].into_iter().enumerate() {
        let cfg = ExperimentConfig {
            out: dir.path().join(format!("run{k}")),
            ..base.clone()
        };
        let o = par::with_workers(w, || run_pipeline(&cfg, false).unwrap());
        codes.push(o.exit_code());
        outs.push(files(&cfg.out));
    }
    let same = outs[0] == outs[1];
    let differing: Vec<_> = outs[0]
        .iter()
        .filter(|(k, v)| outs[1].get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    lines.push(Line {
        id: 10,
        name: "determinism",
        passed: same && outs[0].len() > 10 && codes == [0, 0],
        detail: format!(
            "{} files byte-identical at 1 and 8 workers (exit codes {codes:?}); differing {differing:?}",
            outs[0].len()
        ),
    });

    for l in &lines {
        println!(
            "criterion {:>2} {:<22} {}  {}",
            l.id,
            l.name,
            if l.passed { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failing criteria {failed:?}");
}
