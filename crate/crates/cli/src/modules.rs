//! One runner per module. Each returns its checks, a JSON payload and its
//! CSV tables; none of them writes files.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use gk_base::{fmt_q, frac, parse_q, q, torus_dist, Q, Z};
use kronecker_set::{
    kronecker_best, kronecker_nearest, kronecker_solve, level_lefts, level_set, stage_measure,
    AtomicMeasure, IntervalSet,
};
use num_traits::{One, ToPrimitive, Zero};
use partition_algebra::{
    eta_prime_bound, index_permutation, lemma_square, minimal_feasible_d, p0_certificate,
    stacking, Budgets, HorizontalParams, Refinement,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use smooth_conjugacy::{
    assemble_a, calibrated_c, compose_t, convergence_gap, image_volumes, period_of,
    periodicity_residual, random_alphas, random_boxes, random_test_map, Diffeo, GridDiffeo,
    MAX_DIMS,
};
use stage_gen::{
    check_stage, expand_b, init_stage, next_stage, ExponentRule, GrowthPolicy, Perturbation,
    StageParams,
};
use torus_geometry::chain::{extend, witness_target, ChainLink};
use torus_geometry::{
    candidate_orbit, covering_radius, orbit, stage_vector, TorusVector,
};
use wiener_sim::{covariance_check, sample_paths, shift_law, stage_shifts, RotationSpec};

use crate::config::{ExperimentConfig, MeasureSpec, TinyPairConfig};
use crate::output::{f, to_value, ModuleOutput, Table};
use crate::CliError;

fn join(v: &[Z]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Decimal form, abbreviated to a digit count past 40 digits.
fn short(z: &Z) -> String {
    let s = z.to_string();
    if s.len() <= 40 {
        s
    } else {
        format!("{}… ({} digits)", &s[..12], s.len())
    }
}

fn yes(b: bool) -> String {
    b.to_string()
}

// ---------------------------------------------------------------- stages

/// Stages `0..=cfg.stages`, stopping with exit 2 as soon as a stage
/// exceeds `caps.q_cap`.
pub fn build_chain(cfg: &ExperimentConfig) -> Result<Vec<ChainLink>, CliError> {
    let s0 = init_stage();
    let report = check_stage(&s0, None, &cfg.policy)?;
    let mut chain = vec![ChainLink {
        stage: s0,
        trace: None,
        witness: None,
        report,
        condition6: None,
    }];
    for _ in 0..cfg.stages {
        let prev = &chain.last().expect("nonempty").stage;
        let link = extend(prev, &cfg.policy, &cfg.witness)?;
        if link.stage.q > cfg.caps.q_cap {
            return Err(CliError::infeasible(
                "caps.q_cap",
                format!(
                    "stage {} has q = {}, above the cap {}",
                    link.stage.n,
                    short(&link.stage.q),
                    short(&cfg.caps.q_cap)
                ),
                "raise caps.q_cap or lower --stages",
            ));
        }
        chain.push(link);
    }
    Ok(chain)
}

/// `a_i b_i = 1 + s_i q` for every index, recomputed here.
pub fn unimodular(st: &StageParams) -> bool {
    (0..st.t).all(|i| &st.a[i] * &st.b[i] == Z::one() + &st.s[i] * &st.q)
}

pub fn run_stages(chain: &[ChainLink]) -> ModuleOutput {
    let mut out = ModuleOutput::new("stages");
    let mut stages = Table::new("stages", &["n", "t", "p", "q", "a", "b", "s"]);
    let mut conds = Table::new(
        "stage_conditions",
        &[
            "n",
            "temporal",
            "primality",
            "monotonicity",
            "isomorphism",
            "convergence",
            "unimodular",
        ],
    );
    for link in chain {
        let st = &link.stage;
        let r = &link.report;
        let n = st.n;
        let names = ["temporal", "primality", "monotonicity", "isomorphism", "convergence"];
        for (name, ok) in names.iter().zip(r.as_array()) {
            out.check(format!("stages.n{n}.{name}"), ok, "");
        }
        let uni = unimodular(st);
        out.check(
            format!("stages.n{n}.unimodular"),
            uni,
            format!("a_i b_i = 1 + s_i q over {} indices", st.t),
        );
        stages.push(vec![
            n.to_string(),
            st.t.to_string(),
            st.p.to_string(),
            st.q.to_string(),
            join(&st.a),
            join(&st.b),
            join(&st.s),
        ]);
        let mut row = vec![n.to_string()];
        row.extend(r.as_array().iter().map(|&b| yes(b)));
        row.push(yes(uni));
        conds.push(row);
    }
    out.data = json!({ "chain": chain });
    out.tables = vec![stages, conds];
    out
}

// ----------------------------------------------------------------- torus

/// Re-certifies every witness of the chain at half its resolution, and
/// reports the condition-6 certificates.
pub fn run_torus(chain: &[ChainLink]) -> Result<ModuleOutput, CliError> {
    let mut out = ModuleOutput::new("torus");
    let mut radius = Table::new(
        "torus_witness",
        &["n", "t", "target", "resolution", "certified", "recomputed", "holds"],
    );
    let mut orbit_t = Table::new("torus_orbit", &["n", "k", "point"]);
    let mut c6 = Vec::new();
    for w in chain.windows(2) {
        let (prev, link) = (&w[0].stage, &w[1]);
        let n = link.stage.n;
        if let Some(wit) = &link.witness {
            let target = witness_target(prev.n);
            let b = torus_geometry::candidate_weights(
                &expand_b(prev, link.stage.t),
                &prev.q,
                &wit.perturbation,
            );
            let pts = candidate_orbit(&b, &wit.p_candidate, &wit.q_candidate)?;
            let half = &wit.resolution / Q::from_integer(Z::from(2));
            let again = covering_radius(&pts, &half)?;
            let ok = again <= &target + &wit.resolution;
            out.check(
                format!("torus.n{n}.witness"),
                ok,
                format!(
                    "radius {} at resolution {} vs target {} + {}",
                    fmt_q(&again),
                    fmt_q(&half),
                    fmt_q(&target),
                    fmt_q(&wit.resolution)
                ),
            );
            let same = b == link.stage.b && wit.q_candidate == link.stage.q;
            out.check(format!("torus.n{n}.witness_is_stage"), same, "");
            radius.push(vec![
                n.to_string(),
                link.stage.t.to_string(),
                fmt_q(&target),
                fmt_q(&wit.resolution),
                fmt_q(&wit.certified_diameter),
                fmt_q(&again),
                yes(ok),
            ]);
            for (k, p) in pts.iter().enumerate() {
                orbit_t.push(vec![n.to_string(), k.to_string(), fmt_vec(p.coords())]);
            }
        }
        match &link.condition6 {
            Some(c) => {
                out.check(
                    format!("torus.n{n}.condition6"),
                    c.holds,
                    format!("2 * {} < 1/{n}", fmt_q(&c.radius)),
                );
                c6.push(json!({ "n": n, "certified": true, "radius": fmt_q(&c.radius),
                    "resolution": fmt_q(&c.resolution), "holds": c.holds }));
            }
            None => c6.push(json!({ "n": n, "certified": false })),
        }
    }
    out.data = json!({
        "witnesses": chain.iter().map(|l| &l.witness).collect::<Vec<_>>(),
        "condition6": c6,
    });
    out.tables = vec![radius, orbit_t];
    Ok(out)
}

fn fmt_vec(v: &[Q]) -> String {
    v.iter().map(fmt_q).collect::<Vec<_>>().join(";")
}

/// Orbit of one vector and its covering-radius bound.
pub fn run_torus_vector(coords: Vec<Q>, qq: &Z, resolution: &Q) -> Result<ModuleOutput, CliError> {
    let mut out = ModuleOutput::new("torus");
    let v = TorusVector::new(coords);
    let pts = orbit(&v, qq)?;
    let r = covering_radius(&pts, resolution)?;
    let mut t = Table::new("torus_orbit", &["k", "point"]);
    for (k, p) in pts.iter().enumerate() {
        t.push(vec![k.to_string(), fmt_vec(p.coords())]);
    }
    out.data = json!({
        "vector": fmt_vec(v.coords()),
        "q": qq.to_string(),
        "resolution": fmt_q(resolution),
        "covering_radius_bound": fmt_q(&r),
    });
    out.tables = vec![t];
    Ok(out)
}

// ------------------------------------------------------------- kronecker

/// The probe stage: `b = (1, b_1)` with the least `b_1` whose orbit
/// certifies condition 6 at the configured resolution.
pub fn probe_stage(cfg: &ExperimentConfig) -> Result<(StageParams, Q), CliError> {
    let k = &cfg.kronecker;
    let res = q(1, k.probe_resolution as i64);
    for b1 in 2..k.probe_q {
        let Ok(st) = StageParams::from_rotation(
            k.probe_n,
            Z::from(k.probe_p),
            Z::from(k.probe_q),
            vec![Z::one(), Z::from(b1)],
        ) else {
            continue;
        };
        let pts = orbit(&stage_vector(&st), &st.q)?;
        let r = covering_radius(&pts, &res)?;
        if Q::from_integer(Z::from(2)) * &r < Q::new(Z::one(), Z::from(st.n)) {
            return Ok((st, r));
        }
    }
    Err(CliError::infeasible(
        "kronecker.probe_q",
        format!("no b_1 < {} certifies condition 6 at n = {}", k.probe_q, k.probe_n),
        "raise kronecker.probe_q or lower kronecker.probe_n",
    ))
}

/// Smallest `k` meeting `tol` and the `k` of least bound, by exhaustive
/// search in exact rationals.
pub fn kronecker_oracle(st: &StageParams, z: &[Q], tol: &Q) -> (Option<u64>, u64) {
    let qn = st.q.to_u64().expect("probe q fits");
    let len = Q::new(Z::one(), Z::from(st.n) * &st.q);
    let rot = Q::new(st.p.clone(), st.q.clone());
    let mut first = None;
    let mut best: Option<(Q, u64)> = None;
    for k in 0..qn {
        let kz = Q::from_integer(Z::from(k));
        let pw = st
            .b
            .iter()
            .zip(z)
            .map(|(b, zi)| torus_dist(&frac(&(&kz * &rot * Q::from_integer(b.clone()))), zi))
            .max()
            .unwrap_or_else(Q::zero);
        let bound = pw + &len * &kz;
        if first.is_none() && &bound <= tol {
            first = Some(k);
        }
        if best.as_ref().is_none_or(|(b, _)| &bound < b) {
            best = Some((bound, k));
        }
    }
    (first, best.map(|b| b.1).unwrap_or(0))
}

pub fn run_kronecker(cfg: &ExperimentConfig, chain: &[ChainLink]) -> Result<ModuleOutput, CliError> {
    let mut out = ModuleOutput::new("kronecker");
    let kc = &cfg.kronecker;

    // Level sets and support containment.
    let mut levels = Table::new("kronecker_levels", &["n", "i", "left", "right"]);
    let mut sets: Vec<(u32, IntervalSet)> = Vec::new();
    for link in chain.iter().skip(1) {
        let st = &link.stage;
        let len = Q::new(Z::one(), Z::from(st.n) * &st.q);
        for (i, x) in level_lefts(st).iter().enumerate() {
            levels.push(vec![st.n.to_string(), i.to_string(), fmt_q(x), fmt_q(&(x + &len))]);
        }
        sets.push((st.n, level_set(st)?));
    }
    let mut support = Vec::new();
    for (n, l) in &sets {
        for link in chain.iter().filter(|k| k.stage.n >= *n) {
            let m = link.stage.n;
            let mu = stage_measure(&link.stage)?;
            let outside = mu.atoms().iter().filter(|a| !l.contains(&a.position)).count();
            out.check(
                format!("kronecker.support.n{n}.m{m}"),
                outside == 0,
                format!("{outside} of {} atoms outside L_{n}", mu.atoms().len()),
            );
            support.push(json!({ "n": n, "m": m, "atoms": mu.atoms().len(), "outside": outside }));
        }
    }

    // k search at the probe stage.
    let (st, radius) = probe_stage(cfg)?;
    out.check(
        "kronecker.probe.condition6",
        Q::from_integer(Z::from(2)) * &radius < Q::new(Z::one(), Z::from(st.n)),
        format!("covering radius {} at n = {}", fmt_q(&radius), st.n),
    );
    let tol = Q::new(Z::from(2), Z::from(st.n));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6b72_6f6e);
    let mut search = Table::new(
        "kronecker_search",
        &[
            "target", "z", "k", "oracle_k", "error_bound", "sup_error", "best_k", "oracle_best_k",
            "nearest_pointwise",
        ],
    );
    let mut solutions = Vec::new();
    for j in 0..kc.targets {
        let z: Vec<Q> = (0..st.t)
            .map(|_| {
                let c = rng.random_range(0..kc.target_denominator);
                Q::new(Z::from(c), Z::from(kc.target_denominator))
            })
            .collect();
        let targets: Vec<(usize, Q)> = z.iter().cloned().enumerate().collect();
        let sol = kronecker_solve(&targets, &st, &tol)?;
        let best = kronecker_best(&targets, &st)?;
        let near = kronecker_nearest(&targets, &st)?;
        let (first, arg) = kronecker_oracle(&st, &z, &tol);
        let ok = Some(sol.k) == first
            && sol.error_bound <= tol
            && sol.sup_error <= sol.error_bound
            && best.k == arg
            && near.pointwise <= radius;
        out.check(
            format!("kronecker.target{j}"),
            ok,
            format!(
                "k = {} (oracle {first:?}), error {} ≤ {}",
                sol.k,
                fmt_q(&sol.error_bound),
                fmt_q(&tol)
            ),
        );
        search.push(vec![
            j.to_string(),
            fmt_vec(&z),
            sol.k.to_string(),
            first.map(|k| k.to_string()).unwrap_or_default(),
            fmt_q(&sol.error_bound),
            fmt_q(&sol.sup_error),
            best.k.to_string(),
            arg.to_string(),
            fmt_q(&near.pointwise),
        ]);
        solutions.push(json!({ "solve": sol, "best": best, "nearest": near }));
    }
    out.data = json!({
        "probe_stage": st,
        "probe_radius": fmt_q(&radius),
        "tolerance": fmt_q(&tol),
        "support": support,
        "solutions": solutions,
    });
    out.tables = vec![levels, search];
    Ok(out)
}

// ---------------------------------------------------------------- wiener

fn measure_spec(
    m: &MeasureSpec,
    stages: &[StageParams],
) -> Result<(String, RotationSpec), CliError> {
    match m {
        MeasureSpec::Stage { n } => {
            let st = stages.iter().find(|s| s.n == *n).ok_or_else(|| {
                CliError::Config(format!("measure names stage {n}, which is not built"))
            })?;
            Ok((format!("stage{n}"), RotationSpec::from_stage(st)?))
        }
        MeasureSpec::Atoms { atoms } => {
            let parsed = atoms
                .iter()
                .map(|(x, w)| Ok((parse_q(x)?, parse_q(w)?)))
                .collect::<Result<Vec<_>, gk_base::ParseRationalError>>()
                .map_err(|e| CliError::Config(format!("atom: {e}")))?;
            let label = format!(
                "atoms[{}]",
                atoms.iter().map(|(x, w)| format!("{x}@{w}")).collect::<Vec<_>>().join(",")
            );
            let mu = AtomicMeasure::new(parsed).map_err(|e| CliError::Config(e.to_string()))?;
            Ok((label, RotationSpec::from_measure(&mu)?))
        }
    }
}

/// Covariance of the stationary process on every configured measure and
/// the shift law of the sector symbols on the first stage with
/// `q ≤ shift_q_max`. `dump` receives the main ensemble.
pub fn run_wiener(
    cfg: &ExperimentConfig,
    stages: &[StageParams],
    dump: Option<&Path>,
) -> Result<ModuleOutput, CliError> {
    let wc = &cfg.wiener;
    let mut out = ModuleOutput::new("wiener");
    let ens = sample_paths(wc.depth, wc.paths, cfg.seed)?;
    if let Some(p) = dump {
        let file = std::fs::File::create(p)
            .map_err(|e| CliError::Internal(format!("{}: {e}", p.display())))?;
        let mut w = std::io::BufWriter::new(file);
        ens.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Internal(format!("{}: {e}", p.display())))?;
    }
    let mut cov = Table::new(
        "wiener_covariance",
        &["measure", "p", "empirical", "std_error", "analytic", "z_score", "within_3se"],
    );
    let mut reports = Vec::new();
    for m in &wc.measures {
        let (label, spec) = measure_spec(m, stages)?;
        for p in 0..=wc.max_power {
            let r = covariance_check(&ens, &spec, p)?;
            let ok = r.z_score <= 3.0;
            out.check(
                format!("wiener.cov.{label}.p{p}"),
                ok,
                format!("z = {:.3}", r.z_score),
            );
            cov.push(vec![
                label.clone(),
                p.to_string(),
                f(r.empirical),
                f(r.std_error),
                f(r.analytic),
                f(r.z_score),
                yes(ok),
            ]);
            reports.push(json!({ "measure": label, "report": r }));
        }
    }

    let st = stages
        .iter()
        .find(|s| s.n >= 1 && s.q <= Z::from(wc.shift_q_max))
        .ok_or_else(|| {
            CliError::infeasible(
                "wiener.shift_q_max",
                format!("no built stage with q ≤ {}", wc.shift_q_max),
                "raise wiener.shift_q_max or include stage 1",
            )
        })?;
    let spec = RotationSpec::from_stage(st)?;
    let shifts = stage_shifts(st)?;
    let qn = st.q.to_u64().expect("q below shift_q_max");
    let ens2 = sample_paths(wc.shift_depth, wc.shift_paths, cfg.seed.wrapping_add(1))?;
    let mut shift = Table::new(
        "wiener_shift",
        &["n", "power", "pieces", "excluded", "mismatches", "agreement", "excluded_fraction"],
    );
    let mut shift_reports = Vec::new();
    for &power in &wc.shift_powers {
        let r = shift_law(&ens2, &spec, qn, &shifts, power)?;
        let ok = r.agreement >= 0.9999;
        out.check(
            format!("wiener.shift.n{}.p{power}", st.n),
            ok,
            format!(
                "agreement {:.6}, {} of {} pieces excluded",
                r.agreement, r.excluded, r.pieces
            ),
        );
        shift.push(vec![
            st.n.to_string(),
            power.to_string(),
            r.pieces.to_string(),
            r.excluded.to_string(),
            r.mismatches.to_string(),
            f(r.agreement),
            f(r.excluded_fraction),
        ]);
        shift_reports.push(r);
    }
    out.data = json!({
        "paths": wc.paths,
        "depth": wc.depth,
        "covariance": reports,
        "shift_stage": st,
        "shifts": shifts,
        "shift_law": shift_reports,
    });
    out.tables = vec![cov, shift];
    Ok(out)
}

// --------------------------------------------------------------- diagram

/// The small consecutive pair used by the partition and conjugacy checks.
pub fn tiny_pair(cfg: &TinyPairConfig) -> Result<(StageParams, StageParams), CliError> {
    let first = GrowthPolicy {
        d_min: cfg.d_min_first,
        ..GrowthPolicy::default()
    };
    let s1 = next_stage(&init_stage(), &first, &Perturbation::trivial(2))?;
    let second = GrowthPolicy {
        t_exponent: ExponentRule::Constant { value: 1 },
        d_min: cfg.d_min_second,
        ..GrowthPolicy::default()
    };
    let s2 = next_stage(&s1, &second, &Perturbation::trivial(2 * s1.t))?;
    Ok((s1, s2))
}

pub fn run_diagram(cfg: &ExperimentConfig) -> Result<ModuleOutput, CliError> {
    let dc = &cfg.diagram;
    let mut out = ModuleOutput::new("diagram");
    let (s1, s2) = tiny_pair(&dc.tiny)?;

    let rf = Refinement::new(&s1, &s2, init_stage().t)?;
    let sq = lemma_square(&rf)?;
    for m in &sq.maps {
        out.check(format!("diagram.square.map.{}", m.name), m.passed(), "");
    }
    out.check(
        "diagram.square.commutes",
        sq.diagram.commutes,
        match &sq.diagram.counterexample {
            Some(l) => format!("counterexample label {l:?}"),
            None => format!("{} labels", sq.diagram.labels),
        },
    );
    out.check("diagram.square.classes_equivariant", sq.classes_equivariant, "");
    out.check("diagram.square.tilde_equivariant", sq.tilde_equivariant, "");
    out.check(
        "diagram.square.family_measures_uniform",
        sq.family_measures_uniform,
        "",
    );

    let mut stack = Table::new("diagram_stacking", &["q", "b", "child", "widths", "all_equal"]);
    let mut stack_data = Vec::new();
    for &qn in &dc.stacking_q {
        for bw in &dc.stacking_b {
            let b: Vec<Z> = bw.iter().map(|&x| Z::from(x)).collect();
            let Ok(st) = StageParams::from_rotation(2, Z::one(), Z::from(qn), b) else {
                continue;
            };
            let mut failure = None;
            for i in 0..st.t {
                let mut all = true;
                for v in 1..=qn {
                    let rep = stacking(&st, i, &Z::from(v))?;
                    if !rep.union_equal() && failure.is_none() {
                        failure = Some((i, v, rep.first_mismatch));
                    }
                    all &= rep.union_equal();
                }
                stack.push(vec![
                    qn.to_string(),
                    format!("{};{}", bw[0], bw[1]),
                    i.to_string(),
                    qn.to_string(),
                    yes(all),
                ]);
            }
            out.check(
                format!("diagram.stacking.q{qn}.b{}_{}", bw[0], bw[1]),
                failure.is_none(),
                match failure {
                    Some((i, v, j0)) => format!("child {i}, v = {v}, start {j0:?}"),
                    None => format!("{} children, v = 1..={qn}", st.t),
                },
            );
            stack_data.push(json!({ "q": qn, "b": bw, "failure": failure }));
        }
    }

    // Certificates at the smallest feasible q after s1.
    let t_next = s1.t * 2;
    let b_next = expand_b(&s1, t_next);
    let bud = Budgets::default_for(s1.n, s1.t);
    let (d, q_min) = minimal_feasible_d(&s1, &b_next, &bud)?;
    let coord = index_permutation(s1.t, t_next)?;
    let hp = HorizontalParams::derive(s1.n, &s1.q, s1.t, &b_next, &[], &q_min, coord, &bud)?;
    let cert = p0_certificate(&hp, &bud.eps0);
    let p0_ok = cert.holds && cert.lower_bound >= Q::one() - &bud.eps0;
    out.check(
        "diagram.p0.measure",
        p0_ok,
        format!("μ ≥ {} vs 1 − ε'_0 = {}", fmt_q(&cert.lower_bound), fmt_q(&cert.target)),
    );
    let eb = eta_prime_bound(&hp);
    let target = Q::new(Z::one(), Z::one() << s1.n as usize);
    let eta_ok = eb.holds && eb.distance_bound <= target;
    out.check(
        "diagram.eta_prime.distance",
        eta_ok,
        format!("{} ≤ {}", fmt_q(&eb.distance_bound), fmt_q(&target)),
    );
    let mut certs = Table::new("diagram_certificates", &["name", "value", "target", "holds"]);
    certs.push(vec![
        "p0_measure".into(),
        fmt_q(&cert.lower_bound),
        fmt_q(&cert.target),
        yes(p0_ok),
    ]);
    certs.push(vec![
        "eta_prime_distance".into(),
        fmt_q(&eb.distance_bound),
        fmt_q(&target),
        yes(eta_ok),
    ]);

    out.data = json!({
        "pair": [s1, s2],
        "square": sq,
        "stacking": stack_data,
        "feasible": { "d": d.to_string(), "q": q_min.to_string(), "params": hp,
            "p0": cert, "eta_prime": eb },
    });
    out.tables = vec![stack, certs];
    Ok(out)
}

// ------------------------------------------------------------- conjugacy

/// A stage pair as read from `--stage-file`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StagePair {
    pub prev: StageParams,
    pub next: StageParams,
}

pub fn run_conjugacy(
    cfg: &ExperimentConfig,
    pair: Option<&StagePair>,
    dump: Option<&Path>,
) -> Result<ModuleOutput, CliError> {
    let cc = &cfg.conjugacy;
    let mut out = ModuleOutput::new("conjugacy");
    let (prev, next) = match pair {
        Some(p) => (p.prev.clone(), p.next.clone()),
        None => tiny_pair(&cfg.diagram.tiny)?,
    };
    let dims = next.t.min(MAX_DIMS);
    let nodes = (cc.assemble.res as u128).pow(dims as u32);
    if nodes > cfg.caps.max_grid_nodes as u128 {
        return Err(CliError::infeasible(
            "caps.max_grid_nodes",
            format!("{}^{dims} = {nodes} nodes", cc.assemble.res),
            "lower conjugacy.assemble.res or raise caps.max_grid_nodes",
        ));
    }
    let asm = assemble_a(&prev, &next.a, &cc.assemble)?;
    let r = &asm.report;
    out.check(
        "conjugacy.a.equivariance",
        r.equivariance_residual <= 1e-9,
        format!("{:e}", r.equivariance_residual),
    );
    out.check(
        "conjugacy.a.jacobian",
        r.jacobian_max_dev <= 1e-3,
        format!("{:e}", r.jacobian_max_dev),
    );
    out.check(
        "conjugacy.a.transport",
        r.transport_fraction >= 1.0 - r.eps,
        format!("{} ≥ 1 − {}", r.transport_fraction, r.eps),
    );
    out.check(
        "conjugacy.a.inverse",
        r.inverse_residual <= 1e-9,
        format!("{:e}", r.inverse_residual),
    );
    out.check("conjugacy.a.untouched_exact", r.untouched_exact, "");
    out.check(
        "conjugacy.a.norm_finite",
        r.norm.value.is_finite(),
        format!("{}", r.norm.value),
    );

    let alpha = Q::new(prev.p.clone(), prev.q.clone());
    let t: Arc<dyn Diffeo> = compose_t(asm.map.clone(), &alpha);
    let period = period_of(&alpha);
    let per = periodicity_residual(t.as_ref(), period, &asm.sampled.grid);
    out.check(
        "conjugacy.t.periodic",
        per <= 1e-9,
        format!("max |T^{period} x − x| = {per:e}"),
    );
    let boxes = random_boxes(dims, cc.volume_boxes, cfg.seed);
    let vols = image_volumes(t.as_ref(), &boxes, cc.volume_samples, cfg.seed);
    let bad = vols.iter().filter(|v| !v.within_3se).count();
    out.check(
        "conjugacy.t.volume",
        bad == 0,
        format!("{bad} of {} boxes outside 3 standard errors", vols.len()),
    );
    let mut vol_t = Table::new(
        "conjugacy_volume",
        &["box", "volume", "estimate", "std_err", "within_3se"],
    );
    for (i, v) in vols.iter().enumerate() {
        vol_t.push(vec![
            i.to_string(),
            f(v.volume),
            f(v.estimate),
            f(v.std_err),
            yes(v.within_3se),
        ]);
    }

    let mut gap_t = Table::new(
        "conjugacy_gap",
        &["d", "seed", "k", "alpha1", "alpha2", "lhs", "h_norm", "c_kd", "rhs", "holds"],
    );
    let mut gaps = Vec::new();
    for &d in &cc.gap_dims {
        for j in 0..cc.gap_maps as u64 {
            let seed = cc.gap_seed_base + j;
            let h = random_test_map(d, seed)?;
            let (a1, a2) = random_alphas(seed);
            let mut all = true;
            for k in 0..=cc.gap_k_max {
                let c = calibrated_c(k, d).ok_or_else(|| {
                    CliError::Config(format!("no calibrated constant for k = {k}, d = {d}"))
                })?;
                let g = convergence_gap(h.clone(), a1, a2, k, c);
                all &= g.holds;
                gap_t.push(vec![
                    d.to_string(),
                    seed.to_string(),
                    k.to_string(),
                    f(g.alpha1),
                    f(g.alpha2),
                    f(g.lhs),
                    f(g.h_norm),
                    f(g.c_kd),
                    f(g.rhs),
                    yes(g.holds),
                ]);
                gaps.push(g);
            }
            out.check(format!("conjugacy.gap.d{d}.seed{seed}"), all, "lhs ≤ rhs for every k");
        }
    }

    let mut norm_t = Table::new("conjugacy_norm", &["order", "value"]);
    for (k, v) in r.norm.by_order.iter().enumerate() {
        norm_t.push(vec![(k + 1).to_string(), f(*v)]);
    }

    if let Some(p) = dump {
        write_grid_dump(&asm.sampled, p)?;
    }
    out.data = json!({
        "pair": [prev, next],
        "report": r,
        "period": period,
        "periodicity_residual": per,
        "gaps": to_value(&gaps)?,
    });
    out.tables = vec![norm_t, gap_t, vol_t];
    Ok(out)
}

pub const GRID_MAGIC: &[u8; 8] = b"GKGRID1\0";

/// `GKGRID1\0`, `u32` dims, one `u32` resolution per axis, then the forward
/// image of every node as `dims` little-endian `f64`, nodes in row-major
/// order with axis 0 slowest.
pub fn write_grid_dump(g: &GridDiffeo, path: &Path) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Internal(format!("{}: {e}", path.display()));
    let mut buf = Vec::with_capacity(16 + g.forward.len() * 8);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &r in &g.grid.res {
        buf.extend_from_slice(&(r as u32).to_le_bytes());
    }
    for x in &g.forward {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(err)
}

/// Reads a dump written by [`write_grid_dump`]: resolutions and images.
pub fn read_grid_dump(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>), CliError> {
    let bad = || CliError::Internal("malformed grid dump".into());
    if bytes.len() < 12 || &bytes[..8] != GRID_MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| -> Result<u32, CliError> {
        let s = bytes.get(o..o + 4).ok_or_else(bad)?;
        Ok(u32::from_le_bytes(s.try_into().expect("4 bytes")))
    };
    let dims = u32_at(8)? as usize;
    let res = (0..dims)
        .map(|c| u32_at(12 + 4 * c).map(|r| r as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let start = 12 + 4 * dims;
    let payload = &bytes[start..];
    let want = res.iter().product::<usize>() * dims * 8;
    if payload.len() != want {
        return Err(bad());
    }
    let images = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((res, images))
}
