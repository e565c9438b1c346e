use gk_base::{q, Q, Z};
use kronecker_set::*;
use proptest::prelude::*;
use stage_gen::{GrowthPolicy, StageParams};
use torus_geometry::chain::{build_chain, WitnessConfig};
use torus_geometry::{covering_radius, orbit, stage_vector};

const D: i64 = 24;

/// Cell bitmask oracle: with endpoints on the grid `1/D`, a half-open set is
/// the union of the cells `[k/D, (k+1)/D)` it contains.
fn cells(set: &IntervalSet) -> Vec<bool> {
    (0..D).map(|k| set.contains(&q(k, D))).collect()
}

fn set_of(spans: &[(i64, i64)]) -> IntervalSet {
    IntervalSet::from_arcs(spans.iter().map(|&(a, l)| (q(a, D), q(l, D))))
}

fn oracle_cells(spans: &[(i64, i64)]) -> Vec<bool> {
    let mut c = vec![false; D as usize];
    for &(a, l) in spans {
        for j in 0..l {
            c[((a + j) % D) as usize] = true;
        }
    }
    c
}

fn measure_of(c: &[bool]) -> Q {
    q(c.iter().filter(|&&x| x).count() as i64, D)
}

proptest! {
    #[test]
    fn set_algebra_matches_cell_oracle(
        a in proptest::collection::vec((0i64..D, 0i64..D), 0..5),
        b in proptest::collection::vec((0i64..D, 0i64..D), 0..5),
    ) {
        let (sa, sb) = (set_of(&a), set_of(&b));
        let (ca, cb) = (oracle_cells(&a), oracle_cells(&b));
        prop_assert_eq!(cells(&sa), ca.clone());
        prop_assert_eq!(sa.measure(), measure_of(&ca));
        let u: Vec<bool> = ca.iter().zip(&cb).map(|(x, y)| *x || *y).collect();
        let i: Vec<bool> = ca.iter().zip(&cb).map(|(x, y)| *x && *y).collect();
        let d: Vec<bool> = ca.iter().zip(&cb).map(|(x, y)| *x && !*y).collect();
        prop_assert_eq!(cells(&sa.union(&sb)), u.clone());
        prop_assert_eq!(sa.union(&sb).measure(), measure_of(&u));
        prop_assert_eq!(cells(&sa.intersection(&sb)), i.clone());
        prop_assert_eq!(sa.intersection(&sb).measure(), measure_of(&i));
        prop_assert_eq!(cells(&sa.difference(&sb)), d);
        // Representations are canonical.
        prop_assert_eq!(sa.union(&sb), sb.union(&sa));
    }
}

#[test]
fn level_set_half_rotation() {
    let st = StageParams::from_rotation(1, Z::from(1), Z::from(2), vec![Z::from(1)]).unwrap();
    let l = level_set(&st).unwrap();
    assert_eq!(l, IntervalSet::from_intervals([(q(1, 2), q(1, 1))]));
    assert_eq!(l.measure(), q(1, 2));
}

#[test]
fn level_set_measure_when_disjoint() {
    let st = StageParams::from_rotation(2, Z::from(2), Z::from(7), vec![Z::from(1), Z::from(3)])
        .unwrap();
    let l = level_set(&st).unwrap();
    assert_eq!(l.measure(), q(2, 14));
}

#[test]
fn level_set_needs_positive_index() {
    let st = stage_gen::init_stage();
    assert!(level_set(&st).is_err());
}

fn default_chain() -> Vec<StageParams> {
    build_chain(&GrowthPolicy::default(), &WitnessConfig::default(), 3)
        .unwrap()
        .into_iter()
        .map(|l| l.stage)
        .collect()
}

#[test]
fn nesting_offsets_telescope_below_level_length() {
    let chain = default_chain();
    for n in 1..chain.len() - 1 {
        let len = level_length(&chain[n]).unwrap();
        // Offsets accumulated over every later step, per descendant.
        let mut acc: Vec<Q> = vec![Q::from_integer(Z::from(0)); chain[n].t];
        for m in n..chain.len() - 1 {
            let off = nesting_offsets(&chain[m], &chain[m + 1]).unwrap();
            let rep = chain[m + 1].t / chain[m].t;
            acc = (0..chain[m + 1].t).map(|i| &acc[i / rep] + &off[i]).collect();
            for a in &acc {
                assert!(a >= &Q::from_integer(Z::from(0)));
                assert!(a < &len, "stage {n} -> {}: offset {a} vs {len}", m + 1);
            }
            // Independent bound: each step adds at most 1/(2^m q_m (m+1)).
            for o in &off {
                let cap = Q::new(
                    Z::from(1),
                    (Z::from(1) << m) * &chain[m].q * Z::from(m as u64 + 1),
                );
                assert!(o <= &cap);
            }
        }
    }
}

#[test]
fn later_atoms_lie_in_earlier_levels() {
    let chain = default_chain();
    for m in 2..chain.len() {
        let mu = stage_measure(&chain[m]).unwrap();
        let levels: Vec<IntervalSet> = (1..m).map(|n| level_set(&chain[n]).unwrap()).collect();
        assert!(support_contained(&levels, &mu), "stage {m}");
        // Membership re-checked one atom and one level at a time.
        for a in mu.atoms() {
            for l in &levels {
                assert!(l.contains(&a.position));
            }
        }
    }
}

#[test]
fn support_examples() {
    let st = StageParams::from_rotation(2, Z::from(2), Z::from(7), vec![Z::from(1), Z::from(3)])
        .unwrap();
    let l = level_set(&st).unwrap();
    let lefts = level_lefts(&st);
    let m = AtomicMeasure::uniform(&lefts).unwrap();
    assert!(support_contained(std::slice::from_ref(&l), &m));
    let pushed: Vec<Q> = lefts.iter().map(|x| x + level_length(&st).unwrap()).collect();
    let m2 = AtomicMeasure::uniform(&pushed).unwrap();
    assert!(!support_contained(&[l], &m2));
}

#[test]
fn atom_weights() {
    let m = AtomicMeasure::uniform(&[q(0, 1), q(1, 5), q(2, 5), q(3, 5)]).unwrap();
    assert_eq!(max_atom_weight(&m), q(1, 4));
    let one = AtomicMeasure::uniform(&[q(1, 3)]).unwrap();
    assert_eq!(max_atom_weight(&one), q(1, 1));
    for (n, st) in default_chain().iter().enumerate().skip(1) {
        let mu = stage_measure(st).unwrap();
        assert_eq!(max_atom_weight(&mu), q(1, st.t as i64), "stage {n}");
    }
    assert!(AtomicMeasure::new([(q(0, 1), q(1, 2))]).is_err());
    let sym = AtomicMeasure::uniform(&[q(1, 8), q(1, 4)]).unwrap().symmetrized().unwrap();
    assert_eq!(sym.atoms().len(), 4);
    assert_eq!(sym.atoms()[3].position, q(7, 8));
}

/// A stage with n = 4, t = 2, q = 61 whose orbit has covering radius below
/// 1/8, so the fundamental domain has diameter below 1/4.
fn probe_stage() -> StageParams {
    static PROBE: std::sync::OnceLock<StageParams> = std::sync::OnceLock::new();
    PROBE.get_or_init(find_probe_stage).clone()
}

fn find_probe_stage() -> StageParams {
    for b1 in 2..61 {
        let st = StageParams::from_rotation(4, Z::from(1), Z::from(61), vec![Z::from(1), Z::from(b1)])
            .unwrap();
        let pts = orbit(&stage_vector(&st), &st.q).unwrap();
        let r = covering_radius(&pts, &q(1, 244)).unwrap();
        if r < q(1, 8) {
            return st;
        }
    }
    panic!("no probe stage");
}

fn probe_radius() -> Q {
    static R: std::sync::OnceLock<Q> = std::sync::OnceLock::new();
    R.get_or_init(|| {
        let st = probe_stage();
        covering_radius(&orbit(&stage_vector(&st), &st.q).unwrap(), &q(1, 244)).unwrap()
    })
    .clone()
}

#[test]
fn trivial_targets() {
    let st = probe_stage();
    let zero: Vec<(usize, Q)> = (0..2).map(|i| (i, q(0, 1))).collect();
    let s = kronecker_solve(&zero, &st, &q(1, 2)).unwrap();
    assert_eq!(s.k, 0);
    assert_eq!(s.error_bound, q(0, 1));
    let ident = sample_targets(&st, |x| x.clone());
    let b = kronecker_best(&ident, &st).unwrap();
    assert_eq!(b.k, 1);
    assert_eq!(b.pointwise, q(0, 1));
    assert!(b.sup_error <= level_length(&st).unwrap());
}

#[test]
fn tolerance_below_two_over_n_rejected() {
    let st = probe_stage();
    let zero: Vec<(usize, Q)> = (0..2).map(|i| (i, q(0, 1))).collect();
    assert!(matches!(
        kronecker_solve(&zero, &st, &q(1, 4)),
        Err(KroneckerError::Precondition(_))
    ));
}

/// Exhaustive oracle in integers: targets `z_i = c_i/1000`, units of
/// `1/(4·61·1000)`. Returns (smallest k meeting 1/2, argmin k, min bound).
fn oracle(res: &[i64], c: &[i64]) -> (Option<i64>, i64, i64) {
    let unit = 4 * 61 * 1000;
    let circ = |x: i64| {
        let x = x.rem_euclid(unit);
        x.min(unit - x)
    };
    let mut first = None;
    let mut best = (i64::MAX, 0);
    for k in 0..61 {
        let pw = (0..2)
            .map(|i| circ((k * res[i] % 61) * 4 * 1000 - c[i] * 4 * 61))
            .max()
            .unwrap();
        let bound = pw + k * 1000;
        if first.is_none() && 2 * bound <= unit {
            first = Some(k);
        }
        if bound < best.0 {
            best = (bound, k);
        }
    }
    (first, best.1, best.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn random_targets_at_probe_stage(c0 in 0i64..1000, c1 in 0i64..1000) {
        let st = probe_stage();
        let targets = vec![(0, q(c0, 1000)), (1, q(c1, 1000))];
        let res: Vec<i64> = st.b.iter().map(|b| i64::try_from(&(b % &st.q)).unwrap()).collect();
        let (first, arg, min) = oracle(&res, &[c0, c1]);
        let s = kronecker_solve(&targets, &st, &q(1, 2)).unwrap();
        prop_assert_eq!(Some(s.k as i64), first);
        prop_assert!(s.error_bound <= q(1, 2));
        prop_assert!(s.sup_error <= s.error_bound);
        let b = kronecker_best(&targets, &st).unwrap();
        prop_assert_eq!(b.k as i64, arg);
        prop_assert_eq!(b.error_bound.clone(), q(min, 4 * 61 * 1000));
        prop_assert!(b.sup_error <= b.error_bound);
        // The best pointwise error is at most the covering radius bound.
        let near = kronecker_nearest(&targets, &st).unwrap();
        prop_assert!(near.pointwise <= probe_radius());
    }
}
