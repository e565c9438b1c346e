use gk_base::Z;
use num_integer::Integer;
use proptest::prelude::*;
use stage_gen::*;

fn z(v: i64) -> Z {
    Z::from(v)
}

fn zs(v: &[i64]) -> Vec<Z> {
    v.iter().map(|&x| Z::from(x)).collect()
}

/// Hand-execution of the five step formulas with machine integers, written
/// without reference to the library code. Returns (t, p, q, a, b, s) with
/// `d` and the numerator offset `k` supplied by the caller.
fn oracle_step(
    prev: (i128, i128, Vec<i128>, Vec<i128>, Vec<i128>),
    v: &[i128],
    e: i128,
    d: i128,
) -> (i128, Vec<i128>, Vec<i128>, Vec<i128>) {
    let (_p, q, a, b, s) = prev;
    let t_next = v.len();
    let rep = t_next / b.len();
    let mut bt = Vec::new();
    for x in &b {
        for _ in 0..rep {
            bt.push(*x);
        }
    }
    let parent = |i: usize| i / rep;
    let b_new: Vec<i128> = (0..t_next).map(|i| q * v[i] + (e * q + 1) * bt[i]).collect();
    let s_new: Vec<i128> = (0..t_next)
        .map(|i| s[parent(i)] + a[parent(i)] * (v[i] + e * b[parent(i)]))
        .collect();
    let mu: Vec<i128> = (0..t_next)
        .map(|i| b[parent(i)] + q * (v[i] + e * b[parent(i)]))
        .collect();
    assert_eq!(mu, b_new);
    let mut prod = 1i128;
    for m in &mu {
        prod *= m;
    }
    let q_new = q * (1 + d * prod);
    let mut a_new = Vec::new();
    for i in 0..t_next {
        let mut others = 1i128;
        for (k, m) in mu.iter().enumerate() {
            if k != i {
                others *= m;
            }
        }
        let c = d * s_new[i] * others;
        a_new.push(a[parent(i)] + q * c);
    }
    (q_new, a_new, b_new, s_new)
}

#[test]
fn trivial_witness_from_stage_zero() {
    let s0 = init_stage();
    let mut pol = GrowthPolicy::default();
    pol.t_exponent = ExponentRule::Constant { value: 1 };
    let s1 = next_stage(&s0, &pol, &Perturbation::trivial(2)).unwrap();
    assert_eq!(s1.t, 2);
    assert_eq!(s1.b, zs(&[1, 1]));
    let (q, a, b, s) = oracle_step((1, 1, vec![2], vec![1], vec![1]), &[0, 0], 0, 1);
    assert_eq!(s1.q, Z::from(q));
    assert_eq!(s1.a, a.iter().map(|&x| Z::from(x)).collect::<Vec<_>>());
    assert_eq!(s1.b, b.iter().map(|&x| Z::from(x)).collect::<Vec<_>>());
    assert_eq!(s1.s, s.iter().map(|&x| Z::from(x)).collect::<Vec<_>>());
    for i in 0..2 {
        assert_eq!(&s1.a[i] * &s1.b[i], Z::from(1) + &s1.s[i] * &s1.q);
    }
    assert_eq!((s1.p.clone(), s1.q.clone()), (z(3), z(2)));
}

#[test]
fn default_stage_one_frozen() {
    // Values frozen from the hand computation with v = (0, 1), e = 0:
    // R_conv = 2, d = 1, q = 3, p = 4, s = (1, 3), a = (4, 5).
    let s0 = init_stage();
    let pol = GrowthPolicy::default();
    let pert = Perturbation { v: zs(&[0, 1]), e: z(0) };
    let (s1, tr) = next_stage_traced(&s0, &pol, &pert).unwrap();
    assert_eq!(s1.t, 2);
    assert_eq!(s1.p, z(4));
    assert_eq!(s1.q, z(3));
    assert_eq!(s1.a, zs(&[4, 5]));
    assert_eq!(s1.b, zs(&[1, 2]));
    assert_eq!(s1.s, zs(&[1, 3]));
    assert_eq!(tr.d, z(1));
    assert_eq!(tr.r_conv, z(2));
    assert_eq!(tr.c, zs(&[2, 3]));
    let (q, a, _, s) = oracle_step((1, 1, vec![2], vec![1], vec![1]), &[0, 1], 0, 1);
    assert_eq!(s1.q, Z::from(q));
    assert_eq!(s1.a, a.iter().map(|&x| Z::from(x)).collect::<Vec<_>>());
    assert_eq!(s1.s, s.iter().map(|&x| Z::from(x)).collect::<Vec<_>>());
    let rep = check_stage(&s1, Some(&s0), &pol).unwrap();
    assert!(rep.all(), "{rep:?}");
}

#[test]
fn stage_zero_conditions() {
    let rep = check_stage(&init_stage(), None, &GrowthPolicy::default()).unwrap();
    assert!(rep.all());
}

#[test]
fn perturbed_a_breaks_primality() {
    let s0 = init_stage();
    let pol = GrowthPolicy::default();
    let pert = Perturbation { v: zs(&[0, 1]), e: z(0) };
    let mut s1 = next_stage(&s0, &pol, &pert).unwrap();
    s1.a[0] += 1;
    let rep = check_stage(&s1, Some(&s0), &pol).unwrap();
    assert!(!rep.primality);
}

#[test]
fn mismatched_indices_rejected() {
    let s0 = init_stage();
    let mut other = s0.clone();
    other.n = 3;
    assert!(matches!(
        check_stage(&other, Some(&s0), &GrowthPolicy::default()),
        Err(StageError::IndexMismatch { .. })
    ));
}

#[test]
fn witness_outside_bound_rejected() {
    let s0 = init_stage();
    let pol = GrowthPolicy::default();
    let pert = Perturbation { v: zs(&[0, 3]), e: z(0) };
    assert!(matches!(
        next_stage(&s0, &pol, &pert),
        Err(StageError::WitnessBound { .. })
    ));
    let short = Perturbation { v: zs(&[0]), e: z(0) };
    assert!(matches!(
        next_stage(&s0, &pol, &short),
        Err(StageError::WitnessLength { .. })
    ));
}

#[test]
fn chain_to_stage_three_with_trivial_witness_above_stage_one() {
    let pol = GrowthPolicy::default();
    let mut stages = vec![init_stage()];
    let first = Perturbation { v: zs(&[0, 1]), e: z(0) };
    stages.push(next_stage(&stages[0], &pol, &first).unwrap());
    for _ in 0..2 {
        let prev = stages.last().unwrap().clone();
        let t_next = prev.t << pol.r_t(prev.n, &prev.q, prev.t);
        stages.push(next_stage(&prev, &pol, &Perturbation::trivial(t_next)).unwrap());
    }
    assert_eq!(stages.iter().map(|s| s.t).collect::<Vec<_>>(), vec![1, 2, 8, 64]);
    for w in stages.windows(2) {
        let rep = check_stage(&w[1], Some(&w[0]), &pol).unwrap();
        assert!(rep.all(), "{rep:?}");
        assert!((&w[1].q % &w[0].q) == Z::from(0));
    }
    let s2 = &stages[2];
    // Independent recomputation of stage 2 from stage 1.
    let s1 = &stages[1];
    let d = pol.d_floor(1, &s1.q, &s2.b);
    let prod: Z = s2.b.iter().product();
    let mut dd = d.clone();
    loop {
        let q2 = &s1.q * (Z::from(1) + &dd * &prod);
        if q2 == s2.q {
            break;
        }
        dd += 1;
        assert!(dd < &d + 100);
    }
    for i in 0..s2.t {
        let ip = i / 4;
        let others: Z = (0..s2.t).filter(|&k| k != i).map(|k| s2.b[k].clone()).product();
        let c = &dd * &s2.s[i] * others;
        assert_eq!(s2.a[i], &s1.a[ip] + &s1.q * c);
        assert!(s2.p.gcd(&s2.q) == Z::from(1));
    }
}

#[test]
fn deterministic() {
    let s0 = init_stage();
    let pol = GrowthPolicy::default();
    let pert = Perturbation { v: zs(&[0, 1]), e: z(0) };
    assert_eq!(next_stage(&s0, &pol, &pert), next_stage(&s0, &pol, &pert));
}

proptest! {
    #[test]
    fn random_admissible_perturbations_pass_all_conditions(
        v0 in -2i64..=2, v1 in -2i64..=2, e in 0i64..=2, d_min in 1u64..5
    ) {
        let s0 = init_stage();
        let mut pol = GrowthPolicy::default();
        pol.d_min = d_min;
        let pert = Perturbation { v: zs(&[v0, v1]), e: z(e) };
        prop_assume!(candidate_is_admissible(&s0, 2, &pert));
        let s1 = next_stage(&s0, &pol, &pert).unwrap();
        let rep = check_stage(&s1, Some(&s0), &pol).unwrap();
        prop_assert!(rep.all());
        for i in 0..2 {
            prop_assert_eq!(&s1.a[i] * &s1.b[i], Z::from(1) + &s1.s[i] * &s1.q);
        }
    }

    #[test]
    fn second_step_from_stage_one(
        v in proptest::collection::vec(-3i64..=3, 8), e in 0i64..=3
    ) {
        let pol = GrowthPolicy::default();
        let s0 = init_stage();
        let s1 = next_stage(&s0, &pol, &Perturbation { v: zs(&[0, 1]), e: z(0) }).unwrap();
        let pert = Perturbation { v: zs(&v), e: z(e) };
        prop_assume!(candidate_is_admissible(&s1, 8, &pert));
        let s2 = next_stage(&s1, &pol, &pert).unwrap();
        let rep = check_stage(&s2, Some(&s1), &pol).unwrap();
        prop_assert!(rep.all());
        // Child angles move upward and by at most 1/R_conv.
        let up = gk_base::Q::new(s2.p.clone(), s2.q.clone()) - gk_base::Q::new(s1.p.clone(), s1.q.clone());
        prop_assert!(up > gk_base::Q::from_integer(Z::from(0)));
    }
}
