use std::collections::{BTreeMap, BTreeSet};

use gk_base::{Q, Z};
use kronecker_set::IntervalSet;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use partition_algebra::*;
use proptest::prelude::*;
use stage_gen::*;

fn z(v: i64) -> Z {
    Z::from(v)
}

fn q(n: i64, d: i64) -> Q {
    Q::new(z(n), z(d))
}

/// Stage 1 with `q = 3`, `t = 2`.
fn stage_q3() -> StageParams {
    let pol = GrowthPolicy {
        d_min: 2,
        ..GrowthPolicy::default()
    };
    next_stage(&init_stage(), &pol, &Perturbation::trivial(2)).unwrap()
}

/// Stage 2 with `t = 4` and `q = 867`, the first multiple of 3 of the form
/// `3(1 + d)` reaching the slice divisor `864`.
fn stage_q867(prev: &StageParams) -> StageParams {
    let pol = GrowthPolicy {
        t_exponent: ExponentRule::Constant { value: 1 },
        d_min: 288,
        ..GrowthPolicy::default()
    };
    next_stage(prev, &pol, &Perturbation::trivial(4)).unwrap()
}

#[test]
fn index_permutation_two_to_four() {
    assert_eq!(index_permutation(2, 4).unwrap(), vec![0, 2, 1, 3]);
    assert_eq!(index_permutation(1, 4).unwrap(), vec![0, 1, 2, 3]);
    assert!(index_permutation(3, 4).is_err());
}

#[test]
fn k_component_is_modular_multiplication() {
    let got: Vec<Z> = (1..=3).map(|l| k_component(l, &z(2), &z(5))).collect();
    assert_eq!(got, vec![z(2), z(4), z(1)]);
}

#[test]
fn eta_of_two_cells() {
    let st = StageParams::from_rotation(0, z(1), z(2), vec![z(1)]).unwrap();
    let eta = build_eta(&st).unwrap();
    eta.check().unwrap();
    assert_eq!(eta.len(), 2);
    let c0 = &eta.cells[&vec![0]];
    let c1 = &eta.cells[&vec![1]];
    assert_eq!(c0.boxes()[0][0], IntervalSet::from_intervals([(q(0, 1), q(1, 2))]));
    assert_eq!(c1.boxes()[0][0], IntervalSet::from_intervals([(q(1, 2), q(1, 1))]));
    assert_eq!(eta.measure(&[0]), Some(q(1, 2)));
    assert_eq!(eta.measure(&[1]), Some(q(1, 2)));
}

/// `μ(Δ(i, l) ∩ Δ(j, m))` by counting cells of the `1/q` grid in `(z, x_i, x_j)`.
fn oracle_pair_measure(qn: u64, i: usize, l: u64, j: usize, m: u64) -> Q {
    let member = |k: usize, lab: u64, zc: u64, xc: &[u64; 2], slot: usize| {
        if k == 0 {
            zc == lab
        } else {
            (zc + qn - xc[slot]) % qn == lab
        }
    };
    let mut hits = 0i64;
    for zc in 0..qn {
        for x0 in 0..qn {
            for x1 in 0..qn {
                let xc = [x0, x1];
                if member(i, l, zc, &xc, 0) && member(j, m, zc, &xc, 1) {
                    hits += 1;
                }
            }
        }
    }
    Q::new(Z::from(hits), Z::from(qn.pow(3)))
}

#[test]
fn eta_independence_matches_counting_oracle() {
    for st in [
        stage_q3(),
        StageParams::from_rotation(2, z(2), z(3), vec![z(1), z(2), z(1), z(2)]).unwrap(),
    ] {
        let report = check_eta(&st).unwrap();
        assert!(report.all(), "{report:?}");
        let qn = st.q.to_u64().unwrap();
        for i in 0..st.t {
            for j in i + 1..st.t {
                for l in 0..qn {
                    for m in 0..qn {
                        let a = eta_component(&st, i, l).unwrap();
                        let b = eta_component(&st, j, m).unwrap();
                        let got = a.intersection(&b).measure();
                        assert_eq!(got, oracle_pair_measure(qn, i, l, j, m));
                        assert_eq!(got, Q::new(Z::one(), Z::from(qn * qn)));
                    }
                }
            }
        }
    }
}

#[test]
fn eta_cap_reports_budget() {
    let st = StageParams::from_rotation(3, z(1), z(400), vec![z(1), z(3)]).unwrap();
    assert!(matches!(build_eta(&st), Err(PartitionError::Budget(_))));
}

#[test]
fn k_is_equivariant_bijection() {
    for st in [
        stage_q3(),
        StageParams::from_rotation(2, z(2), z(5), vec![z(1), z(2), z(3), z(4)]).unwrap(),
    ] {
        let t_prev = (st.t / 2).max(1);
        let k = build_k(&st, t_prev).unwrap();
        let c = k.check();
        assert!(c.passed(), "{c:?}");
        assert_eq!(c.labels, st.q.to_u64().unwrap().pow(st.t as u32));
    }
}

#[test]
fn identity_square_commutes() {
    let labels = all_labels(3, 2).unwrap();
    let id = AlgebraMap::identity("id", &labels, &q(1, 9), None);
    let r = verify_diagram(&id, &id, &id, &id).unwrap();
    assert!(r.commutes);
    assert_eq!(r.labels, 9);
    assert_eq!(r.counterexample, None);
}

#[test]
fn transposed_right_map_is_caught() {
    let labels = all_labels(3, 2).unwrap();
    let id = AlgebraMap::identity("id", &labels, &q(1, 9), None);
    let mut right = id.clone();
    right.assignment.insert(vec![1, 2], vec![2, 0]);
    right.assignment.insert(vec![2, 0], vec![1, 2]);
    assert!(right.check().passed());
    let r = verify_diagram(&id, &id, &id, &right).unwrap();
    assert!(!r.commutes);
    assert_eq!(r.counterexample, Some(vec![1, 2]));
}

#[test]
fn diagram_shape_mismatch() {
    let a = AlgebraMap::identity("a", &all_labels(3, 2).unwrap(), &q(1, 9), None);
    let b = AlgebraMap::identity("b", &all_labels(2, 2).unwrap(), &q(1, 4), None);
    assert!(matches!(
        verify_diagram(&a, &b, &a, &a),
        Err(PartitionError::Shape(_))
    ));
}

#[test]
fn square_commutes_at_tiny_pair() {
    let s1 = stage_q3();
    let s2 = stage_q867(&s1);
    assert_eq!(s2.q, z(867));
    assert_eq!(slice_divisor(1, 2, &z(3), 1), z(864));
    let rf = Refinement::new(&s1, &s2, 1).unwrap();
    assert_eq!((rf.v.clone(), rf.y.clone(), rf.rho.clone()), (z(1), z(289), z(0)));
    let sq = lemma_square(&rf).unwrap();
    assert!(sq.passed(), "{sq:?}");
    assert!(sq.diagram.commutes);
    assert_eq!(sq.diagram.labels, 9);
    assert_eq!(sq.tuples, 2 * 867 * 867);
}

#[test]
fn refinement_below_divisor_is_infeasible() {
    let s1 = stage_q3();
    let pol = GrowthPolicy {
        t_exponent: ExponentRule::Constant { value: 1 },
        ..GrowthPolicy::default()
    };
    let s2 = next_stage(&s1, &pol, &Perturbation::trivial(4)).unwrap();
    match Refinement::new(&s1, &s2, 1) {
        Err(PartitionError::Infeasible { minimal_q, .. }) => assert_eq!(minimal_q, Some(z(864))),
        other => panic!("{other:?}"),
    }
}

/// `{(j0 + s) a mod q : s < v}` as a set of cell indices.
fn oracle_gamma(j0: u64, v: u64, a: u64, qn: u64) -> BTreeSet<u64> {
    (0..v).map(|s| ((j0 + s) as u128 * a as u128 % qn as u128) as u64).collect()
}

#[test]
fn stacking_reproduces_gamma_tilde_small() {
    let mut cases = 0;
    for qn in [7i64, 12, 25, 31, 60] {
        for b in [vec![1i64, 2], vec![3, 1], vec![2, 3]] {
            let bz: Vec<Z> = b.iter().map(|&x| z(x)).collect();
            if bz.iter().any(|x| !x.gcd(&z(qn)).is_one()) {
                continue;
            }
            let st = StageParams::from_rotation(2, z(1), z(qn), bz).unwrap();
            for i in 0..st.t {
                let a = st.a[i].mod_floor(&st.q).to_u64().unwrap();
                for v in 1..=qn as u64 {
                    let rep = stacking(&st, i, &Z::from(v)).unwrap();
                    assert!(rep.union_equal(), "q={qn} i={i} v={v}");
                    assert_eq!(rep.starts_checked, qn as u64);
                    assert_eq!(rep.m, Z::from(v - 1) - &rep.b * &rep.f);
                    for sl in &rep.slices {
                        assert!(sl.r >= Z::zero() && sl.r < Z::from(v));
                    }
                    // Cell membership at the midpoints against the definition.
                    let want = oracle_gamma(0, v, a, qn as u64);
                    for k in 0..qn {
                        let mid = q(2 * k + 1, 2 * qn);
                        assert_eq!(rep.realized.contains(&mid), want.contains(&(k as u64)));
                    }
                    cases += 1;
                }
            }
        }
    }
    assert!(cases > 100);
}

#[test]
fn stacking_unit_weight_single_slice() {
    let st = StageParams::from_rotation(1, z(2), z(11), vec![z(1), z(1)]).unwrap();
    let rep = stacking(&st, 0, &z(4)).unwrap();
    assert_eq!((rep.f.clone(), rep.m.clone()), (z(3), z(0)));
    assert_eq!(rep.slices.len(), 1);
    assert_eq!(rep.slices[0].span.measure(), q(4, 11));
    assert_eq!((rep.slices[0].k.clone(), rep.slices[0].r.clone()), (z(0), z(0)));
    assert!(rep.slices[0].span.contains(&q(0, 1)));
}

#[test]
fn stacking_degenerate_width() {
    let st = StageParams::from_rotation(1, z(2), z(11), vec![z(1), z(1)]).unwrap();
    let rep = stacking(&st, 1, &z(0)).unwrap();
    assert!(rep.degenerate && rep.slices.is_empty() && rep.realized.is_empty());
    assert!(stacking(&st, 0, &z(12)).is_err());
}

#[test]
fn feasible_step_certificates() {
    let s1 = stage_q3();
    let b_next = expand_b(&s1, 4);
    let bud = Budgets::default_for(1, 2);
    assert_eq!(bud.eps0, q(1, 4));
    let (d, qn) = minimal_feasible_d(&s1, &b_next, &bud).unwrap();
    assert_eq!(qn, z(17_832_200_896_512));
    assert!(feasible_at(&s1, &b_next, &d, &bud));
    assert!(!feasible_at(&s1, &b_next, &(&d - 1), &bud));
    let hp = HorizontalParams::derive(1, &s1.q, 2, &b_next, &[], &qn, vec![0, 2, 1, 3], &bud).unwrap();
    let cert = p0_certificate(&hp, &bud.eps0);
    assert!(cert.holds && cert.lower_bound >= Q::one() - &bud.eps0);
    let eb = eta_prime_bound(&hp);
    assert!(eb.holds && eb.distance_bound <= q(1, 2));
}

#[test]
fn below_feasible_reports_minimal_q() {
    let s1 = stage_q3();
    let s2 = stage_q867(&s1);
    let rf = Refinement::new(&s1, &s2, 1).unwrap();
    match HorizontalParams::from_refinement(&rf, &Budgets::default_for(1, 2)) {
        Err(PartitionError::Infeasible { minimal_q, .. }) => {
            assert_eq!(minimal_q, Some(z(17_832_200_896_512)))
        }
        other => panic!("{other:?}"),
    }
}

/// A small instance: `q = q_n M`, two children with `a b ≡ 1 mod q`.
fn small_params(qn: u64, m: u64, b: [u64; 2], v: u64, w: u64, wp: u64) -> Option<HorizontalParams> {
    let qq = Z::from(qn * m);
    let bz: Vec<Z> = b.iter().map(|&x| Z::from(x)).collect();
    let mut a = Vec::new();
    for bi in &bz {
        let g = bi.extended_gcd(&qq);
        if !g.gcd.is_one() {
            return None;
        }
        a.push(g.x.mod_floor(&qq));
    }
    HorizontalParams::with_widths(
        1,
        &Z::from(qn),
        1,
        &bz,
        &a,
        &qq,
        vec![0, 1],
        Z::from(v),
        Z::from(w),
        Z::from(wp),
    )
    .ok()
}

/// Owner of every cell in `P(i, j)` straight from the definition: the arc
/// `(γ, k)` and the residue `o mod b` of the offset.
fn oracle_owner(hp: &HorizontalParams, i: usize, j: u64) -> Vec<(u64, u64, u64)> {
    let qq = hp.q.to_u64().unwrap();
    let (m, v, y, w) = [&hp.m, &hp.v, &hp.y, &hp.w].map(|x| x.to_u64().unwrap()).into();
    let rho = hp.rho.to_u64().unwrap();
    let a = hp.a[i].to_u64().unwrap();
    let b = hp.b[i].to_u64().unwrap();
    let mut owner = vec![(u64::MAX, 0, 0); qq as usize];
    for g in 0..hp.q_n.to_u64().unwrap() {
        for k in 0..=y {
            let len = if k < y { v } else { rho };
            for o in 0..len {
                let cell = (j * w + (g * m + k * v + o) * a) % qq;
                owner[cell as usize] = (g, k, o % b);
            }
        }
    }
    owner
}

#[test]
fn p0_exact_at_small_instance() {
    let hp = small_params(3, 40, [7, 11], 9, 11, 4).unwrap();
    let p0 = build_p0(&hp, &q(1, 2)).unwrap();
    assert!(p0.families_partition && p0.containment && p0.rotation_invariant);
    assert!(p0.certificate.lower_bound <= p0.measure);
    let part = p0.partition(&hp).unwrap();
    part.check().unwrap();
    let shifted: BTreeSet<u64> = p0.good_blocks.iter().map(|c| (c + 40) % 120).collect();
    assert_eq!(shifted, p0.good_blocks.iter().copied().collect());
}

#[test]
fn eta_prime_zero_when_w_is_one() {
    let hp = small_params(2, 30, [1, 7], 7, 1, 3).unwrap();
    let ex = eta_prime_exact(&hp, None).unwrap();
    assert!(ex.per_child.iter().all(Q::is_zero));
    assert!(eta_prime_bound(&hp).distance_bound.is_zero());
}

#[test]
fn eta_prime_family_distance_at_tiny_pair() {
    let s1 = stage_q3();
    let s2 = stage_q867(&s1);
    let rf = Refinement::with_v(&s1, &s2, 1, z(17)).unwrap();
    let fc = classify_family(&rf, 0).unwrap();
    for w in [1i64, 5, 17] {
        let hp = HorizontalParams::with_widths(
            1,
            &s1.q,
            2,
            &s2.b,
            &s2.a,
            &s2.q,
            rf.h_next(),
            z(17),
            z(w),
            z(1),
        )
        .unwrap();
        let ex = eta_prime_exact(&hp, Some(std::slice::from_ref(&fc))).unwrap();
        let bound = eta_prime_bound(&hp);
        assert!(ex.stable_rotation);
        // Family 0 holds children 0 and 1; only child 1 has a cube axis.
        let child_sum = &ex.per_child[0] + &ex.per_child[1];
        assert!(ex.per_family[0] <= child_sum * Q::from_integer(z(2)));
        assert!(ex.per_child[1] <= bound.per_child[1]);
        if w == 1 {
            assert!(ex.distance.is_zero());
        }
    }
}

#[test]
fn cylinder_fixed_by_disjoint_transform() {
    let f = JTransform::cell_permutation(2, &[3, 0, 1, 2]).unwrap();
    f.check().unwrap();
    let c = Cylinder::new()
        .with(0, IntervalSet::arc(&q(1, 5), &q(2, 5)))
        .with(1, IntervalSet::from_intervals([(q(0, 1), q(1, 3))]));
    assert!(c.base().is_disjoint(&f.coords()));
    assert!(invariant_under(&f, &c));
    let moved = c.clone().with(2, IntervalSet::from_intervals([(q(0, 1), q(1, 4))]));
    assert!(!invariant_under(&f, &moved));
    assert_eq!(f.apply(&moved).sides[&2], IntervalSet::from_intervals([(q(3, 4), q(1, 1))]));
    assert_eq!(f.apply(&moved).measure(), moved.measure());
}

#[test]
fn telescoping_pattern() {
    let ds: Vec<Q> = (2..8).map(|m| Q::new(Z::one(), Z::one() << (m + 1))).collect();
    let r = telescope(2, &ds);
    assert!(r.holds());
    assert_eq!(r.tail_bound, q(1, 2));
    let mut bad = ds.clone();
    bad[3] = q(1, 2);
    assert_eq!(telescope(2, &bad).first_violation, Some(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn p0_matches_definition(
        qn in 1u64..4, m in 4u64..30, b0 in 1u64..5, b1 in 1u64..5,
        vf in 0.0f64..1.0, wf in 0.0f64..1.0, wpf in 0.0f64..1.0,
    ) {
        let v = 1 + (vf * m as f64) as u64 % m;
        let w = 1 + (wf * (qn * m) as f64) as u64 % (qn * m);
        let wp = 1 + (wpf * m as f64) as u64 % m;
        let Some(hp) = small_params(qn, m, [b0, b1], v, w, wp) else {
            return Ok(());
        };
        let p0 = build_p0(&hp, &q(1, 2)).unwrap();
        prop_assert!(p0.families_partition && p0.containment && p0.rotation_invariant);
        prop_assert!(p0.certificate.lower_bound <= p0.measure);
        // A block is good iff it lies in one slice of every P(i, j).
        let u = hp.u.to_u64().unwrap();
        let owners: Vec<_> = (0..2).flat_map(|i| (0..=u).map(move |j| (i, j)))
            .map(|(i, j)| oracle_owner(&hp, i, j)).collect();
        let qq = qn * m;
        let mut want = Vec::new();
        for g in 0..qn {
            for jb in 0..hp.u_prime.to_u64().unwrap() {
                let c = g * m + jb * wp;
                if owners.iter().all(|o| (c..c + wp).all(|x| o[(x % qq) as usize] == o[c as usize])) {
                    want.push(c);
                }
            }
        }
        prop_assert_eq!(&p0.good_blocks, &want);
        let part = p0.partition(&hp).unwrap();
        prop_assert!(part.check().is_ok());
    }

    #[test]
    fn eta_prime_exact_within_bound(
        qn in 1u64..4, m in 4u64..24, b0 in 1u64..5, b1 in 1u64..5,
        vf in 0.0f64..1.0, wf in 0.0f64..1.0,
    ) {
        let v = 1 + (vf * m as f64) as u64 % m;
        let w = 1 + (wf * (qn * m) as f64) as u64 % (qn * m);
        let Some(hp) = small_params(qn, m, [b0, b1], v, w, 1) else {
            return Ok(());
        };
        let ex = eta_prime_exact(&hp, None).unwrap();
        let bd = eta_prime_bound(&hp);
        for (e, b) in ex.per_child.iter().zip(&bd.per_child) {
            prop_assert!(e <= b, "exact {} > bound {}", e, b);
        }
    }

    #[test]
    fn k_equivariant_on_random_stage(b in proptest::collection::vec(1i64..6, 2), p in 1i64..7) {
        let qn = 7;
        let st = StageParams::from_rotation(1, z(p), z(qn), b.iter().map(|&x| z(x)).collect()).unwrap();
        let k = build_k(&st, 1).unwrap();
        prop_assert!(k.check().passed());
    }

    #[test]
    fn region_translation_keeps_measure(lo in 0i64..20, len in 1i64..20, s in 0i64..40) {
        let side = IntervalSet::arc(&q(lo, 20), &q(len, 20));
        let r = Region::cuboid(vec![side, IntervalSet::from_intervals([(q(0, 1), q(1, 3))])]);
        let moved = r.translate(0, &q(s, 40));
        prop_assert_eq!(moved.measure(), r.measure());
        prop_assert!(moved.translate(0, &q(40 - s, 40)).same_set(&r));
    }

    #[test]
    fn trapezoid_matches_direct_sum(wd in 0i64..40, l in 0i64..40, b in 1i64..6) {
        let direct: i64 = (0..wd).map(|o| l.min(o * b)).sum();
        prop_assert_eq!(trapezoid(&z(wd), &z(l), &z(b)), z(direct));
    }
}

#[test]
fn labels_are_lexicographic() {
    let l = all_labels(2, 3).unwrap();
    let sorted: BTreeMap<_, _> = l.iter().cloned().zip(0..).collect();
    assert_eq!(l, sorted.keys().cloned().collect::<Vec<_>>());
    assert_eq!(l[5], vec![1, 0, 1]);
}
