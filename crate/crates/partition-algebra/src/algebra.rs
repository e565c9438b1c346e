use std::collections::{BTreeMap, BTreeSet};

use gk_base::{Q, Z};
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use stage_gen::StageParams;

use crate::partition::{all_labels, small_q};
use crate::{Label, PartitionError};

/// A rotation acting on labels: coordinate `k` moves by `shift[k]` mod
/// `modulus`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAction {
    pub modulus: u64,
    pub shift: Vec<u64>,
}

impl LabelAction {
    pub fn apply(&self, l: &[u64]) -> Label {
        l.iter()
            .zip(&self.shift)
            .map(|(x, s)| ((*x as u128 + *s as u128) % self.modulus as u128) as u64)
            .collect()
    }
}

/// A bijection between the labels of two partitions, with the measure of
/// every cell on both sides and the rotation acting on each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraMap {
    pub name: String,
    pub assignment: BTreeMap<Label, Label>,
    pub source_measure: BTreeMap<Label, Q>,
    pub target_measure: BTreeMap<Label, Q>,
    pub source_action: Option<LabelAction>,
    pub target_action: Option<LabelAction>,
}

/// Result of [`AlgebraMap::check`]. `failure` names the first property that
/// fails and the first label (lexicographic) where it does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapCheck {
    pub name: String,
    pub labels: u64,
    pub bijective: bool,
    pub measure_preserving: bool,
    pub equivariant: bool,
    pub failure: Option<(String, Label)>,
}

impl MapCheck {
    pub fn passed(&self) -> bool {
        self.bijective && self.measure_preserving && self.equivariant
    }
}

impl AlgebraMap {
    /// The identity on `labels`, every cell of measure `cell`.
    pub fn identity(name: &str, labels: &[Label], cell: &Q, action: Option<LabelAction>) -> Self {
        let m: BTreeMap<Label, Q> = labels.iter().map(|l| (l.clone(), cell.clone())).collect();
        AlgebraMap {
            name: name.to_string(),
            assignment: labels.iter().map(|l| (l.clone(), l.clone())).collect(),
            source_measure: m.clone(),
            target_measure: m,
            source_action: action.clone(),
            target_action: action,
        }
    }

    pub fn apply(&self, l: &[u64]) -> Option<&Label> {
        self.assignment.get(l)
    }

    pub fn check(&self) -> MapCheck {
        let mut failure = None;
        let note = |f: &mut Option<(String, Label)>, what: &str, l: &Label| {
            if f.is_none() {
                *f = Some((what.to_string(), l.clone()));
            }
        };
        let mut bijective = self.assignment.len() == self.target_measure.len()
            && self.assignment.len() == self.source_measure.len();
        let mut seen = BTreeSet::new();
        for (l, img) in &self.assignment {
            if !self.source_measure.contains_key(l) || !self.target_measure.contains_key(img) {
                bijective = false;
                note(&mut failure, "unknown label", l);
            }
            if !seen.insert(img.clone()) {
                bijective = false;
                note(&mut failure, "not injective", l);
            }
        }
        if !bijective && failure.is_none() {
            let l = self.source_measure.keys().next().cloned().unwrap_or_default();
            note(&mut failure, "label counts differ", &l);
        }
        let mut measure_preserving = true;
        for (l, img) in &self.assignment {
            if self.source_measure.get(l) != self.target_measure.get(img) {
                measure_preserving = false;
                note(&mut failure, "measure", l);
                break;
            }
        }
        let mut equivariant = true;
        if let (Some(sa), Some(ta)) = (&self.source_action, &self.target_action) {
            for (l, img) in &self.assignment {
                let lhs = self.assignment.get(&sa.apply(l));
                if lhs != Some(&ta.apply(img)) {
                    equivariant = false;
                    note(&mut failure, "equivariance", l);
                    break;
                }
            }
        }
        MapCheck {
            name: self.name.clone(),
            labels: self.assignment.len() as u64,
            bijective,
            measure_preserving,
            equivariant,
            failure,
        }
    }
}

/// Outcome of [`verify_diagram`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramResult {
    pub commutes: bool,
    pub labels: u64,
    pub counterexample: Option<Label>,
}

/// Checks `right ∘ top = bottom ∘ left` on every label of the common source
/// of `top` and `left`.
///
/// ```text
///   A --top--> B
///   |          |
///  left      right
///   v          v
///   C -bottom-> D
/// ```
pub fn verify_diagram(
    bottom: &AlgebraMap,
    top: &AlgebraMap,
    left: &AlgebraMap,
    right: &AlgebraMap,
) -> Result<DiagramResult, PartitionError> {
    let shape = |what: &str| Err(PartitionError::Shape(what.to_string()));
    if !top.assignment.keys().eq(left.assignment.keys()) {
        return shape("top and left have different sources");
    }
    if !top.target_measure.keys().eq(right.source_measure.keys()) {
        return shape("top target is not the right source");
    }
    if !left.target_measure.keys().eq(bottom.source_measure.keys()) {
        return shape("left target is not the bottom source");
    }
    if !right.target_measure.keys().eq(bottom.target_measure.keys()) {
        return shape("right and bottom have different targets");
    }
    for (l, b) in &top.assignment {
        let c = &left.assignment[l];
        let via_top = right.apply(b);
        let via_left = bottom.apply(c);
        if via_top.is_none() || via_top != via_left {
            return Ok(DiagramResult {
                commutes: false,
                labels: top.assignment.len() as u64,
                counterexample: Some(l.clone()),
            });
        }
    }
    Ok(DiagramResult {
        commutes: true,
        labels: top.assignment.len() as u64,
        counterexample: None,
    })
}

/// The permutation `h(r j + k) = j + t_prev k` of `0..t` with
/// `r = t / t_prev`.
pub fn index_permutation(t_prev: usize, t: usize) -> Result<Vec<usize>, PartitionError> {
    if t_prev == 0 || !t.is_multiple_of(t_prev) {
        return Err(PartitionError::Precondition(format!(
            "t_prev = {t_prev} does not divide t = {t}"
        )));
    }
    let r = t / t_prev;
    let mut h = vec![0; t];
    for j in 0..t_prev {
        for k in 0..r {
            h[r * j + k] = j + t_prev * k;
        }
    }
    Ok(h)
}

/// `l a mod q`, the label that `K` attaches to the symbol cell `l`.
pub fn k_component(l: u64, a: &Z, q: &Z) -> Z {
    (Z::from(l) * a) % q
}

/// Uniform cell measure `q^(−t)`.
pub fn uniform_measure(q: u64, t: usize) -> Q {
    Q::new(Z::one(), Z::from(q).pow(t as u32))
}

/// `K_n` on joint labels: symbol label `l` goes to the `η_n` label with
/// coordinate `h_n(i')` equal to `l_(i') a_n(i') mod q_n`. `t_prev` is
/// `t_(n−1)` (use `t_n` at stage 0, where `h` is the identity).
///
/// The source action is the cut-and-rotate shift `l_(i') ↦ l_(i') + p_n b_n(i')`,
/// the target action the rotation `λ ↦ λ + p_n` on every coordinate.
pub fn build_k(stage: &StageParams, t_prev: usize) -> Result<AlgebraMap, PartitionError> {
    let q = small_q(stage)?;
    let qz = Z::from(q);
    for (i, a) in stage.a.iter().enumerate() {
        if !num_integer::Integer::gcd(a, &qz).is_one() {
            return Err(PartitionError::Precondition(format!(
                "gcd(a[{i}] = {a}, q = {q}) != 1"
            )));
        }
    }
    let t = stage.t;
    let h = index_permutation(t_prev, t)?;
    let labels = all_labels(q, t)?;
    let cell = uniform_measure(q, t);
    let mut assignment = BTreeMap::new();
    for l in &labels {
        let mut img = vec![0u64; t];
        for (ip, &li) in l.iter().enumerate() {
            img[h[ip]] = k_component(li, &stage.a[ip], &qz).to_u64().expect("below q");
        }
        assignment.insert(l.clone(), img);
    }
    let m: BTreeMap<Label, Q> = labels.iter().map(|l| (l.clone(), cell.clone())).collect();
    let p = (&stage.p % &qz).to_u64().expect("below q");
    let source_shift = stage
        .b
        .iter()
        .map(|b| ((Z::from(p) * b) % &qz).to_u64().expect("below q"))
        .collect();
    Ok(AlgebraMap {
        name: "K".into(),
        assignment,
        source_measure: m.clone(),
        target_measure: m,
        source_action: Some(LabelAction {
            modulus: q,
            shift: source_shift,
        }),
        target_action: Some(LabelAction {
            modulus: q,
            shift: vec![p; t],
        }),
    })
}
