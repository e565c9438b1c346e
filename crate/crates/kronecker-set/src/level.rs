use gk_base::{frac, Q, Z};
use num_traits::Zero;
use stage_gen::StageParams;

use crate::{IntervalSet, KroneckerError};

/// Left endpoints `(p_n/q_n) b_n(i)` mod 1, in index order.
pub fn level_lefts(stage: &StageParams) -> Vec<Q> {
    let r = Q::new(stage.p.clone(), stage.q.clone());
    stage
        .b
        .iter()
        .map(|b| frac(&(&r * Q::from_integer(b.clone()))))
        .collect()
}

/// Common length `1/(n q_n)` of the level intervals.
pub fn level_length(stage: &StageParams) -> Result<Q, KroneckerError> {
    if stage.n == 0 {
        return Err(KroneckerError::Precondition(
            "level sets start at n = 1".into(),
        ));
    }
    Ok(Q::new(Z::from(1), Z::from(stage.n) * &stage.q))
}

/// `L_n = ∪_i [(p_n/q_n) b_n(i), (p_n/q_n) b_n(i) + 1/(n q_n))` on the circle.
pub fn level_set(stage: &StageParams) -> Result<IntervalSet, KroneckerError> {
    let len = level_length(stage)?;
    Ok(IntervalSet::from_arcs(
        level_lefts(stage).into_iter().map(|x| (x, len.clone())),
    ))
}

/// The lifted offsets `(p_(n+1)/q_(n+1) − p_n/q_n) · b_(n+1)(i)` by which
/// child left endpoints sit to the right of their parents'.
///
/// Fails if some child endpoint is not congruent to its parent endpoint
/// plus the offset, which happens when the child is not built from the parent.
pub fn nesting_offsets(
    parent: &StageParams,
    child: &StageParams,
) -> Result<Vec<Q>, KroneckerError> {
    if child.n != parent.n + 1 || !child.t.is_multiple_of(parent.t) {
        return Err(KroneckerError::Precondition(
            "child stage does not follow parent".into(),
        ));
    }
    let delta =
        Q::new(child.p.clone(), child.q.clone()) - Q::new(parent.p.clone(), parent.q.clone());
    let pl = level_lefts(parent);
    let cl = level_lefts(child);
    let mut out = Vec::with_capacity(child.t);
    for (i, c) in cl.iter().enumerate() {
        let ip = child.parent_index(i, parent.t);
        let off = &delta * Q::from_integer(child.b[i].clone());
        if !frac(&(c - &pl[ip] - &off)).is_zero() {
            return Err(KroneckerError::Precondition(format!(
                "child endpoint {i} is not its parent endpoint shifted by the offset"
            )));
        }
        out.push(off);
    }
    Ok(out)
}
