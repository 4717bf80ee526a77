//! Incremental consistency checking and deterministic labeling for the
//! integer constraints produced by the temporal layer.
//!
//! Variables range over hour-axis indices. Binary constraints are kept as
//! difference bounds `x - y <= c`; consistency is the absence of a
//! negative cycle, detected incrementally by repairing a feasible
//! potential function. `mod 24` residue constraints (day and hour
//! boundaries) are checked during labeling, which is a deterministic
//! minimal-value-first backtracking search over the propagated bound
//! windows.

use thiserror::Error;

use crate::temporal::hour_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

/// A registered variable with its (possibly open) integer bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintVar {
    pub id: VarId,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
}

/// Primitive constraints accepted by [`Store::assert_constraint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// x <= y
    Le(VarId, VarId),
    /// x < y
    Lt(VarId, VarId),
    /// x = y
    Eq(VarId, VarId),
    /// x = k
    EqConst(VarId, i64),
    /// x <= k
    LeConst(VarId, i64),
    /// x >= k
    GeConst(VarId, i64),
    /// y = x + c
    OffsetEq(VarId, VarId, i64),
    /// x - y <= c
    DiffLe(VarId, VarId, i64),
    /// x ≡ r (mod 24)
    ModEq(VarId, i64),
    /// x ≢ r (mod 24)
    ModNeq(VarId, i64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("constraint store is inconsistent")]
    Inconsistent,
    #[error("constraint mentions an unregistered variable")]
    UnknownVariable,
    #[error("rollback to an unknown or already-released mark")]
    UnknownMark,
}

/// Labeling strategy: minimal value first in registration order, with the
/// epoch as the preferred floor for otherwise unconstrained variables.
#[derive(Debug, Clone)]
pub struct LabelingPolicy {
    pub epoch_index: i64,
    /// candidate values tried per variable and window segment
    pub value_tries: usize,
    /// backtracking steps before giving up
    pub step_limit: u64,
}

impl Default for LabelingPolicy {
    fn default() -> LabelingPolicy {
        LabelingPolicy {
            epoch_index: hour_index(1999, 1, 1, 0),
            value_tries: 256,
            step_limit: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    weight: i64,
}

#[derive(Debug, Clone, Copy)]
enum Trail {
    Potential(usize, i64),
    Mod(usize, Option<i64>),
}

/// Checkpoint token for [`Store::rollback`]. Marks unwind in LIFO order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark {
    n_vars: usize,
    n_edges: usize,
    n_trail: usize,
    n_modneq: usize,
    failed: bool,
}

const ORIGIN: usize = 0;

#[derive(Debug, Clone, Default)]
pub struct Store {
    potentials: Vec<i64>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    mods: Vec<Option<i64>>,
    mod_neq: Vec<(usize, i64)>,
    trail: Vec<Trail>,
    failed: bool,
}

impl Store {
    pub fn new() -> Store {
        let mut s = Store::default();
        // internal origin node pinned at 0 so unary bounds become edges
        s.potentials.push(0);
        s.out.push(Vec::new());
        s.mods.push(None);
        s
    }

    pub fn num_vars(&self) -> usize {
        self.potentials.len() - 1
    }

    pub fn is_consistent(&self) -> bool {
        !self.failed
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (1..self.potentials.len()).map(VarId)
    }

    pub fn new_var(&mut self, lower: Option<i64>, upper: Option<i64>) -> Result<VarId, StoreError> {
        let id = VarId(self.potentials.len());
        self.potentials.push(0);
        self.out.push(Vec::new());
        self.mods.push(None);
        if let Some(l) = lower {
            self.assert_constraint(Constraint::GeConst(id, l))?;
        }
        if let Some(u) = upper {
            self.assert_constraint(Constraint::LeConst(id, u))?;
        }
        Ok(id)
    }

    fn check_var(&self, v: VarId) -> Result<usize, StoreError> {
        if v.0 == ORIGIN || v.0 >= self.potentials.len() {
            Err(StoreError::UnknownVariable)
        } else {
            Ok(v.0)
        }
    }

    pub fn assert_constraint(&mut self, c: Constraint) -> Result<(), StoreError> {
        // validate variables before the consistency short-circuit
        match c {
            Constraint::Le(x, y)
            | Constraint::Lt(x, y)
            | Constraint::Eq(x, y)
            | Constraint::OffsetEq(x, y, _)
            | Constraint::DiffLe(x, y, _) => {
                self.check_var(x)?;
                self.check_var(y)?;
            }
            Constraint::EqConst(x, _)
            | Constraint::LeConst(x, _)
            | Constraint::GeConst(x, _)
            | Constraint::ModEq(x, _)
            | Constraint::ModNeq(x, _) => {
                self.check_var(x)?;
            }
        }
        if self.failed {
            return Err(StoreError::Inconsistent);
        }
        let result = self.assert_inner(c);
        if result == Err(StoreError::Inconsistent) {
            self.failed = true;
        }
        result
    }

    fn assert_inner(&mut self, c: Constraint) -> Result<(), StoreError> {
        match c {
            Constraint::Le(x, y) => self.add_diff(x.0, y.0, 0),
            Constraint::Lt(x, y) => self.add_diff(x.0, y.0, -1),
            Constraint::DiffLe(x, y, c) => self.add_diff(x.0, y.0, c),
            Constraint::Eq(x, y) => {
                self.add_diff(x.0, y.0, 0)?;
                self.add_diff(y.0, x.0, 0)
            }
            Constraint::EqConst(x, k) => {
                self.add_diff(x.0, ORIGIN, k)?;
                self.add_diff(ORIGIN, x.0, -k)
            }
            Constraint::LeConst(x, k) => self.add_diff(x.0, ORIGIN, k),
            Constraint::GeConst(x, k) => self.add_diff(ORIGIN, x.0, -k),
            Constraint::OffsetEq(x, y, c) => {
                // y - x <= c and x - y <= -c
                self.add_diff(y.0, x.0, c)?;
                self.add_diff(x.0, y.0, -c)
            }
            Constraint::ModEq(x, r) => {
                let r = r.rem_euclid(24);
                match self.mods[x.0] {
                    Some(prev) if prev != r => Err(StoreError::Inconsistent),
                    Some(_) => Ok(()),
                    None => {
                        if self.mod_neq.iter().any(|&(v, e)| v == x.0 && e == r) {
                            return Err(StoreError::Inconsistent);
                        }
                        self.trail.push(Trail::Mod(x.0, None));
                        self.mods[x.0] = Some(r);
                        Ok(())
                    }
                }
            }
            Constraint::ModNeq(x, r) => {
                let r = r.rem_euclid(24);
                if self.mods[x.0] == Some(r) {
                    return Err(StoreError::Inconsistent);
                }
                self.mod_neq.push((x.0, r));
                Ok(())
            }
        }
    }

    /// Adds `to - from <= weight` (edge from `from` to `to`) and repairs
    /// the potential function; a repair that reaches back to `from`
    /// witnesses a negative cycle.
    fn add_diff(&mut self, to: usize, from: usize, weight: i64) -> Result<(), StoreError> {
        let idx = self.edges.len();
        self.edges.push(Edge { from, to, weight });
        self.out[from].push(idx);
        if self.potentials[to] <= self.potentials[from] + weight {
            return Ok(());
        }
        let mut queue = std::collections::VecDeque::new();
        self.trail.push(Trail::Potential(to, self.potentials[to]));
        self.potentials[to] = self.potentials[from] + weight;
        queue.push_back(to);
        let mut relaxations = 0usize;
        let bound = self.potentials.len() * self.edges.len() + 1;
        while let Some(a) = queue.pop_front() {
            for &e in &self.out[a].clone() {
                let Edge { to: b, weight: w, .. } = self.edges[e];
                if self.potentials[b] > self.potentials[a] + w {
                    if b == from {
                        // lowering the source of the new edge closes a
                        // negative cycle through it
                        return Err(StoreError::Inconsistent);
                    }
                    relaxations += 1;
                    if relaxations > bound {
                        return Err(StoreError::Inconsistent);
                    }
                    self.trail.push(Trail::Potential(b, self.potentials[b]));
                    self.potentials[b] = self.potentials[a] + w;
                    queue.push_back(b);
                }
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Mark {
        Mark {
            n_vars: self.potentials.len(),
            n_edges: self.edges.len(),
            n_trail: self.trail.len(),
            n_modneq: self.mod_neq.len(),
            failed: self.failed,
        }
    }

    pub fn rollback(&mut self, mark: Mark) -> Result<(), StoreError> {
        if mark.n_vars > self.potentials.len()
            || mark.n_edges > self.edges.len()
            || mark.n_trail > self.trail.len()
            || mark.n_modneq > self.mod_neq.len()
        {
            return Err(StoreError::UnknownMark);
        }
        while self.trail.len() > mark.n_trail {
            match self.trail.pop().unwrap() {
                Trail::Potential(v, old) => {
                    if v < mark.n_vars {
                        self.potentials[v] = old;
                    }
                }
                Trail::Mod(v, old) => {
                    if v < mark.n_vars {
                        self.mods[v] = old;
                    }
                }
            }
        }
        while self.edges.len() > mark.n_edges {
            let e = self.edges.pop().unwrap();
            self.out[e.from].pop();
        }
        self.mod_neq.truncate(mark.n_modneq);
        self.potentials.truncate(mark.n_vars);
        self.out.truncate(mark.n_vars);
        self.mods.truncate(mark.n_vars);
        self.failed = mark.failed;
        Ok(())
    }

    /// Tight bound windows implied by the difference edges given the
    /// already-fixed values. Returns `None` on an empty window.
    fn propagate_bounds(
        &self,
        fixed: &[Option<i64>],
    ) -> Option<(Vec<Option<i64>>, Vec<Option<i64>>)> {
        let n = self.potentials.len();
        let mut lb: Vec<Option<i64>> = vec![None; n];
        let mut ub: Vec<Option<i64>> = vec![None; n];
        lb[ORIGIN] = Some(0);
        ub[ORIGIN] = Some(0);
        for (i, v) in fixed.iter().enumerate() {
            if let Some(v) = v {
                lb[i] = Some(*v);
                ub[i] = Some(*v);
            }
        }
        // label-correcting to a fixed point; no negative cycles exist, so
        // n passes suffice
        for _ in 0..=n {
            let mut changed = false;
            for e in &self.edges {
                // to - from <= weight
                if let Some(ua) = ub[e.from] {
                    let cand = ua + e.weight;
                    if ub[e.to].map_or(true, |u| cand < u) {
                        ub[e.to] = Some(cand);
                        changed = true;
                    }
                }
                if let Some(lt) = lb[e.to] {
                    let cand = lt - e.weight;
                    if lb[e.from].map_or(true, |l| cand > l) {
                        lb[e.from] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for i in 0..n {
            if let (Some(l), Some(u)) = (lb[i], ub[i]) {
                if l > u {
                    return None;
                }
            }
        }
        Some((lb, ub))
    }

    fn residue_ok(&self, v: usize, value: i64) -> bool {
        if let Some(r) = self.mods[v] {
            if value.rem_euclid(24) != r {
                return false;
            }
        }
        self.mod_neq
            .iter()
            .all(|&(w, r)| w != v || value.rem_euclid(24) != r)
    }

    /// Candidate values for a variable over a window segment, smallest
    /// first, honoring residue constraints.
    fn candidates(
        &self,
        v: usize,
        start: i64,
        ub: Option<i64>,
        tries: usize,
    ) -> Vec<i64> {
        let step = if self.mods[v].is_some() { 24 } else { 1 };
        let mut first = start;
        if let Some(r) = self.mods[v] {
            let delta = (r - first.rem_euclid(24)).rem_euclid(24);
            first += delta;
        }
        let mut out = Vec::new();
        let mut val = first;
        for _ in 0..tries {
            if let Some(u) = ub {
                if val > u {
                    break;
                }
            }
            if self.residue_ok(v, val) {
                out.push(val);
            }
            val += step;
        }
        out
    }

    /// Assigns a value to every variable, satisfying all constraints, or
    /// reports inconsistency. Deterministic: identical stores and policies
    /// label identically.
    pub fn label(&self, policy: &LabelingPolicy) -> Result<Vec<i64>, StoreError> {
        if self.failed {
            return Err(StoreError::Inconsistent);
        }
        let n = self.potentials.len();
        let mut fixed: Vec<Option<i64>> = vec![None; n];
        fixed[ORIGIN] = Some(0);
        let mut steps = 0u64;
        if self.label_rec(1, &mut fixed, policy, &mut steps) {
            Ok(fixed.into_iter().skip(1).map(|v| v.unwrap()).collect())
        } else {
            Err(StoreError::Inconsistent)
        }
    }

    fn label_rec(
        &self,
        next: usize,
        fixed: &mut Vec<Option<i64>>,
        policy: &LabelingPolicy,
        steps: &mut u64,
    ) -> bool {
        let n = self.potentials.len();
        let v = match (next..n).find(|&i| fixed[i].is_none()) {
            Some(v) => v,
            None => return true,
        };
        *steps += 1;
        if *steps > policy.step_limit {
            return false;
        }
        let Some((lb, ub)) = self.propagate_bounds(fixed) else {
            return false;
        };
        let (lo, hi) = (lb[v], ub[v]);
        let epoch = policy.epoch_index;
        let mut cands = Vec::new();
        match (lo, hi) {
            (Some(l), Some(u)) => {
                if epoch <= u {
                    cands = self.candidates(v, l.max(epoch), Some(u), policy.value_tries);
                    if l < epoch {
                        // fall back to the pre-epoch part of the window
                        cands.extend(self.candidates(v, l, Some((epoch - 1).min(u)), policy.value_tries));
                    }
                } else {
                    cands = self.candidates(v, l, Some(u), policy.value_tries);
                }
            }
            (Some(l), None) => {
                cands = self.candidates(v, l.max(epoch), None, policy.value_tries);
                if l < epoch {
                    cands.extend(self.candidates(v, l, Some(epoch - 1), policy.value_tries));
                }
            }
            (None, Some(u)) => {
                if epoch <= u {
                    cands = self.candidates(v, epoch, Some(u), policy.value_tries);
                }
                // descend below the upper bound (or the epoch) as a last resort
                let top = u.min(epoch.saturating_sub(1));
                let step = if self.mods[v].is_some() { 24 } else { 1 };
                let mut val = top;
                if let Some(r) = self.mods[v] {
                    let delta = (val.rem_euclid(24) - r).rem_euclid(24);
                    val -= delta;
                }
                for _ in 0..policy.value_tries {
                    if self.residue_ok(v, val) {
                        cands.push(val);
                    }
                    val -= step;
                }
            }
            (None, None) => {
                cands = self.candidates(v, epoch, None, policy.value_tries);
            }
        }
        for val in cands {
            fixed[v] = Some(val);
            if self.label_rec(v + 1, fixed, policy, steps) {
                return true;
            }
            fixed[v] = None;
            *steps += 1;
            if *steps > policy.step_limit {
                return false;
            }
        }
        false
    }

    /// Re-evaluates every asserted constraint against an assignment
    /// (indexed by registration order, origin excluded).
    pub fn satisfies(&self, assignment: &[i64]) -> bool {
        let val = |v: usize| if v == ORIGIN { 0 } else { assignment[v - 1] };
        self.edges.iter().all(|e| val(e.to) - val(e.from) <= e.weight)
            && (1..self.potentials.len()).all(|v| self.residue_ok(v, val(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> LabelingPolicy {
        LabelingPolicy::default()
    }

    #[test]
    fn antisymmetry_entails_equality() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let y = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::Le(x, y)).unwrap();
        s.assert_constraint(Constraint::Le(y, x)).unwrap();
        let a = s.label(&policy()).unwrap();
        assert_eq!(a[0], a[1]);
    }

    #[test]
    fn strict_cycle_is_inconsistent() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let y = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::Lt(x, y)).unwrap();
        assert_eq!(
            s.assert_constraint(Constraint::Lt(y, x)),
            Err(StoreError::Inconsistent)
        );
        // monotonicity: still inconsistent
        assert_eq!(
            s.assert_constraint(Constraint::Le(x, y)),
            Err(StoreError::Inconsistent)
        );
    }

    #[test]
    fn checkpoint_rollback_restores() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let mark = s.checkpoint();
        s.assert_constraint(Constraint::LeConst(x, 3)).unwrap();
        s.assert_constraint(Constraint::GeConst(x, 10)).unwrap_err();
        assert!(!s.is_consistent());
        s.rollback(mark).unwrap();
        assert!(s.is_consistent());
        s.assert_constraint(Constraint::GeConst(x, 10)).unwrap();
        let a = s.label(&policy()).unwrap();
        assert!(a[0] >= 10);
    }

    #[test]
    fn nested_marks_unwind_lifo() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let m1 = s.checkpoint();
        s.assert_constraint(Constraint::EqConst(x, 5)).unwrap();
        let m2 = s.checkpoint();
        let y = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::Lt(x, y)).unwrap();
        s.rollback(m2).unwrap();
        assert_eq!(s.num_vars(), 1);
        assert_eq!(s.label(&policy()).unwrap(), vec![5]);
        s.rollback(m1).unwrap();
        let a = s.label(&policy()).unwrap();
        assert_eq!(a[0], policy().epoch_index);
        // a released mark is rejected
        assert_eq!(s.rollback(m2), Err(StoreError::UnknownMark));
    }

    #[test]
    fn unregistered_variable_rejected() {
        let mut s = Store::new();
        assert_eq!(
            s.assert_constraint(Constraint::EqConst(VarId(7), 0)),
            Err(StoreError::UnknownVariable)
        );
    }

    #[test]
    fn unconstrained_labels_to_epoch() {
        let mut s = Store::new();
        s.new_var(None, None).unwrap();
        let a = s.label(&policy()).unwrap();
        assert_eq!(a[0], hour_index(1999, 1, 1, 0));
    }

    #[test]
    fn labeling_within_day_window() {
        // point constrained to lie within day 2000-05-22 labels to its start
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::GeConst(x, hour_index(2000, 5, 22, 0))).unwrap();
        s.assert_constraint(Constraint::LeConst(x, hour_index(2000, 5, 22, 23))).unwrap();
        let a = s.label(&policy()).unwrap();
        assert_eq!(a[0], hour_index(2000, 5, 22, 0));
    }

    #[test]
    fn ground_store_labels_identity() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let y = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::EqConst(x, 42)).unwrap();
        s.assert_constraint(Constraint::EqConst(y, 7)).unwrap();
        assert_eq!(s.label(&policy()).unwrap(), vec![42, 7]);
    }

    #[test]
    fn mod_constraints_respected() {
        let mut s = Store::new();
        let x = s.new_var(Some(5), None).unwrap();
        s.assert_constraint(Constraint::ModEq(x, 0)).unwrap();
        let a = s.label(&policy()).unwrap();
        assert_eq!(a[0].rem_euclid(24), 0);
        assert!(a[0] >= 5);
        assert_eq!(
            s.assert_constraint(Constraint::ModEq(x, 3)),
            Err(StoreError::Inconsistent)
        );
    }

    #[test]
    fn label_result_satisfies_store() {
        let mut s = Store::new();
        let x = s.new_var(None, None).unwrap();
        let y = s.new_var(None, None).unwrap();
        let z = s.new_var(None, None).unwrap();
        s.assert_constraint(Constraint::Lt(x, y)).unwrap();
        s.assert_constraint(Constraint::OffsetEq(y, z, 24)).unwrap();
        s.assert_constraint(Constraint::ModEq(y, 0)).unwrap();
        let a = s.label(&policy()).unwrap();
        assert!(s.satisfies(&a));
        assert_eq!(a[2], a[1] + 24);
    }

    #[test]
    fn determinism() {
        let build = || {
            let mut s = Store::new();
            let x = s.new_var(None, None).unwrap();
            let y = s.new_var(None, None).unwrap();
            s.assert_constraint(Constraint::Lt(x, y)).unwrap();
            s.label(&policy()).unwrap()
        };
        assert_eq!(build(), build());
    }
}
