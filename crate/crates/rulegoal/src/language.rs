//! The propositional rule language: sensor/goal/action predicates, states,
//! and the goal registry holding the active goal set, the subgoal partial
//! order and the interpretation map.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use smallvec::SmallVec;

use crate::error::CoreError;

/// Interned symbol for a sensor or action predicate name.
///
/// Symbols are atomic: `Right(type3)` is a single nullary predicate, not an
/// application of `Right` to an argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub(crate) u32);

/// Identifier of a goal predicate. Ids are never reused, even after a goal
/// has been retired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoalId(pub(crate) u32);

impl GoalId {
    pub fn index(self) -> u32 {
        self.0
    }
}

/// String interner for sensor and action names.
///
/// Sensor and action names live in disjoint spaces even when they share an
/// id; the [`Predicate`] variant carries the distinction.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, SymbolId>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> SymbolId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = SymbolId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A nullary predicate of the alphabet Sens ∪ U_G ∪ Acts.
///
/// The three variants are disjoint name spaces; equality is structural.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Sensor(SymbolId),
    Goal(GoalId),
    Action(SymbolId),
}

impl Predicate {
    pub fn is_sensor(&self) -> bool {
        matches!(self, Predicate::Sensor(_))
    }

    pub fn is_goal(&self) -> bool {
        matches!(self, Predicate::Goal(_))
    }

    pub fn is_action(&self) -> bool {
        matches!(self, Predicate::Action(_))
    }

    pub fn as_goal(&self) -> Option<GoalId> {
        match self {
            Predicate::Goal(g) => Some(*g),
            _ => None,
        }
    }
}

/// A finite set of sensor and goal predicates (action predicates are not
/// states; they are rejected at construction).
///
/// Stored sorted and deduplicated, so equality and subset tests are
/// order-insensitive set operations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State(SmallVec<[Predicate; 12]>);

impl State {
    pub fn empty() -> Self {
        State(SmallVec::new())
    }

    /// Builds a state from arbitrary predicates, sorting and deduplicating.
    ///
    /// Returns an error if an action predicate is supplied.
    pub fn new(preds: impl IntoIterator<Item = Predicate>) -> Result<Self, CoreError> {
        let mut v: SmallVec<[Predicate; 12]> = SmallVec::new();
        for p in preds {
            if p.is_action() {
                return Err(CoreError::ActionInState);
            }
            v.push(p);
        }
        v.sort_unstable();
        v.dedup();
        Ok(State(v))
    }

    /// Infallible constructor for callers that guarantee no action predicates.
    pub(crate) fn from_vec(mut v: SmallVec<[Predicate; 12]>) -> Self {
        debug_assert!(v.iter().all(|p| !p.is_action()));
        v.sort_unstable();
        v.dedup();
        State(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Predicate> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, p: Predicate) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    /// Subset test by sorted merge.
    pub fn is_subset_of(&self, other: &State) -> bool {
        let mut it = other.0.iter();
        'outer: for p in &self.0 {
            for q in it.by_ref() {
                match q.cmp(p) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn is_strict_subset_of(&self, other: &State) -> bool {
        self.len() < other.len() && self.is_subset_of(other)
    }

    pub fn with(&self, p: Predicate) -> State {
        let mut v = self.0.clone();
        v.push(p);
        State::from_vec(v)
    }

    pub fn union(&self, other: &State) -> State {
        let mut v = self.0.clone();
        v.extend(other.0.iter().copied());
        State::from_vec(v)
    }

    pub fn goal_part(&self) -> State {
        State(self.0.iter().copied().filter(|p| p.is_goal()).collect())
    }

    pub fn sensor_part(&self) -> State {
        State(self.0.iter().copied().filter(|p| p.is_sensor()).collect())
    }

    pub fn goals(&self) -> impl Iterator<Item = GoalId> + '_ {
        self.0.iter().filter_map(|p| p.as_goal())
    }

    pub fn sensors(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.0.iter().filter_map(|p| match p {
            Predicate::Sensor(s) => Some(*s),
            _ => None,
        })
    }
}

impl FromIterator<Predicate> for State {
    /// Panics if an action predicate is supplied; use [`State::new`] for
    /// fallible construction.
    fn from_iter<T: IntoIterator<Item = Predicate>>(iter: T) -> Self {
        State::new(iter).expect("action predicate in state")
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = Predicate;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, Predicate>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

/// The finite active goal set 𝒢 together with the interpretation map π, the
/// subgoal partial order ⊑ and a fresh-name counter.
///
/// The primary goal is created at construction and is the supremum of the
/// order: every other goal sits strictly below it. Direct edges added via
/// [`GoalRegistry::add_edge`] are kept acyclic; `strictly_above` answers the
/// transitive relation.
#[derive(Debug, Clone)]
pub struct GoalRegistry {
    names: BTreeMap<GoalId, String>,
    interpretation: BTreeMap<GoalId, State>,
    /// Direct parents (strictly above) per goalid.
    parents: BTreeMap<GoalId, BTreeSet<GoalId>>,
    active: BTreeSet<GoalId>,
    primary: GoalId,
    next_id: u32,
}

pub const PRIMARY_GOAL_NAME: &str = "G_prime";

impl GoalRegistry {
    /// Creates a registry whose only member is the primary goal with the
    /// given interpretation.
    pub fn new(primary_interpretation: State) -> Result<Self, CoreError> {
        if primary_interpretation.is_empty() {
            return Err(CoreError::EmptyState("primary goal interpretation"));
        }
        if primary_interpretation.iter().any(|p| p.is_goal()) {
            return Err(CoreError::GoalInInterpretation);
        }
        let primary = GoalId(0);
        let mut names = BTreeMap::new();
        names.insert(primary, PRIMARY_GOAL_NAME.to_owned());
        let mut interpretation = BTreeMap::new();
        interpretation.insert(primary, primary_interpretation);
        let mut active = BTreeSet::new();
        active.insert(primary);
        Ok(GoalRegistry {
            names,
            interpretation,
            parents: BTreeMap::new(),
            active,
            primary,
            next_id: 1,
        })
    }

    pub fn primary(&self) -> GoalId {
        self.primary
    }

    pub fn is_active(&self, g: GoalId) -> bool {
        self.active.contains(&g)
    }

    /// Active goals in ascending id order.
    pub fn active(&self) -> impl Iterator<Item = GoalId> + '_ {
        self.active.iter().copied()
    }

    pub fn name(&self, g: GoalId) -> &str {
        self.names.get(&g).map(|s| s.as_str()).unwrap_or("?")
    }

    pub fn lookup(&self, name: &str) -> Option<GoalId> {
        self.names
            .iter()
            .find(|(g, n)| n.as_str() == name && self.active.contains(g))
            .map(|(g, _)| *g)
    }

    /// The interpretation π(g). Total on the active set.
    pub fn interpretation(&self, g: GoalId) -> Result<&State, CoreError> {
        if !self.is_active(g) {
            return Err(CoreError::UnknownGoal(g.0));
        }
        self.interpretation.get(&g).ok_or(CoreError::UnknownGoal(g.0))
    }

    /// Invents a fresh goal predicate with interpretation `interp`.
    ///
    /// The fresh name is `Sub<n>`; retired names are never reused.
    pub fn invent(&mut self, interp: State) -> Result<GoalId, CoreError> {
        let name = format!("Sub{}", self.next_id);
        self.invent_named(name, interp)
    }

    /// Invents a fresh goal under a caller-chosen name, as used when loading
    /// recorded buffers. The name must not collide with any past name.
    pub fn invent_named(&mut self, name: String, interp: State) -> Result<GoalId, CoreError> {
        if interp.is_empty() {
            return Err(CoreError::EmptyState("goal interpretation"));
        }
        if interp.iter().any(|p| !p.is_sensor()) {
            return Err(CoreError::GoalInInterpretation);
        }
        if self.names.values().any(|n| *n == name) {
            return Err(CoreError::DuplicateGoalName(name));
        }
        let id = GoalId(self.next_id);
        self.next_id += 1;
        self.names.insert(id, name);
        self.interpretation.insert(id, interp);
        self.active.insert(id);
        Ok(id)
    }

    /// Removes `g` from the active set; its name stays reserved.
    pub fn retire(&mut self, g: GoalId) -> Result<(), CoreError> {
        if g == self.primary {
            return Err(CoreError::RetirePrimary);
        }
        if !self.active.remove(&g) {
            return Err(CoreError::UnknownGoal(g.0));
        }
        self.interpretation.remove(&g);
        self.parents.remove(&g);
        for ps in self.parents.values_mut() {
            ps.remove(&g);
        }
        Ok(())
    }

    /// Inserts the pair child ⊑ parent.
    ///
    /// Rejects edges that would create a cycle or touch inactive goals.
    pub fn add_edge(&mut self, child: GoalId, parent: GoalId) -> Result<(), CoreError> {
        if !self.is_active(child) {
            return Err(CoreError::UnknownGoal(child.0));
        }
        if !self.is_active(parent) {
            return Err(CoreError::UnknownGoal(parent.0));
        }
        if child == parent || self.strictly_above(child, parent) {
            return Err(CoreError::PosetCycle);
        }
        self.parents.entry(child).or_default().insert(parent);
        Ok(())
    }

    /// True iff `high` ⊐ `low` (strictly above in the transitive order).
    ///
    /// The primary goal is the supremum: it is strictly above every other
    /// active goal whether or not an explicit edge exists.
    pub fn strictly_above(&self, high: GoalId, low: GoalId) -> bool {
        if high == low {
            return false;
        }
        if high == self.primary {
            return true;
        }
        // Walk direct-parent edges upward from `low`.
        let mut seen = BTreeSet::new();
        let mut stack = vec![low];
        while let Some(g) = stack.pop() {
            if let Some(ps) = self.parents.get(&g) {
                for &p in ps {
                    if p == high {
                        return true;
                    }
                    if seen.insert(p) {
                        stack.push(p);
                    }
                }
            }
        }
        false
    }

    /// All active goals strictly above `g`, in ascending id order.
    pub fn strict_ancestors(&self, g: GoalId) -> Result<Vec<GoalId>, CoreError> {
        if !self.is_active(g) {
            return Err(CoreError::UnknownGoal(g.0));
        }
        let mut out: BTreeSet<GoalId> = BTreeSet::new();
        let mut stack = vec![g];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if let Some(ps) = self.parents.get(&x) {
                for &p in ps {
                    if self.is_active(p) && out.insert(p) && seen.insert(p) {
                        stack.push(p);
                    }
                }
            }
        }
        if g != self.primary {
            out.insert(self.primary);
        }
        Ok(out.into_iter().collect())
    }

    /// Direct parents recorded for `g` (without the implicit supremum).
    pub fn direct_parents(&self, g: GoalId) -> impl Iterator<Item = GoalId> + '_ {
        self.parents.get(&g).into_iter().flatten().copied()
    }

    /// Active goals ordered most-subordinate first: ascending by number of
    /// strict ancestors, ties by id.
    pub fn bottom_up(&self) -> Vec<GoalId> {
        let mut v: Vec<(usize, GoalId)> = self
            .active
            .iter()
            .map(|&g| (self.strict_ancestors(g).map(|a| a.len()).unwrap_or(0), g))
            .collect();
        v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|(_, g)| g).collect()
    }

    /// Finds an active goal `h` with π(h) == `interp` and `h` ⊑ `g`
    /// (reflexively), as used by the duplicate check of subgoal discovery.
    pub fn find_subgoal_with_interpretation(&self, g: GoalId, interp: &State) -> Option<GoalId> {
        self.active
            .iter()
            .copied()
            .filter(|&h| h == g || self.strictly_above(g, h))
            .find(|&h| self.interpretation.get(&h) == Some(interp))
    }
}

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(v: &mut Vocab, name: &str) -> Predicate {
        Predicate::Sensor(v.intern(name))
    }

    #[test]
    fn intern_is_idempotent() {
        let mut v = Vocab::new();
        let a = v.intern("Right(type3)");
        let b = v.intern("Right(type3)");
        assert_eq!(a, b);
        assert_eq!(v.name(a), "Right(type3)");
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn state_is_a_set() {
        let mut v = Vocab::new();
        let a = sensor(&mut v, "A");
        let b = sensor(&mut v, "B");
        let s1 = State::new([a, b, a]).unwrap();
        let s2 = State::new([b, a]).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 2);
        assert!(s1.contains(a));
    }

    #[test]
    fn state_rejects_actions() {
        let mut v = Vocab::new();
        let act = Predicate::Action(v.intern("move"));
        assert!(matches!(State::new([act]), Err(CoreError::ActionInState)));
    }

    #[test]
    fn subset_tests() {
        let mut v = Vocab::new();
        let a = sensor(&mut v, "A");
        let b = sensor(&mut v, "B");
        let c = sensor(&mut v, "C");
        let ab = State::new([a, b]).unwrap();
        let abc = State::new([a, b, c]).unwrap();
        assert!(ab.is_subset_of(&abc));
        assert!(ab.is_strict_subset_of(&abc));
        assert!(!abc.is_subset_of(&ab));
        assert!(abc.is_subset_of(&abc));
        assert!(!abc.is_strict_subset_of(&abc));
        assert!(State::empty().is_subset_of(&ab));
    }

    #[test]
    fn registry_starts_as_singleton() {
        let mut v = Vocab::new();
        let s = State::new([sensor(&mut v, "Center(type1)"), sensor(&mut v, "PickedUp")]).unwrap();
        let reg = GoalRegistry::new(s.clone()).unwrap();
        assert_eq!(reg.active().collect::<Vec<_>>(), vec![reg.primary()]);
        assert_eq!(reg.interpretation(reg.primary()).unwrap(), &s);
        assert_eq!(reg.name(reg.primary()), "G_prime");
    }

    #[test]
    fn primary_is_supremum_and_names_are_fresh() {
        let mut v = Vocab::new();
        let s = State::new([sensor(&mut v, "X")]).unwrap();
        let t = State::new([sensor(&mut v, "Y")]).unwrap();
        let mut reg = GoalRegistry::new(s).unwrap();
        let g1 = reg.invent(t.clone()).unwrap();
        assert!(reg.strictly_above(reg.primary(), g1));
        assert!(!reg.strictly_above(g1, reg.primary()));
        let name1 = reg.name(g1).to_owned();
        reg.retire(g1).unwrap();
        let g2 = reg.invent(t).unwrap();
        assert_ne!(g1, g2);
        assert_ne!(reg.name(g2), name1);
    }

    #[test]
    fn poset_rejects_cycles() {
        let mut v = Vocab::new();
        let s = State::new([sensor(&mut v, "X")]).unwrap();
        let t1 = State::new([sensor(&mut v, "Y")]).unwrap();
        let t2 = State::new([sensor(&mut v, "Z")]).unwrap();
        let mut reg = GoalRegistry::new(s).unwrap();
        let a = reg.invent(t1).unwrap();
        let b = reg.invent(t2).unwrap();
        reg.add_edge(b, a).unwrap();
        assert!(reg.strictly_above(a, b));
        assert!(matches!(reg.add_edge(a, b), Err(CoreError::PosetCycle)));
        assert!(matches!(reg.add_edge(a, a), Err(CoreError::PosetCycle)));
    }

    #[test]
    fn ancestors_include_implicit_supremum() {
        let mut v = Vocab::new();
        let s = State::new([sensor(&mut v, "X")]).unwrap();
        let t1 = State::new([sensor(&mut v, "Y")]).unwrap();
        let t2 = State::new([sensor(&mut v, "Z")]).unwrap();
        let mut reg = GoalRegistry::new(s).unwrap();
        let a = reg.invent(t1).unwrap();
        let b = reg.invent(t2).unwrap();
        reg.add_edge(b, a).unwrap();
        assert_eq!(reg.strict_ancestors(b).unwrap(), vec![reg.primary(), a]);
        assert_eq!(reg.strict_ancestors(a).unwrap(), vec![reg.primary()]);
        assert!(reg.strict_ancestors(reg.primary()).unwrap().is_empty());
        let order = reg.bottom_up();
        assert_eq!(order.last().copied(), Some(reg.primary()));
        assert_eq!(order[0], b);
    }

    #[test]
    fn duplicate_interpretation_check_is_scoped_to_subgoals() {
        let mut v = Vocab::new();
        let prime = State::new([sensor(&mut v, "X")]).unwrap();
        let s = State::new([sensor(&mut v, "Y")]).unwrap();
        let mut reg = GoalRegistry::new(prime.clone()).unwrap();
        let a = reg.invent(s.clone()).unwrap();
        let b = reg.invent(State::new([sensor(&mut v, "Z")]).unwrap()).unwrap();
        reg.add_edge(a, reg.primary()).unwrap();
        reg.add_edge(b, reg.primary()).unwrap();
        // Same interpretation below the primary goal is found...
        assert_eq!(reg.find_subgoal_with_interpretation(reg.primary(), &s), Some(a));
        // ...the primary's own interpretation matches reflexively...
        assert_eq!(
            reg.find_subgoal_with_interpretation(reg.primary(), &prime),
            Some(reg.primary())
        );
        // ...but a sibling's interpretation does not block a different goal.
        assert_eq!(reg.find_subgoal_with_interpretation(b, &s), None);
    }
}
