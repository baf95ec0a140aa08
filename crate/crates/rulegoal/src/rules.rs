//! Environment rules and policies — the two learned artifact kinds.

use crate::error::CoreError;
use crate::language::{State, SymbolId};

/// An environment rule `S1, A -> S2` with non-empty premise and conclusion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvironmentRule {
    premise: State,
    action: SymbolId,
    conclusion: State,
}

impl EnvironmentRule {
    pub fn new(premise: State, action: SymbolId, conclusion: State) -> Result<Self, CoreError> {
        if premise.is_empty() {
            return Err(CoreError::EmptyState("rule premise"));
        }
        if conclusion.is_empty() {
            return Err(CoreError::EmptyState("rule conclusion"));
        }
        Ok(EnvironmentRule { premise, action, conclusion })
    }

    pub fn premise(&self) -> &State {
        &self.premise
    }

    pub fn action(&self) -> SymbolId {
        self.action
    }

    pub fn conclusion(&self) -> &State {
        &self.conclusion
    }

    /// True iff `other` refines `self`: same conclusion and action, premise
    /// extended by exactly one predicate.
    pub fn is_refined_by(&self, other: &EnvironmentRule) -> bool {
        self.action == other.action
            && self.conclusion == other.conclusion
            && self.premise.is_strict_subset_of(&other.premise)
            && other.premise.len() == self.premise.len() + 1
    }
}

/// A policy `S1 {A1} ... Sn {An} G`: an ordered state/action trajectory
/// leading to the target state `G`.
///
/// Every step state carries the same goal-predicate subset (subgoals are
/// neither lost nor suddenly acquired along the way).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Policy {
    steps: Vec<(State, SymbolId)>,
    target: State,
}

impl Policy {
    pub fn new(steps: Vec<(State, SymbolId)>, target: State) -> Result<Self, CoreError> {
        if steps.is_empty() {
            return Err(CoreError::EmptyPolicy);
        }
        if target.is_empty() {
            return Err(CoreError::EmptyState("policy target"));
        }
        let goal_set = steps[0].0.goal_part();
        for (s, _) in &steps {
            if s.is_empty() {
                return Err(CoreError::EmptyState("policy step state"));
            }
            if s.goal_part() != goal_set {
                return Err(CoreError::MixedGoalSets);
            }
        }
        Ok(Policy { steps, target })
    }

    pub fn steps(&self) -> &[(State, SymbolId)] {
        &self.steps
    }

    pub fn target(&self) -> &State {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The policy premise S1.
    pub fn premise(&self) -> &State {
        &self.steps[0].0
    }

    /// The action executed when the policy is selected.
    pub fn primary_action(&self) -> SymbolId {
        self.steps[0].1
    }

    /// The shared goal-predicate subset of the step states.
    pub fn step_goal_set(&self) -> State {
        self.steps[0].0.goal_part()
    }

    /// The n+1 states of the trajectory expression, target last.
    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.steps.iter().map(|(s, _)| s).chain(std::iter::once(&self.target))
    }

    /// The transitions (S_i, A_i, S_{i+1}) with S_{n+1} the target.
    pub fn transitions(&self) -> impl Iterator<Item = (&State, SymbolId, &State)> {
        self.steps.iter().enumerate().map(move |(i, (s, a))| {
            let next = if i + 1 < self.steps.len() { &self.steps[i + 1].0 } else { &self.target };
            (s, *a, next)
        })
    }

    /// True iff `self` is a variant of `p`: same target, premise contained
    /// in p's premise, and the two differ.
    pub fn is_variant_of(&self, p: &Policy) -> bool {
        self != p && self.target == p.target && self.premise().is_subset_of(p.premise())
    }

    /// Returns a copy with `pred` inserted into every step state (the
    /// target is unchanged), as used by subgoal trials.
    pub fn with_step_predicate(&self, pred: crate::language::Predicate) -> Result<Policy, CoreError> {
        let steps = self
            .steps
            .iter()
            .map(|(s, a)| (s.with(pred), *a))
            .collect();
        Policy::new(steps, self.target.clone())
    }
}

/// The policy refinement REFN(P, R): prepends rule `r` to policy `p`.
///
/// Requires post(r) to equal the policy premise and the rule premise to
/// carry the same goal predicates as the premise it extends.
pub fn refine_policy(p: &Policy, r: &EnvironmentRule) -> Result<Policy, CoreError> {
    if r.conclusion() != p.premise() {
        return Err(CoreError::BadRefinement("rule conclusion must equal the policy premise"));
    }
    if r.premise().goal_part() != p.premise().goal_part() {
        return Err(CoreError::BadRefinement(
            "rule premise must carry the same goal predicates as the policy premise",
        ));
    }
    let mut steps = Vec::with_capacity(p.len() + 1);
    steps.push((r.premise().clone(), r.action()));
    steps.extend(p.steps.iter().cloned());
    Policy::new(steps, p.target.clone())
}
