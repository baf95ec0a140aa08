//! Policy learning: backward-chained construction of strong policies from
//! probabilistic laws.
//!
//! Policies grow backwards from the goal by prepending laws that conclude in
//! the current premise. A refined policy below the fitness floor is dropped
//! from both the frontier and the output. Dominated policies (a shorter
//! variant with at least the fitness exists) are excluded from the output
//! but still refined: their extensions can be strong in their own right, and
//! the output then coincides with exhaustive chain enumeration followed by
//! the strongness filter.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::error::CoreError;
use crate::language::State;
use crate::rule_learning::{LearnedRule, MiningSession, RuleLearningParams};
use crate::rules::{refine_policy, Policy};
use crate::semantics::Prob;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    #[default]
    Standard,
    Frequency,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyLearningParams {
    pub max_policy_length: usize,
    /// Refined policies with fitness below this floor are not kept or
    /// extended further.
    pub fitness_gain_threshold: f64,
    #[serde(default)]
    pub fitness_kind: FitnessKind,
}

impl Default for PolicyLearningParams {
    fn default() -> Self {
        PolicyLearningParams {
            max_policy_length: 4,
            fitness_gain_threshold: 0.5,
            fitness_kind: FitnessKind::Standard,
        }
    }
}

impl PolicyLearningParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_policy_length < 1 {
            return Err("max_policy_length must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.fitness_gain_threshold) {
            return Err("fitness_gain_threshold must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn with_kind(&self, kind: FitnessKind) -> Self {
        PolicyLearningParams { fitness_kind: kind, ..self.clone() }
    }
}

/// A policy with its fitness under the measure it was learned with.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPolicy {
    pub policy: Policy,
    pub fitness: Prob,
}

/// Keeps exactly the rules whose premise and conclusion carry the same goal
/// predicates.
pub fn filter_by_goals(rules: Vec<LearnedRule>) -> Vec<LearnedRule> {
    rules
        .into_iter()
        .filter(|lr| lr.rule.premise().goal_part() == lr.rule.conclusion().goal_part())
        .collect()
}

fn dominated(candidate: &LearnedPolicy, against: &[LearnedPolicy]) -> bool {
    against.iter().any(|p| {
        p.policy.len() < candidate.policy.len()
            && p.fitness >= candidate.fitness
            && p.policy.is_variant_of(&candidate.policy)
    })
}

/// Removes every candidate that has a shorter variant with at least its
/// fitness among `against`.
pub fn get_strong(candidates: Vec<LearnedPolicy>, against: &[LearnedPolicy]) -> Vec<LearnedPolicy> {
    candidates.into_iter().filter(|c| !dominated(c, against)).collect()
}

impl MiningSession<'_> {
    /// Learns policies for the goal state, strongest-form output: every
    /// returned policy passes the fitness floor (when refined) and has no
    /// shorter variant of greater-or-equal fitness among the reachable
    /// chains.
    pub fn learn_policies(
        &self,
        goal: &State,
        params: &PolicyLearningParams,
    ) -> Result<Vec<LearnedPolicy>, CoreError> {
        if goal.is_empty() {
            return Err(CoreError::EmptyState("policy goal"));
        }
        let floor = Prob::from_float(params.fitness_gain_threshold.clamp(0.0, 1.0))
            .unwrap_or_else(|| Prob::from_integer(0.into()));

        let mut all: Vec<LearnedPolicy> = Vec::new();
        let mut seen: HashSet<Policy> = HashSet::new();
        let mut output: Vec<LearnedPolicy> = Vec::new();
        let mut frontier: Vec<LearnedPolicy> = Vec::new();

        for law in self.learn_rules(goal)?.iter() {
            let policy = Policy::new(
                vec![(law.rule.premise().clone(), law.rule.action())],
                goal.clone(),
            )?;
            let Some(fitness) = self.policy_fitness(&policy, params.fitness_kind)? else {
                continue;
            };
            let lp = LearnedPolicy { policy, fitness };
            if !seen.insert(lp.policy.clone()) {
                continue;
            }
            if lp.fitness >= floor {
                frontier.push(lp.clone());
            }
            all.push(lp.clone());
            output.push(lp);
        }

        let mut depth = 1;
        while !frontier.is_empty() && depth < params.max_policy_length {
            depth += 1;
            frontier.sort_by(|a, b| a.policy.cmp(&b.policy));
            let mut next = Vec::new();
            for lp in &frontier {
                let laws = filter_by_goals(self.learn_rules(lp.policy.premise())?.as_ref().clone());
                for law in laws {
                    let refined = refine_policy(&lp.policy, &law.rule)?;
                    if seen.contains(&refined) {
                        continue;
                    }
                    let fitness = match params.fitness_kind {
                        FitnessKind::Standard => lp.fitness.clone() * law.probability(),
                        FitnessKind::Frequency => {
                            match self.policy_fitness(&refined, FitnessKind::Frequency)? {
                                None => continue,
                                Some(f) => f,
                            }
                        }
                    };
                    if fitness < floor {
                        continue;
                    }
                    seen.insert(refined.clone());
                    let cand = LearnedPolicy { policy: refined, fitness };
                    if !dominated(&cand, &all) {
                        output.push(cand.clone());
                    }
                    all.push(cand.clone());
                    next.push(cand);
                }
            }
            frontier = next;
        }

        output.sort_by(|a, b| a.policy.cmp(&b.policy));
        Ok(output)
    }

    /// Exact fitness of a policy under the chosen measure, computed on the
    /// session index.
    pub fn policy_fitness(
        &self,
        policy: &Policy,
        kind: FitnessKind,
    ) -> Result<Option<Prob>, CoreError> {
        match kind {
            FitnessKind::Standard => {
                let mut acc = Prob::from_integer(1.into());
                for (s, a, next) in policy.transitions() {
                    let bits = self.index().match_bits(s, Some(a))?;
                    let conc = self.index().conclusion_bits(next)?;
                    let counts = self.index().counts_from_bits(&bits, &conc);
                    match counts.probability() {
                        None => return Ok(None),
                        Some(p) => acc *= p,
                    }
                }
                Ok(Some(acc))
            }
            FitnessKind::Frequency => {
                let (starts, ends) = self.index().chain_points(policy)?;
                let s = starts.count();
                if s == 0 {
                    return Ok(None);
                }
                Ok(Some(crate::semantics::prob_from_counts(ends.count(), s)))
            }
        }
    }
}

/// Convenience wrapper building a one-shot session.
pub fn learn_policies(
    buf: &ReplayBuffer,
    goal: &State,
    params: &PolicyLearningParams,
    rule_params: &RuleLearningParams,
) -> Result<Vec<LearnedPolicy>, CoreError> {
    MiningSession::new(buf, rule_params.clone())?.learn_policies(goal, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{ReplayBuffer, TransitionTuple};
    use crate::language::{GoalRegistry, Predicate, Vocab};
    use crate::rules::EnvironmentRule;
    use crate::semantics::{self, prob_from_counts, RuleCounts};

    fn prob(n: u32, d: u32) -> Prob {
        prob_from_counts(n, d)
    }

    struct Fx {
        buf: ReplayBuffer,
        right: Predicate,
        front: Predicate,
        center: Predicate,
        picked: Predicate,
        tr: crate::language::SymbolId,
        mv: crate::language::SymbolId,
    }

    /// Single-segment chain Right -> Front -> pickup, the running example.
    fn pickup_chain() -> Fx {
        let mut v = Vocab::new();
        let right = Predicate::Sensor(v.intern("Right(type3)"));
        let front = Predicate::Sensor(v.intern("Front(type3)"));
        let center = Predicate::Sensor(v.intern("Center(type3)"));
        let picked = Predicate::Sensor(v.intern("PickedUp"));
        let tr = v.intern("turn-right");
        let mv = v.intern("move");
        let goal = State::new([center, picked]).unwrap();
        let reg = GoalRegistry::new(goal).unwrap();
        let mut buf = ReplayBuffer::new(v, reg);
        let steps: &[(&[Predicate], crate::language::SymbolId, &[Predicate])] = &[
            (&[right], tr, &[front]),
            (&[front], mv, &[center, picked]),
        ];
        for (pre, a, post) in steps {
            buf.append(
                TransitionTuple::new(
                    State::new(pre.iter().copied()).unwrap(),
                    *a,
                    State::new(post.iter().copied()).unwrap(),
                )
                .unwrap(),
            )
            .unwrap();
        }
        Fx { buf, right, front, center, picked, tr, mv }
    }

    #[test]
    fn filter_by_goals_cases() {
        let mut fx = pickup_chain();
        let g = Predicate::Goal(fx.buf.invent_goal(State::new([fx.center]).unwrap()).unwrap());
        let mk = |pre: &[Predicate], post: &[Predicate], fx: &Fx| LearnedRule {
            rule: EnvironmentRule::new(
                State::new(pre.iter().copied()).unwrap(),
                fx.mv,
                State::new(post.iter().copied()).unwrap(),
            )
            .unwrap(),
            counts: RuleCounts { prm: 1, prmconc: 1 },
        };
        let no_goals = mk(&[fx.front], &[fx.center], &fx);
        let premise_only = mk(&[fx.front, g], &[fx.center], &fx);
        let both = mk(&[fx.front, g], &[fx.center, g], &fx);
        let kept = filter_by_goals(vec![no_goals.clone(), premise_only, both.clone()]);
        assert_eq!(kept, vec![no_goals, both]);
    }

    #[test]
    fn get_strong_cases() {
        let fx = pickup_chain();
        let goal = State::new([fx.center, fx.picked]).unwrap();
        let short = LearnedPolicy {
            policy: Policy::new(vec![(State::new([fx.front]).unwrap(), fx.mv)], goal.clone())
                .unwrap(),
            fitness: prob(1, 2),
        };
        let long = |fit: Prob| LearnedPolicy {
            policy: Policy::new(
                vec![
                    (State::new([fx.front]).unwrap(), fx.tr),
                    (State::new([fx.right]).unwrap(), fx.mv),
                ],
                goal.clone(),
            )
            .unwrap(),
            fitness: fit,
        };
        // No variants around: kept.
        assert_eq!(get_strong(vec![short.clone()], &[]).len(), 1);
        // Equal-fitness shorter variant: removed.
        let removed = get_strong(vec![long(prob(1, 2))], std::slice::from_ref(&short));
        assert!(removed.is_empty());
        // Strictly lower-fitness shorter variant: kept.
        let kept = get_strong(vec![long(prob(3, 4))], &[short]);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn no_seed_laws_means_no_policies() {
        let fx = pickup_chain();
        let unseen = State::new([fx.right, fx.picked]).unwrap();
        let out = learn_policies(
            &fx.buf,
            &unseen,
            &PolicyLearningParams::default(),
            &RuleLearningParams::default(),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn backward_chaining_builds_the_two_step_policy() {
        let fx = pickup_chain();
        let goal = State::new([fx.center, fx.picked]).unwrap();
        let out = learn_policies(
            &fx.buf,
            &goal,
            &PolicyLearningParams::default(),
            &RuleLearningParams::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        let seed = out.iter().find(|lp| lp.policy.len() == 1).unwrap();
        assert_eq!(seed.policy.premise(), &State::new([fx.front]).unwrap());
        assert_eq!(seed.fitness, prob(1, 1));
        let two = out.iter().find(|lp| lp.policy.len() == 2).unwrap();
        assert_eq!(two.policy.premise(), &State::new([fx.right]).unwrap());
        assert_eq!(two.policy.primary_action(), fx.tr);
        assert_eq!(two.fitness, prob(1, 1));
        // Every adjacent pair of each output policy is a probabilistic law.
        for lp in &out {
            for (s, a, next) in lp.policy.transitions() {
                let r = EnvironmentRule::new(s.clone(), a, next.clone()).unwrap();
                assert!(crate::rule_learning::is_probabilistic_law(&r, &fx.buf).unwrap());
            }
            // And the stored fitness matches the definitional product.
            assert_eq!(
                semantics::fitness(&lp.policy, &fx.buf).unwrap(),
                Some(lp.fitness.clone())
            );
        }
    }

    #[test]
    fn max_length_bounds_the_search() {
        let fx = pickup_chain();
        let goal = State::new([fx.center, fx.picked]).unwrap();
        let params = PolicyLearningParams { max_policy_length: 1, ..Default::default() };
        let out =
            learn_policies(&fx.buf, &goal, &params, &RuleLearningParams::default()).unwrap();
        assert!(out.iter().all(|lp| lp.policy.len() == 1));
    }

    #[test]
    fn fitness_floor_prunes_refinements() {
        // Front -> goal succeeds once out of two tries, so the refined
        // two-step policy has fitness 1/2 * 1 = 1/2 < 0.6 and is dropped,
        // while the seed stays.
        let mut v = Vocab::new();
        let right = Predicate::Sensor(v.intern("Right(type3)"));
        let front = Predicate::Sensor(v.intern("Front(type3)"));
        let center = Predicate::Sensor(v.intern("Center(type3)"));
        let picked = Predicate::Sensor(v.intern("PickedUp"));
        let other = Predicate::Sensor(v.intern("N"));
        let tr = v.intern("turn-right");
        let mv = v.intern("move");
        let goal = State::new([center, picked]).unwrap();
        let reg = GoalRegistry::new(goal.clone()).unwrap();
        let mut buf = ReplayBuffer::new(v, reg);
        let steps: &[(&[Predicate], crate::language::SymbolId, &[Predicate])] = &[
            (&[right], tr, &[front]),
            (&[front], mv, &[center, picked]),
            (&[center, picked], tr, &[right]),
            (&[right], tr, &[front]),
            (&[front], mv, &[other]),
        ];
        for (pre, a, post) in steps {
            buf.append(
                TransitionTuple::new(
                    State::new(pre.iter().copied()).unwrap(),
                    *a,
                    State::new(post.iter().copied()).unwrap(),
                )
                .unwrap(),
            )
            .unwrap();
        }
        let params = PolicyLearningParams {
            fitness_gain_threshold: 0.6,
            ..Default::default()
        };
        let rp = RuleLearningParams::default();
        let out = learn_policies(&buf, &goal, &params, &rp).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].policy.len(), 1);
        assert_eq!(out[0].fitness, prob(1, 2));
        // With the floor at zero the two-step refinement survives.
        let loose = PolicyLearningParams { fitness_gain_threshold: 0.0, ..Default::default() };
        let out2 = learn_policies(&buf, &goal, &loose, &rp).unwrap();
        assert!(out2.iter().any(|lp| lp.policy.len() == 2 && lp.fitness == prob(1, 2)));
    }

    #[test]
    fn frequency_kind_requires_realized_chains() {
        // Right {tr} Front {mv} goal: the two transitions exist in separate
        // segments, so the two-step policy has no realized chain and is
        // dropped under the frequency measure, while the standard measure
        // keeps it.
        let mut v = Vocab::new();
        let right = Predicate::Sensor(v.intern("Right(type3)"));
        let front = Predicate::Sensor(v.intern("Front(type3)"));
        let center = Predicate::Sensor(v.intern("Center(type3)"));
        let picked = Predicate::Sensor(v.intern("PickedUp"));
        let tr = v.intern("turn-right");
        let mv = v.intern("move");
        let goal = State::new([center, picked]).unwrap();
        let reg = GoalRegistry::new(goal.clone()).unwrap();
        let mut buf = ReplayBuffer::new(v, reg);
        buf.append(
            TransitionTuple::new(
                State::new([right]).unwrap(),
                tr,
                State::new([front]).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        buf.begin_segment();
        buf.append(
            TransitionTuple::new(
                State::new([front]).unwrap(),
                mv,
                State::new([center, picked]).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let rp = RuleLearningParams::default();
        let std_out =
            learn_policies(&buf, &goal, &PolicyLearningParams::default(), &rp).unwrap();
        assert!(std_out.iter().any(|lp| lp.policy.len() == 2));
        let fq_params = PolicyLearningParams::default().with_kind(FitnessKind::Frequency);
        let fq_out = learn_policies(&buf, &goal, &fq_params, &rp).unwrap();
        assert!(fq_out.iter().all(|lp| lp.policy.len() == 1));
        assert_eq!(fq_out.len(), 1);
        // The surviving seed's frequency fitness matches the direct scan.
        assert_eq!(
            semantics::frequency_fitness(&fq_out[0].policy, &buf).unwrap(),
            Some(fq_out[0].fitness.clone())
        );
    }
}
