//! Subgoal discovery: mine candidate sensor states, invent goal predicates
//! for them, and accept those whose insertion into the best policies raises
//! the aggregate frequency fitness by at least β.
//!
//! Candidate evaluation runs against a frozen snapshot: a candidate's truth
//! history is computed directly from its achievement bitmap under the
//! tentative edge P_S ⊑ G, so only accepted candidates ever touch the
//! registry. All candidates are judged against the same BESTPOL baseline.

use std::collections::HashSet;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::buffer::ReplayBuffer;
use crate::error::CoreError;
use crate::index::goal_truth_scan;
use crate::language::{GoalId, State};
use crate::policy_learning::{FitnessKind, PolicyLearningParams};
use crate::rule_learning::{MiningSession, RuleLearningParams};
use crate::semantics::{prob_from_counts, prob_to_f64, Prob};
use crate::text::render_state;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SubgoalParams {
    /// Base fitness gain β a candidate must deliver to be accepted.
    pub beta: f64,
    /// Cardinality cap on candidate states.
    pub max_subgoal_size: usize,
}

impl Default for SubgoalParams {
    fn default() -> Self {
        SubgoalParams { beta: 0.2, max_subgoal_size: 2 }
    }
}

impl SubgoalParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err("beta must lie in [0, 1]".into());
        }
        if self.max_subgoal_size < 1 {
            return Err("max_subgoal_size must be at least 1".into());
        }
        Ok(())
    }
}

/// One accepted invention, for the discovery log.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedSubgoal {
    pub goal: GoalId,
    pub parent: GoalId,
    pub interpretation: State,
    pub gain: f64,
}

/// Per-policy chain bitmaps captured before the snapshot is released.
struct PolicyChains {
    len: usize,
    starts: Bits,
    /// Chain heads whose final tuple satisfies the target.
    full: Bits,
}

/// Runs subgoal discovery for `goal`, extending the registry and the goal
/// order with every accepted candidate. Returns the acceptance log.
///
/// `budget` bounds the number of acceptances (subgoal-capacity agents).
pub fn discover(
    buf: &mut ReplayBuffer,
    goal: GoalId,
    rule_params: &RuleLearningParams,
    policy_params: &PolicyLearningParams,
    params: &SubgoalParams,
    budget: Option<usize>,
) -> Result<Vec<AcceptedSubgoal>, CoreError> {
    if budget == Some(0) {
        return Ok(Vec::new());
    }
    let target = buf.goals().interpretation(goal)?.clone();
    let n = buf.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    // Snapshot phase: learn frequency-fitness policies and capture every
    // bitmap needed for candidate trials.
    let (bestpol, base_avg, reset_hits) = {
        let session = MiningSession::new(buf, rule_params.clone())?;
        let pol = session.learn_policies(&target, &policy_params.with_kind(FitnessKind::Frequency))?;

        let mut chain_info = Vec::with_capacity(pol.len());
        for lp in &pol {
            let (starts, ends) = session.index().chain_points(&lp.policy)?;
            let full = ends.shifted_down(lp.policy.len() - 1);
            chain_info.push((starts, ends, full));
        }

        // BESTPOL: per witness tuple achieving π(goal), the fq-maximal
        // policies ending there.
        let mut best: HashSet<usize> = HashSet::new();
        for &t in buf.achievement_indices(goal)? {
            let here: Vec<usize> = (0..pol.len())
                .filter(|&i| chain_info[i].1.get(t as usize))
                .collect();
            let Some(max) = here.iter().map(|&i| &pol[i].fitness).max() else {
                continue;
            };
            let max = max.clone();
            best.extend(here.into_iter().filter(|&i| pol[i].fitness == max));
        }
        if best.is_empty() {
            return Ok(Vec::new());
        }
        let mut best: Vec<usize> = best.into_iter().collect();
        best.sort_unstable();

        let chains: Vec<PolicyChains> = best
            .iter()
            .map(|&i| PolicyChains {
                len: pol[i].policy.len(),
                starts: chain_info[i].0.clone(),
                full: chain_info[i].2.clone(),
            })
            .collect();
        let base_avg = aggregate_fq(chains.iter().map(|c| (c.starts.clone(), c.full.clone(), c.len)), n);

        // Resets of a prospective child of `goal`: achievements of the goal
        // itself and of everything strictly above it.
        let mut reset_hits = session.index().goal_achievements(goal)?.clone();
        for a in buf.goals().strict_ancestors(goal)? {
            reset_hits.or_assign(session.index().goal_achievements(a)?);
        }
        (chains, base_avg, reset_hits)
    };

    // Candidate states: subsets of observed pre- and post-states up to the
    // size cap, deterministically ordered by cardinality then rendering.
    let mut seen: HashSet<State> = HashSet::new();
    let mut candidates: Vec<State> = Vec::new();
    for tuple in buf.tuples() {
        for side in [&tuple.s_pre, &tuple.s_post] {
            for subset in bounded_subsets(side, params.max_subgoal_size) {
                if seen.insert(subset.clone()) {
                    candidates.push(subset);
                }
            }
        }
    }
    candidates.sort_by_cached_key(|s| (s.len(), render_state(s, buf.vocab(), buf.goals())));

    let beta = Prob::from_float(params.beta).unwrap_or_else(Prob::zero);
    let mut accepted = Vec::new();
    let mut remaining = budget;

    for cand in candidates {
        if remaining == Some(0) {
            break;
        }
        // Skip states already interpreting a subgoal of `goal` (or `goal`
        // itself).
        if buf.goals().find_subgoal_with_interpretation(goal, &cand).is_some() {
            continue;
        }
        // Truth history of the tentative predicate under P_S ⊑ goal.
        let mut ach = Bits::zeros(n);
        for (t, tuple) in buf.tuples().iter().enumerate() {
            if cand.is_subset_of(&tuple.s_post) {
                ach.set(t);
            }
        }
        let (truth, _) = goal_truth_scan(&ach, &reset_hits, n);

        // The updated policies add the predicate to every step state, which
        // intersects each chain window with the truth bitmap.
        let upd_avg = aggregate_fq(
            bestpol.iter().map(|c| {
                let mut w = truth.clone();
                for i in 1..c.len {
                    w.and_assign(&truth.shifted_down(i));
                }
                let mut starts = c.starts.clone();
                starts.and_assign(&w);
                let mut full = c.full.clone();
                full.and_assign(&w);
                (starts, full, c.len)
            }),
            n,
        );

        let gain = upd_avg.clone() - base_avg.clone();
        if gain >= beta {
            let g = buf.invent_goal(cand.clone())?;
            buf.add_goal_edge(g, goal)?;
            accepted.push(AcceptedSubgoal {
                goal: g,
                parent: goal,
                interpretation: cand,
                gain: prob_to_f64(&gain),
            });
            if let Some(r) = remaining.as_mut() {
                *r -= 1;
            }
        }
    }
    Ok(accepted)
}

/// Aggregate frequency fitness from per-policy (starts, full-chain starts,
/// length) bitmaps: distinct ending tuples over distinct starting tuples.
fn aggregate_fq(chains: impl Iterator<Item = (Bits, Bits, usize)>, n: usize) -> Prob {
    let mut starts = Bits::zeros(n);
    let mut ends = Bits::zeros(n);
    for (s, full, len) in chains {
        starts.or_assign(&s);
        ends.or_assign(&full.shifted_up(len - 1));
    }
    let s = starts.count();
    if s == 0 {
        return Prob::zero();
    }
    prob_from_counts(ends.count(), s)
}

/// Non-empty subsets of `state` up to `cap` elements.
fn bounded_subsets(state: &State, cap: usize) -> Vec<State> {
    use itertools::Itertools;
    let preds: Vec<_> = state.iter().collect();
    let mut out = Vec::new();
    for k in 1..=cap.min(preds.len()) {
        for combo in preds.iter().copied().combinations(k) {
            out.push(combo.into_iter().collect());
        }
    }
    out
}
