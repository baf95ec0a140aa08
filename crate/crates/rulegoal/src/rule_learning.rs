//! Environment rule learning: enumerate-and-refine search for probabilistic
//! laws with a fixed conclusion.
//!
//! Base enumeration covers every premise of size at most `base_depth`; the
//! refinement loop then extends inclusion-maximal laws one predicate at a
//! time as long as the extensions are themselves laws. Candidate premise
//! predicates are those observed somewhere in the buffer plus the registered
//! goals; rules over never-observed predicates have undefined probability
//! and can be skipped outright.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::error::CoreError;
use crate::index::BufferIndex;
use crate::language::{Predicate, State, SymbolId};
use crate::rules::EnvironmentRule;
use crate::semantics::{self, Prob, RuleCounts};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleLearningParams {
    /// Base enumeration depth d >= 1.
    pub base_depth: usize,
    /// Laws are kept iff the Wilson lower confidence bound of prmconc/prm at
    /// `confidence_threshold` is at least `probability_threshold`.
    pub probability_threshold: f64,
    pub confidence_threshold: f64,
    /// A refinement keeps being refined only if it improves on its parent's
    /// probability by at least this much.
    pub probability_gain_threshold: f64,
    /// Maximal number of sensor predicates in a premise; goal predicates are
    /// bounded only by the premise size.
    pub max_sensor_predicates: usize,
}

impl Default for RuleLearningParams {
    fn default() -> Self {
        RuleLearningParams {
            base_depth: 3,
            probability_threshold: 0.1,
            confidence_threshold: 0.9,
            probability_gain_threshold: 0.1,
            max_sensor_predicates: 1,
        }
    }
}

impl RuleLearningParams {
    /// Unfiltered search: zeroed thresholds, full depth and width.
    pub fn exhaustive(universe: usize) -> Self {
        RuleLearningParams {
            base_depth: universe.max(1),
            probability_threshold: 0.0,
            confidence_threshold: 0.0,
            probability_gain_threshold: 0.0,
            max_sensor_predicates: universe.max(1),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.base_depth < 1 {
            return Err("base_depth must be at least 1".into());
        }
        if self.max_sensor_predicates < 1 {
            return Err("max_sensor_predicates must be at least 1".into());
        }
        for (name, v) in [
            ("probability_threshold", self.probability_threshold),
            ("confidence_threshold", self.confidence_threshold),
            ("probability_gain_threshold", self.probability_gain_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// A mined law together with its support counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedRule {
    pub rule: EnvironmentRule,
    pub counts: RuleCounts,
}

impl LearnedRule {
    pub fn probability(&self) -> Prob {
        self.counts.probability().expect("learned rules have defined probability")
    }

    pub fn probability_f64(&self) -> f64 {
        f64::from(self.counts.prmconc) / f64::from(self.counts.prm)
    }
}

/// One-sided Wilson lower confidence bound for `successes`/`trials`.
///
/// Degenerate confidence levels collapse to the point estimate (<= 0.5) or
/// to zero (>= 1, the infinite-z limit).
pub fn wilson_lower_bound(successes: u32, trials: u32, confidence: f64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = f64::from(trials);
    let p = f64::from(successes) / n;
    if confidence <= 0.5 {
        return p;
    }
    if confidence >= 1.0 {
        return 0.0;
    }
    use statrs::distribution::ContinuousCDF;
    let z = statrs::distribution::Normal::standard().inverse_cdf(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let margin = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - margin) / denom).max(0.0)
}

/// Definitional check of Def. 3: prob(r) is defined and strictly exceeds the
/// probability of every rule obtained by removing premise predicates (same
/// action and conclusion); subset rules with undefined probability cannot
/// defeat `r`.
pub fn is_probabilistic_law(rule: &EnvironmentRule, buf: &ReplayBuffer) -> Result<bool, CoreError> {
    let counts = semantics::rule_counts(rule, buf)?;
    if counts.prm == 0 {
        return Ok(false);
    }
    let preds: Vec<Predicate> = rule.premise().iter().collect();
    for mask in 1..(1u32 << preds.len()) - 1 {
        let subset: State = preds
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| *p)
            .collect();
        let sub = EnvironmentRule::new(subset, rule.action(), rule.conclusion().clone())?;
        let sub_counts = semantics::rule_counts(&sub, buf)?;
        debug_assert!(sub_counts.prm >= counts.prm, "subset premises have at least the support");
        if let Some(ord) = sub_counts.cmp_probability(&counts) {
            if ord != std::cmp::Ordering::Less {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A frozen buffer plus the bitmap index and per-conclusion law cache used
/// by one learning round. Rule and policy learning are pure functions of the
/// snapshot, so results are memoized per conclusion.
pub struct MiningSession<'a> {
    index: BufferIndex<'a>,
    params: RuleLearningParams,
    laws: RefCell<HashMap<State, Rc<Vec<LearnedRule>>>>,
}

impl<'a> MiningSession<'a> {
    pub fn new(buf: &'a ReplayBuffer, params: RuleLearningParams) -> Result<Self, CoreError> {
        Ok(MiningSession { index: BufferIndex::build(buf)?, params, laws: RefCell::new(HashMap::new()) })
    }

    pub fn buffer(&self) -> &'a ReplayBuffer {
        self.index.buffer()
    }

    pub(crate) fn index(&self) -> &BufferIndex<'a> {
        &self.index
    }

    pub fn params(&self) -> &RuleLearningParams {
        &self.params
    }

    /// All conclusions mined so far, with their law sets.
    pub fn mined(&self) -> Vec<(State, Rc<Vec<LearnedRule>>)> {
        let mut v: Vec<_> =
            self.laws.borrow().iter().map(|(k, val)| (k.clone(), Rc::clone(val))).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Algorithm entry point: probabilistic laws with the given conclusion,
    /// memoized per conclusion for the lifetime of the session.
    pub fn learn_rules(&self, conclusion: &State) -> Result<Rc<Vec<LearnedRule>>, CoreError> {
        if let Some(hit) = self.laws.borrow().get(conclusion) {
            return Ok(Rc::clone(hit));
        }
        let mined = Rc::new(self.mine(conclusion)?);
        self.laws.borrow_mut().insert(conclusion.clone(), Rc::clone(&mined));
        Ok(mined)
    }

    fn mine(&self, conclusion: &State) -> Result<Vec<LearnedRule>, CoreError> {
        if conclusion.is_empty() {
            return Err(CoreError::EmptyState("rule conclusion"));
        }
        let buf = self.index.buffer();
        if buf.is_empty() {
            return Ok(Vec::new());
        }
        let conc_bits = self.index.conclusion_bits(conclusion)?;

        // Candidate premise predicates: observed sensors plus active goals.
        let sensors: Vec<Predicate> =
            self.index.observed_sensors().iter().map(|&s| Predicate::Sensor(s)).collect();
        let goals: Vec<Predicate> =
            buf.goals().active().map(Predicate::Goal).collect();
        let actions: Vec<SymbolId> = self.index.observed_actions().to_vec();

        let mut ctx = MineCtx {
            session: self,
            conc_bits,
            counts: HashMap::new(),
            law_status: HashMap::new(),
        };

        let mut lws: BTreeSet<(SymbolId, State)> = BTreeSet::new();

        // Base enumeration: premises of size <= d with the sensor cap.
        let d = self.params.base_depth;
        let max_s = self.params.max_sensor_predicates.min(d);
        for &action in &actions {
            for ns in 0..=max_s.min(sensors.len()) {
                for sensor_combo in combinations(&sensors, ns) {
                    let goal_budget = d - ns;
                    let min_goals = usize::from(ns == 0);
                    for ng in min_goals..=goal_budget.min(goals.len()) {
                        for goal_combo in combinations(&goals, ng) {
                            let premise: State =
                                sensor_combo.iter().chain(goal_combo.iter()).copied().collect();
                            if ctx.is_law(&premise, action)? {
                                lws.insert((action, premise));
                            }
                        }
                    }
                }
            }
        }

        // Refinement worklist: inclusion-maximal laws per action.
        let mut worklist: BTreeSet<(SymbolId, State)> = lws
            .iter()
            .filter(|(a, p)| {
                !lws.iter().any(|(a2, p2)| a2 == a && p.is_strict_subset_of(p2))
            })
            .cloned()
            .collect();
        let mut processed: HashSet<(SymbolId, State)> = HashSet::new();
        let universe: Vec<Predicate> =
            sensors.iter().chain(goals.iter()).copied().collect();

        while let Some(item) = worklist.pop_first() {
            if !processed.insert(item.clone()) {
                continue;
            }
            let (action, premise) = item;
            let parent = ctx.count(&premise, action)?;
            let sensor_count = premise.sensor_part().len();
            for &pred in &universe {
                if premise.contains(pred) {
                    continue;
                }
                if pred.is_sensor() && sensor_count + 1 > self.params.max_sensor_predicates {
                    continue;
                }
                let refined = premise.with(pred);
                if !ctx.is_law(&refined, action)? {
                    continue;
                }
                lws.insert((action, refined.clone()));
                let child = ctx.count(&refined, action)?;
                if gain_at_least(&child, &parent, self.params.probability_gain_threshold)
                    && !processed.contains(&(action, refined.clone()))
                {
                    worklist.insert((action, refined));
                }
            }
        }

        // Output filter: statistical significance against the probability
        // threshold, then a deterministic order.
        let mut out = Vec::new();
        for (action, premise) in lws {
            let counts = ctx.count(&premise, action)?;
            let bound = wilson_lower_bound(
                counts.prmconc,
                counts.prm,
                self.params.confidence_threshold,
            );
            if bound < self.params.probability_threshold {
                continue;
            }
            out.push(LearnedRule {
                rule: EnvironmentRule::new(premise, action, conclusion.clone())?,
                counts,
            });
        }
        out.sort_by(|a, b| {
            (a.rule.action(), a.rule.premise()).cmp(&(b.rule.action(), b.rule.premise()))
        });
        Ok(out)
    }
}

/// Per-conclusion mining scratch: support counts and law verdicts memoized
/// by (premise, action).
struct MineCtx<'s, 'a> {
    session: &'s MiningSession<'a>,
    conc_bits: crate::bits::Bits,
    counts: HashMap<(State, SymbolId), RuleCounts>,
    law_status: HashMap<(State, SymbolId), bool>,
}

impl MineCtx<'_, '_> {
    fn count(&mut self, premise: &State, action: SymbolId) -> Result<RuleCounts, CoreError> {
        if let Some(c) = self.counts.get(&(premise.clone(), action)) {
            return Ok(*c);
        }
        let bits = self.session.index.match_bits(premise, Some(action))?;
        let c = self.session.index.counts_from_bits(&bits, &self.conc_bits);
        self.counts.insert((premise.clone(), action), c);
        Ok(c)
    }

    fn is_law(&mut self, premise: &State, action: SymbolId) -> Result<bool, CoreError> {
        if let Some(&v) = self.law_status.get(&(premise.clone(), action)) {
            return Ok(v);
        }
        let counts = self.count(premise, action)?;
        let mut verdict = counts.prm > 0;
        if verdict {
            let preds: Vec<Predicate> = premise.iter().collect();
            'subsets: for mask in 1..(1u32 << preds.len()) - 1 {
                let subset: State = preds
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, p)| *p)
                    .collect();
                let sub = self.count(&subset, action)?;
                if let Some(ord) = sub.cmp_probability(&counts) {
                    if ord != std::cmp::Ordering::Less {
                        verdict = false;
                        break 'subsets;
                    }
                }
            }
        }
        self.law_status.insert((premise.clone(), action), verdict);
        Ok(verdict)
    }
}

fn gain_at_least(child: &RuleCounts, parent: &RuleCounts, threshold: f64) -> bool {
    let (Some(c), Some(p)) = (child.probability(), parent.probability()) else {
        return false;
    };
    let Some(t) = Prob::from_float(threshold) else {
        return false;
    };
    c - p >= t
}

fn combinations(items: &[Predicate], k: usize) -> Vec<Vec<Predicate>> {
    use itertools::Itertools;
    if k == 0 {
        return vec![Vec::new()];
    }
    items.iter().copied().combinations(k).collect()
}

/// Convenience entry point building a one-shot session.
pub fn learn_rules(
    buf: &ReplayBuffer,
    conclusion: &State,
    params: &RuleLearningParams,
) -> Result<Vec<LearnedRule>, CoreError> {
    let session = MiningSession::new(buf, params.clone())?;
    let laws = session.learn_rules(conclusion)?;
    Ok(laws.as_ref().clone())
}
