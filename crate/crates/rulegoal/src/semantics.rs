//! Probability and fitness measures over the replay buffer.
//!
//! All measures are exact rationals. `None` stands for the measures'
//! undefined value (no supporting observations); it is distinct from a
//! measured probability of zero.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::buffer::ReplayBuffer;
use crate::error::CoreError;
use crate::rules::{EnvironmentRule, Policy};

/// Exact probability / fitness value.
pub type Prob = BigRational;

pub fn prob_from_counts(num: u32, den: u32) -> Prob {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn prob_to_f64(p: &Prob) -> f64 {
    use num_traits::ToPrimitive;
    p.to_f64().unwrap_or(f64::NAN)
}

/// Support counts of a rule on a buffer: `prm` tuples satisfy the premise
/// and action, `prmconc` of those also satisfy the conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleCounts {
    pub prm: u32,
    pub prmconc: u32,
}

impl RuleCounts {
    pub fn probability(&self) -> Option<Prob> {
        if self.prm == 0 {
            None
        } else {
            Some(prob_from_counts(self.prmconc, self.prm))
        }
    }

    /// Exact comparison of prmconc/prm against another count pair, treating
    /// an undefined value as incomparable (returns None).
    pub fn cmp_probability(&self, other: &RuleCounts) -> Option<std::cmp::Ordering> {
        if self.prm == 0 || other.prm == 0 {
            return None;
        }
        let a = u64::from(self.prmconc) * u64::from(other.prm);
        let b = u64::from(other.prmconc) * u64::from(self.prm);
        Some(a.cmp(&b))
    }
}

/// Counts premise/conclusion support of `rule` by a direct scan.
pub fn rule_counts(rule: &EnvironmentRule, buf: &ReplayBuffer) -> Result<RuleCounts, CoreError> {
    let mut prm = 0;
    let mut prmconc = 0;
    for idx in 0..buf.len() {
        if !buf.state_holds_on(idx, rule.premise(), Some(rule.action()))? {
            continue;
        }
        prm += 1;
        if buf.conclusion_satisfied_on(idx, rule.conclusion())? {
            prmconc += 1;
        }
    }
    Ok(RuleCounts { prm, prmconc })
}

/// prob(R, B) = prmconc / prm, undefined iff prm = 0.
pub fn rule_probability(rule: &EnvironmentRule, buf: &ReplayBuffer) -> Result<Option<Prob>, CoreError> {
    Ok(rule_counts(rule, buf)?.probability())
}

/// Fitness of a policy: the product of the probabilities of its transition
/// rules; undefined if any factor is undefined.
pub fn fitness(policy: &Policy, buf: &ReplayBuffer) -> Result<Option<Prob>, CoreError> {
    let mut acc = Prob::one();
    for (s, a, next) in policy.transitions() {
        let rule = EnvironmentRule::new(s.clone(), a, next.clone())?;
        match rule_probability(&rule, buf)? {
            None => return Ok(None),
            Some(p) => acc *= p,
        }
    }
    Ok(Some(acc))
}

/// True iff the `n` consecutive tuples starting at `start` lie in one
/// segment and match the policy's step states and actions.
fn chain_matches(policy: &Policy, buf: &ReplayBuffer, start: usize) -> Result<bool, CoreError> {
    let n = policy.len();
    if start + n > buf.len() {
        return Ok(false);
    }
    if buf.segment_of(start) != buf.segment_of(start + n - 1) {
        return Ok(false);
    }
    for (i, (s, a)) in policy.steps().iter().enumerate() {
        if !buf.state_holds_on(start + i, s, Some(*a))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Tuple indices that head a chain realizing the policy's trajectory.
pub fn starting_points(policy: &Policy, buf: &ReplayBuffer) -> Result<Vec<usize>, CoreError> {
    let mut out = Vec::new();
    for start in 0..buf.len() {
        if chain_matches(policy, buf, start)? {
            out.push(start);
        }
    }
    Ok(out)
}

/// Tuple indices that complete a chain realizing the policy and satisfying
/// its target in the post-state.
pub fn ending_points(policy: &Policy, buf: &ReplayBuffer) -> Result<Vec<usize>, CoreError> {
    let n = policy.len();
    let mut out = Vec::new();
    for start in 0..buf.len() {
        if chain_matches(policy, buf, start)?
            && buf.conclusion_satisfied_on(start + n - 1, policy.target())?
        {
            out.push(start + n - 1);
        }
    }
    Ok(out)
}

/// Frequency fitness E/S: ending points over starting points; undefined
/// iff there are no starting points.
pub fn frequency_fitness(policy: &Policy, buf: &ReplayBuffer) -> Result<Option<Prob>, CoreError> {
    let s = starting_points(policy, buf)?.len() as u32;
    if s == 0 {
        return Ok(None);
    }
    let e = ending_points(policy, buf)?.len() as u32;
    Ok(Some(prob_from_counts(e, s)))
}

/// Aggregate frequency fitness of a policy family: distinct starting tuples
/// of any member over distinct ending tuples of any member; zero when no
/// member ever starts.
pub fn avg_fq_fitness(policies: &[Policy], buf: &ReplayBuffer) -> Result<Prob, CoreError> {
    let mut starts = vec![false; buf.len()];
    let mut ends = vec![false; buf.len()];
    for p in policies {
        for t in starting_points(p, buf)? {
            starts[t] = true;
        }
        for t in ending_points(p, buf)? {
            ends[t] = true;
        }
    }
    let s = starts.iter().filter(|&&b| b).count() as u32;
    if s == 0 {
        return Ok(Prob::zero());
    }
    let e = ends.iter().filter(|&&b| b).count() as u32;
    Ok(prob_from_counts(e, s))
}

/// Five-place helper used throughout the learners: an exact measure value
/// selected by kind.
pub fn policy_measure(
    policy: &Policy,
    buf: &ReplayBuffer,
    kind: crate::policy_learning::FitnessKind,
) -> Result<Option<Prob>, CoreError> {
    match kind {
        crate::policy_learning::FitnessKind::Standard => fitness(policy, buf),
        crate::policy_learning::FitnessKind::Frequency => frequency_fitness(policy, buf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{ReplayBuffer, TransitionTuple};
    use crate::language::{GoalRegistry, Predicate, State, Vocab};

    struct Fx {
        buf: ReplayBuffer,
        s: Vec<Predicate>,
        tr: crate::language::SymbolId,
        mv: crate::language::SymbolId,
    }

    /// Builds the running example: a chain of (pre, action, post) triples
    /// over sensors Right(type3), Front(type3), Center(type3), PickedUp, N.
    fn example(transitions: &[(&[usize], usize, &[usize])], primary: &[usize]) -> Fx {
        let mut v = Vocab::new();
        let s: Vec<Predicate> = ["Right(type3)", "Front(type3)", "Center(type3)", "PickedUp", "N"]
            .iter()
            .map(|n| Predicate::Sensor(v.intern(n)))
            .collect();
        let tr = v.intern("turn-right");
        let mv = v.intern("move");
        let acts = [tr, mv];
        let prim = State::new(primary.iter().map(|&i| s[i])).unwrap();
        let reg = GoalRegistry::new(prim).unwrap();
        let mut buf = ReplayBuffer::new(v, reg);
        let mut prev_post: Option<State> = None;
        for (pre, a, post) in transitions {
            let pre = State::new(pre.iter().map(|&i| s[i])).unwrap();
            let post = State::new(post.iter().map(|&i| s[i])).unwrap();
            if prev_post.as_ref() != Some(&pre) {
                buf.begin_segment();
            }
            prev_post = Some(post.clone());
            buf.append(TransitionTuple::new(pre, acts[*a], post).unwrap()).unwrap();
        }
        Fx { buf, s, tr, mv }
    }

    fn st(fx: &Fx, idx: &[usize]) -> State {
        State::new(idx.iter().map(|&i| fx.s[i])).unwrap()
    }

    // Right(type3), turn-right -> Front(type3) has probability 1 whenever
    // its premise occurs.
    #[test]
    fn deterministic_rule_has_probability_one() {
        let fx = example(
            &[
                (&[0], 0, &[1]),
                (&[1], 1, &[2, 3]),
                (&[2], 0, &[4]),
                (&[4], 0, &[0]),
                (&[0], 0, &[1]),
            ],
            &[2, 3],
        );
        let r = EnvironmentRule::new(st(&fx, &[0]), fx.tr, st(&fx, &[1])).unwrap();
        let counts = rule_counts(&r, &fx.buf).unwrap();
        assert_eq!(counts, RuleCounts { prm: 2, prmconc: 2 });
        assert_eq!(rule_probability(&r, &fx.buf).unwrap(), Some(Prob::one()));
    }

    // A premise that never occurs gives an undefined probability.
    #[test]
    fn unseen_premise_is_undefined() {
        let fx = example(&[(&[0], 0, &[1])], &[2, 3]);
        let r = EnvironmentRule::new(st(&fx, &[4]), fx.mv, st(&fx, &[1])).unwrap();
        assert_eq!(rule_probability(&r, &fx.buf).unwrap(), None);
    }

    // Premise holds on 2 of 4 tuples, conclusion on 1 of those: p = 0.5.
    #[test]
    fn half_probability_by_direct_count() {
        let fx = example(
            &[(&[1], 1, &[2, 3]), (&[2, 3], 0, &[4]), (&[4], 0, &[1]), (&[1], 1, &[4])],
            &[2, 3],
        );
        let r = EnvironmentRule::new(st(&fx, &[1]), fx.mv, st(&fx, &[2, 3])).unwrap();
        let counts = rule_counts(&r, &fx.buf).unwrap();
        assert_eq!(counts, RuleCounts { prm: 2, prmconc: 1 });
        assert_eq!(
            rule_probability(&r, &fx.buf).unwrap(),
            Some(prob_from_counts(1, 2))
        );
    }

    // Fitness of a single-step policy equals its rule probability; a
    // two-step policy multiplies the factors.
    #[test]
    fn fitness_is_product_of_factors() {
        let fx = example(
            &[
                (&[0], 0, &[1]),
                (&[1], 1, &[2, 3]),
                (&[2], 0, &[4]),
                (&[4], 0, &[0]),
                (&[0], 0, &[1]),
                (&[1], 1, &[4]),
            ],
            &[2, 3],
        );
        let goal = st(&fx, &[2, 3]);
        let single = Policy::new(vec![(st(&fx, &[0]), fx.tr)], st(&fx, &[1])).unwrap();
        assert_eq!(fitness(&single, &fx.buf).unwrap(), Some(Prob::one()));
        // turn-right then move: 1.0 * 0.5.
        let two = Policy::new(vec![(st(&fx, &[0]), fx.tr), (st(&fx, &[1]), fx.mv)], goal).unwrap();
        assert_eq!(fitness(&two, &fx.buf).unwrap(), Some(prob_from_counts(1, 2)));
    }

    // A policy containing a transition never observed has undefined fitness.
    #[test]
    fn unobserved_transition_gives_undefined_fitness() {
        let fx = example(&[(&[0], 0, &[1])], &[2, 3]);
        let pol = Policy::new(vec![(st(&fx, &[4]), fx.mv)], st(&fx, &[2, 3])).unwrap();
        assert_eq!(fitness(&pol, &fx.buf).unwrap(), None);
    }

    // One full chain realizing the policy and ending in the goal: E=S=1.
    #[test]
    fn frequency_fitness_full_chain() {
        let fx = example(&[(&[0], 0, &[1]), (&[1], 1, &[2, 3]), (&[2, 3], 0, &[4])], &[2, 3]);
        let pol = Policy::new(
            vec![(st(&fx, &[0]), fx.tr), (st(&fx, &[1]), fx.mv)],
            st(&fx, &[2, 3]),
        )
        .unwrap();
        assert_eq!(starting_points(&pol, &fx.buf).unwrap(), vec![0]);
        assert_eq!(ending_points(&pol, &fx.buf).unwrap(), vec![1]);
        assert_eq!(frequency_fitness(&pol, &fx.buf).unwrap(), Some(Prob::one()));
    }

    // The chain prefix occurs three times but reaches the goal once: 1/3.
    #[test]
    fn frequency_fitness_one_third() {
        let fx = example(
            &[
                (&[0], 0, &[1]),
                (&[1], 1, &[4]),
                (&[4], 0, &[0]),
                (&[0], 0, &[1]),
                (&[1], 1, &[4]),
                (&[4], 0, &[0]),
                (&[0], 0, &[1]),
                (&[1], 1, &[2, 3]),
            ],
            &[2, 3],
        );
        let pol = Policy::new(
            vec![(st(&fx, &[0]), fx.tr), (st(&fx, &[1]), fx.mv)],
            st(&fx, &[2, 3]),
        )
        .unwrap();
        assert_eq!(
            frequency_fitness(&pol, &fx.buf).unwrap(),
            Some(prob_from_counts(1, 3))
        );
    }

    // A policy whose first step never matches has undefined frequency
    // fitness (S = 0).
    #[test]
    fn frequency_fitness_undefined_without_starts() {
        let fx = example(&[(&[0], 0, &[1])], &[2, 3]);
        let pol = Policy::new(vec![(st(&fx, &[4]), fx.tr)], st(&fx, &[2, 3])).unwrap();
        assert_eq!(frequency_fitness(&pol, &fx.buf).unwrap(), None);
    }

    // Chains must not cross segment boundaries.
    #[test]
    fn chains_respect_segments() {
        let fx = example(
            &[
                (&[0], 0, &[1]),
                // break: pre {4} != post {1}
                (&[4], 0, &[0]),
                (&[0], 0, &[1]),
                (&[1], 1, &[2, 3]),
            ],
            &[2, 3],
        );
        assert_ne!(fx.buf.segment_of(0), fx.buf.segment_of(1));
        let pol = Policy::new(
            vec![(st(&fx, &[0]), fx.tr), (st(&fx, &[1]), fx.mv)],
            st(&fx, &[2, 3]),
        )
        .unwrap();
        // Only the second-segment occurrence heads a full chain.
        assert_eq!(starting_points(&pol, &fx.buf).unwrap(), vec![2]);
    }

    // Empty policy set: s = 0, aggregate fitness 0.
    #[test]
    fn avg_fq_of_empty_set_is_zero() {
        let fx = example(&[(&[0], 0, &[1])], &[2, 3]);
        assert_eq!(avg_fq_fitness(&[], &fx.buf).unwrap(), Prob::zero());
    }

    // Two policies sharing a starting tuple count it once.
    #[test]
    fn avg_fq_counts_tuples_existentially() {
        let fx = example(
            &[(&[0], 0, &[1]), (&[1], 1, &[2, 3]), (&[2, 3], 0, &[0]), (&[0], 0, &[1])],
            &[2, 3],
        );
        let p1 = Policy::new(vec![(st(&fx, &[0]), fx.tr)], st(&fx, &[1])).unwrap();
        let p2 = Policy::new(
            vec![(st(&fx, &[0]), fx.tr), (st(&fx, &[1]), fx.mv)],
            st(&fx, &[2, 3]),
        )
        .unwrap();
        // p1 starts at {0, 3}, ends at {0, 3}; p2 starts at {0}, ends at {1}.
        // Union starts {0, 3}, union ends {0, 1, 3}: 3/2.
        let v = avg_fq_fitness(&[p1.clone(), p2], &fx.buf).unwrap();
        assert_eq!(v, prob_from_counts(3, 2));
        // One policy with S=2 starts and E=1 endings gives 1/2.
        let fx2 = example(
            &[(&[0], 0, &[1]), (&[1], 1, &[4]), (&[4], 0, &[0]), (&[0], 0, &[2, 3])],
            &[2, 3],
        );
        let p = Policy::new(vec![(st(&fx2, &[0]), fx2.tr)], st(&fx2, &[2, 3])).unwrap();
        assert_eq!(avg_fq_fitness(&[p], &fx2.buf).unwrap(), prob_from_counts(1, 2));
    }
}
