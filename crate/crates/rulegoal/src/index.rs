//! Columnar bitmap index over a frozen replay buffer.
//!
//! Rule support counting and chain matching reduce to word-parallel ANDs
//! and popcounts. Results agree exactly with the definitional scans in
//! [`crate::semantics`]; the property tests assert this.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::bits::Bits;
use crate::buffer::ReplayBuffer;
use crate::error::CoreError;
use crate::language::{GoalId, Predicate, State, SymbolId};
use crate::rules::Policy;
use crate::semantics::RuleCounts;

pub(crate) struct BufferIndex<'a> {
    buf: &'a ReplayBuffer,
    n: usize,
    sensor_pre: HashMap<SymbolId, Bits>,
    sensor_post: HashMap<SymbolId, Bits>,
    actions: HashMap<SymbolId, Bits>,
    /// Truth of each active goal predicate per tuple (premise semantics).
    goal_truth: HashMap<GoalId, Bits>,
    /// Goal truth in the post-situation (conclusion semantics).
    goal_after: HashMap<GoalId, Bits>,
    /// π(g) ⊆ S_post(t) per active goal.
    goal_ach: HashMap<GoalId, Bits>,
    /// Sensor predicates observed anywhere in the buffer, ascending.
    observed_sensors: Vec<SymbolId>,
    observed_actions: Vec<SymbolId>,
    /// Same-segment masks per chain length, built on demand.
    segment_masks: RefCell<HashMap<usize, Bits>>,
    zero: Bits,
}

impl<'a> BufferIndex<'a> {
    pub fn build(buf: &'a ReplayBuffer) -> Result<Self, CoreError> {
        let n = buf.len();
        let mut sensor_pre: HashMap<SymbolId, Bits> = HashMap::new();
        let mut sensor_post: HashMap<SymbolId, Bits> = HashMap::new();
        let mut actions: HashMap<SymbolId, Bits> = HashMap::new();
        for (t, tuple) in buf.tuples().iter().enumerate() {
            for s in tuple.s_pre.sensors() {
                sensor_pre.entry(s).or_insert_with(|| Bits::zeros(n)).set(t);
            }
            for s in tuple.s_post.sensors() {
                sensor_post.entry(s).or_insert_with(|| Bits::zeros(n)).set(t);
            }
            actions.entry(tuple.action).or_insert_with(|| Bits::zeros(n)).set(t);
        }
        let mut observed_sensors: Vec<SymbolId> = sensor_pre
            .keys()
            .chain(sensor_post.keys())
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        observed_sensors.sort_unstable();
        let mut observed_actions: Vec<SymbolId> = actions.keys().copied().collect();
        observed_actions.sort_unstable();

        let mut goal_ach = HashMap::new();
        let mut goal_truth = HashMap::new();
        let mut goal_after = HashMap::new();
        for g in buf.goals().active() {
            let mut ach = Bits::zeros(n);
            for &t in buf.achievement_indices(g)? {
                ach.set(t as usize);
            }
            goal_ach.insert(g, ach);
        }
        for g in buf.goals().active() {
            let mut reset_hits = Bits::zeros(n);
            for a in buf.goals().strict_ancestors(g)? {
                reset_hits.or_assign(&goal_ach[&a]);
            }
            let (truth, after) = goal_truth_scan(&goal_ach[&g], &reset_hits, n);
            goal_truth.insert(g, truth);
            goal_after.insert(g, after);
        }

        Ok(BufferIndex {
            buf,
            n,
            sensor_pre,
            sensor_post,
            actions,
            goal_truth,
            goal_after,
            goal_ach,
            observed_sensors,
            observed_actions,
            segment_masks: RefCell::new(HashMap::new()),
            zero: Bits::zeros(n),
        })
    }

    pub fn buffer(&self) -> &'a ReplayBuffer {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn observed_sensors(&self) -> &[SymbolId] {
        &self.observed_sensors
    }

    pub fn observed_actions(&self) -> &[SymbolId] {
        &self.observed_actions
    }

    pub fn goal_achievements(&self, g: GoalId) -> Result<&Bits, CoreError> {
        self.goal_ach.get(&g).ok_or(CoreError::UnknownGoal(g.index()))
    }

    fn pred_truth(&self, p: Predicate) -> Result<&Bits, CoreError> {
        match p {
            Predicate::Sensor(s) => Ok(self.sensor_pre.get(&s).unwrap_or(&self.zero)),
            Predicate::Action(a) => Ok(self.actions.get(&a).unwrap_or(&self.zero)),
            Predicate::Goal(g) => self.goal_truth.get(&g).ok_or(CoreError::UnknownGoal(g.index())),
        }
    }

    /// Bitmap of tuples on which `state` ∪ {action} holds.
    pub fn match_bits(&self, state: &State, action: Option<SymbolId>) -> Result<Bits, CoreError> {
        let mut out = match action {
            Some(a) => self.actions.get(&a).unwrap_or(&self.zero).clone(),
            None => Bits::ones(self.n),
        };
        for p in state.iter() {
            out.and_assign(self.pred_truth(p)?);
        }
        Ok(out)
    }

    /// Bitmap of tuples whose post-state satisfies the conclusion: sensor
    /// members contained in S_post, goal members true in the post-situation.
    pub fn conclusion_bits(&self, conclusion: &State) -> Result<Bits, CoreError> {
        let mut out = Bits::ones(self.n);
        for p in conclusion.iter() {
            match p {
                Predicate::Sensor(s) => out.and_assign(self.sensor_post.get(&s).unwrap_or(&self.zero)),
                Predicate::Goal(g) => {
                    out.and_assign(self.goal_after.get(&g).ok_or(CoreError::UnknownGoal(g.index()))?)
                }
                Predicate::Action(_) => return Err(CoreError::ActionInState),
            }
        }
        Ok(out)
    }

    /// Rule support counts given a premise bitmap and a conclusion bitmap.
    pub fn counts_from_bits(&self, premise_bits: &Bits, conclusion_bits: &Bits) -> RuleCounts {
        let prm = premise_bits.count();
        let mut both = premise_bits.clone();
        both.and_assign(conclusion_bits);
        RuleCounts { prm, prmconc: both.count() }
    }

    /// Mask of indices t such that t..t+len-1 stay within one segment.
    pub fn segment_mask(&self, len: usize) -> Bits {
        debug_assert!(len >= 1);
        if let Some(m) = self.segment_masks.borrow().get(&len) {
            return m.clone();
        }
        let mut m = Bits::zeros(self.n);
        for t in 0..self.n {
            if t + len <= self.n && self.buf.segment_of(t) == self.buf.segment_of(t + len - 1) {
                m.set(t);
            }
        }
        self.segment_masks.borrow_mut().insert(len, m.clone());
        m
    }

    /// Starting bitmap of a policy: bit t set iff the tuples t..t+n-1 form
    /// a chain matching every step.
    pub fn chain_starts(&self, policy: &Policy) -> Result<Bits, CoreError> {
        let n = policy.len();
        let mut out = self.segment_mask(n);
        for (i, (s, a)) in policy.steps().iter().enumerate() {
            let step = self.match_bits(s, Some(*a))?;
            out.and_assign(&step.shifted_down(i));
        }
        Ok(out)
    }

    /// Starting and ending bitmaps of a policy. Ending bits mark the chain
    /// tails (index t+n-1) whose post-state satisfies the target.
    pub fn chain_points(&self, policy: &Policy) -> Result<(Bits, Bits), CoreError> {
        let starts = self.chain_starts(policy)?;
        let n = policy.len();
        let conc = self.conclusion_bits(policy.target())?;
        let mut full = starts.clone();
        full.and_assign(&conc.shifted_down(n - 1));
        Ok((starts, full.shifted_up(n - 1)))
    }
}

/// Computes goal truth bitmaps from an achievement bitmap and the union of
/// the strict ancestors' achievements.
///
/// after[t] = ∃ j ≤ t: ach[j] and no reset in (j, t]  (post-situation truth)
/// truth[t] = after[t-1], false at t = 0             (premise truth)
pub(crate) fn goal_truth_scan(ach: &Bits, resets: &Bits, n: usize) -> (Bits, Bits) {
    let mut after = Bits::zeros(n);
    let mut latest_ach: Option<usize> = None; // max j <= t with ach[j]
    let mut latest_reset: Option<usize> = None; // max m <= t with resets[m]
    for t in 0..n {
        if resets.get(t) {
            latest_reset = Some(t);
        }
        if ach.get(t) {
            latest_ach = Some(t);
        }
        if let Some(j) = latest_ach {
            let ok = match latest_reset {
                None => true,
                Some(r) => j >= r,
            };
            if ok {
                after.set(t);
            }
        }
    }
    let truth = after.shifted_up(1);
    (truth, after)
}
