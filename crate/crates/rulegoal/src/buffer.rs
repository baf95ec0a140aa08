//! The replay buffer: the linearly ordered transition history together with
//! the goal registry (partial order ⊑ and interpretation π), plus the truth
//! semantics of predicates over tuples.
//!
//! The linear order ⪯ is realized by sequence position. Episodes that break
//! the chain condition (environment resets, item respawns after a pickup)
//! start a new segment; chains never cross segment boundaries, while goal
//! truth looks across the whole history and is reset only by the achievement
//! of higher goals.

use std::collections::HashMap;

use crate::error::CoreError;
use crate::language::{GoalId, GoalRegistry, Predicate, State, SymbolId, Vocab};

/// One recorded transition ⟨S_pre, A, S_post⟩ over sensor predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionTuple {
    pub s_pre: State,
    pub action: SymbolId,
    pub s_post: State,
}

impl TransitionTuple {
    pub fn new(s_pre: State, action: SymbolId, s_post: State) -> Result<Self, CoreError> {
        if s_pre.is_empty() {
            return Err(CoreError::EmptyState("tuple pre-state"));
        }
        if s_post.is_empty() {
            return Err(CoreError::EmptyState("tuple post-state"));
        }
        if s_pre.iter().any(|p| p.is_goal()) || s_post.iter().any(|p| p.is_goal()) {
            return Err(CoreError::GoalInInterpretation);
        }
        Ok(TransitionTuple { s_pre, action, s_post })
    }
}

/// Optional bound on the number of stored tuples; exceeding it drops the
/// oldest whole segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capacity(pub Option<usize>);

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    vocab: Vocab,
    goals: GoalRegistry,
    tuples: Vec<TransitionTuple>,
    /// Segment id per tuple, non-decreasing.
    segments: Vec<u32>,
    next_segment: u32,
    /// Pending segment break: the next append starts a new segment.
    pending_break: bool,
    /// Per active goal: sorted tuple indices t with π(g) ⊆ S_post(t).
    achievements: HashMap<GoalId, Vec<u32>>,
    capacity: Capacity,
}

impl ReplayBuffer {
    pub fn new(vocab: Vocab, goals: GoalRegistry) -> Self {
        let achievements = goals.active().map(|g| (g, Vec::new())).collect();
        ReplayBuffer {
            vocab,
            goals,
            tuples: Vec::new(),
            segments: Vec::new(),
            next_segment: 0,
            pending_break: true,
            achievements,
            capacity: Capacity(None),
        }
    }

    pub fn with_capacity_limit(mut self, cap: usize) -> Self {
        self.capacity = Capacity(Some(cap));
        self
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocab {
        &mut self.vocab
    }

    pub fn goals(&self) -> &GoalRegistry {
        &self.goals
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuple(&self, idx: usize) -> Result<&TransitionTuple, CoreError> {
        self.tuples.get(idx).ok_or(CoreError::TupleIndex(idx, self.tuples.len()))
    }

    pub fn tuples(&self) -> &[TransitionTuple] {
        &self.tuples
    }

    pub fn segment_of(&self, idx: usize) -> u32 {
        self.segments[idx]
    }

    pub fn last_index(&self) -> Result<usize, CoreError> {
        if self.tuples.is_empty() {
            Err(CoreError::EmptyBuffer)
        } else {
            Ok(self.tuples.len() - 1)
        }
    }

    /// Marks the start of a new segment; the next appended tuple is exempt
    /// from the chain check against its predecessor.
    pub fn begin_segment(&mut self) {
        self.pending_break = true;
    }

    /// Appends a transition, asserting the chain condition within a segment:
    /// the post-state of the previous tuple must equal the new pre-state.
    pub fn append(&mut self, tuple: TransitionTuple) -> Result<usize, CoreError> {
        if !self.pending_break {
            if let Some(last) = self.tuples.last() {
                if last.s_post != tuple.s_pre {
                    return Err(CoreError::ChainBroken(self.tuples.len() - 1));
                }
            }
        }
        let seg = if self.pending_break || self.tuples.is_empty() {
            let s = self.next_segment;
            self.next_segment += 1;
            s
        } else {
            *self.segments.last().expect("non-empty buffer has segments")
        };
        self.pending_break = false;
        let idx = self.tuples.len();
        for (&g, hits) in self.achievements.iter_mut() {
            let interp = self
                .goals
                .interpretation(g)
                .expect("achievement index tracks active goals only");
            if interp.is_subset_of(&tuple.s_post) {
                hits.push(idx as u32);
            }
        }
        self.tuples.push(tuple);
        self.segments.push(seg);
        self.enforce_capacity();
        Ok(idx)
    }

    fn enforce_capacity(&mut self) {
        let Capacity(Some(cap)) = self.capacity else { return };
        while self.tuples.len() > cap {
            let first_seg = self.segments[0];
            let drop_n = self.segments.iter().take_while(|&&s| s == first_seg).count();
            // Never drop the only (current) segment below the cap boundary.
            if drop_n == self.tuples.len() {
                break;
            }
            self.tuples.drain(..drop_n);
            self.segments.drain(..drop_n);
            for hits in self.achievements.values_mut() {
                hits.retain(|&t| (t as usize) >= drop_n);
                for t in hits.iter_mut() {
                    *t -= drop_n as u32;
                }
            }
        }
    }

    /// Registers a fresh goal predicate and indexes its achievement history.
    pub fn invent_goal(&mut self, interpretation: State) -> Result<GoalId, CoreError> {
        let g = self.goals.invent(interpretation)?;
        self.index_achievements(g)?;
        Ok(g)
    }

    /// Registers a goal under a caller-chosen name (buffer file loading).
    pub fn invent_goal_named(&mut self, name: String, interpretation: State) -> Result<GoalId, CoreError> {
        let g = self.goals.invent_named(name, interpretation)?;
        self.index_achievements(g)?;
        Ok(g)
    }

    fn index_achievements(&mut self, g: GoalId) -> Result<(), CoreError> {
        let interp = self.goals.interpretation(g)?.clone();
        let hits = self
            .tuples
            .iter()
            .enumerate()
            .filter(|(_, t)| interp.is_subset_of(&t.s_post))
            .map(|(i, _)| i as u32)
            .collect();
        self.achievements.insert(g, hits);
        Ok(())
    }

    pub fn retire_goal(&mut self, g: GoalId) -> Result<(), CoreError> {
        self.goals.retire(g)?;
        self.achievements.remove(&g);
        Ok(())
    }

    pub fn add_goal_edge(&mut self, child: GoalId, parent: GoalId) -> Result<(), CoreError> {
        self.goals.add_edge(child, parent)
    }

    /// Sorted indices t with π(g) ⊆ S_post(t).
    pub fn achievement_indices(&self, g: GoalId) -> Result<&[u32], CoreError> {
        self.achievements
            .get(&g)
            .map(|v| v.as_slice())
            .ok_or(CoreError::UnknownGoal(g.index()))
    }

    fn latest_achievement_at_or_before(&self, g: GoalId, idx: usize) -> Result<Option<usize>, CoreError> {
        let hits = self.achievement_indices(g)?;
        let pos = hits.partition_point(|&t| (t as usize) <= idx);
        Ok(if pos == 0 { None } else { Some(hits[pos - 1] as usize) })
    }

    /// Latest index m ≤ idx at which some goal strictly above `g` was
    /// achieved (π(G') ⊆ S_post(m)), or None.
    fn latest_reset_at_or_before(&self, g: GoalId, idx: usize) -> Result<Option<usize>, CoreError> {
        let mut latest = None;
        for a in self.goals.strict_ancestors(g)? {
            if let Some(m) = self.latest_achievement_at_or_before(a, idx)? {
                latest = Some(latest.map_or(m, |cur: usize| cur.max(m)));
            }
        }
        Ok(latest)
    }

    /// Truth of a predicate on the tuple at `idx`.
    ///
    /// A sensor or action predicate is true iff it belongs to S_pre ∪ {A}.
    /// A goal predicate reflects the situation in which the action was taken:
    /// it is true iff it holds in the post-situation of the preceding tuple.
    /// Achievements and resets of the current tuple itself are effects of
    /// the action and do not count.
    pub fn predicate_true_on(&self, idx: usize, p: Predicate) -> Result<bool, CoreError> {
        let tuple = self.tuple(idx)?;
        match p {
            Predicate::Sensor(_) => Ok(tuple.s_pre.contains(p)),
            Predicate::Action(a) => Ok(tuple.action == a),
            Predicate::Goal(g) => {
                if idx == 0 {
                    if !self.goals.is_active(g) {
                        return Err(CoreError::UnknownGoal(g.index()));
                    }
                    return Ok(false);
                }
                self.goal_true_after(idx - 1, g)
            }
        }
    }

    /// Truth of a goal in the situation reached *after* the tuple at `idx`:
    /// π(g) was achieved at some tuple j <= idx and no goal above g was
    /// achieved after j (a tuple achieving both leaves g achieved).
    ///
    /// Rule conclusions and policy targets are judged here, and the premise
    /// truth of the next tuple equals it.
    pub fn goal_true_after(&self, idx: usize, g: GoalId) -> Result<bool, CoreError> {
        self.tuple(idx)?;
        if !self.goals.is_active(g) {
            return Err(CoreError::UnknownGoal(g.index()));
        }
        let Some(j) = self.latest_achievement_at_or_before(g, idx)? else {
            return Ok(false);
        };
        match self.latest_reset_at_or_before(g, idx)? {
            None => Ok(true),
            Some(r) => Ok(j >= r),
        }
    }

    /// τ ⊨ S: every predicate of the set is true on the tuple at `idx`.
    /// The empty set holds vacuously.
    pub fn holds_on(&self, idx: usize, preds: &[Predicate]) -> Result<bool, CoreError> {
        for &p in preds {
            if !self.predicate_true_on(idx, p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// τ ⊨ S ∪ {A} for a state and an optional action predicate.
    pub fn state_holds_on(&self, idx: usize, state: &State, action: Option<SymbolId>) -> Result<bool, CoreError> {
        if let Some(a) = action {
            if self.tuple(idx)?.action != a {
                return Ok(false);
            }
        }
        for p in state.iter() {
            if !self.predicate_true_on(idx, p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The conclusion test of rule probability at tuple `idx`:
    /// post(R) ∩ Sens ⊆ S_post and every goal of post(R) holds in the
    /// post-situation.
    pub fn conclusion_satisfied_on(&self, idx: usize, conclusion: &State) -> Result<bool, CoreError> {
        let tuple = self.tuple(idx)?;
        for p in conclusion.iter() {
            match p {
                Predicate::Sensor(_) => {
                    if !tuple.s_post.contains(p) {
                        return Ok(false);
                    }
                }
                Predicate::Goal(g) => {
                    if !self.goal_true_after(idx, g)? {
                        return Ok(false);
                    }
                }
                Predicate::Action(_) => return Ok(false),
            }
        }
        Ok(true)
    }
}
