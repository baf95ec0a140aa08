//! The textual grammar for rules, policies, states and recorded buffers.
//!
//! Rules print as `Right(type3), turn-right -> Front(type3)` and policies as
//! `S1 {A1} S2 {A2} G`, one item per line. Dump lines append tab-separated
//! annotations (`p=`, `prm=`, `prmconc=`, `fitness=`) with four decimal
//! places. Every dumped line parses back through this module.
//!
//! Recorded buffers hold one transition per line (`S_pre<TAB>action<TAB>
//! S_post`), `---` marker lines for segment boundaries, and `goal` header
//! lines declaring goal predicates:
//!
//! ```text
//! goal G_prime = Center(type3), PickedUp
//! goal Sub1 = Center(type2), PickedUp < G_prime
//! ```

use std::fmt::Write as _;

use crate::buffer::{ReplayBuffer, TransitionTuple};
use crate::error::ParseError;
use crate::language::{GoalRegistry, Predicate, State, SymbolId, Vocab, PRIMARY_GOAL_NAME};
use crate::rules::{EnvironmentRule, Policy};

pub fn render_predicate(p: Predicate, vocab: &Vocab, goals: &GoalRegistry) -> String {
    match p {
        Predicate::Sensor(s) | Predicate::Action(s) => vocab.name(s).to_owned(),
        Predicate::Goal(g) => goals.name(g).to_owned(),
    }
}

/// Renders a state as comma-separated predicates in lexicographic order.
pub fn render_state(state: &State, vocab: &Vocab, goals: &GoalRegistry) -> String {
    let mut names: Vec<String> =
        state.iter().map(|p| render_predicate(p, vocab, goals)).collect();
    names.sort_unstable();
    names.join(", ")
}

pub fn render_rule(rule: &EnvironmentRule, vocab: &Vocab, goals: &GoalRegistry) -> String {
    format!(
        "{}, {} -> {}",
        render_state(rule.premise(), vocab, goals),
        vocab.name(rule.action()),
        render_state(rule.conclusion(), vocab, goals)
    )
}

pub fn render_policy(policy: &Policy, vocab: &Vocab, goals: &GoalRegistry) -> String {
    let mut out = String::new();
    for (s, a) in policy.steps() {
        let _ = write!(out, "{} {{{}}} ", render_state(s, vocab, goals), vocab.name(*a));
    }
    out.push_str(&render_state(policy.target(), vocab, goals));
    out
}

/// One law-dump line: rule text plus probability and support columns.
pub fn render_law_line(
    rule: &EnvironmentRule,
    prm: u32,
    prmconc: u32,
    vocab: &Vocab,
    goals: &GoalRegistry,
) -> String {
    let p = if prm == 0 { f64::NAN } else { f64::from(prmconc) / f64::from(prm) };
    format!(
        "{}\tp={:.4}\tprm={}\tprmconc={}",
        render_rule(rule, vocab, goals),
        p,
        prm,
        prmconc
    )
}

/// One policy-dump line: policy text plus its fitness.
pub fn render_policy_line(
    policy: &Policy,
    fitness: f64,
    vocab: &Vocab,
    goals: &GoalRegistry,
) -> String {
    format!("{}\tfitness={:.4}", render_policy(policy, vocab, goals), fitness)
}

fn parse_predicate(
    token: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<Predicate, ParseError> {
    let token = token.trim();
    if token.is_empty() {
        return Err(ParseError::syntax(line, "empty predicate"));
    }
    if token.contains(|c: char| c.is_whitespace()) {
        return Err(ParseError::syntax(line, format!("whitespace inside predicate `{token}`")));
    }
    if let Some(g) = goals.lookup(token) {
        return Ok(Predicate::Goal(g));
    }
    Ok(Predicate::Sensor(vocab.intern(token)))
}

/// Parses a comma-separated predicate list into a state. Bare names are
/// goals when registered, sensors otherwise.
pub fn parse_state(
    text: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<State, ParseError> {
    let mut preds = Vec::new();
    for tok in text.split(',') {
        preds.push(parse_predicate(tok, line, vocab, goals)?);
    }
    Ok(State::new(preds)?)
}

/// Parses `P1, ..., A -> Q1, ...`: the last item left of the arrow is the
/// action.
pub fn parse_rule(
    text: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<EnvironmentRule, ParseError> {
    let (lhs, rhs) = text
        .split_once("->")
        .ok_or_else(|| ParseError::syntax(line, "missing `->` in rule"))?;
    let mut left: Vec<&str> = lhs.split(',').collect();
    let action = left
        .pop()
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ParseError::syntax(line, "missing action"))?;
    if left.is_empty() {
        return Err(ParseError::syntax(line, "empty rule premise"));
    }
    let premise = parse_state(&left.join(","), line, vocab, goals)?;
    let conclusion = parse_state(rhs, line, vocab, goals)?;
    let action = vocab.intern(action);
    Ok(EnvironmentRule::new(premise, action, conclusion)?)
}

/// Parses `S1 {A1} ... Sn {An} G`.
pub fn parse_policy(
    text: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<Policy, ParseError> {
    let mut steps = Vec::new();
    let mut rest = text.trim();
    loop {
        match rest.find('{') {
            None => break,
            Some(open) => {
                let close = rest[open..]
                    .find('}')
                    .map(|i| open + i)
                    .ok_or_else(|| ParseError::syntax(line, "unbalanced `{`"))?;
                let state = parse_state(&rest[..open], line, vocab, goals)?;
                let action = vocab.intern(rest[open + 1..close].trim());
                steps.push((state, action));
                rest = &rest[close + 1..];
            }
        }
    }
    if steps.is_empty() {
        return Err(ParseError::syntax(line, "policy has no steps"));
    }
    let target = parse_state(rest, line, vocab, goals)?;
    Ok(Policy::new(steps, target)?)
}

/// Parses a law-dump line back into rule text and support counts.
pub fn parse_law_line(
    text: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<(EnvironmentRule, u32, u32), ParseError> {
    let mut cols = text.split('\t');
    let rule_text = cols.next().ok_or_else(|| ParseError::syntax(line, "empty line"))?;
    let rule = parse_rule(rule_text, line, vocab, goals)?;
    let mut prm = None;
    let mut prmconc = None;
    for col in cols {
        if let Some(v) = col.strip_prefix("prmconc=") {
            prmconc = v.parse::<u32>().ok();
        } else if let Some(v) = col.strip_prefix("prm=") {
            prm = v.parse::<u32>().ok();
        }
    }
    let prm = prm.ok_or_else(|| ParseError::syntax(line, "missing prm column"))?;
    let prmconc = prmconc.ok_or_else(|| ParseError::syntax(line, "missing prmconc column"))?;
    Ok((rule, prm, prmconc))
}

/// Parses a policy-dump line back into policy and fitness.
pub fn parse_policy_line(
    text: &str,
    line: usize,
    vocab: &mut Vocab,
    goals: &GoalRegistry,
) -> Result<(Policy, f64), ParseError> {
    let mut cols = text.split('\t');
    let pol_text = cols.next().ok_or_else(|| ParseError::syntax(line, "empty line"))?;
    let policy = parse_policy(pol_text, line, vocab, goals)?;
    let fitness = cols
        .find_map(|c| c.strip_prefix("fitness="))
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| ParseError::syntax(line, "missing fitness column"))?;
    Ok((policy, fitness))
}

pub const SEGMENT_MARKER: &str = "---";

/// Serializes a buffer: goal declarations, then one transition per line
/// with segment markers between segments.
pub fn render_buffer(buf: &ReplayBuffer) -> String {
    let mut out = String::new();
    let goals = buf.goals();
    let vocab = buf.vocab();
    // Primary goal first, then subgoals in id order.
    for g in goals.active() {
        let _ = write!(
            out,
            "goal {} = {}",
            goals.name(g),
            render_state(goals.interpretation(g).expect("active goal has interpretation"), vocab, goals)
        );
        let mut parents: Vec<_> = goals.direct_parents(g).map(|p| goals.name(p).to_owned()).collect();
        parents.sort_unstable();
        for p in parents {
            let _ = write!(out, " < {p}");
        }
        out.push('\n');
    }
    let mut prev_seg = None;
    for (t, tuple) in buf.tuples().iter().enumerate() {
        let seg = buf.segment_of(t);
        if prev_seg.is_some() && prev_seg != Some(seg) {
            out.push_str(SEGMENT_MARKER);
            out.push('\n');
        }
        prev_seg = Some(seg);
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            render_state(&tuple.s_pre, vocab, goals),
            vocab.name(tuple.action),
            render_state(&tuple.s_post, vocab, goals)
        );
    }
    out
}

/// Parses a comma-separated list of sensor predicates (goal names are not
/// consulted), as used for goal interpretations.
fn parse_sensor_state(text: &str, line: usize, vocab: &mut Vocab) -> Result<State, ParseError> {
    let mut preds = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(ParseError::syntax(line, "empty predicate"));
        }
        preds.push(Predicate::Sensor(vocab.intern(tok)));
    }
    Ok(State::new(preds)?)
}

/// Loads a buffer from its textual form. A `goal G_prime = ...` line is
/// required before any transition.
pub fn parse_buffer(text: &str) -> Result<ReplayBuffer, ParseError> {
    let mut vocab = Vocab::new();
    let mut buf: Option<ReplayBuffer> = None;
    let mut declared: Vec<(String, State, Vec<String>)> = Vec::new();
    let mut by_name: std::collections::HashMap<String, crate::language::GoalId> =
        std::collections::HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed == SEGMENT_MARKER {
            if let Some(b) = buf.as_mut() {
                b.begin_segment();
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("goal ") {
            if buf.is_some() {
                return Err(ParseError::syntax(line, "goal declarations must precede transitions"));
            }
            let (name, rhs) = rest
                .split_once('=')
                .ok_or_else(|| ParseError::syntax(line, "missing `=` in goal declaration"))?;
            let mut parts = rhs.split('<');
            let state_text =
                parts.next().ok_or_else(|| ParseError::syntax(line, "missing goal state"))?;
            let interp = parse_sensor_state(state_text, line, &mut vocab)?;
            let parents: Vec<String> = parts.map(|p| p.trim().to_owned()).collect();
            declared.push((name.trim().to_owned(), interp, parents));
            continue;
        }
        // First transition line: materialize registry and buffer.
        if buf.is_none() {
            let prime = declared
                .iter()
                .find(|(n, _, _)| n == PRIMARY_GOAL_NAME)
                .ok_or_else(|| ParseError::syntax(line, "no `goal G_prime = ...` declaration"))?
                .1
                .clone();
            let reg = GoalRegistry::new(prime).map_err(ParseError::Core)?;
            let mut b = ReplayBuffer::new(std::mem::take(&mut vocab), reg);
            by_name.insert(PRIMARY_GOAL_NAME.to_owned(), b.goals().primary());
            for (name, interp, _) in &declared {
                if name == PRIMARY_GOAL_NAME {
                    continue;
                }
                let g = b
                    .invent_goal_named(name.clone(), interp.clone())
                    .map_err(ParseError::Core)?;
                by_name.insert(name.clone(), g);
            }
            // Second pass for edges, now that every goal exists.
            for (name, _, parents) in &declared {
                let child = by_name[name.as_str()];
                for p in parents {
                    let parent = *by_name
                        .get(p.as_str())
                        .ok_or_else(|| ParseError::UnknownGoalName(p.clone()))?;
                    b.add_goal_edge(child, parent).map_err(ParseError::Core)?;
                }
            }
            buf = Some(b);
        }
        let b = buf.as_mut().expect("buffer initialized above");
        let mut cols = trimmed.split('\t');
        let (pre, act, post) = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b_), Some(c)) => (a, b_, c),
            _ => return Err(ParseError::syntax(line, "transition needs S_pre<TAB>action<TAB>S_post")),
        };
        let (s_pre, action, s_post) = {
            let v = b.vocab_mut();
            let s_pre = parse_sensor_state(pre, line, v)?;
            let action = v.intern(act.trim());
            let s_post = parse_sensor_state(post, line, v)?;
            (s_pre, action, s_post)
        };
        let tuple = TransitionTuple::new(s_pre, action, s_post).map_err(ParseError::Core)?;
        b.append(tuple).map_err(ParseError::Core)?;
    }
    buf.ok_or_else(|| ParseError::Empty("buffer file"))
}

/// Action symbol helper for parsers of action-only fields.
pub fn parse_action(text: &str, vocab: &mut Vocab) -> SymbolId {
    vocab.intern(text.trim())
}
