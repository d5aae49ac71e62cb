//! Population computers: states, multiway transitions, outputs, helpers.
//!
//! A population computer is executed by a crowd of identical agents. A
//! configuration assigns an agent count to every state. A transition
//! `r ↦ s` with `|r| = |s| >= 2` and at most two distinct states on the left
//! replaces agents matching `r` by agents matching `s`. Inputs are placed in
//! the designated input states, helpers are a fixed multiset on non-input
//! states, and the output of a configuration is a function of its support:
//! either a boolean circuit over presence bits, a marked consensus (a verdict
//! is reached when only one class of marked states remains populated), or a
//! full consensus partition.
//!
//! States are interned: `State` is an index into the computer's label table.
//! Transitions are keyed by their left-hand side, so the transition relation
//! is deterministic by construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::circuit::Circuit;

/// Index into a computer's state label table.
pub type State = usize;

/// Multiset of states with small inline storage, sorted by state and
/// duplicate-free, used for transition sides.
pub type StateMultiset = SmallVec<[(State, u64); 2]>;

/// A multiway transition `lhs ↦ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    lhs: StateMultiset,
    rhs: StateMultiset,
}

impl Transition {
    pub fn lhs(&self) -> &[(State, u64)] {
        &self.lhs
    }

    pub fn rhs(&self) -> &[(State, u64)] {
        &self.rhs
    }

    /// Number of agents consumed (equals the number produced).
    pub fn arity(&self) -> u64 {
        self.lhs.iter().map(|(_, k)| k).sum()
    }

    /// Count of `q` on the left-hand side.
    pub fn consumed(&self, q: State) -> u64 {
        self.lhs
            .iter()
            .find(|(s, _)| *s == q)
            .map_or(0, |(_, k)| *k)
    }

    /// Count of `q` on the right-hand side.
    pub fn produced(&self, q: State) -> u64 {
        self.rhs
            .iter()
            .find(|(s, _)| *s == q)
            .map_or(0, |(_, k)| *k)
    }
}

/// A configuration: a sparse multiset of agents with cached total.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Config {
    counts: BTreeMap<State, u64>,
    total: u64,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (State, u64)>) -> Self {
        let mut c = Config::new();
        for (q, k) in pairs {
            c.add(q, k);
        }
        c
    }

    pub fn get(&self, q: State) -> u64 {
        self.counts.get(&q).copied().unwrap_or(0)
    }

    pub fn add(&mut self, q: State, k: u64) {
        if k == 0 {
            return;
        }
        *self.counts.entry(q).or_insert(0) += k;
        self.total += k;
    }

    /// Removes `k` agents from `q`; panics if fewer are present.
    pub fn remove(&mut self, q: State, k: u64) {
        if k == 0 {
            return;
        }
        let cur = self.counts.get_mut(&q).expect("state present");
        assert!(*cur >= k, "removing more agents than present");
        *cur -= k;
        if *cur == 0 {
            self.counts.remove(&q);
        }
        self.total -= k;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> impl Iterator<Item = State> + '_ {
        self.counts.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, u64)> + '_ {
        self.counts.iter().map(|(&q, &k)| (q, k))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// True when at least `lhs` is present.
    pub fn covers(&self, lhs: &[(State, u64)]) -> bool {
        lhs.iter().all(|&(q, k)| self.get(q) >= k)
    }

    /// Adds every count of `other` into `self`.
    pub fn add_all(&mut self, other: &Config) {
        for (q, k) in other.iter() {
            self.add(q, k);
        }
    }
}

/// Output function of a computer.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Boolean circuit over state labels, evaluated on presence bits of the
    /// support.
    Circuit(Circuit),
    /// Marked consensus: verdict `b` when the support meets `class b` and
    /// avoids the other class entirely; unmarked states are ignored.
    Marked {
        zero: BTreeSet<State>,
        one: BTreeSet<State>,
    },
    /// Full consensus: the two classes partition the states and the verdict
    /// requires the whole support on one side.
    Consensus {
        zero: BTreeSet<State>,
        one: BTreeSet<State>,
    },
}

impl Output {
    pub fn kind(&self) -> &'static str {
        match self {
            Output::Circuit(_) => "circuit",
            Output::Marked { .. } => "marked",
            Output::Consensus { .. } => "consensus",
        }
    }
}

/// Errors from construction, semantics and serialization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("transition arity mismatch: |lhs| = {lhs}, |rhs| = {rhs}")]
    ArityMismatch { lhs: u64, rhs: u64 },
    #[error("transition arity {0} is below 2")]
    ArityTooSmall(u64),
    #[error("transition left-hand side uses {0} distinct states, at most 2 allowed")]
    LhsSupportTooLarge(usize),
    #[error("two transitions share a left-hand side with different effects: {0}")]
    Nondeterministic(String),
    #[error("helper state {0:?} is an input state")]
    HelperOnInput(String),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("circuit input {0:?} is not a state of the computer")]
    CircuitInputNotAState(String),
    #[error("consensus classes do not partition the states")]
    ConsensusNotPartition,
    #[error("marked classes overlap")]
    MarkedClassesOverlap,
    #[error("duplicate state label {0:?}")]
    DuplicateState(String),
    #[error("transition not enabled")]
    NotEnabled,
    #[error("extra helpers use state {0:?} outside the helper support")]
    ExtraHelperOutsideSupport(String),
    #[error("input configuration uses non-input state {0:?}")]
    NotAnInputState(String),
    #[error("no output function set")]
    MissingOutput,
    #[error("invalid computer document: {0}")]
    Document(String),
    #[error("io error: {0}")]
    Io(String),
}

/// A population computer.
#[derive(Debug, Clone)]
pub struct PopulationComputer {
    labels: Vec<String>,
    label_index: HashMap<String, State>,
    inputs: BTreeSet<State>,
    helpers: BTreeMap<State, u64>,
    transitions: Vec<Transition>,
    by_lhs: Vec<u32>,
    output: Output,
}

impl PopulationComputer {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, q: State) -> &str {
        &self.labels[q]
    }

    pub fn state(&self, label: &str) -> Option<State> {
        self.label_index.get(label).copied()
    }

    pub fn inputs(&self) -> &BTreeSet<State> {
        &self.inputs
    }

    pub fn helpers(&self) -> &BTreeMap<State, u64> {
        &self.helpers
    }

    pub fn helper_total(&self) -> u64 {
        self.helpers.values().sum()
    }

    pub fn helper_config(&self) -> Config {
        Config::from_pairs(self.helpers.iter().map(|(&q, &k)| (q, k)))
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn output(&self) -> &Output {
        &self.output
    }

    /// Total arity over all transitions.
    pub fn arity_sum(&self) -> u64 {
        self.transitions.iter().map(Transition::arity).sum()
    }

    /// Gates of the output circuit, zero for consensus outputs.
    pub fn gate_count(&self) -> usize {
        match &self.output {
            Output::Circuit(c) => c.gate_count(),
            _ => 0,
        }
    }

    /// The transition with exactly this left-hand side, if any.
    pub fn transition_for(&self, lhs: &[(State, u64)]) -> Option<&Transition> {
        let key = normalize_side(lhs);
        self.by_lhs
            .binary_search_by(|&i| self.transitions[i as usize].lhs.cmp(&key))
            .ok()
            .map(|pos| &self.transitions[self.by_lhs[pos] as usize])
    }

    /// All transitions enabled at `c`.
    pub fn enabled<'a>(&'a self, c: &Config) -> Vec<&'a Transition> {
        self.transitions
            .iter()
            .filter(|t| c.covers(&t.lhs))
            .collect()
    }

    /// True when no transition is enabled at `c`.
    pub fn is_terminal(&self, c: &Config) -> bool {
        !self.transitions.iter().any(|t| c.covers(&t.lhs))
    }

    /// Fires `t` at `c`.
    pub fn step(&self, c: &Config, t: &Transition) -> Result<Config, CoreError> {
        if !c.covers(&t.lhs) {
            return Err(CoreError::NotEnabled);
        }
        let mut next = c.clone();
        for &(q, k) in t.lhs.iter() {
            next.remove(q, k);
        }
        for &(q, k) in t.rhs.iter() {
            next.add(q, k);
        }
        Ok(next)
    }

    /// Output of a configuration: `Some(b)` for a verdict, `None` when
    /// undecided.
    pub fn output_of(&self, c: &Config) -> Option<bool> {
        self.output_of_support(&c.support().collect::<BTreeSet<_>>())
    }

    /// Output evaluated directly on a support set.
    pub fn output_of_support(&self, supp: &BTreeSet<State>) -> Option<bool> {
        match &self.output {
            Output::Circuit(circuit) => Some(circuit.eval_with(|label| {
                self.state(label).is_some_and(|q| supp.contains(&q))
            })),
            Output::Marked { zero, one } => {
                let hits_zero = supp.iter().any(|q| zero.contains(q));
                let hits_one = supp.iter().any(|q| one.contains(q));
                match (hits_zero, hits_one) {
                    (true, false) => Some(false),
                    (false, true) => Some(true),
                    _ => None,
                }
            }
            Output::Consensus { zero, one } => {
                if supp.is_empty() {
                    return None;
                }
                if supp.iter().all(|q| one.contains(q)) {
                    Some(true)
                } else if supp.iter().all(|q| zero.contains(q)) {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }

    /// Initial configuration `input + helpers + extra`, with the input
    /// restricted to input states and the extras to the helper support.
    pub fn initial(&self, input: &Config, extra: &Config) -> Result<Config, CoreError> {
        for (q, _) in input.iter() {
            if !self.inputs.contains(&q) {
                return Err(CoreError::NotAnInputState(self.labels[q].clone()));
            }
        }
        for (q, _) in extra.iter() {
            if !self.helpers.contains_key(&q) {
                return Err(CoreError::ExtraHelperOutsideSupport(
                    self.labels[q].clone(),
                ));
            }
        }
        let mut c = input.clone();
        c.add_all(&self.helper_config());
        c.add_all(extra);
        Ok(c)
    }

    /// Builds a configuration from label counts.
    pub fn config_from_labels(
        &self,
        counts: &BTreeMap<String, u64>,
    ) -> Result<Config, CoreError> {
        let mut c = Config::new();
        for (label, &k) in counts {
            let q = self
                .state(label)
                .ok_or_else(|| CoreError::UnknownState(label.clone()))?;
            c.add(q, k);
        }
        Ok(c)
    }

    /// Re-checks every structural invariant, returning all violations.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.transitions {
            let la: u64 = t.lhs.iter().map(|(_, k)| k).sum();
            let ra: u64 = t.rhs.iter().map(|(_, k)| k).sum();
            if la != ra {
                out.push(format!("arity mismatch in {}", self.render_transition(t)));
            }
            if la < 2 {
                out.push(format!("arity below 2 in {}", self.render_transition(t)));
            }
            if t.lhs.len() > 2 {
                out.push(format!(
                    "more than two states on the left of {}",
                    self.render_transition(t)
                ));
            }
            for &(q, _) in t.lhs.iter().chain(t.rhs.iter()) {
                if q >= self.labels.len() {
                    out.push(format!("transition references unknown state {q}"));
                }
            }
        }
        let mut order: Vec<u32> = (0..self.transitions.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            self.transitions[a as usize]
                .lhs
                .cmp(&self.transitions[b as usize].lhs)
        });
        for w in order.windows(2) {
            let (a, b) = (
                &self.transitions[w[0] as usize],
                &self.transitions[w[1] as usize],
            );
            if a.lhs == b.lhs && a.rhs != b.rhs {
                out.push(format!(
                    "two transitions share the left-hand side of {}",
                    self.render_transition(b)
                ));
            }
        }
        for q in self.helpers.keys() {
            if self.inputs.contains(q) {
                out.push(format!("helper state {:?} is an input", self.labels[*q]));
            }
        }
        match &self.output {
            Output::Circuit(c) => {
                if let Err(e) = c.validate() {
                    out.push(format!("output circuit invalid: {e}"));
                }
                for label in c.inputs() {
                    if self.state(label).is_none() {
                        out.push(format!("circuit input {label:?} is not a state"));
                    }
                }
            }
            Output::Marked { zero, one } => {
                if zero.intersection(one).next().is_some() {
                    out.push("marked classes overlap".into());
                }
            }
            Output::Consensus { zero, one } => {
                let all: BTreeSet<State> = (0..self.labels.len()).collect();
                let union: BTreeSet<State> = zero.union(one).copied().collect();
                if union != all || zero.intersection(one).next().is_some() {
                    out.push("consensus classes do not partition the states".into());
                }
            }
        }
        out
    }

    fn render_transition(&self, t: &Transition) -> String {
        let side = |s: &[(State, u64)]| {
            s.iter()
                .map(|&(q, k)| {
                    if k == 1 {
                        self.labels[q].clone()
                    } else {
                        format!("{}·{}", k, self.labels[q])
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("{} ↦ {}", side(&t.lhs), side(&t.rhs))
    }

    /// Summary counters used by reports and the command line.
    pub fn stats(&self) -> Stats {
        Stats {
            states: self.num_states(),
            inputs: self.inputs.len(),
            transitions: self.transitions.len(),
            arity_sum: self.arity_sum(),
            helper_total: self.helper_total(),
            output_kind: self.output.kind(),
            gates: self.gate_count(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let label = |q: &State| self.labels[*q].clone();
        let side_json = |side: &[(State, u64)]| -> BTreeMap<String, u64> {
            side.iter().map(|&(q, k)| (self.labels[q].clone(), k)).collect()
        };
        let mut states: Vec<String> = self.labels.clone();
        states.sort();
        let inputs: Vec<String> = self.inputs.iter().map(label).collect();
        let helpers: BTreeMap<String, u64> = self
            .helpers
            .iter()
            .map(|(q, &k)| (self.labels[*q].clone(), k))
            .collect();
        let mut transitions: Vec<(BTreeMap<String, u64>, BTreeMap<String, u64>)> = self
            .transitions
            .iter()
            .map(|t| (side_json(&t.lhs), side_json(&t.rhs)))
            .collect();
        transitions.sort();
        let transitions: Vec<serde_json::Value> = transitions
            .into_iter()
            .map(|(lhs, rhs)| serde_json::json!({ "lhs": lhs, "rhs": rhs }))
            .collect();
        let class_json = |set: &BTreeSet<State>| -> Vec<String> {
            let mut v: Vec<String> = set.iter().map(label).collect();
            v.sort();
            v
        };
        let output = match &self.output {
            Output::Circuit(c) => serde_json::json!({ "kind": "circuit", "circuit": c.to_json() }),
            Output::Marked { zero, one } => serde_json::json!({
                "kind": "marked", "zero": class_json(zero), "one": class_json(one)
            }),
            Output::Consensus { zero, one } => serde_json::json!({
                "kind": "consensus", "zero": class_json(zero), "one": class_json(one)
            }),
        };
        serde_json::json!({
            "states": states,
            "inputs": inputs,
            "helpers": helpers,
            "transitions": transitions,
            "output": output,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, CoreError> {
        let doc: ComputerJson =
            serde_json::from_value(v.clone()).map_err(|e| CoreError::Document(e.to_string()))?;
        let mut b = Builder::new();
        for label in &doc.states {
            if b.try_state(label).is_some() {
                return Err(CoreError::DuplicateState(label.clone()));
            }
            b.state(label);
        }
        let lookup = |label: &String, b: &Builder| -> Result<State, CoreError> {
            b.try_state(label)
                .ok_or_else(|| CoreError::UnknownState(label.clone()))
        };
        for label in &doc.inputs {
            let q = lookup(label, &b)?;
            b.input(q);
        }
        for (label, &k) in &doc.helpers {
            let q = lookup(label, &b)?;
            b.helpers(q, k);
        }
        for t in &doc.transitions {
            let conv = |side: &BTreeMap<String, u64>, b: &Builder| {
                side.iter()
                    .map(|(label, &k)| Ok((lookup(label, b)?, k)))
                    .collect::<Result<Vec<_>, CoreError>>()
            };
            let lhs = conv(&t.lhs, &b)?;
            let rhs = conv(&t.rhs, &b)?;
            b.transition(&lhs, &rhs)?;
        }
        let output = match doc.output {
            OutputJson::Circuit { circuit } => Output::Circuit(
                Circuit::from_json(&circuit).map_err(|e| CoreError::Document(e.to_string()))?,
            ),
            OutputJson::Marked { zero, one } => {
                let conv = |labels: Vec<String>, b: &Builder| {
                    labels
                        .iter()
                        .map(|l| lookup(l, b))
                        .collect::<Result<BTreeSet<_>, _>>()
                };
                Output::Marked {
                    zero: conv(zero, &b)?,
                    one: conv(one, &b)?,
                }
            }
            OutputJson::Consensus { zero, one } => {
                let conv = |labels: Vec<String>, b: &Builder| {
                    labels
                        .iter()
                        .map(|l| lookup(l, b))
                        .collect::<Result<BTreeSet<_>, _>>()
                };
                Output::Consensus {
                    zero: conv(zero, &b)?,
                    one: conv(one, &b)?,
                }
            }
        };
        b.output(output);
        b.finish()
    }

    pub fn to_file(&self, path: &Path) -> Result<(), CoreError> {
        let text = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| CoreError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CoreError::Io(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::Io(e.to_string()))?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CoreError::Document(e.to_string()))?;
        Self::from_json(&v)
    }
}

impl PartialEq for PopulationComputer {
    fn eq(&self, other: &Self) -> bool {
        self.to_json() == other.to_json()
    }
}

/// Summary counters of a computer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub states: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub arity_sum: u64,
    pub helper_total: u64,
    pub output_kind: &'static str,
    pub gates: usize,
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "states: {}\ninputs: {}\nhelpers: {}\ntransitions: {}\ntotal arity: {}\noutput: {}\ngates: {}",
            self.states,
            self.inputs,
            self.helper_total,
            self.transitions,
            self.arity_sum,
            self.output_kind,
            self.gates
        )
    }
}

fn normalize_side(side: &[(State, u64)]) -> StateMultiset {
    let mut out = StateMultiset::new();
    for &(q, k) in side {
        if k == 0 {
            continue;
        }
        match out.iter_mut().find(|(s, _)| *s == q) {
            Some((_, c)) => *c += k,
            None => out.push((q, k)),
        }
    }
    out.sort_unstable_by_key(|&(q, _)| q);
    out
}

/// Incremental constructor for [`PopulationComputer`].
///
/// Labels are interned on first use. Transitions are normalized (sorted,
/// merged); a transition whose two sides are equal as multisets has no
/// effect and is silently dropped, and re-adding an identical transition is
/// a no-op. Adding a transition whose left-hand side already maps to a
/// different right-hand side is an error.
#[derive(Debug, Default)]
pub struct Builder {
    labels: Vec<String>,
    label_index: HashMap<String, State>,
    inputs: BTreeSet<State>,
    helpers: BTreeMap<State, u64>,
    transitions: Vec<Transition>,
    by_lhs: HashMap<StateMultiset, usize>,
    output: Option<Output>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns a state label.
    pub fn state(&mut self, label: &str) -> State {
        if let Some(&q) = self.label_index.get(label) {
            return q;
        }
        let q = self.labels.len();
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), q);
        q
    }

    pub fn try_state(&self, label: &str) -> Option<State> {
        self.label_index.get(label).copied()
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, q: State) -> &str {
        &self.labels[q]
    }

    pub fn input(&mut self, q: State) {
        self.inputs.insert(q);
    }

    /// Adds `k` helpers at `q`.
    pub fn helpers(&mut self, q: State, k: u64) {
        if k > 0 {
            *self.helpers.entry(q).or_insert(0) += k;
        }
    }

    /// Whether a transition with this left-hand side was already added.
    pub fn has_lhs(&self, lhs: &[(State, u64)]) -> bool {
        self.by_lhs.contains_key(&normalize_side(lhs))
    }

    /// Adds a transition; see the type-level rules.
    pub fn transition(
        &mut self,
        lhs: &[(State, u64)],
        rhs: &[(State, u64)],
    ) -> Result<(), CoreError> {
        let lhs = normalize_side(lhs);
        let rhs = normalize_side(rhs);
        if lhs == rhs {
            return Ok(());
        }
        let la: u64 = lhs.iter().map(|(_, k)| k).sum();
        let ra: u64 = rhs.iter().map(|(_, k)| k).sum();
        if la != ra {
            return Err(CoreError::ArityMismatch { lhs: la, rhs: ra });
        }
        if la < 2 {
            return Err(CoreError::ArityTooSmall(la));
        }
        if lhs.len() > 2 {
            return Err(CoreError::LhsSupportTooLarge(lhs.len()));
        }
        if let Some(&i) = self.by_lhs.get(&lhs) {
            if self.transitions[i].rhs == rhs {
                return Ok(());
            }
            let side = lhs
                .iter()
                .map(|&(q, k)| format!("{}·{}", k, self.labels[q]))
                .collect::<Vec<_>>()
                .join(",");
            return Err(CoreError::Nondeterministic(side));
        }
        self.by_lhs.insert(lhs.clone(), self.transitions.len());
        self.transitions.push(Transition { lhs, rhs });
        Ok(())
    }

    pub fn output(&mut self, output: Output) {
        self.output = Some(output);
    }

    pub fn finish(self) -> Result<PopulationComputer, CoreError> {
        let output = self.output.ok_or(CoreError::MissingOutput)?;
        for q in self.helpers.keys() {
            if self.inputs.contains(q) {
                return Err(CoreError::HelperOnInput(self.labels[*q].clone()));
            }
        }
        match &output {
            Output::Circuit(c) => {
                c.validate()
                    .map_err(|e| CoreError::Document(e.to_string()))?;
                for label in c.inputs() {
                    if !self.label_index.contains_key(label) {
                        return Err(CoreError::CircuitInputNotAState(label.clone()));
                    }
                }
            }
            Output::Marked { zero, one } => {
                if zero.intersection(one).next().is_some() {
                    return Err(CoreError::MarkedClassesOverlap);
                }
            }
            Output::Consensus { zero, one } => {
                let all: BTreeSet<State> = (0..self.labels.len()).collect();
                let union: BTreeSet<State> = zero.union(one).copied().collect();
                if union != all || zero.intersection(one).next().is_some() {
                    return Err(CoreError::ConsensusNotPartition);
                }
            }
        }
        drop(self.by_lhs);
        let mut by_lhs: Vec<u32> = (0..self.transitions.len() as u32).collect();
        by_lhs.sort_unstable_by(|&a, &b| {
            self.transitions[a as usize]
                .lhs
                .cmp(&self.transitions[b as usize].lhs)
        });
        Ok(PopulationComputer {
            labels: self.labels,
            label_index: self.label_index,
            inputs: self.inputs,
            helpers: self.helpers,
            transitions: self.transitions,
            by_lhs,
            output,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    lhs: BTreeMap<String, u64>,
    rhs: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum OutputJson {
    #[serde(rename = "circuit")]
    Circuit { circuit: serde_json::Value },
    #[serde(rename = "marked")]
    Marked {
        zero: Vec<String>,
        one: Vec<String>,
    },
    #[serde(rename = "consensus")]
    Consensus {
        zero: Vec<String>,
        one: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
struct ComputerJson {
    states: Vec<String>,
    inputs: Vec<String>,
    helpers: BTreeMap<String, u64>,
    transitions: Vec<TransitionJson>,
    output: OutputJson,
}
