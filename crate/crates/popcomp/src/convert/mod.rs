//! Mechanical conversions from bounded population computers to leaderless
//! two-way population protocols.
//!
//! The stages compose into [`pipeline`]: an optional input-isolation step
//! ([`preprocess`]), arity reduction to binary interactions ([`binarise`]),
//! replacement of the output circuit by a self-resetting evaluation layer
//! with a marked consensus ([`focalise`]), helper synthesis from surplus
//! input agents ([`autarkify`]) and finally an opinion/token layer giving a
//! total consensus ([`distribute`]). The first three stages return a
//! [`RefinementMap`] projecting new configurations onto old ones, which
//! [`check_refinement`] validates on sampled runs.

mod binarise;
mod focalise;

pub use binarise::binarise;
pub use focalise::focalise;

use crate::circuit::{CircuitError, InputSubst};
use crate::computer::{Builder, Config, CoreError, Output, PopulationComputer, State};
use crate::sim;
use crate::verify;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Errors from conversions and the pipeline.
#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("{stage}: {detail}")]
    Precondition { stage: &'static str, detail: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A linear-with-offset projection from configurations of a converted
/// computer back to configurations of its source.
///
/// A configuration maps to the sum of the images of its states, minus a
/// constant offset. The offset is zero for most stages; the circuit
/// evaluation stage uses it to cancel the constant block of machinery agents
/// it adds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementMap {
    /// New-state label to multiset over old-state labels.
    pub map: BTreeMap<String, BTreeMap<String, u64>>,
    /// Constant multiset over old-state labels subtracted from every image.
    pub offset: BTreeMap<String, u64>,
}

impl RefinementMap {
    /// Projects a configuration of `new` onto a configuration of `old`.
    pub fn project(
        &self,
        new: &PopulationComputer,
        old: &PopulationComputer,
        c: &Config,
    ) -> Result<Config, ConvertError> {
        let mut acc: BTreeMap<&str, u64> = BTreeMap::new();
        for (q, k) in c.iter() {
            let label = new.label(q);
            let image = self.map.get(label).ok_or_else(|| ConvertError::Precondition {
                stage: "refinement",
                detail: format!("state {label} has no image"),
            })?;
            for (target, w) in image {
                *acc.entry(target).or_default() += w * k;
            }
        }
        for (target, w) in &self.offset {
            let e = acc.entry(target).or_default();
            *e = e.saturating_sub(*w);
        }
        let mut out = Config::new();
        for (label, k) in acc {
            if k == 0 {
                continue;
            }
            let q = old.state(label).ok_or_else(|| ConvertError::Precondition {
                stage: "refinement",
                detail: format!("image state {label} is not a state of the source computer"),
            })?;
            out.add(q, k);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("map serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ConvertError> {
        serde_json::from_value(v.clone()).map_err(|e| ConvertError::Precondition {
            stage: "refinement",
            detail: format!("malformed refinement map: {e}"),
        })
    }
}

/// Picks a label not already in `used`, starting from `base`, and claims it.
fn fresh(used: &mut BTreeSet<String>, base: String) -> String {
    let mut name = base;
    while used.contains(&name) {
        name.push('~');
    }
    used.insert(name.clone());
    name
}

fn singleton(label: &str) -> BTreeMap<String, u64> {
    BTreeMap::from([(label.to_string(), 1)])
}

/// Isolates the input states: fresh starred copies of the inputs become the
/// new inputs, and each starred agent converts to its original state by
/// meeting a dedicated flag helper. The result has no transitions into or
/// among its input states, so pure-input configurations are terminal.
pub fn preprocess(
    p: &PopulationComputer,
) -> Result<(PopulationComputer, RefinementMap), ConvertError> {
    let mut used: BTreeSet<String> = p.labels().iter().cloned().collect();
    let mut b = Builder::new();
    for q in 0..p.num_states() {
        b.state(p.label(q));
    }
    let flag_label = fresh(&mut used, "go".to_string());
    let flag = b.state(&flag_label);
    let mut stars: Vec<(State, String, State)> = Vec::new();
    for &x in p.inputs() {
        let label = fresh(&mut used, format!("*{}", p.label(x)));
        let s = b.state(&label);
        b.input(s);
        stars.push((s, label, x));
    }
    for (&q, &k) in p.helpers() {
        b.helpers(q, k);
    }
    b.helpers(flag, 1);
    for (s, _, x) in &stars {
        b.transition(&[(*s, 1), (flag, 1)], &[(*x, 1), (flag, 1)])?;
    }
    for t in p.transitions() {
        b.transition(t.lhs(), t.rhs())?;
    }
    b.output(match p.output() {
        Output::Circuit(c) => Output::Circuit(c.clone()),
        Output::Marked { zero, one } | Output::Consensus { zero, one } => Output::Marked {
            zero: zero.clone(),
            one: one.clone(),
        },
    });
    let p2 = b.finish()?;
    let mut map = BTreeMap::new();
    for q in 0..p.num_states() {
        map.insert(p.label(q).to_string(), singleton(p.label(q)));
    }
    map.insert(flag_label, BTreeMap::new());
    for (_, label, x) in stars {
        map.insert(label, singleton(p.label(x)));
    }
    Ok((
        p2,
        RefinementMap {
            map,
            offset: BTreeMap::new(),
        },
    ))
}

/// Removes states that no sequence of transitions can ever populate from the
/// inputs and helpers, together with the transitions that mention them.
///
/// Circuit inputs over removed states fold to constant false; marked and
/// consensus classes are intersected with the survivors. The refinement map,
/// when given, is filtered to the surviving states.
pub fn prune(
    p: &PopulationComputer,
    pi: Option<&RefinementMap>,
) -> Result<(PopulationComputer, Option<RefinementMap>), ConvertError> {
    let n = p.num_states();
    let mut live = vec![false; n];
    for &q in p.inputs() {
        live[q] = true;
    }
    for &q in p.helpers().keys() {
        live[q] = true;
    }
    loop {
        let mut changed = false;
        for t in p.transitions() {
            if t.lhs().iter().all(|&(q, _)| live[q]) {
                for &(q, _) in t.rhs() {
                    if !live[q] {
                        live[q] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    if live.iter().all(|&l| l) {
        return Ok((p.clone(), pi.cloned()));
    }
    let mut b = Builder::new();
    let mut remap = vec![usize::MAX; n];
    for q in 0..n {
        if live[q] {
            remap[q] = b.state(p.label(q));
        }
    }
    for &q in p.inputs() {
        b.input(remap[q]);
    }
    for (&q, &k) in p.helpers() {
        b.helpers(remap[q], k);
    }
    for t in p.transitions() {
        if t.lhs().iter().all(|&(q, _)| live[q]) {
            let lhs: Vec<(State, u64)> = t.lhs().iter().map(|&(q, k)| (remap[q], k)).collect();
            let rhs: Vec<(State, u64)> = t.rhs().iter().map(|&(q, k)| (remap[q], k)).collect();
            b.transition(&lhs, &rhs)?;
        }
    }
    let keep = |set: &BTreeSet<State>| -> BTreeSet<State> {
        set.iter()
            .filter(|&&q| live[q])
            .map(|&q| remap[q])
            .collect()
    };
    b.output(match p.output() {
        Output::Circuit(c) => Output::Circuit(
            c.substitute(|label| match p.state(label) {
                Some(q) if live[q] => InputSubst::Input(label.to_string()),
                _ => InputSubst::Const(false),
            })
            .simplified(),
        ),
        Output::Marked { zero, one } => Output::Marked {
            zero: keep(zero),
            one: keep(one),
        },
        Output::Consensus { zero, one } => Output::Consensus {
            zero: keep(zero),
            one: keep(one),
        },
    });
    let p2 = b.finish()?;
    let pi2 = pi.map(|pi| RefinementMap {
        map: pi
            .map
            .iter()
            .filter(|(label, _)| p2.state(label).is_some())
            .map(|(label, image)| (label.clone(), image.clone()))
            .collect(),
        offset: pi.offset.clone(),
    });
    Ok((p2, pi2))
}

/// Synthesises the helper multiset from surplus input agents, leaving a
/// computer with no helpers at all.
///
/// Inputs must come in `x`/`x'` pairs where the primed state counts double.
/// Two agents on an unprimed input merge into one primed agent, liberating
/// the second agent; liberated agents batch up to the helper total and one
/// full batch disperses into the helper states. The result decides the
/// original (undoubled) predicate for inputs of size at least the paired
/// input count plus twice the helper total.
pub fn autarkify(p: &PopulationComputer) -> Result<PopulationComputer, ConvertError> {
    let pure_input_terminal = p
        .transitions()
        .iter()
        .all(|t| t.lhs().iter().any(|&(q, _)| !p.inputs().contains(&q)));
    let no_incoming = p.transitions().iter().all(|t| {
        p.inputs()
            .iter()
            .all(|&q| t.produced(q) <= t.consumed(q))
    });
    if !pure_input_terminal || !no_incoming {
        return Err(ConvertError::Precondition {
            stage: "autarkify",
            detail: "inputs must be untouched by transitions (no pure-input firings, no net production into inputs)".to_string(),
        });
    }
    let inputs = p.inputs();
    let mut pairs: Vec<(State, State)> = Vec::new();
    for &q in inputs {
        let label = p.label(q);
        if let Some(base) = label.strip_suffix('\'') {
            if p.state(base).map_or(true, |s| !inputs.contains(&s)) {
                return Err(ConvertError::Precondition {
                    stage: "autarkify",
                    detail: format!("primed input {label} has no unprimed partner"),
                });
            }
        } else {
            let Some(partner) = p
                .state(&format!("{label}'"))
                .filter(|s| inputs.contains(s))
            else {
                return Err(ConvertError::Precondition {
                    stage: "autarkify",
                    detail: format!("input {label} has no doubled partner {label}'"),
                });
            };
            pairs.push((q, partner));
        }
    }
    let m = p.helper_total();
    let mut used: BTreeSet<String> = p.labels().iter().cloned().collect();
    let mut b = Builder::new();
    for q in 0..p.num_states() {
        b.state(p.label(q));
    }
    for &(x, _) in &pairs {
        b.input(x);
    }
    for t in p.transitions() {
        b.transition(t.lhs(), t.rhs())?;
    }
    let helper_list: Vec<State> = p
        .helpers()
        .iter()
        .flat_map(|(&q, &k)| std::iter::repeat(q).take(k as usize))
        .collect();
    match m {
        0 => {}
        1 => {
            for &(x, xp) in &pairs {
                b.transition(&[(x, 2)], &[(xp, 1), (helper_list[0], 1)])?;
            }
        }
        _ => {
            let up: Vec<State> = (0..m)
                .map(|i| {
                    let label = fresh(&mut used, format!("up{i}"));
                    b.state(&label)
                })
                .collect();
            let down: Vec<State> = (2..=m)
                .map(|i| {
                    let label = fresh(&mut used, format!("dn{i}"));
                    b.state(&label)
                })
                .collect();
            let down_of = |k: u64| down[(k - 2) as usize];
            for &(x, xp) in &pairs {
                b.transition(&[(x, 2)], &[(xp, 1), (up[1], 1)])?;
            }
            for i in 1..m {
                for j in i..m {
                    let s = i + j;
                    let rhs = if s < m {
                        [(up[s as usize], 1), (up[0], 1)]
                    } else {
                        [(down_of(m), 1), (up[(s - m) as usize], 1)]
                    };
                    b.transition(&[(up[i as usize], 1), (up[j as usize], 1)], &rhs)?;
                }
            }
            for i in 1..m {
                let source = down_of(i + 1);
                let target = if i == 1 { helper_list[0] } else { down_of(i) };
                b.transition(
                    &[(source, 1), (up[0], 1)],
                    &[(target, 1), (helper_list[i as usize], 1)],
                )?;
            }
        }
    }
    b.output(match p.output() {
        Output::Circuit(c) => Output::Circuit(c.clone()),
        Output::Marked { zero, one } | Output::Consensus { zero, one } => Output::Marked {
            zero: zero.clone(),
            one: one.clone(),
        },
    });
    let p2 = b.finish()?;
    let (p2, _) = prune(&p2, None)?;
    Ok(p2)
}

/// Layers opinions and one-shot persuasion tokens over a helper-free marked
/// computer, yielding a total consensus with exactly four states per source
/// state.
///
/// A pair whose underlying move (the identity when no transition applies)
/// touches a marked class certifies: both agents adopt that opinion
/// (polarity one preferred) and receive tokens. Otherwise a lone token
/// convinces a disagreeing partner and is spent, two opposing tokens
/// annihilate, and anything else carries its flags through the underlying
/// move.
pub fn distribute(p: &PopulationComputer) -> Result<PopulationComputer, ConvertError> {
    if p.transitions().iter().any(|t| t.arity() != 2) {
        return Err(ConvertError::Precondition {
            stage: "distribute",
            detail: "transitions must be binary".to_string(),
        });
    }
    if p.helper_total() != 0 {
        return Err(ConvertError::Precondition {
            stage: "distribute",
            detail: "computer must have no helpers".to_string(),
        });
    }
    let (zero_class, one_class) = match p.output() {
        Output::Marked { zero, one } | Output::Consensus { zero, one } => (zero, one),
        Output::Circuit(_) => {
            return Err(ConvertError::Precondition {
                stage: "distribute",
                detail: "output must be marked or consensus".to_string(),
            })
        }
    };
    let n = p.num_states();
    let mut used: BTreeSet<String> = p.labels().iter().cloned().collect();
    let mut b = Builder::new();
    // Flag index: 2 * opinion + token.
    let mut st = vec![[0usize; 4]; n];
    for q in 0..n {
        st[q][0] = b.state(p.label(q));
    }
    for q in 0..n {
        for f in 1..4 {
            let label = fresh(&mut used, format!("{}^{}{}", p.label(q), f >> 1, f & 1));
            st[q][f] = b.state(&label);
        }
    }
    for &q in p.inputs() {
        b.input(st[q][0]);
    }
    for a in 0..n {
        for c in a..n {
            let base = p.transition_for(&[(a, 1), (c, 1)]);
            let (ta, tc) = match base {
                Some(t) => {
                    let mut exp: Vec<State> = Vec::new();
                    for &(q, k) in t.rhs() {
                        for _ in 0..k {
                            exp.push(q);
                        }
                    }
                    (exp[0], exp[1])
                }
                None => (a, c),
            };
            let certify = if one_class.contains(&ta) || one_class.contains(&tc) {
                Some(1usize)
            } else if zero_class.contains(&ta) || zero_class.contains(&tc) {
                Some(0usize)
            } else {
                None
            };
            for fa in 0..4usize {
                let fc0 = if a == c { fa } else { 0 };
                for fc in fc0..4usize {
                    let (ra, rc) = match certify {
                        Some(bit) => (2 * bit + 1, 2 * bit + 1),
                        None => {
                            let (oa, ka) = (fa >> 1, fa & 1);
                            let (oc, kc) = (fc >> 1, fc & 1);
                            if oa != oc && ka + kc == 1 {
                                let winner = if ka == 1 { oa } else { oc };
                                (2 * winner, 2 * winner)
                            } else if oa != oc && ka == 1 && kc == 1 {
                                (2 * oa, 2 * oc)
                            } else {
                                (fa, fc)
                            }
                        }
                    };
                    b.transition(
                        &[(st[a][fa], 1), (st[c][fc], 1)],
                        &[(st[ta][ra], 1), (st[tc][rc], 1)],
                    )?;
                }
            }
        }
    }
    let mut zero = BTreeSet::new();
    let mut one = BTreeSet::new();
    for q in 0..n {
        zero.insert(st[q][0]);
        zero.insert(st[q][1]);
        one.insert(st[q][2]);
        one.insert(st[q][3]);
    }
    b.output(Output::Consensus { zero, one });
    Ok(b.finish()?)
}

/// Conversion pipeline mode: `Fast` goes straight to arity reduction and
/// requires the input's transitions to leave input states untouched; `Full`
/// first isolates the inputs behind starred copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    Fast,
    Full,
}

/// One intermediate computer produced by the pipeline.
#[derive(Debug, Clone)]
pub struct StageArtifact {
    pub name: &'static str,
    pub computer: PopulationComputer,
    pub refinement: Option<RefinementMap>,
}

/// Size and validation figures for one stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub name: &'static str,
    pub states: usize,
    pub transitions: usize,
    pub arity_sum: u64,
    pub helpers: u64,
    pub gates: usize,
    pub validation_ok: bool,
}

/// Pipeline-level report: precondition outcomes and per-stage figures.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub mode: &'static str,
    /// Whether a potential certificate established boundedness of the input.
    pub bounded_certified: bool,
    /// Syntactic speed conditions of the input computer; informational.
    pub rapid_out_degree: bool,
    pub rapid_non_input_lhs: bool,
    pub rapid_input_flow: bool,
    /// The speed conditions are sufficient syntactic checks, not semantic.
    pub rapid_syntactic_only: bool,
    /// The final protocol decides the predicate for inputs of at least this
    /// size.
    pub min_input_size: u64,
    pub stages: Vec<StageReport>,
}

/// Everything the pipeline produces: each stage's computer with its
/// refinement map, and the report. The final stage holds the protocol.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub stages: Vec<StageArtifact>,
    pub report: PipelineReport,
}

impl PipelineResult {
    /// The finished protocol, owned by the last stage.
    pub fn protocol(&self) -> &PopulationComputer {
        &self.stages.last().expect("pipeline has stages").computer
    }
}

fn stage_report(name: &'static str, p: &PopulationComputer) -> StageReport {
    StageReport {
        name,
        states: p.num_states(),
        transitions: p.transitions().len(),
        arity_sum: p.arity_sum(),
        helpers: p.helper_total(),
        gates: p.gate_count(),
        validation_ok: p.validate().is_empty(),
    }
}

/// Runs the conversion stages in order on a computer for the doubled
/// predicate, producing a terminating, helper-free, binary, consensus
/// protocol for the original predicate.
pub fn pipeline(
    p: &PopulationComputer,
    mode: PipelineMode,
) -> Result<PipelineResult, ConvertError> {
    let rapid = verify::rapid_conditions(p);
    if mode == PipelineMode::Fast && !(rapid.non_input_lhs && rapid.input_flow) {
        return Err(ConvertError::Precondition {
            stage: "pipeline",
            detail: "fast mode requires transitions that never fire on inputs alone and never produce into inputs; rerun in full mode".to_string(),
        });
    }
    let bounded_certified = match verify::synthesize_potential(p) {
        Ok(verify::PotentialOutcome::Weights(_)) => true,
        Ok(verify::PotentialOutcome::Unbounded(_)) => {
            return Err(ConvertError::Precondition {
                stage: "pipeline",
                detail: "input computer admits a firing loop; conversion needs a bounded computer".to_string(),
            })
        }
        Err(_) => false,
    };
    let mut stages: Vec<StageArtifact> = Vec::new();
    let mut reports = vec![stage_report("input", p)];
    let mut current = p.clone();
    if mode == PipelineMode::Full {
        let (next, map) = preprocess(&current)?;
        reports.push(stage_report("preprocess", &next));
        stages.push(StageArtifact {
            name: "preprocess",
            computer: next.clone(),
            refinement: Some(map),
        });
        current = next;
    }
    let (next, map) = binarise(&current)?;
    let (next, map) = prune(&next, Some(&map))?;
    reports.push(stage_report("binarise", &next));
    stages.push(StageArtifact {
        name: "binarise",
        computer: next.clone(),
        refinement: map,
    });
    current = next;
    let (next, map) = focalise(&current)?;
    let (next, map) = prune(&next, Some(&map))?;
    reports.push(stage_report("focalise", &next));
    stages.push(StageArtifact {
        name: "focalise",
        computer: next.clone(),
        refinement: map,
    });
    current = next;
    let min_input_size = current.inputs().len() as u64 + 2 * current.helper_total();
    let next = autarkify(&current)?;
    reports.push(stage_report("autarkify", &next));
    stages.push(StageArtifact {
        name: "autarkify",
        computer: next.clone(),
        refinement: None,
    });
    let protocol = distribute(&next)?;
    drop(next);
    reports.push(stage_report("distribute", &protocol));
    stages.push(StageArtifact {
        name: "distribute",
        computer: protocol,
        refinement: None,
    });
    Ok(PipelineResult {
        stages,
        report: PipelineReport {
            mode: match mode {
                PipelineMode::Fast => "fast",
                PipelineMode::Full => "full",
            },
            bounded_certified,
            rapid_out_degree: rapid.out_degree,
            rapid_non_input_lhs: rapid.non_input_lhs,
            rapid_input_flow: rapid.input_flow,
            rapid_syntactic_only: true,
            min_input_size,
            stages: reports,
        },
    })
}

/// Outcome of [`check_refinement`].
#[derive(Debug, Clone)]
pub struct RefinementCheck {
    pub pass: bool,
    pub runs: usize,
    pub steps: usize,
    pub violations: Vec<String>,
}

/// Validates a refinement map on sampled runs of the converted computer.
///
/// Each run starts from a random small input with random extra helpers and
/// fires uniformly random enabled transitions. Every step must project to a
/// stutter or to a single step of the source computer, and every terminal
/// configuration must project to a terminal configuration with the same
/// output.
pub fn check_refinement(
    old: &PopulationComputer,
    new: &PopulationComputer,
    pi: &RefinementMap,
    runs: usize,
    seed: u64,
    max_steps: usize,
) -> RefinementCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut steps_total = 0usize;
    let helper_support: Vec<State> = new.helpers().keys().copied().collect();
    for run in 0..runs {
        let mut input = Config::new();
        for &q in new.inputs() {
            input.add(q, rng.gen_range(0..=3u64));
        }
        let mut extra = Config::new();
        if !helper_support.is_empty() {
            for _ in 0..rng.gen_range(0..=2u32) {
                extra.add(helper_support[rng.gen_range(0..helper_support.len())], 1);
            }
        }
        let mut c = match new.initial(&input, &extra) {
            Ok(c) => c,
            Err(e) => {
                violations.push(format!("run {run}: initial configuration rejected: {e}"));
                continue;
            }
        };
        let mut pc = match pi.project(new, old, &c) {
            Ok(pc) => pc,
            Err(e) => {
                violations.push(format!("run {run}: {e}"));
                continue;
            }
        };
        let mut stepper = sim::FairStepper::new(new, &c);
        let mut finished = false;
        for step in 0..max_steps {
            if stepper.is_terminal() {
                if !old.is_terminal(&pc) {
                    violations.push(format!(
                        "run {run}: terminal configuration projects to a non-terminal one"
                    ));
                } else if new.output_of(&c) != old.output_of(&pc) {
                    violations.push(format!(
                        "run {run}: terminal outputs disagree ({:?} vs {:?})",
                        new.output_of(&c),
                        old.output_of(&pc)
                    ));
                }
                finished = true;
                break;
            }
            stepper.step(&mut rng).expect("not terminal");
            let d = stepper.config();
            steps_total += 1;
            let pd = match pi.project(new, old, &d) {
                Ok(pd) => pd,
                Err(e) => {
                    violations.push(format!("run {run} step {step}: {e}"));
                    finished = true;
                    break;
                }
            };
            if pd != pc {
                let legal = old
                    .enabled(&pc)
                    .iter()
                    .any(|ot| old.step(&pc, ot).expect("enabled transition") == pd);
                if !legal {
                    violations.push(format!(
                        "run {run} step {step}: projection is neither a stutter nor a single source step"
                    ));
                    finished = true;
                    break;
                }
            }
            c = d;
            pc = pd;
        }
        if !finished {
            violations.push(format!("run {run}: no terminal reached in {max_steps} steps"));
        }
    }
    RefinementCheck {
        pass: violations.is_empty(),
        runs,
        steps: steps_total,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfpa;
    use crate::synth;

    fn marked_pair_computer() -> PopulationComputer {
        let mut b = Builder::new();
        let a = b.state("a");
        let c = b.state("b");
        let win = b.state("w");
        b.transition(&[(a, 1), (c, 1)], &[(win, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [win].into(),
        });
        b.finish().unwrap()
    }

    #[test]
    fn preprocess_isolates_inputs() {
        let p = synth::compile(&qfpa::parse("2x + y = 3 mod 5").unwrap(), &[]).unwrap();
        let (p2, pi) = preprocess(&p).unwrap();
        assert_eq!(p2.num_states(), p.num_states() + 3);
        assert_eq!(p2.inputs().len(), 2);
        assert_eq!(p2.helper_total(), p.helper_total() + 1);
        assert_eq!(p2.transitions().len(), p.transitions().len() + 2);
        let conds = verify::rapid_conditions(&p2);
        assert!(conds.non_input_lhs);
        assert!(conds.input_flow);
        let star = p2.state("*X:x").unwrap();
        assert!(p2.inputs().contains(&star));
        assert_eq!(pi.map["*X:x"], singleton("X:x"));
        assert_eq!(pi.map["go"], BTreeMap::new());
        let check = check_refinement(&p, &p2, &pi, 40, 7, 100_000);
        assert!(check.pass, "{:?}", check.violations);
    }

    #[test]
    fn prune_drops_unreachable_states() {
        let mut b = Builder::new();
        let x = b.state("x");
        let z = b.state("z");
        let dead = b.state("dead");
        let sink = b.state("sink");
        b.input(x);
        b.helpers(z, 1);
        b.transition(&[(x, 1), (z, 1)], &[(z, 2)]).unwrap();
        b.transition(&[(dead, 1), (z, 1)], &[(sink, 2)]).unwrap();
        let mut cb = crate::circuit::Builder::new();
        let iz = cb.input("z");
        let id = cb.input("dead");
        let g = cb.or(iz, id);
        b.output(Output::Circuit(cb.finish(g)));
        let p = b.finish().unwrap();
        let (p2, _) = prune(&p, None).unwrap();
        assert_eq!(p2.num_states(), 2);
        assert!(p2.state("dead").is_none());
        assert!(p2.state("sink").is_none());
        assert_eq!(p2.transitions().len(), 1);
        let Output::Circuit(c) = p2.output() else {
            panic!("circuit expected")
        };
        assert_eq!(c.inputs(), ["z".to_string()]);
    }

    #[test]
    fn autarkify_two_helpers_builds_batch_chain() {
        let mut b = Builder::new();
        let x = b.state("X:v");
        let xp = b.state("X:v'");
        let h1 = b.state("h1");
        let h2 = b.state("h2");
        let done = b.state("done");
        b.input(x);
        b.input(xp);
        b.helpers(h1, 1);
        b.helpers(h2, 1);
        b.transition(&[(x, 1), (h1, 1)], &[(done, 1), (h1, 1)]).unwrap();
        b.transition(&[(xp, 1), (h2, 1)], &[(done, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [done].into(),
        });
        let p = b.finish().unwrap();
        let p2 = autarkify(&p).unwrap();
        assert_eq!(p2.helper_total(), 0);
        assert_eq!(p2.inputs().len(), 1);
        let x2 = p2.state("X:v").unwrap();
        let xp2 = p2.state("X:v'").unwrap();
        let up1 = p2.state("up1").unwrap();
        let up0 = p2.state("up0").unwrap();
        let dn2 = p2.state("dn2").unwrap();
        let h1n = p2.state("h1").unwrap();
        let h2n = p2.state("h2").unwrap();
        let double = p2.transition_for(&[(x2, 2)]).unwrap();
        assert_eq!(double.rhs(), &[(xp2, 1), (up1, 1)]);
        let stack = p2.transition_for(&[(up1, 2)]).unwrap();
        assert_eq!(stack.rhs(), &[(up0, 1), (dn2, 1)]);
        let unload = p2.transition_for(&[(up0, 1), (dn2, 1)]).unwrap();
        assert_eq!(unload.rhs(), &[(h1n, 1), (h2n, 1)]);
    }

    #[test]
    fn autarkify_single_helper_is_direct() {
        let mut b = Builder::new();
        let x = b.state("X:v");
        let xp = b.state("X:v'");
        let h = b.state("h");
        let done = b.state("done");
        b.input(x);
        b.input(xp);
        b.helpers(h, 1);
        b.transition(&[(x, 1), (h, 1)], &[(done, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [done].into(),
        });
        let p = b.finish().unwrap();
        let p2 = autarkify(&p).unwrap();
        let x2 = p2.state("X:v").unwrap();
        let double = p2.transition_for(&[(x2, 2)]).unwrap();
        let xp2 = p2.state("X:v'").unwrap();
        let h2 = p2.state("h").unwrap();
        assert_eq!(double.rhs(), &[(xp2, 1), (h2, 1)]);
        assert!(p2.state("up1").is_none());
    }

    #[test]
    fn autarkify_rejects_unpaired_inputs() {
        let mut b = Builder::new();
        let x = b.state("X:v");
        let h = b.state("h");
        b.input(x);
        b.helpers(h, 1);
        b.transition(&[(x, 1), (h, 1)], &[(h, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [h].into(),
        });
        let p = b.finish().unwrap();
        assert!(matches!(
            autarkify(&p),
            Err(ConvertError::Precondition { stage: "autarkify", .. })
        ));
    }

    #[test]
    fn distribute_certifies_and_drops() {
        let p = marked_pair_computer();
        let p2 = distribute(&p).unwrap();
        assert_eq!(p2.num_states(), 4 * p.num_states());
        assert_eq!(p2.helper_total(), 0);
        assert_eq!(p2.output().kind(), "consensus");
        assert!(p2.validate().is_empty());
        let a = p2.state("a").unwrap();
        let b2 = p2.state("b").unwrap();
        let w11 = p2.state("w^11").unwrap();
        let certify = p2.transition_for(&[(a, 1), (b2, 1)]).unwrap();
        assert_eq!(certify.rhs(), &[(w11, 2)]);
        let a10 = p2.state("a^10").unwrap();
        let a01 = p2.state("a^01").unwrap();
        let a11 = p2.state("a^11").unwrap();
        let drop = p2.transition_for(&[(a01, 1), (a11, 1)]).unwrap();
        assert_eq!(drop.rhs(), &[(a, 1), (a10, 1)]);
        let convince = p2.transition_for(&[(a01, 1), (a10, 1)]).unwrap();
        assert_eq!(convince.rhs(), &[(a, 2)]);
    }

    #[test]
    fn distribute_same_opinion_tokened_pairs_are_terminal() {
        let p = marked_pair_computer();
        let p2 = distribute(&p).unwrap();
        let w11 = p2.state("w^11").unwrap();
        let c = Config::from_pairs([(w11, 5)]);
        assert!(p2.is_terminal(&c));
        assert_eq!(p2.output_of(&c), Some(true));
    }

    #[test]
    fn lone_marked_agent_converts_a_crowd() {
        let p = marked_pair_computer();
        let p2 = distribute(&p).unwrap();
        let a = p2.state("a").unwrap();
        let w11 = p2.state("w^11").unwrap();
        let a11 = p2.state("a^11").unwrap();
        let mint = p2.transition_for(&[(w11, 1), (a, 1)]).unwrap();
        assert_eq!(mint.rhs(), &[(a11, 1), (w11, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = Config::from_pairs([(w11, 1), (a, 9)]);
        for _ in 0..10_000 {
            let enabled = p2.enabled(&c);
            if enabled.is_empty() {
                break;
            }
            let t = enabled[rng.gen_range(0..enabled.len())];
            c = p2.step(&c, t).unwrap();
        }
        assert!(p2.is_terminal(&c));
        assert_eq!(p2.output_of(&c), Some(true));
    }

    #[test]
    fn refinement_map_round_trips_json() {
        let pi = RefinementMap {
            map: BTreeMap::from([
                ("a".to_string(), singleton("x")),
                ("b".to_string(), BTreeMap::new()),
            ]),
            offset: singleton("x"),
        };
        let v = pi.to_json();
        assert_eq!(RefinementMap::from_json(&v).unwrap(), pi);
    }

    #[test]
    fn corrupted_refinement_map_fails() {
        let p = synth::compile(&qfpa::parse("x = 1 mod 3").unwrap(), &[]).unwrap();
        let (p2, pi) = preprocess(&p).unwrap();
        let mut bad = pi.clone();
        let a = bad.map["*X:x"].clone();
        let b = bad.map["0"].clone();
        bad.map.insert("*X:x".to_string(), b);
        bad.map.insert("0".to_string(), a);
        let check = check_refinement(&p, &p2, &bad, 40, 11, 100_000);
        assert!(!check.pass);
    }

    #[test]
    fn fast_pipeline_yields_a_binary_consensus_protocol() {
        let phi = qfpa::parse("x - y >= 1").unwrap().double().unwrap();
        let p = synth::compile(&phi, &[]).unwrap();
        let result = pipeline(&p, PipelineMode::Fast).unwrap();
        let out = result.protocol();
        assert!(out.validate().is_empty());
        assert_eq!(out.helper_total(), 0);
        assert_eq!(out.output().kind(), "consensus");
        assert!(out.transitions().iter().all(|t| t.arity() == 2));
        assert!(result.report.bounded_certified);
        assert!(result.report.min_input_size > 0);
        assert_eq!(
            result.stages.iter().map(|s| s.name).collect::<Vec<_>>(),
            ["binarise", "focalise", "autarkify", "distribute"],
        );
        assert!(result.stages[0].refinement.is_some());
        assert!(result.stages[1].refinement.is_some());
    }
}
