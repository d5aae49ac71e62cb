//! Exhaustive reachability checks and certificate synthesis.
//!
//! The centrepiece is [`explore`], a breadth-first enumeration of every
//! configuration reachable from a starting point, deduplicated by canonical
//! form and capped by a configuration budget. The checks on the frozen graph
//! decide boundedness (the graph is acyclic), termination under fairness (a
//! terminal node is reachable from every node) and correctness against a
//! predicate oracle. Boundedness over all population sizes at once is handled
//! separately by [`synthesize_potential`], which either finds integer
//! potential weights certifying that every run strictly loses potential, or
//! returns an exact rational firing-count vector witnessing a reachable loop.

mod lp;

use crate::computer::{Config, CoreError, PopulationComputer, State, Transition};
use crate::qfpa::Predicate;
use crate::synth::{self, SynthError};
use lp::{LpOutcome, LpRow};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

/// Errors from graph checks and certificate synthesis.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(
        "state space truncated at {explored} configurations (cap {cap}); verdict indeterminate"
    )]
    Truncated { explored: usize, cap: usize },
    #[error("system too large for exact synthesis: {states} states, {transitions} transitions (limit {limit})")]
    TooLarge {
        states: usize,
        transitions: usize,
        limit: usize,
    },
    #[error("synthesised weight does not fit in 64 bits")]
    WeightOverflow,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// The reachable configuration graph from one starting configuration.
///
/// Nodes are deduplicated configurations; an edge `(j, t)` in the successor
/// list of node `i` means firing transition `t` in node `i` yields node `j`.
#[derive(Debug, Clone)]
pub struct ReachGraph {
    nodes: Vec<Config>,
    edges: Vec<Vec<(usize, usize)>>,
    terminals: Vec<usize>,
    truncated: bool,
    cap: usize,
}

impl ReachGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[Config] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Config {
        &self.nodes[i]
    }

    /// Successor list of node `i` as `(target node, transition index)` pairs.
    pub fn successors(&self, i: usize) -> &[(usize, usize)] {
        &self.edges[i]
    }

    /// Indices of nodes with no enabled transition.
    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    /// True when the configuration cap stopped the exploration early.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    fn require_complete(&self) -> Result<(), VerifyError> {
        if self.truncated {
            Err(VerifyError::Truncated {
                explored: self.nodes.len(),
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }
}

/// Enumerates every configuration reachable from `c0`, storing at most `cap`
/// configurations. Hitting the cap marks the graph truncated; all stored
/// nodes are still fully expanded against each other.
pub fn explore(p: &PopulationComputer, c0: &Config, cap: usize) -> ReachGraph {
    let cap = cap.max(1);
    let mut index: HashMap<Config, usize> = HashMap::new();
    let mut nodes = vec![c0.clone()];
    index.insert(c0.clone(), 0);
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    let mut terminals = Vec::new();
    let mut truncated = false;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let c = nodes[i].clone();
        let mut any = false;
        for (ti, t) in p.transitions().iter().enumerate() {
            if !c.covers(t.lhs()) {
                continue;
            }
            any = true;
            let succ = p.step(&c, t).expect("transition enabled by covers check");
            let j = match index.get(&succ).copied() {
                Some(j) => j,
                None => {
                    if nodes.len() >= cap {
                        truncated = true;
                        continue;
                    }
                    let j = nodes.len();
                    nodes.push(succ.clone());
                    edges.push(Vec::new());
                    index.insert(succ, j);
                    queue.push_back(j);
                    j
                }
            };
            edges[i].push((j, ti));
        }
        if !any {
            terminals.push(i);
        }
    }
    ReachGraph {
        nodes,
        edges,
        terminals,
        truncated,
        cap,
    }
}

/// True when no configuration can be revisited, i.e. the graph is acyclic.
pub fn check_bounded(g: &ReachGraph) -> Result<bool, VerifyError> {
    g.require_complete()?;
    let n = g.nodes.len();
    let mut colour = vec![0u8; n];
    for root in 0..n {
        if colour[root] != 0 {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        colour[root] = 1;
        while let Some(&(v, ei)) = work.last() {
            if ei < g.edges[v].len() {
                work.last_mut().expect("nonempty stack").1 += 1;
                let w = g.edges[v][ei].0;
                match colour[w] {
                    0 => {
                        colour[w] = 1;
                        work.push((w, 0));
                    }
                    1 => return Ok(false),
                    _ => {}
                }
            } else {
                colour[v] = 2;
                work.pop();
            }
        }
    }
    Ok(true)
}

/// True when a terminal configuration is reachable from every node, which on
/// a finite graph is exactly termination of all fair runs.
pub fn check_terminating_fair(g: &ReachGraph) -> Result<bool, VerifyError> {
    g.require_complete()?;
    let n = g.nodes.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, succs) in g.edges.iter().enumerate() {
        for &(w, _) in succs {
            reverse[w].push(v);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = g.terminals.iter().copied().collect();
    for &t in &g.terminals {
        seen[t] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &u in &reverse[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    Ok(seen.into_iter().all(|b| b))
}

/// Strongly connected components of the graph, by Tarjan's algorithm.
fn strongly_connected(g: &ReachGraph) -> Vec<Vec<usize>> {
    let n = g.nodes.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut out: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, ei)) = work.last() {
            if ei < g.edges[v].len() {
                work.last_mut().expect("nonempty stack").1 += 1;
                let w = g.edges[v][ei].0;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("component on stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Components with no edge leaving them; fair runs end up inside one.
fn bottom_components(g: &ReachGraph) -> Vec<Vec<usize>> {
    let comps = strongly_connected(g);
    let mut comp_of = vec![usize::MAX; g.nodes.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(ci, comp)| {
            comp.iter()
                .all(|&v| g.edges[v].iter().all(|&(w, _)| comp_of[w] == *ci))
        })
        .map(|(_, comp)| comp)
        .collect()
}

fn describe(p: &PopulationComputer, c: &Config) -> String {
    if c.is_empty() {
        return "(empty)".to_string();
    }
    c.iter()
        .map(|(q, k)| format!("{}·{}", k, p.label(q)))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Outcome of [`check_correct`] for one predicate input.
#[derive(Debug, Clone)]
pub struct CorrectReport {
    /// True when every helper variant terminated fairly with the expected
    /// verdict everywhere.
    pub pass: bool,
    /// The oracle verdict the computer must reproduce.
    pub expected: bool,
    /// Number of helper distributions explored.
    pub variants: usize,
    /// Total configurations over all variants.
    pub nodes: usize,
    /// Total edges over all variants.
    pub edges: usize,
    /// Human-readable descriptions of every violation found.
    pub failures: Vec<String>,
}

/// All ways of adding up to `slack` extra helper agents.
///
/// With at most four helper states every distribution is enumerated; beyond
/// that only uniform additions to the reservoir state `0` (or, lacking one,
/// to the most populous helper state) are tried, which keeps the variant
/// count linear while still exercising the dominant helper supply.
fn helper_variants(p: &PopulationComputer, slack: u64) -> Vec<Config> {
    let mut out = vec![Config::new()];
    let supp: Vec<State> = p.helpers().keys().copied().collect();
    if slack == 0 || supp.is_empty() {
        return out;
    }
    if supp.len() <= 4 {
        for total in 1..=slack {
            distribute(&supp, total, &mut Vec::new(), &mut out);
        }
    } else {
        let reservoir = p
            .state("0")
            .filter(|q| p.helpers().contains_key(q))
            .unwrap_or_else(|| {
                *p.helpers()
                    .iter()
                    .max_by_key(|&(q, k)| (*k, std::cmp::Reverse(*q)))
                    .expect("nonempty helper support")
                    .0
            });
        for k in 1..=slack {
            out.push(Config::from_pairs([(reservoir, k)]));
        }
    }
    out
}

fn distribute(supp: &[State], total: u64, acc: &mut Vec<(State, u64)>, out: &mut Vec<Config>) {
    if supp.len() == 1 {
        let mut pairs = acc.clone();
        pairs.push((supp[0], total));
        out.push(Config::from_pairs(pairs.into_iter().filter(|&(_, k)| k > 0)));
        return;
    }
    for k in 0..=total {
        acc.push((supp[0], k));
        distribute(&supp[1..], total - k, acc, out);
        acc.pop();
    }
}

/// Exhaustively checks that `p` decides `phi` on one concrete input, for
/// every admissible extra helper supply up to `helper_slack`.
///
/// Each variant must terminate under fairness, every terminal configuration
/// must output the oracle verdict, and every bottom component must be output
/// constant with that same verdict, which covers stabilisation exactly on
/// finite graphs.
pub fn check_correct(
    p: &PopulationComputer,
    phi: &Predicate,
    input: &BTreeMap<String, u64>,
    helper_slack: u64,
    cap: usize,
) -> Result<CorrectReport, VerifyError> {
    let expected = phi.eval(input);
    let base = synth::input_config(p, input)?;
    let mut failures = Vec::new();
    let mut variants = 0usize;
    let mut nodes = 0usize;
    let mut edges = 0usize;
    for extra in helper_variants(p, helper_slack) {
        variants += 1;
        let c0 = p.initial(&base, &extra)?;
        let g = explore(p, &c0, cap);
        g.require_complete()?;
        nodes += g.node_count();
        edges += g.edge_count();
        let from = describe(p, &c0);
        if !check_terminating_fair(&g)? {
            failures.push(format!(
                "from {from}: some reachable configuration cannot reach a terminal one"
            ));
            continue;
        }
        for &i in g.terminals() {
            let got = p.output_of(g.node(i));
            if got != Some(expected) {
                failures.push(format!(
                    "from {from}: terminal {} outputs {}, expected {}",
                    describe(p, g.node(i)),
                    got.map_or("undefined".to_string(), |b| b.to_string()),
                    expected
                ));
            }
        }
        for comp in bottom_components(&g) {
            let outs: Vec<Option<bool>> = comp.iter().map(|&v| p.output_of(g.node(v))).collect();
            if outs.iter().any(|&o| o != Some(expected)) {
                failures.push(format!(
                    "from {from}: bottom component through {} does not settle on {}",
                    describe(p, g.node(comp[0])),
                    expected
                ));
            }
        }
    }
    Ok(CorrectReport {
        pass: failures.is_empty(),
        expected,
        variants,
        nodes,
        edges,
        failures,
    })
}

/// A firing-count loop: nonnegative multipliers over the transitions, not
/// all zero, whose net effect on every state cancels exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundedWitness {
    /// One multiplier per transition, in transition order, reduced to
    /// coprime integers.
    pub y: Vec<BigUint>,
}

impl UnboundedWitness {
    /// The transitions with nonzero multiplier.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, &BigUint)> {
        self.y.iter().enumerate().filter_map(|(i, c)| {
            if c.is_zero() {
                None
            } else {
                Some((i, c))
            }
        })
    }
}

/// Result of [`synthesize_potential`]: certificates for exactly one side.
#[derive(Debug, Clone)]
pub enum PotentialOutcome {
    /// Integer weights under which every transition strictly decreases the
    /// configuration potential; certifies boundedness for all inputs.
    Weights(BTreeMap<String, u64>),
    /// A loop witness; some configuration can repeat, so runs of unbounded
    /// length exist.
    Unbounded(UnboundedWitness),
}

/// States-and-transitions bound above which exact synthesis is refused.
const EXACT_LIMIT: usize = 2_000;

/// Either synthesises integer potential weights for `p` or produces a loop
/// witness, deciding boundedness over all inputs in exact arithmetic.
///
/// The weight system demands, per transition, a potential drop of at least
/// arity minus one; feasibility over nonnegative rationals is decided by
/// Fourier-Motzkin elimination for up to 20 states and by exact simplex
/// beyond. Both certificates are re-verified before being returned.
pub fn synthesize_potential(p: &PopulationComputer) -> Result<PotentialOutcome, VerifyError> {
    let nv = p.num_states();
    let m = p.transitions().len();
    if nv > EXACT_LIMIT || m > EXACT_LIMIT {
        return Err(VerifyError::TooLarge {
            states: nv,
            transitions: m,
            limit: EXACT_LIMIT,
        });
    }
    if m == 0 {
        let weights = p.labels().iter().map(|l| (l.clone(), 0)).collect();
        return Ok(PotentialOutcome::Weights(weights));
    }
    let mut rows = Vec::with_capacity(m);
    for t in p.transitions() {
        let mut coeffs = vec![BigRational::zero(); nv];
        for &(q, k) in t.lhs() {
            coeffs[q] += BigRational::from_integer(BigInt::from(k));
        }
        for &(q, k) in t.rhs() {
            coeffs[q] -= BigRational::from_integer(BigInt::from(k));
        }
        rows.push(LpRow {
            coeffs,
            rhs: BigRational::from_integer(BigInt::from(t.arity() - 1)),
        });
    }
    match lp::solve_nonneg(&rows, nv) {
        LpOutcome::Feasible(x) => {
            let min = x.iter().min().cloned().unwrap_or_else(BigRational::zero);
            let shifted: Vec<BigRational> = x.iter().map(|v| v - &min).collect();
            let mut scale = BigInt::one();
            for v in &shifted {
                scale = scale.lcm(v.denom());
            }
            let scale = BigRational::from_integer(scale);
            let mut weights = BTreeMap::new();
            for (q, v) in shifted.iter().enumerate() {
                let w = (v * &scale)
                    .to_integer()
                    .to_u64()
                    .ok_or(VerifyError::WeightOverflow)?;
                weights.insert(p.label(q).to_string(), w);
            }
            if let Err(violations) = synth::check_potential(p, &weights) {
                panic!("synthesised weights fail their own check: {violations:?}");
            }
            Ok(PotentialOutcome::Weights(weights))
        }
        LpOutcome::Infeasible(y) => {
            let y = normalise_witness(&y);
            for q in 0..nv {
                let mut net = BigInt::zero();
                for (t, c) in p.transitions().iter().zip(&y) {
                    let delta = BigInt::from(t.produced(q)) - BigInt::from(t.consumed(q));
                    net += delta * BigInt::from(c.clone());
                }
                assert!(
                    net.is_zero(),
                    "loop witness does not cancel on state {}",
                    p.label(q)
                );
            }
            assert!(y.iter().any(|c| !c.is_zero()), "loop witness is zero");
            Ok(PotentialOutcome::Unbounded(UnboundedWitness { y }))
        }
    }
}

fn normalise_witness(y: &[BigRational]) -> Vec<BigUint> {
    let mut scale = BigInt::one();
    for v in y {
        scale = scale.lcm(v.denom());
    }
    let scale = BigRational::from_integer(scale);
    let ints: Vec<BigInt> = y.iter().map(|v| (v * &scale).to_integer()).collect();
    let mut divisor = BigInt::zero();
    for v in &ints {
        divisor = divisor.gcd(v);
    }
    if divisor.is_zero() {
        divisor = BigInt::one();
    }
    ints.iter()
        .map(|v| (v / &divisor).to_biguint().expect("nonnegative witness"))
        .collect()
}

/// Minimum count in `c` over the states consumed by `t`; zero when any of
/// them is absent.
pub fn tmin_of(t: &Transition, c: &Config) -> u64 {
    t.lhs().iter().map(|&(q, _)| c.get(q)).min().unwrap_or(0)
}

/// Sum over all transitions of the squared minimum support count, the
/// quantity whose growth makes a computer fast.
pub fn speed_of(p: &PopulationComputer, c: &Config) -> u128 {
    p.transitions()
        .iter()
        .map(|t| {
            let m = tmin_of(t, c) as u128;
            m * m
        })
        .sum()
}

/// True when at most two thirds of the population sits in input states or is
/// accounted for by the declared helpers.
pub fn check_well_initialised(p: &PopulationComputer, c: &Config) -> bool {
    let in_inputs: u64 = p.inputs().iter().map(|&q| c.get(q)).sum();
    3 * (in_inputs as u128 + p.helper_total() as u128) <= 2 * c.total() as u128
}

/// The three syntactic conditions behind [`check_rapid_syntactic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RapidConditions {
    /// At most one state has more than two outgoing transitions.
    pub out_degree: bool,
    /// Every transition consumes at least one non-input state, so pure-input
    /// configurations are terminal.
    pub non_input_lhs: bool,
    /// Inputs are consumed at most once per transition and never produced.
    pub input_flow: bool,
}

impl RapidConditions {
    pub fn holds(&self) -> bool {
        self.out_degree && self.non_input_lhs && self.input_flow
    }
}

/// Evaluates the syntactic speed conditions one by one.
pub fn rapid_conditions(p: &PopulationComputer) -> RapidConditions {
    let mut outgoing = vec![0usize; p.num_states()];
    for t in p.transitions() {
        for &(q, _) in t.lhs() {
            outgoing[q] += 1;
        }
    }
    let out_degree = outgoing.iter().filter(|&&d| d > 2).count() <= 1;
    let non_input_lhs = p
        .transitions()
        .iter()
        .all(|t| t.lhs().iter().any(|&(q, _)| !p.inputs().contains(&q)));
    let input_flow = p.transitions().iter().all(|t| {
        p.inputs()
            .iter()
            .all(|&q| t.consumed(q) <= 1 && t.produced(q) == 0)
    });
    RapidConditions {
        out_degree,
        non_input_lhs,
        input_flow,
    }
}

/// Syntactic sufficient check for the structural half of rapidity. The
/// underlying termination condition on pure-input configurations is checked
/// via a stronger syntactic criterion, so a `false` here is not a
/// refutation.
pub fn check_rapid_syntactic(p: &PopulationComputer) -> bool {
    rapid_conditions(p).holds()
}
