//! Random simulation of population computers.
//!
//! Two schedulers are provided. [`run_protocol`] simulates an ordinary
//! two-agent protocol under the uniform pairing scheduler: each interaction
//! draws an ordered pair of distinct agents uniformly at random, and draws
//! that hit no transition still count. [`run_computer_fair`] drives an
//! arbitrary computer by firing a uniformly random enabled transition per
//! step, which is fair with probability one.
//!
//! On top of the schedulers sit [`estimate`], which repeats trials from
//! derived seeds and aggregates interaction counts, and [`scaling_bench`],
//! which sweeps population sizes and reports rows suitable for fitting a
//! growth exponent with [`log_log_slope`].

use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::computer::{Config, PopulationComputer, State, Transition};

/// Errors from the simulation entry points.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("pair scheduling needs every transition to consume exactly two agents")]
    NotBinary,
    #[error("pair scheduling needs a helper-free computer")]
    HasHelpers,
    #[error("population of size {0} cannot interact, at least two agents needed")]
    PopulationTooSmall(u64),
    #[error("benchmark needs at least one population size and one trial")]
    EmptyBench,
    #[error("benchmark configuration for size {n} has {got} agents")]
    SizeMismatch { n: u64, got: u64 },
}

/// One simulated run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub seed: u64,
    /// Population size, constant throughout the run.
    pub n: u64,
    /// Interactions drawn up to and including the last one that changed the
    /// configuration; when `capped`, the interaction budget instead.
    pub interactions: u64,
    /// True when the budget ran out before the run stabilised.
    pub capped: bool,
    /// Output of the final configuration, `None` when undefined there.
    pub output: Option<bool>,
    pub wall: Duration,
}

/// Aggregate over the trials of one [`estimate`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub trials: usize,
    pub mean_interactions: f64,
    /// Sample standard deviation (zero for a single trial).
    pub stddev_interactions: f64,
    pub min_interactions: u64,
    pub max_interactions: u64,
    /// Output histogram; the three buckets sum to `trials`.
    pub outputs_false: usize,
    pub outputs_true: usize,
    pub outputs_none: usize,
    /// How many trials ran out of budget.
    pub capped: usize,
}

/// One row of a [`scaling_bench`] sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: u64,
    pub trials: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: u64,
    pub max: u64,
}

/// Fenwick tree over agent counts per state, supporting point updates and
/// sampling a state proportionally to its count in logarithmic time.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn from_counts(counts: &[u64]) -> Self {
        let mut tree = vec![0u64; counts.len() + 1];
        for (i, &c) in counts.iter().enumerate() {
            Self::add_raw(&mut tree, i, c as i64);
        }
        Fenwick { tree }
    }

    fn add_raw(tree: &mut [u64], i: usize, delta: i64) {
        let mut j = i + 1;
        while j < tree.len() {
            tree[j] = (tree[j] as i64 + delta) as u64;
            j += j & j.wrapping_neg();
        }
    }

    fn add(&mut self, i: usize, delta: i64) {
        Self::add_raw(&mut self.tree, i, delta);
    }

    /// Index of the agent at rank `target` (zero-based) in state order.
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0usize;
        let mut step = self.tree.len().next_power_of_two() >> 1;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

/// Lookup from an unordered agent pair to the transition it fires, dense for
/// moderate state counts and by search on the computer otherwise.
enum PairIndex {
    Dense(Vec<u32>),
    Search,
}

const DENSE_PAIR_LIMIT: usize = 64_000_000;

fn tri(a: usize, b: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    hi * (hi + 1) / 2 + lo
}

impl PairIndex {
    fn build(p: &PopulationComputer) -> Self {
        let s = p.num_states();
        let cells = s * (s + 1) / 2;
        if cells > DENSE_PAIR_LIMIT {
            return PairIndex::Search;
        }
        let mut idx = vec![u32::MAX; cells];
        for (i, t) in p.transitions().iter().enumerate() {
            let lhs = t.lhs();
            let cell = match lhs {
                [(q, 2)] => tri(*q, *q),
                [(q, 1), (r, 1)] => tri(*q, *r),
                _ => continue,
            };
            idx[cell] = i as u32;
        }
        PairIndex::Dense(idx)
    }

    fn lookup<'a>(&self, p: &'a PopulationComputer, a: State, b: State) -> Option<&'a Transition> {
        match self {
            PairIndex::Dense(idx) => {
                let i = idx[tri(a, b)];
                (i != u32::MAX).then(|| &p.transitions()[i as usize])
            }
            PairIndex::Search => {
                if a == b {
                    p.transition_for(&[(a, 2)])
                } else {
                    p.transition_for(&[(a, 1), (b, 1)])
                }
            }
        }
    }
}

/// Agent counts with a Fenwick tree for proportional sampling.
struct Population {
    counts: Vec<u64>,
    fen: Fenwick,
    total: u64,
}

impl Population {
    fn new(num_states: usize, c0: &Config) -> Self {
        let mut counts = vec![0u64; num_states];
        for (q, k) in c0.iter() {
            counts[q] += k;
        }
        let fen = Fenwick::from_counts(&counts);
        Population {
            counts,
            fen,
            total: c0.total(),
        }
    }

    /// Draws an ordered pair of distinct agents uniformly at random and
    /// returns their states.
    fn draw_pair(&mut self, rng: &mut impl Rng) -> (State, State) {
        let a = self.fen.find(rng.gen_range(0..self.total));
        self.fen.add(a, -1);
        let b = self.fen.find(rng.gen_range(0..self.total - 1));
        self.fen.add(a, 1);
        (a, b)
    }

    fn apply(&mut self, t: &Transition) {
        for &(q, k) in t.lhs() {
            self.counts[q] -= k;
            self.fen.add(q, -(k as i64));
        }
        for &(q, k) in t.rhs() {
            self.counts[q] += k;
            self.fen.add(q, k as i64);
        }
    }

    fn config(&self) -> Config {
        Config::from_pairs(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(q, &k)| (q, k)),
        )
    }

    /// Whether no transition of `p` is enabled, checked over support pairs.
    fn is_terminal(&self, p: &PopulationComputer, index: &PairIndex) -> bool {
        let support: Vec<State> = (0..self.counts.len())
            .filter(|&q| self.counts[q] > 0)
            .collect();
        for (i, &q) in support.iter().enumerate() {
            if self.counts[q] >= 2 && index.lookup(p, q, q).is_some() {
                return false;
            }
            for &r in &support[i + 1..] {
                if index.lookup(p, q, r).is_some() {
                    return false;
                }
            }
        }
        true
    }
}

/// Simulates a two-agent, helper-free computer under the uniform pairing
/// scheduler, starting from `c0`, until the configuration is terminal or
/// `cap` interactions have been drawn.
///
/// Each interaction draws an ordered pair of distinct agents uniformly: an
/// unordered pair of states `{q, r}` with `q != r` comes up with probability
/// `2·C(q)·C(r) / (n·(n-1))` and `{q, q}` with `C(q)·(C(q)-1) / (n·(n-1))`.
/// A draw that matches no transition leaves the configuration unchanged but
/// still counts. The reported interaction count excludes the vacuous draws
/// after the last change, so it is the moment the run stabilised.
pub fn run_protocol(
    p: &PopulationComputer,
    c0: &Config,
    seed: u64,
    cap: u64,
) -> Result<TrialResult, SimError> {
    if p.transitions().iter().any(|t| t.arity() != 2) {
        return Err(SimError::NotBinary);
    }
    if p.helper_total() != 0 {
        return Err(SimError::HasHelpers);
    }
    if c0.total() < 2 {
        return Err(SimError::PopulationTooSmall(c0.total()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = PairIndex::build(p);
    let mut pop = Population::new(p.num_states(), c0);
    let n = pop.total;
    let mut draws = 0u64;
    let mut last_change = 0u64;
    let mut silent = 0u64;
    let mut patience = 64u64;
    let mut stabilised = false;
    while draws < cap {
        draws += 1;
        let (a, b) = pop.draw_pair(&mut rng);
        if let Some(t) = index.lookup(p, a, b) {
            pop.apply(t);
            last_change = draws;
            silent = 0;
        } else {
            silent += 1;
            if silent >= patience {
                if pop.is_terminal(p, &index) {
                    stabilised = true;
                    break;
                }
                silent = 0;
                patience = (patience * 2).min(1 << 22);
            }
        }
    }
    if !stabilised && pop.is_terminal(p, &index) {
        stabilised = true;
    }
    let config = pop.config();
    debug_assert_eq!(config.total(), n);
    Ok(TrialResult {
        seed,
        n,
        interactions: if stabilised { last_change } else { cap },
        capped: !stabilised,
        output: p.output_of(&config),
        wall: start.elapsed(),
    })
}

/// Incremental fair scheduler for arbitrary computers: tracks the enabled
/// transitions across steps so each step costs time proportional to the
/// transitions touching the states that changed.
pub struct FairStepper<'a> {
    p: &'a PopulationComputer,
    counts: Vec<u64>,
    touching: Vec<Vec<u32>>,
    enabled: Vec<u32>,
    pos: Vec<u32>,
}

impl<'a> FairStepper<'a> {
    pub fn new(p: &'a PopulationComputer, c0: &Config) -> Self {
        let mut counts = vec![0u64; p.num_states()];
        for (q, k) in c0.iter() {
            counts[q] += k;
        }
        let mut touching: Vec<Vec<u32>> = vec![Vec::new(); p.num_states()];
        for (i, t) in p.transitions().iter().enumerate() {
            for &(q, _) in t.lhs() {
                touching[q].push(i as u32);
            }
        }
        let mut s = FairStepper {
            p,
            counts,
            touching,
            enabled: Vec::new(),
            pos: vec![u32::MAX; p.transitions().len()],
        };
        for i in 0..p.transitions().len() {
            s.recheck(i as u32);
        }
        s
    }

    fn covers(&self, t: &Transition) -> bool {
        t.lhs().iter().all(|&(q, k)| self.counts[q] >= k)
    }

    fn recheck(&mut self, i: u32) {
        let covered = self.covers(&self.p.transitions()[i as usize]);
        let at = self.pos[i as usize];
        if covered && at == u32::MAX {
            self.pos[i as usize] = self.enabled.len() as u32;
            self.enabled.push(i);
        } else if !covered && at != u32::MAX {
            self.enabled.swap_remove(at as usize);
            if let Some(&moved) = self.enabled.get(at as usize) {
                self.pos[moved as usize] = at;
            }
            self.pos[i as usize] = u32::MAX;
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.enabled.is_empty()
    }

    /// Fires a uniformly random enabled transition; returns its index, or
    /// `None` at a terminal configuration.
    pub fn step(&mut self, rng: &mut impl Rng) -> Option<usize> {
        if self.enabled.is_empty() {
            return None;
        }
        let i = self.enabled[rng.gen_range(0..self.enabled.len())];
        let p = self.p;
        let t = &p.transitions()[i as usize];
        for &(q, k) in t.lhs() {
            self.counts[q] -= k;
        }
        for &(q, k) in t.rhs() {
            self.counts[q] += k;
        }
        for side in [t.lhs(), t.rhs()] {
            for &(q, _) in side {
                for j in 0..self.touching[q].len() {
                    let tj = self.touching[q][j];
                    self.recheck(tj);
                }
            }
        }
        Some(i as usize)
    }

    pub fn config(&self) -> Config {
        Config::from_pairs(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(q, &k)| (q, k)),
        )
    }
}

/// Outcome of a fair run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairRun {
    pub seed: u64,
    pub n: u64,
    pub steps: u64,
    pub capped: bool,
    pub output: Option<bool>,
    pub config: Config,
    pub wall: Duration,
}

/// Runs any computer under the fair scheduler: each step fires a uniformly
/// random enabled transition, until the configuration is terminal or
/// `max_steps` is reached.
pub fn run_computer_fair(
    p: &PopulationComputer,
    c0: &Config,
    seed: u64,
    max_steps: u64,
) -> FairRun {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stepper = FairStepper::new(p, c0);
    let mut steps = 0u64;
    while steps < max_steps {
        if stepper.step(&mut rng).is_none() {
            break;
        }
        steps += 1;
    }
    let config = stepper.config();
    FairRun {
        seed,
        n: c0.total(),
        steps,
        capped: !stepper.is_terminal(),
        output: p.output_of(&config),
        config,
        wall: start.elapsed(),
    }
}

/// The seed-splitting rule: trial `i` of a run with base seed `s` uses the
/// `i`-th 64-bit word of a generator seeded with `s`, so any subset of
/// trials can be reproduced from the base seed alone.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Repeats [`run_protocol`] from `trials` derived seeds and aggregates.
pub fn estimate(
    p: &PopulationComputer,
    c0: &Config,
    trials: usize,
    seed: u64,
    cap: u64,
) -> Result<(RunStats, Vec<TrialResult>), SimError> {
    let mut results = Vec::with_capacity(trials);
    for s in trial_seeds(seed, trials) {
        results.push(run_protocol(p, c0, s, cap)?);
    }
    Ok((aggregate(&results), results))
}

/// Aggregates trials into the summary [`RunStats`].
pub fn aggregate(results: &[TrialResult]) -> RunStats {
    let trials = results.len();
    let mean = results.iter().map(|r| r.interactions as f64).sum::<f64>() / trials.max(1) as f64;
    let var = if trials > 1 {
        results
            .iter()
            .map(|r| (r.interactions as f64 - mean).powi(2))
            .sum::<f64>()
            / (trials - 1) as f64
    } else {
        0.0
    };
    RunStats {
        trials,
        mean_interactions: mean,
        stddev_interactions: var.sqrt(),
        min_interactions: results.iter().map(|r| r.interactions).min().unwrap_or(0),
        max_interactions: results.iter().map(|r| r.interactions).max().unwrap_or(0),
        outputs_false: results.iter().filter(|r| r.output == Some(false)).count(),
        outputs_true: results.iter().filter(|r| r.output == Some(true)).count(),
        outputs_none: results.iter().filter(|r| r.output.is_none()).count(),
        capped: results.iter().filter(|r| r.capped).count(),
    }
}

/// CSV lines for individual trials, headed
/// `trial,seed,n,interactions,output,capped`.
pub fn trials_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("trial,seed,n,interactions,output,capped\n");
    for (i, r) in results.iter().enumerate() {
        let o = match r.output {
            Some(false) => "0",
            Some(true) => "1",
            None => "-",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, r.seed, r.n, r.interactions, o, r.capped
        ));
    }
    out
}

/// Sweeps population sizes: for each `n` in `sizes`, runs `trials` trials of
/// the protocol from a configuration produced by `make_config(n, rng)`, and
/// reports one aggregate row per size in the order given.
pub fn scaling_bench(
    p: &PopulationComputer,
    mut make_config: impl FnMut(u64, &mut ChaCha8Rng) -> Config,
    sizes: &[u64],
    trials: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<BenchRow>, SimError> {
    if sizes.is_empty() || trials == 0 {
        return Err(SimError::EmptyBench);
    }
    let mut rows = Vec::with_capacity(sizes.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &n in sizes {
        let mut results = Vec::with_capacity(trials);
        for _ in 0..trials {
            let c0 = make_config(n, &mut rng);
            if c0.total() != n {
                return Err(SimError::SizeMismatch { n, got: c0.total() });
            }
            let s = rng.next_u64();
            results.push(run_protocol(p, &c0, s, cap)?);
        }
        let stats = aggregate(&results);
        rows.push(BenchRow {
            n,
            trials,
            mean: stats.mean_interactions,
            stddev: stats.stddev_interactions,
            min: stats.min_interactions,
            max: stats.max_interactions,
        });
    }
    Ok(rows)
}

/// CSV lines for a bench sweep, headed `n,trials,mean,stddev,min,max`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,trials,mean,stddev,min,max\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{},{}\n",
            r.n, r.trials, r.mean, r.stddev, r.min, r.max
        ));
    }
    out
}

/// Least-squares slope of `ln mean` against `ln n` over the rows; `None`
/// with fewer than two usable rows or a non-positive mean.
pub fn log_log_slope(rows: &[BenchRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n > 0 && r.mean > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    Some((m * sxy - sx * sy) / denom)
}

/// Analytic distribution of the unordered pair draw at `c`: every unordered
/// state pair with positive probability, in sorted order. Empty when fewer
/// than two agents are present.
pub fn pair_probabilities(c: &Config) -> Vec<((State, State), f64)> {
    if c.total() < 2 {
        return Vec::new();
    }
    let n = c.total() as f64;
    let denom = n * (n - 1.0);
    let support: Vec<(State, u64)> = c.iter().collect();
    let mut out = Vec::new();
    for (i, &(q, cq)) in support.iter().enumerate() {
        if cq >= 2 {
            out.push(((q, q), (cq as f64) * (cq as f64 - 1.0) / denom));
        }
        for &(r, cr) in &support[i + 1..] {
            out.push(((q, r), 2.0 * (cq as f64) * (cr as f64) / denom));
        }
    }
    out
}

/// Draws `draws` unordered pairs from `c` and returns the chi-square
/// statistic of the observed counts against [`pair_probabilities`], with its
/// degrees of freedom.
pub fn chi_square_pair_draws(c: &Config, draws: u64, seed: u64) -> (f64, usize) {
    let expected = pair_probabilities(c);
    if expected.is_empty() {
        return (0.0, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_states = c.support().max().map_or(1, |q| q + 1);
    let mut pop = Population::new(num_states, c);
    let mut observed: std::collections::HashMap<(State, State), u64> =
        std::collections::HashMap::new();
    for _ in 0..draws {
        let (a, b) = pop.draw_pair(&mut rng);
        let key = if a <= b { (a, b) } else { (b, a) };
        *observed.entry(key).or_insert(0) += 1;
    }
    let mut chi = 0.0;
    for &(pair, prob) in &expected {
        let exp = prob * draws as f64;
        let obs = observed.get(&pair).copied().unwrap_or(0) as f64;
        chi += (obs - exp) * (obs - exp) / exp;
    }
    (chi, expected.len().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::computer::{Builder, Output};

    fn epidemic() -> PopulationComputer {
        let mut b = Builder::new();
        let s = b.state("s");
        let i = b.state("i");
        b.input(s);
        b.input(i);
        b.transition(&[(i, 1), (s, 1)], &[(i, 2)]).unwrap();
        b.output(Output::Consensus {
            zero: [s].into(),
            one: [i].into(),
        });
        b.finish().unwrap()
    }

    fn swap_forever() -> PopulationComputer {
        let mut b = Builder::new();
        let x = b.state("x");
        let y = b.state("y");
        b.input(x);
        b.input(y);
        b.transition(&[(x, 2)], &[(y, 2)]).unwrap();
        b.transition(&[(y, 2)], &[(x, 2)]).unwrap();
        b.output(Output::Consensus {
            zero: [x].into(),
            one: [y].into(),
        });
        b.finish().unwrap()
    }

    #[test]
    fn fenwick_sampling_matches_counts() {
        let counts = vec![5u64, 0, 3, 12, 1];
        let fen = Fenwick::from_counts(&counts);
        let total: u64 = counts.iter().sum();
        let mut seen = vec![0u64; counts.len()];
        for r in 0..total {
            seen[fen.find(r)] += 1;
        }
        assert_eq!(seen, counts);
    }

    #[test]
    fn pair_probabilities_sum_to_one() {
        let c = Config::from_pairs([(0, 3), (1, 2), (4, 5)]);
        let probs = pair_probabilities(&c);
        let sum: f64 = probs.iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(probs.len(), 6);
    }

    #[test]
    fn pair_draws_are_roughly_uniform() {
        let c = Config::from_pairs([(0, 4), (1, 4)]);
        let (chi, dof) = chi_square_pair_draws(&c, 40_000, 7);
        assert_eq!(dof, 2);
        assert!(chi < 25.0, "chi-square statistic {chi} too large");
    }

    #[test]
    fn epidemic_infects_everyone() {
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("s").unwrap(), 19), (p.state("i").unwrap(), 1)]);
        let r = run_protocol(&p, &c0, 11, 1_000_000).unwrap();
        assert!(!r.capped);
        assert!(r.interactions >= 19);
        assert_eq!(r.output, Some(true));
        assert_eq!(r.n, 20);
    }

    #[test]
    fn terminal_start_reports_zero_interactions() {
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("i").unwrap(), 8)]);
        let r = run_protocol(&p, &c0, 3, 1_000).unwrap();
        assert!(!r.capped);
        assert_eq!(r.interactions, 0);
        assert_eq!(r.output, Some(true));
    }

    #[test]
    fn cap_is_reported_not_fatal() {
        let p = swap_forever();
        let c0 = Config::from_pairs([(p.state("x").unwrap(), 3), (p.state("y").unwrap(), 3)]);
        let r = run_protocol(&p, &c0, 5, 500).unwrap();
        assert!(r.capped);
        assert_eq!(r.interactions, 500);
    }

    #[test]
    fn protocol_preconditions_are_checked() {
        let mut b = Builder::new();
        let x = b.state("x");
        b.input(x);
        let z = b.state("z");
        b.transition(&[(x, 3)], &[(z, 3)]).unwrap();
        b.output(Output::Consensus {
            zero: [x].into(),
            one: [z].into(),
        });
        let p = b.finish().unwrap();
        let c0 = Config::from_pairs([(x, 4)]);
        assert_eq!(
            run_protocol(&p, &c0, 0, 10).unwrap_err(),
            SimError::NotBinary
        );
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("s").unwrap(), 1)]);
        assert_eq!(
            run_protocol(&p, &c0, 0, 10).unwrap_err(),
            SimError::PopulationTooSmall(1)
        );
    }

    #[test]
    fn fair_runs_reach_terminal_configurations() {
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("s").unwrap(), 9), (p.state("i").unwrap(), 1)]);
        let r = run_computer_fair(&p, &c0, 2, 10_000);
        assert!(!r.capped);
        assert_eq!(r.steps, 9);
        assert_eq!(r.output, Some(true));
        assert_eq!(r.config.get(p.state("i").unwrap()), 10);
    }

    #[test]
    fn estimates_are_reproducible() {
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("s").unwrap(), 14), (p.state("i").unwrap(), 2)]);
        let (a, ra) = estimate(&p, &c0, 5, 99, 1_000_000).unwrap();
        let (b, rb) = estimate(&p, &c0, 5, 99, 1_000_000).unwrap();
        let key = |rs: &[TrialResult]| {
            rs.iter()
                .map(|r| (r.seed, r.n, r.interactions, r.output, r.capped))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&ra), key(&rb));
        assert_eq!(a, b);
        assert_eq!(a.trials, 5);
        assert_eq!(a.outputs_true, 5);
        assert_eq!(a.outputs_false + a.outputs_none, 0);
        assert!(a.min_interactions <= a.max_interactions);
        let (c, _) = estimate(&p, &c0, 5, 100, 1_000_000).unwrap();
        assert_ne!(a.mean_interactions, c.mean_interactions);
    }

    #[test]
    fn bench_rows_follow_requested_sizes() {
        let p = epidemic();
        let s = p.state("s").unwrap();
        let i = p.state("i").unwrap();
        let rows = scaling_bench(
            &p,
            |n, _| Config::from_pairs([(s, n - 1), (i, 1)]),
            &[8, 16, 32],
            4,
            1,
            1_000_000,
        )
        .unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), [8, 16, 32]);
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("n,trials,mean,stddev,min,max\n"));
        assert_eq!(csv.lines().count(), 4);
        let slope = log_log_slope(&rows).unwrap();
        assert!(slope > 0.5 && slope < 3.0, "slope {slope}");
    }

    #[test]
    fn slope_recovers_a_quadratic_law() {
        let rows: Vec<BenchRow> = [10u64, 20, 40, 80]
            .iter()
            .map(|&n| BenchRow {
                n,
                trials: 1,
                mean: 3.0 * (n as f64) * (n as f64),
                stddev: 0.0,
                min: 0,
                max: 0,
            })
            .collect();
        let slope = log_log_slope(&rows).unwrap();
        assert!((slope - 2.0).abs() < 1e-9);
    }

    #[test]
    fn trial_csv_has_one_line_per_trial() {
        let p = epidemic();
        let c0 = Config::from_pairs([(p.state("s").unwrap(), 6), (p.state("i").unwrap(), 2)]);
        let (_, results) = estimate(&p, &c0, 3, 42, 1_000_000).unwrap();
        let csv = trials_csv(&results);
        assert!(csv.starts_with("trial,seed,n,interactions,output,capped\n"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains(",1,false"));
    }
}
