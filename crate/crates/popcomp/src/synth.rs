//! Synthesis of population computers from predicates.
//!
//! Every atom of a predicate gets a subcomputer whose states hold powers of
//! two. Agents carrying equal powers merge pairwise, so the crowd sums its
//! values in logarithmically many state kinds:
//!
//! * a remainder subcomputer tracks the sum modulo `theta` on power states
//!   `1, 2, ..., 2^d` with `d = ceil(log2 theta)`, folding the top power back
//!   down with dedicated modulo transitions;
//! * a threshold subcomputer tracks a signed sum on states `±1, ..., ±2^d`,
//!   cancelling opposite signs.
//!
//! [`compile`] instantiates one subcomputer per atom with namespaced state
//! labels and a shared reservoir state `0`, adds one input state per variable
//! together with a distribution transition that splits each input agent into
//! the powers of its coefficients, pools all helpers in the reservoir, and
//! combines the subcomputer output circuits according to the boolean
//! structure of the predicate.
//!
//! [`potential`] assigns explicit weights to the states of any computer
//! produced here, decreasing along every transition by at least the number
//! of agents it frees; they witness boundedness and drive speed bounds.

use std::collections::BTreeMap;

use crate::circuit::{self, CRef, Circuit};
use crate::computer::{
    Builder, Config, CoreError, Output, PopulationComputer, State,
};
use crate::qfpa::{bin, Predicate, RemainderAtom, ThresholdAtom};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("modulus must be at least 2, got {0}")]
    ModulusTooSmall(u64),
    #[error("degree {given} below minimum {min} for this atom")]
    DegreeTooSmall { given: u32, min: u32 },
    #[error("predicate reduces to the constant {0}; nothing to synthesize")]
    DegeneratePredicate(bool),
    #[error("unknown variable {0:?} for this computer")]
    UnknownVariable(String),
    #[error("state {0:?} was not produced by synthesis")]
    NotSynthesized(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

fn pow_label(v: u64) -> String {
    v.to_string()
}

fn signed_pow_label(v: i64) -> String {
    if v < 0 {
        format!("-{}", v.unsigned_abs())
    } else {
        format!("+{v}")
    }
}

/// Output circuit of a remainder subcomputer: over the presence bits of the
/// power states, true iff the sum of the present powers is congruent to
/// `target` modulo `theta`. Distinct powers up to `2^d` sum to at most
/// `2^(d+1) - 1`, so the circuit tests equality with each representative
/// `target + k*theta` in that range.
pub fn build_remainder_output(d: u32, theta: u64, target: u64) -> Circuit {
    let target = target % theta;
    let mut b = circuit::Builder::new();
    let inputs: Vec<CRef> = (0..=d).map(|i| b.input(&pow_label(1u64 << i))).collect();
    let max_sum = (1u64 << (d + 1)) - 1;
    let mut out = CRef::Const(false);
    let mut v = target;
    while v <= max_sum {
        let mut eq = CRef::Const(true);
        for (i, &bit) in inputs.iter().enumerate() {
            let want = v & (1 << i) != 0;
            let lit = if want { bit } else { b.not(bit) };
            eq = b.and(eq, lit);
        }
        out = b.or(out, eq);
        v += theta;
    }
    b.finish(out).simplified()
}

/// Output circuit of a threshold subcomputer: over the presence bits of the
/// signed power states, true iff the present positive powers minus the
/// present negative powers reach `bound`. The difference of two `(d+1)`-bit
/// naturals is formed in two's complement and compared by one more
/// subtraction; when `|bound|` exceeds every reachable sum the circuit is
/// constant.
pub fn build_threshold_output(d: u32, bound: i64) -> Circuit {
    let max_sum = (1i64 << (d + 1)) - 1;
    if bound > max_sum {
        return Circuit::constant(false);
    }
    if bound <= -max_sum {
        return Circuit::constant(true);
    }
    let mut b = circuit::Builder::new();
    let pos: Vec<CRef> = (0..=d)
        .map(|i| b.input(&signed_pow_label(1i64 << i)))
        .collect();
    let neg: Vec<CRef> = (0..=d)
        .map(|i| b.input(&signed_pow_label(-(1i64 << i))))
        .collect();
    let width = (d + 3) as usize;
    let widen = |bits: &[CRef]| -> Vec<CRef> {
        let mut v = bits.to_vec();
        v.resize(width, CRef::Const(false));
        v
    };
    let p = widen(&pos);
    let n = widen(&neg);
    let diff = subtract(&mut b, &p, &n);
    let const_bits: Vec<CRef> = (0..width)
        .map(|i| CRef::Const((bound >> i) & 1 == 1))
        .collect();
    let cmp = subtract(&mut b, &diff, &const_bits);
    let sign = cmp[width - 1];
    let out = b.not(sign);
    b.finish(out).simplified()
}

/// Ripple-borrow subtraction in two's complement; inputs and output have the
/// same width and the result is taken modulo 2^width.
fn subtract(b: &mut circuit::Builder, x: &[CRef], y: &[CRef]) -> Vec<CRef> {
    let mut borrow = CRef::Const(false);
    let mut out = Vec::with_capacity(x.len());
    for (&xi, &yi) in x.iter().zip(y) {
        let xy = b.xor(xi, yi);
        out.push(b.xor(xy, borrow));
        let nx = b.not(xi);
        let t1 = b.and(nx, yi);
        let nxy = b.not(xy);
        let t2 = b.and(borrow, nxy);
        borrow = b.or(t1, t2);
    }
    out
}

/// Remainder subcomputer for `sum = target (mod theta)` with `theta >= 2`.
///
/// States are the powers `1, 2, ..., 2^d` for `d = ceil(log2 theta)` plus
/// the reservoir `0`. Two agents with equal powers combine into the next
/// power; an agent at `2^d` is exchanged for the binary decomposition of
/// `2^d - theta`, keeping the carried sum intact modulo `theta`; and `d`
/// agents at `2^d` together shortcut to `d * 2^d mod theta` (omitted for
/// `d < 2`, where it adds nothing). The reservoir starts with `3d` helpers.
/// The set of input states is left empty; callers place value on the power
/// states directly.
pub fn remainder_sub(theta: u64, target: u64) -> Result<PopulationComputer, SynthError> {
    if theta < 2 {
        return Err(SynthError::ModulusTooSmall(theta));
    }
    let d = ceil_log2(theta);
    let mut b = Builder::new();
    let pow: Vec<State> = (0..=d).map(|i| b.state(&pow_label(1u64 << i))).collect();
    let zero = b.state("0");
    add_remainder_transitions(&mut b, &pow, zero, theta, d)?;
    b.helpers(zero, 3 * d as u64);
    b.output(Output::Circuit(build_remainder_output(d, theta, target)));
    Ok(b.finish()?)
}

fn add_remainder_transitions(
    b: &mut Builder,
    pow: &[State],
    zero: State,
    theta: u64,
    d: u32,
) -> Result<(), SynthError> {
    for i in 0..d as usize {
        b.transition(&[(pow[i], 2)], &[(pow[i + 1], 1), (zero, 1)])?;
    }
    let top = pow[d as usize];
    let rest = (1u64 << d) - theta;
    let parts = bin(rest as i64);
    let j = parts.len() as u64;
    let arity = j.max(2);
    let mut rhs: Vec<(State, u64)> = parts
        .iter()
        .map(|&p| (pow[p.trailing_zeros() as usize], 1))
        .collect();
    rhs.push((zero, arity - j));
    b.transition(&[(top, 1), (zero, arity - 1)], &rhs)?;
    if d >= 2 {
        let v = ((d as u64) << d) % theta;
        let parts = bin(v as i64);
        let mut rhs: Vec<(State, u64)> = parts
            .iter()
            .map(|&p| (pow[p.trailing_zeros() as usize], 1))
            .collect();
        rhs.push((zero, d as u64 - parts.len() as u64));
        b.transition(&[(top, d as u64)], &rhs)?;
    }
    Ok(())
}

/// Threshold subcomputer for `sum >= bound` at degree `d`.
///
/// States are the signed powers `±1, ..., ±2^d` plus the reservoir `0`.
/// Equal powers of equal sign combine upward, opposite powers of equal
/// magnitude cancel, and the two highest magnitudes cancel across one level
/// so that at most one sign survives. The signed sum carried by the crowd is
/// exactly invariant. The reservoir starts with `d` helpers. Requires
/// `d >= ceil(log2 max(|bound|,1)) + 1` so that terminal supports decide the
/// comparison; callers place value on the signed power states directly.
pub fn threshold_sub(bound: i64, d: u32) -> Result<PopulationComputer, SynthError> {
    let min = ceil_log2(bound.unsigned_abs().max(1)) + 1;
    if d < min {
        return Err(SynthError::DegreeTooSmall { given: d, min });
    }
    let mut b = Builder::new();
    let pos: Vec<State> = (0..=d)
        .map(|i| b.state(&signed_pow_label(1i64 << i)))
        .collect();
    let neg: Vec<State> = (0..=d)
        .map(|i| b.state(&signed_pow_label(-(1i64 << i))))
        .collect();
    let zero = b.state("0");
    add_threshold_transitions(&mut b, &pos, &neg, zero, d)?;
    b.helpers(zero, d as u64);
    b.output(Output::Circuit(build_threshold_output(d, bound)));
    Ok(b.finish()?)
}

fn add_threshold_transitions(
    b: &mut Builder,
    pos: &[State],
    neg: &[State],
    zero: State,
    d: u32,
) -> Result<(), SynthError> {
    let d = d as usize;
    for i in 0..d {
        b.transition(&[(pos[i], 2)], &[(zero, 1), (pos[i + 1], 1)])?;
        b.transition(&[(neg[i], 2)], &[(zero, 1), (neg[i + 1], 1)])?;
    }
    for i in 0..=d {
        b.transition(&[(neg[i], 1), (pos[i], 1)], &[(zero, 2)])?;
    }
    b.transition(&[(pos[d], 1), (neg[d - 1], 1)], &[(zero, 1), (pos[d - 1], 1)])?;
    b.transition(&[(neg[d], 1), (pos[d - 1], 1)], &[(zero, 1), (neg[d - 1], 1)])?;
    Ok(())
}

enum AtomKind<'a> {
    Remainder(&'a RemainderAtom),
    Threshold(&'a ThresholdAtom),
}

struct AtomPlan<'a> {
    kind: AtomKind<'a>,
    degree: u32,
    prefix: String,
}

impl AtomPlan<'_> {
    /// Coefficient of `var` as a signed integer, zero when absent.
    fn coefficient(&self, var: &str) -> i64 {
        match &self.kind {
            AtomKind::Remainder(a) => a
                .terms
                .iter()
                .find(|(v, _)| v == var)
                .map_or(0, |(_, c)| *c as i64),
            AtomKind::Threshold(a) => a
                .terms
                .iter()
                .find(|(v, _)| v == var)
                .map_or(0, |(_, c)| *c),
        }
    }

    fn rename(&self, label: &str) -> String {
        format!("{}{}", self.prefix, label)
    }
}

fn plan_atoms<'a>(
    atoms: &[&'a Predicate],
    threshold_degrees: &[u32],
) -> Result<Vec<AtomPlan<'a>>, SynthError> {
    let s = atoms.len() as u64;
    let mut plans = Vec::new();
    let mut threshold_seen = 0usize;
    for (j, atom) in atoms.iter().enumerate() {
        let plan = match atom {
            Predicate::Remainder(a) => AtomPlan {
                kind: AtomKind::Remainder(a),
                degree: ceil_log2(a.modulus),
                prefix: format!("r{}:", j + 1),
            },
            Predicate::Threshold(a) => {
                let a_max = a
                    .terms
                    .iter()
                    .map(|(_, c)| c.unsigned_abs())
                    .max()
                    .unwrap_or(0)
                    .max(1);
                let min = (ceil_log2(a.bound.unsigned_abs().max(1)) + 1)
                    .max(ceil_log2(a_max));
                let degree = match threshold_degrees.get(threshold_seen) {
                    Some(&given) => {
                        if given < min {
                            return Err(SynthError::DegreeTooSmall { given, min });
                        }
                        given
                    }
                    None => {
                        (ceil_log2(a.bound.unsigned_abs().max(1)) + 1)
                            .max(ceil_log2(s * a_max))
                            + 4
                    }
                };
                threshold_seen += 1;
                AtomPlan {
                    kind: AtomKind::Threshold(a),
                    degree,
                    prefix: format!("t{}:", j + 1),
                }
            }
            _ => unreachable!("atoms() yields atoms only"),
        };
        plans.push(plan);
    }
    Ok(plans)
}

/// Compiles a predicate into a population computer.
///
/// The predicate is normalized first; a predicate that collapses to a
/// constant is rejected. Each atom becomes a subcomputer with labels
/// prefixed `r<j>:` or `t<j>:` for the j-th atom in depth-first order, all
/// sharing the reservoir `0`. Each variable `x` becomes an input state `X:x`
/// whose distribution transition converts one input agent into one agent per
/// power of each atom coefficient, consuming reservoir helpers to make up
/// the arity; variables with at most one power exchange with a single
/// helper, and variables absent from every atom drain into the reservoir.
/// The reservoir holds all subcomputer helpers plus enough to run any single
/// distribution.
///
/// `threshold_degrees` overrides the degree of threshold atoms, matched
/// against them in depth-first order; an override below the atom's minimum
/// is rejected. The default degree is padded generously so that the computer
/// stays correct for adversarially small inputs.
pub fn compile(
    p: &Predicate,
    threshold_degrees: &[u32],
) -> Result<PopulationComputer, SynthError> {
    let norm = p.normalize();
    if let Predicate::Const(b) = norm {
        return Err(SynthError::DegeneratePredicate(b));
    }
    let atoms = norm.atoms();
    let plans = plan_atoms(&atoms, threshold_degrees)?;
    let vars: Vec<String> = norm.vars().into_iter().collect();

    let mut b = Builder::new();
    let zero = b.state("0");
    let mut helper_total = 0u64;
    for plan in &plans {
        match &plan.kind {
            AtomKind::Remainder(a) => {
                let d = plan.degree;
                let pow: Vec<State> = (0..=d)
                    .map(|i| b.state(&plan.rename(&pow_label(1u64 << i))))
                    .collect();
                add_remainder_transitions(&mut b, &pow, zero, a.modulus, d)?;
                helper_total += 3 * d as u64;
            }
            AtomKind::Threshold(_) => {
                let d = plan.degree;
                let pos: Vec<State> = (0..=d)
                    .map(|i| b.state(&plan.rename(&signed_pow_label(1i64 << i))))
                    .collect();
                let neg: Vec<State> = (0..=d)
                    .map(|i| b.state(&plan.rename(&signed_pow_label(-(1i64 << i)))))
                    .collect();
                add_threshold_transitions(&mut b, &pos, &neg, zero, d)?;
                helper_total += d as u64;
            }
        }
    }

    let mut splitsize = 1u64;
    for var in &vars {
        let input = b.state(&format!("X:{var}"));
        b.input(input);
        let mut parts: Vec<State> = Vec::new();
        for plan in &plans {
            for power in bin(plan.coefficient(var)) {
                parts.push(b.state(&plan.rename(&match plan.kind {
                    AtomKind::Remainder(_) => pow_label(power as u64),
                    AtomKind::Threshold(_) => signed_pow_label(power),
                })));
            }
        }
        let bi = parts.len() as u64;
        splitsize = splitsize.max(bi);
        let mut rhs: Vec<(State, u64)> = parts.into_iter().map(|q| (q, 1)).collect();
        if bi > 1 {
            b.transition(&[(input, 1), (zero, bi - 1)], &rhs)?;
        } else {
            rhs.push((zero, 2 - bi));
            b.transition(&[(input, 1), (zero, 1)], &rhs)?;
        }
    }
    helper_total += splitsize.max(2) - 1;
    b.helpers(zero, helper_total);

    let mut cb = circuit::Builder::new();
    let out = build_output(&mut cb, &norm, &plans, &mut 0);
    b.output(Output::Circuit(cb.finish(out).simplified()));
    Ok(b.finish()?)
}

fn build_output(
    cb: &mut circuit::Builder,
    p: &Predicate,
    plans: &[AtomPlan],
    next_atom: &mut usize,
) -> CRef {
    match p {
        Predicate::Threshold(_) | Predicate::Remainder(_) => {
            let plan = &plans[*next_atom];
            *next_atom += 1;
            let sub = match &plan.kind {
                AtomKind::Remainder(a) => {
                    build_remainder_output(plan.degree, a.modulus, a.target)
                }
                AtomKind::Threshold(a) => build_threshold_output(plan.degree, a.bound),
            };
            inline(cb, &sub, |label| plan.rename(label))
        }
        Predicate::And(l, r) => {
            let lo = build_output(cb, l, plans, next_atom);
            let ro = build_output(cb, r, plans, next_atom);
            cb.and(lo, ro)
        }
        Predicate::Or(l, r) => {
            let lo = build_output(cb, l, plans, next_atom);
            let ro = build_output(cb, r, plans, next_atom);
            cb.or(lo, ro)
        }
        Predicate::Not(q) => {
            let o = build_output(cb, q, plans, next_atom);
            cb.not(o)
        }
        Predicate::Const(v) => CRef::Const(*v),
    }
}

/// Copies `sub` into `cb` with relabelled inputs, returning its output ref.
fn inline(
    cb: &mut circuit::Builder,
    sub: &Circuit,
    rename: impl Fn(&str) -> String,
) -> CRef {
    let inputs: Vec<CRef> = sub
        .inputs()
        .iter()
        .map(|l| cb.input(&rename(l)))
        .collect();
    let mut mapped: Vec<CRef> = Vec::with_capacity(sub.gates().len());
    let resolve = |r: CRef, mapped: &[CRef]| match r {
        CRef::In(i) => inputs[i],
        CRef::Gate(g) => mapped[g],
        CRef::Const(v) => CRef::Const(v),
    };
    for (a, bb) in sub.gates() {
        let na = resolve(*a, &mapped);
        let nb = resolve(*bb, &mapped);
        mapped.push(cb.nand(na, nb));
    }
    resolve(sub.out(), &mapped)
}

/// Builds the input part of an initial configuration for a compiled
/// computer: `k` agents in state `X:v` per variable `v` with count `k`.
pub fn input_config(
    p: &PopulationComputer,
    x: &BTreeMap<String, u64>,
) -> Result<Config, SynthError> {
    let mut c = Config::new();
    for (var, &k) in x {
        match p.state(&format!("X:{var}")) {
            Some(q) => c.add(q, k),
            None if k == 0 => {}
            None => return Err(SynthError::UnknownVariable(var.clone())),
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabelKind {
    Reservoir,
    Input,
    RemainderPow { atom: usize, exp: u32 },
    ThresholdPow,
}

fn classify(label: &str) -> Option<LabelKind> {
    if label == "0" {
        return Some(LabelKind::Reservoir);
    }
    if label.starts_with("X:") {
        return Some(LabelKind::Input);
    }
    let (atom, rest) = match label.split_once(':') {
        Some((ns, rest)) => {
            let atom: usize = ns.get(1..)?.parse().ok()?;
            match ns.as_bytes().first()? {
                b'r' => (Some((atom, false)), rest),
                b't' => (Some((atom, true)), rest),
                _ => return None,
            }
        }
        None => (None, label),
    };
    let threshold = match atom {
        Some((_, t)) => t,
        None => rest.starts_with(['+', '-']),
    };
    if threshold {
        let v: i64 = rest.parse().ok()?;
        let mag = v.unsigned_abs();
        if mag.is_power_of_two() && v != 0 {
            Some(LabelKind::ThresholdPow)
        } else {
            None
        }
    } else {
        let v: u64 = rest.parse().ok()?;
        if v.is_power_of_two() {
            Some(LabelKind::RemainderPow {
                atom: atom.map_or(0, |(a, _)| a),
                exp: v.trailing_zeros(),
            })
        } else {
            None
        }
    }
}

/// Explicit potential weights for a computer produced by this module.
///
/// The reservoir weighs nothing and threshold states weigh one. Remainder
/// power states weigh two up to a cutoff exponent `d - ceil(log2 6d)` and
/// then grow geometrically, which keeps the maximal weight polynomial in the
/// predicate size. An input state weighs the total weight its distribution
/// produces plus one less than the distribution arity. The resulting map
/// drops by at least `arity - 1` across every transition.
pub fn potential(p: &PopulationComputer) -> Result<BTreeMap<String, u64>, SynthError> {
    let mut kinds: BTreeMap<State, LabelKind> = BTreeMap::new();
    let mut remainder_degree: BTreeMap<usize, u32> = BTreeMap::new();
    for (q, label) in p.labels().iter().enumerate() {
        let kind =
            classify(label).ok_or_else(|| SynthError::NotSynthesized(label.clone()))?;
        if let LabelKind::RemainderPow { atom, exp } = kind {
            let d = remainder_degree.entry(atom).or_insert(0);
            *d = (*d).max(exp);
        }
        kinds.insert(q, kind);
    }
    let mut weights: BTreeMap<State, u64> = BTreeMap::new();
    for (&q, kind) in &kinds {
        let w = match kind {
            LabelKind::Reservoir => 0,
            LabelKind::ThresholdPow => 1,
            LabelKind::RemainderPow { atom, exp } => {
                let d = remainder_degree[atom];
                let cutoff = d.saturating_sub(ceil_log2(6 * d.max(1) as u64));
                if *exp < cutoff {
                    2
                } else {
                    (1u64 << (exp - cutoff)) + 1
                }
            }
            LabelKind::Input => continue,
        };
        weights.insert(q, w);
    }
    for (&q, kind) in &kinds {
        if *kind != LabelKind::Input {
            continue;
        }
        let dist = p
            .transitions()
            .iter()
            .find(|t| t.consumed(q) > 0)
            .ok_or_else(|| SynthError::NotSynthesized(p.label(q).to_string()))?;
        let rhs_weight: u64 = dist
            .rhs()
            .iter()
            .map(|&(s, k)| weights.get(&s).copied().unwrap_or(0) * k)
            .sum();
        weights.insert(q, dist.arity() - 1 + rhs_weight);
    }
    Ok(weights
        .into_iter()
        .map(|(q, w)| (p.label(q).to_string(), w))
        .collect())
}

/// Checks that `weights` is a potential for `p`: non-negative by type, and
/// across every transition the left weight is at least the right weight
/// plus `arity - 1`. Returns the offending transitions rendered as text.
pub fn check_potential(
    p: &PopulationComputer,
    weights: &BTreeMap<String, u64>,
) -> Result<(), Vec<String>> {
    let weight_of = |q: State| -> u64 {
        weights.get(p.label(q)).copied().unwrap_or(0)
    };
    let mut bad = Vec::new();
    for t in p.transitions() {
        let lhs: u64 = t.lhs().iter().map(|&(q, k)| weight_of(q) * k).sum();
        let rhs: u64 = t.rhs().iter().map(|&(q, k)| weight_of(q) * k).sum();
        if lhs < rhs + (t.arity() - 1) {
            let side = |s: &[(State, u64)]| {
                s.iter()
                    .map(|&(q, k)| {
                        if k == 1 {
                            p.label(q).to_string()
                        } else {
                            format!("{}·{}", k, p.label(q))
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            };
            bad.push(format!("{} ↦ {}", side(t.lhs()), side(t.rhs())));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::qfpa::parse;

    fn support(p: &PopulationComputer, labels: &[&str]) -> BTreeSet<State> {
        labels.iter().map(|l| p.state(l).unwrap()).collect()
    }

    #[test]
    fn remainder_sub_mod11() {
        let p = remainder_sub(11, 4).unwrap();
        let mut labels: Vec<&str> = p.labels().iter().map(|s| s.as_str()).collect();
        labels.sort();
        assert_eq!(labels, vec!["0", "1", "16", "2", "4", "8"]);
        assert_eq!(p.helper_total(), 12);
        assert_eq!(p.transitions().len(), 6);

        let zero = p.state("0").unwrap();
        let sixteen = p.state("16").unwrap();
        let modulo = p.transition_for(&[(sixteen, 1), (zero, 1)]).unwrap();
        let mut rhs = modulo.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![(p.state("4").unwrap(), 1), (p.state("1").unwrap(), 1)];
        expect.sort();
        assert_eq!(rhs, expect);

        let fast = p.transition_for(&[(sixteen, 4)]).unwrap();
        let mut rhs = fast.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![
            (p.state("8").unwrap(), 1),
            (p.state("1").unwrap(), 1),
            (zero, 2),
        ];
        expect.sort();
        assert_eq!(rhs, expect);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn remainder_sub_circuit_spot_values() {
        let p = remainder_sub(11, 4).unwrap();
        assert_eq!(p.output_of_support(&support(&p, &["4"])), Some(true));
        assert_eq!(
            p.output_of_support(&support(&p, &["2", "4", "8"])),
            Some(false)
        );
        assert_eq!(
            p.output_of_support(&support(&p, &["1", "2", "4", "8"])),
            Some(true)
        );
        assert_eq!(
            p.output_of_support(&support(&p, &["2", "8", "16"])),
            Some(true)
        );
    }

    #[test]
    fn remainder_sub_mod19_modulo_transition() {
        let p = remainder_sub(19, 0).unwrap();
        let zero = p.state("0").unwrap();
        let top = p.state("32").unwrap();
        let modulo = p.transition_for(&[(top, 1), (zero, 2)]).unwrap();
        let mut rhs = modulo.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![
            (p.state("8").unwrap(), 1),
            (p.state("4").unwrap(), 1),
            (p.state("1").unwrap(), 1),
        ];
        expect.sort();
        assert_eq!(rhs, expect);
    }

    #[test]
    fn remainder_sub_power_of_two_modulus() {
        let p = remainder_sub(2, 1).unwrap();
        let zero = p.state("0").unwrap();
        let two = p.state("2").unwrap();
        let modulo = p.transition_for(&[(two, 1), (zero, 1)]).unwrap();
        assert_eq!(modulo.rhs(), &[(zero, 2)]);
        assert_eq!(p.transitions().len(), 2);
        assert_eq!(p.helper_total(), 3);
    }

    #[test]
    fn remainder_sub_rejects_small_modulus() {
        assert_eq!(
            remainder_sub(1, 0).unwrap_err(),
            SynthError::ModulusTooSmall(1)
        );
    }

    #[test]
    fn remainder_value_invariant() {
        for theta in [3u64, 5, 11, 19] {
            let p = remainder_sub(theta, 0).unwrap();
            for t in p.transitions() {
                let value = |side: &[(State, u64)]| -> u64 {
                    side.iter()
                        .map(|&(q, k)| p.label(q).parse::<u64>().unwrap() % theta * k)
                        .sum::<u64>()
                        % theta
                };
                assert_eq!(value(t.lhs()), value(t.rhs()), "theta={theta}");
            }
        }
    }

    #[test]
    fn threshold_sub_shape() {
        let p = threshold_sub(5, 4).unwrap();
        assert_eq!(p.num_states(), 11);
        assert_eq!(p.transitions().len(), 15);
        assert_eq!(p.helper_total(), 4);
        assert!(p.validate().is_empty());

        let top = p.state("+16").unwrap();
        let nlow = p.state("-8").unwrap();
        let t = p.transition_for(&[(top, 1), (nlow, 1)]).unwrap();
        let mut rhs = t.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![(p.state("0").unwrap(), 1), (p.state("+8").unwrap(), 1)];
        expect.sort();
        assert_eq!(rhs, expect);
    }

    #[test]
    fn threshold_sub_rejects_small_degree() {
        assert_eq!(
            threshold_sub(5, 3).unwrap_err(),
            SynthError::DegreeTooSmall { given: 3, min: 4 }
        );
    }

    #[test]
    fn threshold_circuit_spot_values() {
        let p = threshold_sub(5, 4).unwrap();
        assert_eq!(
            p.output_of_support(&support(&p, &["+8", "-4", "+2"])),
            Some(true)
        );
        assert_eq!(p.output_of_support(&support(&p, &["+16"])), Some(true));
        assert_eq!(p.output_of_support(&support(&p, &["-16"])), Some(false));
    }

    #[test]
    fn threshold_value_invariant() {
        let p = threshold_sub(5, 4).unwrap();
        for t in p.transitions() {
            let value = |side: &[(State, u64)]| -> i64 {
                side.iter()
                    .map(|&(q, k)| {
                        let l = p.label(q);
                        if l == "0" {
                            0
                        } else {
                            l.parse::<i64>().unwrap() * k as i64
                        }
                    })
                    .sum()
            };
            assert_eq!(value(t.lhs()), value(t.rhs()));
        }
    }

    #[test]
    fn compile_two_atom_disjunction() {
        let p = parse("(8x + 5y = 4 mod 11) || (-2x + y >= 5)").unwrap();
        let c = compile(&p, &[4]).unwrap();
        assert!(c.validate().is_empty());
        assert_eq!(c.helper_total(), 18);

        let x = c.state("X:x").unwrap();
        let y = c.state("X:y").unwrap();
        let zero = c.state("0").unwrap();
        let dx = c.transition_for(&[(x, 1), (zero, 1)]).unwrap();
        let mut rhs = dx.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![
            (c.state("r1:8").unwrap(), 1),
            (c.state("t2:-2").unwrap(), 1),
        ];
        expect.sort();
        assert_eq!(rhs, expect);

        let dy = c.transition_for(&[(y, 1), (zero, 2)]).unwrap();
        let mut rhs = dy.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![
            (c.state("r1:1").unwrap(), 1),
            (c.state("r1:4").unwrap(), 1),
            (c.state("t2:+1").unwrap(), 1),
        ];
        expect.sort();
        assert_eq!(rhs, expect);
    }

    #[test]
    fn compile_default_degree() {
        let p = parse("(8x + 5y = 4 mod 11) || (-2x + y >= 5)").unwrap();
        let c = compile(&p, &[]).unwrap();
        assert!(c.state("t2:+256").is_some());
        assert!(c.state("t2:+512").is_none());
    }

    #[test]
    fn compile_single_remainder_atom() {
        let p = parse("x = 1 mod 3").unwrap();
        let c = compile(&p, &[]).unwrap();
        assert_eq!(c.num_states(), 5);
        assert_eq!(c.helper_total(), 7);
        assert_eq!(c.transitions().len(), 5);
        let x = c.state("X:x").unwrap();
        let zero = c.state("0").unwrap();
        let d = c.transition_for(&[(x, 1), (zero, 1)]).unwrap();
        let mut rhs = d.rhs().to_vec();
        rhs.sort();
        let mut expect = vec![(c.state("r1:1").unwrap(), 1), (zero, 1)];
        expect.sort();
        assert_eq!(rhs, expect);
    }

    #[test]
    fn compile_zero_coefficient_drains() {
        let p = parse("0*x + y >= 1").unwrap();
        let c = compile(&p, &[]).unwrap();
        let x = c.state("X:x").unwrap();
        let zero = c.state("0").unwrap();
        let d = c.transition_for(&[(x, 1), (zero, 1)]).unwrap();
        assert_eq!(d.rhs(), &[(zero, 2)]);
    }

    #[test]
    fn compile_rejects_degenerate() {
        let p = parse("x = 0 mod 1").unwrap();
        assert_eq!(
            compile(&p, &[]).unwrap_err(),
            SynthError::DegeneratePredicate(true)
        );
    }

    #[test]
    fn compile_rejects_small_override() {
        let p = parse("-2x + y >= 5").unwrap();
        assert_eq!(
            compile(&p, &[3]).unwrap_err(),
            SynthError::DegreeTooSmall { given: 3, min: 4 }
        );
    }

    #[test]
    fn compiled_output_matches_predicate_on_terminal_sums() {
        let p = parse("x = 1 mod 3").unwrap();
        let c = compile(&p, &[]).unwrap();
        assert_eq!(
            c.output_of_support(&support(&c, &["r1:1"])),
            Some(true)
        );
        assert_eq!(
            c.output_of_support(&support(&c, &["r1:2"])),
            Some(false)
        );
        assert_eq!(
            c.output_of_support(&support(&c, &["r1:2", "r1:4"])),
            Some(false)
        );
    }

    #[test]
    fn input_config_places_agents() {
        let p = parse("x - y >= 0").unwrap();
        let c = compile(&p, &[]).unwrap();
        let x = [("x".to_string(), 2), ("y".to_string(), 1)].into();
        let cfg = input_config(&c, &x).unwrap();
        assert_eq!(cfg.get(c.state("X:x").unwrap()), 2);
        assert_eq!(cfg.get(c.state("X:y").unwrap()), 1);
        let bad = [("z".to_string(), 1)].into();
        assert!(matches!(
            input_config(&c, &bad),
            Err(SynthError::UnknownVariable(_))
        ));
    }

    #[test]
    fn potential_weights_match_hand_values() {
        let p = parse("(8x + 5y = 4 mod 11) || (-2x + y >= 5)").unwrap();
        let c = compile(&p, &[4]).unwrap();
        let w = potential(&c).unwrap();
        assert_eq!(w["0"], 0);
        assert_eq!(w["r1:8"], 9);
        assert_eq!(w["t2:-2"], 1);
        assert_eq!(w["X:x"], 11);
        assert_eq!(w["X:y"], 2 + (2 + 5 + 1));
        check_potential(&c, &w).unwrap();
    }

    #[test]
    fn potential_covers_default_degrees() {
        for s in [
            "x >= 2",
            "x - y >= 0",
            "x = 1 mod 3",
            "2x + y = 3 mod 5",
            "(x = 1 mod 3) && (x >= 2)",
            "(8x + 5y = 4 mod 11) || (-2x + y >= 5)",
        ] {
            let c = compile(&parse(s).unwrap(), &[]).unwrap();
            let w = potential(&c).unwrap();
            check_potential(&c, &w).unwrap_or_else(|bad| {
                panic!("potential violated for {s}: {bad:?}");
            });
        }
    }

    #[test]
    fn potential_rejects_foreign_labels() {
        let mut b = Builder::new();
        let a = b.state("alpha");
        let z = b.state("0");
        b.transition(&[(a, 2)], &[(z, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [z].into(),
            one: [a].into(),
        });
        let p = b.finish().unwrap();
        assert!(matches!(
            potential(&p),
            Err(SynthError::NotSynthesized(_))
        ));
    }

    #[test]
    fn check_potential_reports_violations() {
        let p = threshold_sub(1, 2).unwrap();
        let mut w = potential(&p).unwrap();
        *w.get_mut("+4").unwrap() = 100;
        let bad = check_potential(&p, &w).unwrap_err();
        assert!(!bad.is_empty());
    }
}
