//! Output-circuit internalisation: the circuit is evaluated by agents inside
//! the population and the result is read off marked states.

use super::{fresh, singleton, ConvertError, RefinementMap};
use crate::circuit::{self, CRef, Circuit};
use crate::computer::{Builder, Output, PopulationComputer, State};
use std::collections::{BTreeMap, BTreeSet};

/// Rebuilds a circuit so that its result is produced by a gate. A circuit
/// that returns an input directly feeds it through two chained inverters; a
/// constant circuit becomes a small netlist whose value ignores the chosen
/// input state.
fn normalise_circuit(c: &Circuit, any_state: &str) -> Circuit {
    match c.out() {
        CRef::Gate(_) => c.clone(),
        CRef::In(i) => {
            let mut b = circuit::Builder::new();
            let x = b.input(&c.inputs()[i]);
            let w = b.not(x);
            let out = b.not(w);
            b.finish(out)
        }
        CRef::Const(v) => {
            let mut b = circuit::Builder::new();
            let x = b.input(any_state);
            let nx = b.nand(x, x);
            let always = b.nand(nx, x);
            let out = if v { always } else { b.nand(always, always) };
            b.finish(out)
        }
    }
}

/// Replaces the output circuit of a binary population computer by an agent
/// layer that evaluates it continuously, yielding a marked output.
///
/// Every state gains a notified variant; a transition firing notifies one
/// of its products. Per state a presence tracker remembers whether the
/// state was seen, per gate a memory agent evaluates it from the trackers
/// or from earlier gate memories, and a single token sweeps trackers and
/// memories back to blank whenever a notification arrives, so the layer
/// converges to the circuit's value over the true support. Duplicate
/// machinery demotes itself into fresh tokens and colliding tokens return
/// agents to the population on the reservoir state, keeping the machinery
/// headcount constant; the refinement map sends machinery to the reservoir
/// and subtracts that constant block.
pub fn focalise(
    p: &PopulationComputer,
) -> Result<(PopulationComputer, RefinementMap), ConvertError> {
    if p.transitions().iter().any(|t| t.arity() != 2) {
        return Err(ConvertError::Precondition {
            stage: "focalise",
            detail: "transitions must be binary".to_string(),
        });
    }
    let Output::Circuit(raw) = p.output() else {
        return Err(ConvertError::Precondition {
            stage: "focalise",
            detail: "output must be a circuit".to_string(),
        });
    };
    let Some(reservoir) = p.helpers().iter().find(|&(_, &k)| k > 0).map(|(&q, _)| q) else {
        return Err(ConvertError::Precondition {
            stage: "focalise",
            detail: "at least one helper agent is required for the machinery".to_string(),
        });
    };
    let circuit = normalise_circuit(raw, p.label(0));
    let n = p.num_states();
    let g = circuit.gate_count();
    let mut used: BTreeSet<String> = p.labels().iter().cloned().collect();
    let mut b = Builder::new();
    let mut map: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let machinery = singleton(p.label(reservoir));

    let minus: Vec<State> = (0..n)
        .map(|q| {
            map.insert(p.label(q).to_string(), singleton(p.label(q)));
            b.state(p.label(q))
        })
        .collect();
    let plus: Vec<State> = (0..n)
        .map(|q| {
            let label = fresh(&mut used, format!("{}~+", p.label(q)));
            map.insert(label.clone(), singleton(p.label(q)));
            b.state(&label)
        })
        .collect();
    // Tracker values: 0 = believed absent, 1 = believed present, 2 = alarmed.
    let trackers: Vec<[State; 3]> = (0..n)
        .map(|q| {
            let mut mk = |tag: &str| {
                let label = fresh(&mut used, format!("{}~s{tag}", p.label(q)));
                map.insert(label.clone(), machinery.clone());
                b.state(&label)
            };
            [mk("0"), mk("1"), mk("!")]
        })
        .collect();
    // Gate memory code: 9*out + 3*first + second, with 2 for blank.
    let glyph = |v: usize| ['0', '1', '_'][v];
    let gate_states: Vec<Vec<State>> = (0..g)
        .map(|gi| {
            (0..27usize)
                .map(|code| {
                    let label = fresh(
                        &mut used,
                        format!(
                            "g{gi}~{}{}{}",
                            glyph(code / 9),
                            glyph(code / 3 % 3),
                            glyph(code % 3)
                        ),
                    );
                    map.insert(label.clone(), machinery.clone());
                    b.state(&label)
                })
                .collect()
        })
        .collect();
    let blank = 9 * 2 + 3 * 2 + 2;
    let reset: Vec<State> = (0..=n + g)
        .map(|i| {
            let label = fresh(&mut used, format!("~r{i}"));
            map.insert(label.clone(), machinery.clone());
            b.state(&label)
        })
        .collect();

    let observers = |r: CRef, bit: usize| -> Vec<State> {
        match r {
            CRef::In(i) => {
                let q = p
                    .state(&circuit.inputs()[i])
                    .expect("circuit inputs are states");
                vec![trackers[q][bit]]
            }
            CRef::Gate(j) => {
                let mut v = Vec::with_capacity(4);
                for a in 0..2 {
                    for c in 0..2 {
                        v.push(gate_states[j][9 * bit + 3 * a + c]);
                    }
                }
                v
            }
            CRef::Const(_) => unreachable!("normalised circuits store no constant operands"),
        }
    };

    // Base dynamics over notification flags; the canonically first product
    // carries the notification.
    for t in p.transitions() {
        let expand = |side: &[(State, u64)]| -> Vec<State> {
            side.iter()
                .flat_map(|&(q, k)| std::iter::repeat(q).take(k as usize))
                .collect()
        };
        let lhs = expand(t.lhs());
        let rhs = expand(t.rhs());
        let combos: &[(bool, bool)] = if lhs[0] == lhs[1] {
            &[(false, false), (false, true), (true, true)]
        } else {
            &[(false, false), (false, true), (true, false), (true, true)]
        };
        for &(fa, fc) in combos {
            let sa = if fa { plus[lhs[0]] } else { minus[lhs[0]] };
            let sc = if fc { plus[lhs[1]] } else { minus[lhs[1]] };
            b.transition(&[(sa, 1), (sc, 1)], &[(plus[rhs[0]], 1), (minus[rhs[1]], 1)])?;
        }
    }
    // Redundant notifications collapse; the smaller label keeps its flag.
    for a in 0..n {
        for c in a..n {
            let lhs = [(plus[a], 1), (plus[c], 1)];
            if b.has_lhs(&lhs) {
                continue;
            }
            let (keep, lose) = if p.label(a) <= p.label(c) { (a, c) } else { (c, a) };
            b.transition(&lhs, &[(plus[keep], 1), (minus[lose], 1)])?;
        }
    }
    // Presence detection raises an alarm on the tracker.
    for q in 0..n {
        b.transition(
            &[(trackers[q][0], 1), (minus[q], 1)],
            &[(trackers[q][2], 1), (minus[q], 1)],
        )?;
    }
    // Gate memories fill from their operands' observers.
    for (gi, &(e1, e2)) in circuit.gates().iter().enumerate() {
        for bit in 0..2 {
            for u in observers(e1, bit) {
                b.transition(
                    &[(gate_states[gi][blank], 1), (u, 1)],
                    &[(gate_states[gi][9 * 2 + 3 * bit + 2], 1), (u, 1)],
                )?;
            }
        }
        for first in 0..2 {
            for bit in 0..2 {
                let out = 1 - (first & bit);
                for u in observers(e2, bit) {
                    b.transition(
                        &[(gate_states[gi][9 * 2 + 3 * first + 2], 1), (u, 1)],
                        &[(gate_states[gi][9 * out + 3 * first + bit], 1), (u, 1)],
                    )?;
                }
            }
        }
    }
    // An alarmed tracker corrects itself and recalls the token to the gate
    // sweep (or leaves it if it has not reached the gates yet).
    for q in 0..n {
        for i in 0..=n + g {
            b.transition(
                &[(trackers[q][2], 1), (reset[i], 1)],
                &[(trackers[q][1], 1), (reset[i.min(n)], 1)],
            )?;
        }
    }
    // A notified agent calms down and restarts the token.
    for q in 0..n {
        for i in 0..=n + g {
            b.transition(
                &[(plus[q], 1), (reset[i], 1)],
                &[(minus[q], 1), (reset[0], 1)],
            )?;
        }
    }
    // Colliding tokens: one restarts, the other rejoins the population.
    for i in 0..=n + g {
        for j in i..=n + g {
            b.transition(
                &[(reset[i], 1), (reset[j], 1)],
                &[(reset[0], 1), (minus[reservoir], 1)],
            )?;
        }
    }
    // The token sweeps trackers in state order, then gate memories in
    // evaluation order, blanking as it goes. Alarmed trackers are already
    // claimed by the recall rule above.
    for q in 0..n {
        for v in 0..3 {
            let lhs = [(reset[q], 1), (trackers[q][v], 1)];
            if b.has_lhs(&lhs) {
                continue;
            }
            b.transition(&lhs, &[(reset[q + 1], 1), (trackers[q][0], 1)])?;
        }
    }
    for gi in 0..g {
        for code in 0..27 {
            b.transition(
                &[(reset[n + gi], 1), (gate_states[gi][code], 1)],
                &[(reset[n + gi + 1], 1), (gate_states[gi][blank], 1)],
            )?;
        }
    }
    // Duplicate machinery in one family demotes to a fresh token.
    for q in 0..n {
        for x in 0..3 {
            for y in x..3 {
                b.transition(
                    &[(trackers[q][x], 1), (trackers[q][y], 1)],
                    &[(trackers[q][x], 1), (reset[0], 1)],
                )?;
            }
        }
    }
    for gi in 0..g {
        for x in 0..27 {
            for y in x..27 {
                b.transition(
                    &[(gate_states[gi][x], 1), (gate_states[gi][y], 1)],
                    &[(gate_states[gi][x], 1), (reset[0], 1)],
                )?;
            }
        }
    }

    for &q in p.inputs() {
        b.input(minus[q]);
    }
    for (&q, &k) in p.helpers() {
        b.helpers(minus[q], k);
    }
    for q in 0..n {
        b.helpers(trackers[q][0], 1);
    }
    for gi in 0..g {
        b.helpers(gate_states[gi][blank], 1);
    }
    b.helpers(reset[0], 1);

    let CRef::Gate(out_gate) = circuit.out() else {
        unreachable!("normalised circuits end in a gate")
    };
    let mut zero = BTreeSet::new();
    let mut one = BTreeSet::new();
    for a in 0..2 {
        for c in 0..2 {
            zero.insert(gate_states[out_gate][3 * a + c]);
            one.insert(gate_states[out_gate][9 + 3 * a + c]);
        }
    }
    b.output(Output::Marked { zero, one });
    let p2 = b.finish()?;
    let offset = BTreeMap::from([(p.label(reservoir).to_string(), (n + g + 1) as u64)]);
    Ok((p2, RefinementMap { map, offset }))
}

#[cfg(test)]
mod tests {
    use super::super::check_refinement;
    use super::*;
    use crate::computer::Config;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn absorbing_fixture(out: CRef) -> PopulationComputer {
        let mut b = Builder::new();
        let a = b.state("a");
        let z = b.state("z");
        b.input(a);
        b.helpers(z, 1);
        b.transition(&[(a, 1), (z, 1)], &[(z, 2)]).unwrap();
        let mut cb = circuit::Builder::new();
        let i = cb.input("z");
        let out = match out {
            CRef::In(_) => i,
            other => other,
        };
        b.output(Output::Circuit(cb.finish(out)));
        b.finish().unwrap()
    }

    fn random_terminal(p: &PopulationComputer, c0: Config, seed: u64) -> Config {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = c0;
        for _ in 0..500_000 {
            let enabled = p.enabled(&c);
            if enabled.is_empty() {
                return c;
            }
            let t = enabled[rng.gen_range(0..enabled.len())];
            c = p.step(&c, t).unwrap();
        }
        panic!("no terminal configuration reached");
    }

    #[test]
    fn machinery_inventory_and_key_transitions() {
        let p = absorbing_fixture(CRef::In(0));
        let (p2, pi) = focalise(&p).unwrap();
        // Two old states and a two-gate inverter chain: flagged copies,
        // trackers, 27 memories per gate and a token chain of length 5.
        assert_eq!(p2.num_states(), 4 + 6 + 27 * 2 + 5);
        assert_eq!(p2.helper_total(), 1 + 2 + 2 + 1);
        assert_eq!(p2.output().kind(), "marked");
        let am = p2.state("a").unwrap();
        let zm = p2.state("z").unwrap();
        let zp = p2.state("z~+").unwrap();
        let lift = p2.transition_for(&[(am, 1), (zm, 1)]).unwrap();
        assert_eq!(lift.rhs(), &[(zm, 1), (zp, 1)]);
        let ap = p2.state("a~+").unwrap();
        let lift_flagged = p2.transition_for(&[(ap, 1), (zp, 1)]).unwrap();
        assert_eq!(lift_flagged.rhs(), &[(zm, 1), (zp, 1)]);
        let s0 = p2.state("z~s0").unwrap();
        let alarm = p2.state("z~s!").unwrap();
        let detect = p2.transition_for(&[(s0, 1), (zm, 1)]).unwrap();
        assert_eq!(detect.rhs(), &[(zm, 1), (alarm, 1)]);
        let g0_blank = p2.state("g0~___").unwrap();
        let g0_half = p2.state("g0~_0_").unwrap();
        let fill = p2.transition_for(&[(g0_blank, 1), (s0, 1)]).unwrap();
        assert!(fill.rhs().iter().any(|&(q, _)| q == g0_half));
        let g0_done = p2.state("g0~100").unwrap();
        let fill2 = p2.transition_for(&[(g0_half, 1), (s0, 1)]).unwrap();
        assert!(fill2.rhs().iter().any(|&(q, _)| q == g0_done));
        let token = p2.state("~r0").unwrap();
        let lead = p2.transition_for(&[(s0, 2)]).unwrap();
        assert_eq!(lead.rhs(), &[(s0, 1), (token, 1)]);
        assert_eq!(pi.offset, BTreeMap::from([("z".to_string(), 5)]));
        assert_eq!(pi.map["~r0"], singleton("z"));
        assert_eq!(pi.map["a~+"], singleton("a"));
        let check = check_refinement(&p, &p2, &pi, 25, 13, 300_000);
        assert!(check.pass, "{:?}", check.violations);
    }

    #[test]
    fn constant_circuits_settle_on_their_value() {
        let p = absorbing_fixture(CRef::Const(true));
        let (p2, pi) = focalise(&p).unwrap();
        let a = p2.state("a").unwrap();
        let input = Config::from_pairs([(a, 2)]);
        let c0 = p2.initial(&input, &Config::new()).unwrap();
        let terminal = random_terminal(&p2, c0, 5);
        assert_eq!(p2.output_of(&terminal), Some(true));
        let check = check_refinement(&p, &p2, &pi, 20, 17, 300_000);
        assert!(check.pass, "{:?}", check.violations);
    }

    #[test]
    fn wrapped_input_circuit_tracks_presence() {
        let p = absorbing_fixture(CRef::In(0));
        let (p2, _) = focalise(&p).unwrap();
        let a = p2.state("a").unwrap();
        let input = Config::from_pairs([(a, 3)]);
        let c0 = p2.initial(&input, &Config::new()).unwrap();
        let terminal = random_terminal(&p2, c0, 23);
        // All agents are absorbed into z, so the circuit reads true.
        assert_eq!(p2.output_of(&terminal), Some(true));
    }

    #[test]
    fn focalise_rejects_bad_inputs() {
        let mut b = Builder::new();
        let q = b.state("q");
        let h = b.state("h");
        b.input(q);
        b.helpers(h, 1);
        b.transition(&[(q, 1), (h, 1)], &[(h, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [h].into(),
        });
        let marked = b.finish().unwrap();
        assert!(matches!(
            focalise(&marked),
            Err(ConvertError::Precondition { stage: "focalise", .. })
        ));

        let mut b = Builder::new();
        let q = b.state("q");
        let h = b.state("h");
        b.input(q);
        b.helpers(h, 1);
        b.transition(&[(q, 2), (h, 1)], &[(h, 3)]).unwrap();
        let mut cb = circuit::Builder::new();
        let i = cb.input("h");
        b.output(Output::Circuit(cb.finish(i)));
        let ternary = b.finish().unwrap();
        assert!(matches!(
            focalise(&ternary),
            Err(ConvertError::Precondition { stage: "focalise", .. })
        ));

        let mut b = Builder::new();
        let q = b.state("q");
        let z = b.state("z");
        b.input(q);
        b.transition(&[(q, 2)], &[(z, 2)]).unwrap();
        let mut cb = circuit::Builder::new();
        let i = cb.input("z");
        b.output(Output::Circuit(cb.finish(i)));
        let helperless = b.finish().unwrap();
        assert!(matches!(
            focalise(&helperless),
            Err(ConvertError::Precondition { stage: "focalise", .. })
        ));
    }
}
