//! Arity reduction: every multiway transition becomes a family of binary
//! interactions that gather the required agents, commit, and then hand out
//! the products one meeting at a time.

use super::{fresh, ConvertError, RefinementMap};
use crate::circuit::InputSubst;
use crate::computer::{Builder, Output, PopulationComputer, State};
use std::collections::{BTreeMap, BTreeSet};

/// How a candidate binary transition may be displaced by another wanting the
/// same left-hand side: commits beat stacks, and among commits the larger
/// consumed arity wins, then the earlier source transition.
enum Candidate {
    Commit { arity: u64, source: usize },
    Stack,
    Plain,
}

/// Converts a population computer into one where every transition is
/// binary.
///
/// Each state `q` gains stacked variants `(q, i)` holding `i` units of `q`,
/// up to the largest multiplicity any transition consumes. For a transition
/// `t` one participating state is chosen as primary; a pair covering the
/// left-hand side commits into a surplus state `(q, i, t)`, surplus drains
/// through transfers, and the committed token walks a chain handing one
/// product to a freed agent per meeting. The returned map projects `(q, i)`
/// to `i` copies of `q`, surplus states to their stored units plus the full
/// product multiset, and chain states to the products still owed.
pub fn binarise(
    p: &PopulationComputer,
) -> Result<(PopulationComputer, RefinementMap), ConvertError> {
    let n = p.num_states();
    let mut mult = vec![0u64; n];
    let mut outgoing = vec![0usize; n];
    for t in p.transitions() {
        for &(q, k) in t.lhs() {
            mult[q] = mult[q].max(k);
            outgoing[q] += 1;
        }
    }
    let mut used: BTreeSet<String> = p.labels().iter().cloned().collect();
    let mut b = Builder::new();
    let mut map: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();

    // Stacked plain states (q, i) for i up to max(mult, 1); (q, 1) keeps the
    // original label.
    let mut plain: Vec<Vec<State>> = Vec::with_capacity(n);
    for q in 0..n {
        let top = mult[q].max(1);
        let mut row = vec![0usize; top as usize + 1];
        row[1] = b.state(p.label(q));
        map.insert(p.label(q).to_string(), super::singleton(p.label(q)));
        for i in (0..=top).filter(|&i| i != 1) {
            let label = fresh(&mut used, format!("{}@{i}", p.label(q)));
            row[i as usize] = b.state(&label);
            let mut image = BTreeMap::new();
            if i > 0 {
                image.insert(p.label(q).to_string(), i);
            }
            map.insert(label, image);
        }
        plain.push(row);
    }

    struct Plan {
        primary: State,
        partner: Option<State>,
        r_primary: u64,
        r_partner: u64,
        products: Vec<State>,
        chain: Vec<State>,
        surplus: Vec<State>,
    }

    let mut plans: Vec<Plan> = Vec::with_capacity(p.transitions().len());
    for (k, t) in p.transitions().iter().enumerate() {
        let lhs = t.lhs();
        let (primary, partner) = if lhs.len() == 1 {
            (lhs[0].0, None)
        } else {
            let (a, c) = (lhs[0].0, lhs[1].0);
            if outgoing[a] < outgoing[c]
                || (outgoing[a] == outgoing[c] && p.label(a) <= p.label(c))
            {
                (a, Some(c))
            } else {
                (c, Some(a))
            }
        };
        let products: Vec<State> = t
            .rhs()
            .iter()
            .flat_map(|&(q, cnt)| std::iter::repeat(q).take(cnt as usize))
            .collect();
        let l = products.len();
        let mut owed: BTreeMap<String, u64> = BTreeMap::new();
        for &(q, cnt) in t.rhs() {
            *owed.entry(p.label(q).to_string()).or_default() += cnt;
        }
        let mut chain: Vec<State> = Vec::new();
        for i in 1..l {
            let label = fresh(&mut used, format!("#{k}.{i}"));
            chain.push(b.state(&label));
            let mut image: BTreeMap<String, u64> = BTreeMap::new();
            for &q in &products[i - 1..] {
                *image.entry(p.label(q).to_string()).or_default() += 1;
            }
            map.insert(label, image);
        }
        let mut surplus: Vec<State> = Vec::new();
        for i in 1..=mult[primary] {
            let label = fresh(&mut used, format!("{}@{i}#{k}", p.label(primary)));
            surplus.push(b.state(&label));
            let mut image = owed.clone();
            *image.entry(p.label(primary).to_string()).or_default() += i;
            map.insert(label, image);
        }
        plans.push(Plan {
            primary,
            partner,
            r_primary: t.consumed(primary),
            r_partner: partner.map_or(0, |q| t.consumed(q)),
            products,
            chain,
            surplus,
        });
    }

    let mut candidates: Vec<(Candidate, Vec<(State, u64)>, Vec<(State, u64)>)> = Vec::new();
    for (k, plan) in plans.iter().enumerate() {
        let arity = plan.r_primary + plan.r_partner;
        // The committed token holding `s` surplus units of the primary.
        let committed = |s: u64| -> State {
            if s == 0 {
                plan.chain[0]
            } else {
                plan.surplus[s as usize - 1]
            }
        };
        let q = plan.primary;
        match plan.partner {
            Some(pt) => {
                for i in plan.r_primary..=mult[q] {
                    for j in plan.r_partner..=mult[pt] {
                        candidates.push((
                            Candidate::Commit { arity, source: k },
                            vec![(plain[q][i as usize], 1), (plain[pt][j as usize], 1)],
                            vec![
                                (committed(i - plan.r_primary), 1),
                                (plain[pt][(j - plan.r_partner) as usize], 1),
                            ],
                        ));
                    }
                }
            }
            None => {
                let r = plan.r_primary;
                for i in 0..=mult[q] {
                    for j in i..=mult[q] {
                        if i + j < r {
                            continue;
                        }
                        let s = i + j - r;
                        let rhs = if s <= mult[q] {
                            vec![(committed(s), 1), (plain[q][0], 1)]
                        } else {
                            vec![
                                (plan.surplus[mult[q] as usize - 1], 1),
                                (plain[q][(s - mult[q]) as usize], 1),
                            ]
                        };
                        candidates.push((
                            Candidate::Commit { arity, source: k },
                            vec![(plain[q][i as usize], 1), (plain[q][j as usize], 1)],
                            rhs,
                        ));
                    }
                }
            }
        }
    }
    for q in 0..n {
        let m = mult[q];
        for i in 1..m {
            for j in i..m {
                let s = i + j;
                let rhs = if s <= m {
                    vec![(plain[q][s as usize], 1), (plain[q][0], 1)]
                } else {
                    vec![(plain[q][m as usize], 1), (plain[q][(s - m) as usize], 1)]
                };
                candidates.push((
                    Candidate::Stack,
                    vec![(plain[q][i as usize], 1), (plain[q][j as usize], 1)],
                    rhs,
                ));
            }
        }
    }
    for plan in &plans {
        let q = plan.primary;
        for i in 1..=mult[q] {
            candidates.push((
                Candidate::Plain,
                vec![(plan.surplus[i as usize - 1], 1), (plain[q][0], 1)],
                vec![(plan.chain[0], 1), (plain[q][i as usize], 1)],
            ));
        }
        let l = plan.products.len();
        for i in 1..l {
            let giver = match plan.partner {
                Some(pt) if (i as u64) <= plan.r_partner => pt,
                _ => q,
            };
            let next = if i + 1 < l {
                plan.chain[i]
            } else {
                plain[plan.products[l - 1]][1]
            };
            candidates.push((
                Candidate::Plain,
                vec![(plan.chain[i - 1], 1), (plain[giver][0], 1)],
                vec![(next, 1), (plain[plan.products[i - 1]][1], 1)],
            ));
        }
    }
    candidates.sort_by_key(|(c, _, _)| match *c {
        Candidate::Commit { arity, source } => (0, u64::MAX - arity, source),
        Candidate::Stack => (1, 0, 0),
        Candidate::Plain => (2, 0, 0),
    });
    for (_, lhs, rhs) in &candidates {
        if !b.has_lhs(lhs) {
            b.transition(lhs, rhs)?;
        }
    }

    for &q in p.inputs() {
        b.input(plain[q][1]);
    }
    for (&q, &k) in p.helpers() {
        b.helpers(plain[q][1], k);
    }

    b.output(match p.output() {
        Output::Circuit(c) => Output::Circuit(
            c.substitute(|label| {
                let q = p.state(label).expect("circuit inputs are states");
                InputSubst::Or(vec![
                    b.label(plain[q][0]).to_string(),
                    b.label(plain[q][1]).to_string(),
                ])
            })
            .simplified(),
        ),
        Output::Marked { zero, one } => {
            let lift = |class: &BTreeSet<State>| -> BTreeSet<State> {
                class
                    .iter()
                    .flat_map(|&q| plain[q].iter().skip(1).copied().collect::<Vec<_>>())
                    .collect()
            };
            Output::Marked {
                zero: lift(zero),
                one: lift(one),
            }
        }
        Output::Consensus { zero, one } => {
            let mut zero2: BTreeSet<State> = zero
                .iter()
                .flat_map(|&q| plain[q].iter().copied().collect::<Vec<_>>())
                .collect();
            let mut one2: BTreeSet<State> = one
                .iter()
                .flat_map(|&q| plain[q].iter().copied().collect::<Vec<_>>())
                .collect();
            for plan in &plans {
                let class = |q: State| one.contains(&q);
                for &s in &plan.surplus {
                    if class(plan.primary) {
                        one2.insert(s);
                    } else {
                        zero2.insert(s);
                    }
                }
                let last = *plan.products.last().expect("products nonempty");
                for &s in &plan.chain {
                    if class(last) {
                        one2.insert(s);
                    } else {
                        zero2.insert(s);
                    }
                }
            }
            Output::Consensus {
                zero: zero2,
                one: one2,
            }
        }
    });
    let p2 = b.finish()?;
    Ok((
        p2,
        RefinementMap {
            map,
            offset: BTreeMap::new(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{check_refinement, prune};
    use super::*;
    use crate::qfpa;
    use crate::synth;

    #[test]
    fn binary_single_support_gets_commit_and_execute() {
        let mut b = Builder::new();
        let q = b.state("q");
        let target = b.state("p");
        b.input(q);
        b.helpers(target, 1);
        b.transition(&[(q, 2)], &[(target, 2)]).unwrap();
        b.output(Output::Marked {
            zero: [].into(),
            one: [target].into(),
        });
        let p = b.finish().unwrap();
        let (p2, pi) = binarise(&p).unwrap();
        assert!(p2.transitions().iter().all(|t| t.arity() == 2));
        let q1 = p2.state("q").unwrap();
        let q0 = p2.state("q@0").unwrap();
        let c1 = p2.state("#0.1").unwrap();
        let t1 = p2.state("p").unwrap();
        let commit = p2.transition_for(&[(q1, 2)]).unwrap();
        assert_eq!(commit.rhs(), &[(q0, 1), (c1, 1)]);
        let execute = p2.transition_for(&[(c1, 1), (q0, 1)]).unwrap();
        assert_eq!(execute.rhs(), &[(t1, 2)]);
        // A pair holding three units commits and banks the spare unit.
        let q2 = p2.state("q@2").unwrap();
        let s1 = p2.state("q@1#0").unwrap();
        let over = p2.transition_for(&[(q1, 1), (q2, 1)]).unwrap();
        assert_eq!(over.rhs(), &[(q0, 1), (s1, 1)]);
        let transfer = p2.transition_for(&[(s1, 1), (q0, 1)]).unwrap();
        assert_eq!(transfer.rhs(), &[(q1, 1), (c1, 1)]);
        assert_eq!(pi.map["q@2#0"], BTreeMap::from([
            ("q".to_string(), 2),
            ("p".to_string(), 2),
        ]));
        assert_eq!(pi.map["#0.1"], BTreeMap::from([("p".to_string(), 2)]));
        let check = check_refinement(&p, &p2, &pi, 40, 3, 100_000);
        assert!(check.pass, "{:?}", check.violations);
    }

    #[test]
    fn two_support_transition_primary_is_lower_outgoing() {
        let mut b = Builder::new();
        let zero = b.state("0");
        let acc = b.state("acc");
        b.input(acc);
        b.helpers(zero, 2);
        b.transition(&[(acc, 1), (zero, 1)], &[(zero, 2)]).unwrap();
        b.transition(&[(acc, 2)], &[(acc, 1), (zero, 1)]).unwrap();
        let mut cb = crate::circuit::Builder::new();
        let i = cb.input("acc");
        b.output(Output::Circuit(cb.finish(i)));
        let p = b.finish().unwrap();
        let (p2, _) = binarise(&p).unwrap();
        // "0" appears in one left-hand side, "acc" in two, so "0" is primary
        // for the first transition and commits into its chain state.
        let z1 = p2.state("0").unwrap();
        let a1 = p2.state("acc").unwrap();
        let commit = p2.transition_for(&[(z1, 1), (a1, 1)]).unwrap();
        let chain = p2.state("#0.1").unwrap();
        let a0 = p2.state("acc@0").unwrap();
        assert_eq!(commit.rhs(), &[(a0, 1), (chain, 1)]);
    }

    #[test]
    fn stack_states_follow_largest_multiplicity() {
        let p = synth::remainder_sub(11, 4).unwrap();
        let (p2, pi) = binarise(&p).unwrap();
        for i in [0, 2, 3, 4] {
            assert!(p2.state(&format!("16@{i}")).is_some());
        }
        assert!(p2.state("16@5").is_none());
        assert!(p2.state("8@3").is_none());
        let s16 = p2.state("16").unwrap();
        let s16_2 = p2.state("16@2").unwrap();
        let s16_3 = p2.state("16@3").unwrap();
        let s16_0 = p2.state("16@0").unwrap();
        let stack = p2.transition_for(&[(s16, 1), (s16_2, 1)]).unwrap();
        assert_eq!(stack.rhs(), &[(s16_0, 1), (s16_3, 1)]);
        // Pairs summing past the fast-dispersal arity commit instead.
        let commit = p2.transition_for(&[(s16_2, 1), (s16_3, 1)]).unwrap();
        let surplus1 = p2.state("16@1#5").unwrap();
        assert_eq!(commit.rhs(), &[(s16_0, 1), (surplus1, 1)]);
        // The dispersal chain hands out products in canonical order and the
        // last step lands in the final product state.
        let c3 = p2.state("#5.3").unwrap();
        let z1 = p2.state("0").unwrap();
        let hand = p2.transition_for(&[(c3, 1), (s16_0, 1)]).unwrap();
        assert_eq!(hand.rhs(), &[(z1, 2)]);
        assert_eq!(
            pi.map["#5.3"],
            BTreeMap::from([("0".to_string(), 2)])
        );
        assert_eq!(
            pi.map["#5.1"],
            BTreeMap::from([
                ("1".to_string(), 1),
                ("8".to_string(), 1),
                ("0".to_string(), 2),
            ])
        );
    }

    #[test]
    fn circuit_inputs_lift_to_disjunctions() {
        let p = synth::compile(&qfpa::parse("x = 1 mod 3").unwrap(), &[]).unwrap();
        let (p2, pi) = binarise(&p).unwrap();
        let Output::Circuit(c) = p2.output() else {
            panic!("circuit expected")
        };
        for label in c.inputs() {
            assert!(p2.state(label).is_some());
        }
        assert!(c.inputs().iter().any(|l| l.ends_with("@0")));
        let check = check_refinement(&p, &p2, &pi, 30, 5, 200_000);
        assert!(check.pass, "{:?}", check.violations);
    }

    #[test]
    fn pruned_binarisation_still_refines() {
        let p = synth::compile(&qfpa::parse("x - y >= 0").unwrap(), &[]).unwrap();
        let (p2, pi) = binarise(&p).unwrap();
        let (p3, pi3) = prune(&p2, Some(&pi)).unwrap();
        let pi3 = pi3.unwrap();
        assert!(p3.num_states() <= p2.num_states());
        assert!(p3.validate().is_empty());
        let check = check_refinement(&p, &p3, &pi3, 30, 9, 200_000);
        assert!(check.pass, "{:?}", check.violations);
    }
}
