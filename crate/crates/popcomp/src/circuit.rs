//! Boolean circuits built from NAND gates only.
//!
//! Circuits serve as output functions of population computers: each input is
//! labelled by a state, and the circuit is evaluated on the presence bits of
//! the states in a configuration's support. Gates are stored in evaluation
//! order, so a gate may only reference inputs or strictly earlier gates.
//!
//! [`Builder`] constant-folds and hash-conses while constructing, which keeps
//! derived connectives at their minimal gate cost: `not` is one gate, `and`
//! two, `or` three, `xor` four.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reference to a circuit node: an input by position, a gate by index, or a
/// boolean constant. Constants appear only as the output of constant
/// circuits, never as gate operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CRef {
    In(usize),
    Gate(usize),
    Const(bool),
}

/// A NAND netlist with labelled inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    inputs: Vec<String>,
    gates: Vec<(CRef, CRef)>,
    out: CRef,
}

/// Structural errors detected by [`Circuit::validate`] and deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("duplicate input label {0:?}")]
    DuplicateInput(String),
    #[error("unknown input label {0:?}")]
    UnknownInput(String),
    #[error("gate {gate} references node {reference} out of order")]
    ForwardReference { gate: usize, reference: usize },
    #[error("gate {0} has a constant operand")]
    ConstOperand(usize),
    #[error("output references gate {0} which does not exist")]
    DanglingOutput(usize),
    #[error("invalid circuit json: {0}")]
    Json(String),
}

impl Circuit {
    /// The circuit that ignores all inputs and outputs `value`.
    pub fn constant(value: bool) -> Self {
        Circuit {
            inputs: Vec::new(),
            gates: Vec::new(),
            out: CRef::Const(value),
        }
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn gates(&self) -> &[(CRef, CRef)] {
        &self.gates
    }

    pub fn out(&self) -> CRef {
        self.out
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Checks the structural invariants: unique input labels, operands that
    /// reference only inputs or earlier gates, and a resolvable output.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut seen = BTreeSet::new();
        for label in &self.inputs {
            if !seen.insert(label) {
                return Err(CircuitError::DuplicateInput(label.clone()));
            }
        }
        let check = |r: CRef, gate: usize| match r {
            CRef::In(i) => {
                if i >= self.inputs.len() {
                    Err(CircuitError::ForwardReference { gate, reference: i })
                } else {
                    Ok(())
                }
            }
            CRef::Gate(g) => {
                if g >= gate {
                    Err(CircuitError::ForwardReference { gate, reference: g })
                } else {
                    Ok(())
                }
            }
            CRef::Const(_) => Err(CircuitError::ConstOperand(gate)),
        };
        for (i, (a, b)) in self.gates.iter().enumerate() {
            check(*a, i)?;
            check(*b, i)?;
        }
        match self.out {
            CRef::In(i) if i >= self.inputs.len() => {
                Err(CircuitError::DanglingOutput(i))
            }
            CRef::Gate(g) if g >= self.gates.len() => Err(CircuitError::DanglingOutput(g)),
            _ => Ok(()),
        }
    }

    /// Evaluates with input values supplied by `f`.
    pub fn eval_with(&self, f: impl Fn(&str) -> bool) -> bool {
        let mut values = Vec::with_capacity(self.gates.len());
        let resolve = |r: CRef, values: &[bool]| match r {
            CRef::In(i) => f(&self.inputs[i]),
            CRef::Gate(g) => values[g],
            CRef::Const(b) => b,
        };
        for (a, b) in &self.gates {
            let va = resolve(*a, &values);
            let vb = resolve(*b, &values);
            values.push(!(va && vb));
        }
        resolve(self.out, &values)
    }

    /// Evaluates with the inputs in `trues` set and all others false.
    pub fn eval_set(&self, trues: &BTreeSet<String>) -> bool {
        self.eval_with(|label| trues.contains(label))
    }

    /// Rebuilds the circuit with every input replaced according to `subst`,
    /// folding constants and sharing gates again. Inputs of the new circuit
    /// are the labels produced by the substitution, in first-use order.
    pub fn substitute(&self, subst: impl Fn(&str) -> InputSubst) -> Circuit {
        let mut builder = Builder::new();
        let mut replaced = Vec::with_capacity(self.inputs.len());
        for label in &self.inputs {
            let r = match subst(label) {
                InputSubst::Input(new) => builder.input(&new),
                InputSubst::Or(labels) => {
                    let mut acc = CRef::Const(false);
                    for l in labels {
                        let i = builder.input(&l);
                        acc = builder.or(acc, i);
                    }
                    acc
                }
                InputSubst::Const(b) => CRef::Const(b),
            };
            replaced.push(r);
        }
        let mut mapped = Vec::with_capacity(self.gates.len());
        let resolve = |r: CRef, mapped: &[CRef]| match r {
            CRef::In(i) => replaced[i],
            CRef::Gate(g) => mapped[g],
            CRef::Const(b) => CRef::Const(b),
        };
        for (a, b) in &self.gates {
            let na = resolve(*a, &mapped);
            let nb = resolve(*b, &mapped);
            mapped.push(builder.nand(na, nb));
        }
        let out = resolve(self.out, &mapped);
        builder.finish(out)
    }

    /// Returns an equivalent circuit with double negations removed, constants
    /// folded, and structurally equal gates shared. Input labels are kept in
    /// order, including inputs the simplified form no longer reads.
    pub fn simplified(&self) -> Circuit {
        let mut builder = Builder::new();
        for label in &self.inputs {
            builder.input(label);
        }
        let mut mapped: Vec<CRef> = Vec::with_capacity(self.gates.len());
        let resolve = |r: CRef, mapped: &[CRef]| match r {
            CRef::Gate(g) => mapped[g],
            other => other,
        };
        for (a, b) in &self.gates {
            let x = resolve(*a, &mapped);
            let y = resolve(*b, &mapped);
            mapped.push(builder.nand_reduced(x, y));
        }
        let out = resolve(self.out, &mapped);
        builder.finish(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CircuitJson::from(self)).expect("circuit serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, CircuitError> {
        let json: CircuitJson = serde_json::from_value(v.clone())
            .map_err(|e| CircuitError::Json(e.to_string()))?;
        let circuit = json.into_circuit()?;
        circuit.validate()?;
        Ok(circuit)
    }
}

/// Replacement for one input during [`Circuit::substitute`].
pub enum InputSubst {
    /// Rename to a single new input.
    Input(String),
    /// Replace by the disjunction of the given new inputs.
    Or(Vec<String>),
    /// Replace by a constant.
    Const(bool),
}

/// Incremental circuit constructor with constant folding and gate sharing.
#[derive(Debug, Default)]
pub struct Builder {
    inputs: Vec<String>,
    input_index: HashMap<String, usize>,
    gates: Vec<(CRef, CRef)>,
    shared: HashMap<(CRef, CRef), usize>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns an input label and returns its reference.
    pub fn input(&mut self, label: &str) -> CRef {
        if let Some(&i) = self.input_index.get(label) {
            return CRef::In(i);
        }
        let i = self.inputs.len();
        self.inputs.push(label.to_string());
        self.input_index.insert(label.to_string(), i);
        CRef::In(i)
    }

    pub fn nand(&mut self, a: CRef, b: CRef) -> CRef {
        match (a, b) {
            (CRef::Const(x), CRef::Const(y)) => return CRef::Const(!(x && y)),
            (CRef::Const(false), _) | (_, CRef::Const(false)) => return CRef::Const(true),
            (CRef::Const(true), other) | (other, CRef::Const(true)) => {
                return self.raw_gate(other, other);
            }
            _ => {}
        }
        self.raw_gate(a, b)
    }

    fn raw_gate(&mut self, a: CRef, b: CRef) -> CRef {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(&g) = self.shared.get(&key) {
            return CRef::Gate(g);
        }
        let g = self.gates.len();
        self.gates.push(key);
        self.shared.insert(key, g);
        CRef::Gate(g)
    }

    fn nand_reduced(&mut self, a: CRef, b: CRef) -> CRef {
        match (a, b) {
            (CRef::Const(x), CRef::Const(y)) => return CRef::Const(!(x && y)),
            (CRef::Const(false), _) | (_, CRef::Const(false)) => return CRef::Const(true),
            (CRef::Const(true), other) | (other, CRef::Const(true)) => {
                return self.nand_reduced(other, other);
            }
            _ => {}
        }
        let inverted = |me: &Self, r: CRef| match r {
            CRef::Gate(g) if me.gates[g].0 == me.gates[g].1 => Some(me.gates[g].0),
            _ => None,
        };
        if a == b {
            if let Some(x) = inverted(self, a) {
                return x;
            }
        } else if inverted(self, a) == Some(b) || inverted(self, b) == Some(a) {
            return CRef::Const(true);
        }
        self.nand(a, b)
    }

    pub fn not(&mut self, a: CRef) -> CRef {
        self.nand(a, a)
    }

    pub fn and(&mut self, a: CRef, b: CRef) -> CRef {
        let n = self.nand(a, b);
        self.not(n)
    }

    pub fn or(&mut self, a: CRef, b: CRef) -> CRef {
        let na = self.not(a);
        let nb = self.not(b);
        self.nand(na, nb)
    }

    pub fn xor(&mut self, a: CRef, b: CRef) -> CRef {
        match (a, b) {
            (CRef::Const(x), y) | (y, CRef::Const(x)) => {
                return if x { self.not(y) } else { y };
            }
            _ => {}
        }
        let n = self.nand(a, b);
        let x = self.nand(a, n);
        let y = self.nand(b, n);
        self.nand(x, y)
    }

    /// Finishes construction. Gates not reachable from `out` are dropped.
    pub fn finish(self, out: CRef) -> Circuit {
        let mut live = vec![false; self.gates.len()];
        let mut stack = Vec::new();
        if let CRef::Gate(g) = out {
            stack.push(g);
        }
        while let Some(g) = stack.pop() {
            if live[g] {
                continue;
            }
            live[g] = true;
            for r in [self.gates[g].0, self.gates[g].1] {
                if let CRef::Gate(h) = r {
                    stack.push(h);
                }
            }
        }
        let mut remap = vec![usize::MAX; self.gates.len()];
        let mut gates = Vec::new();
        for (i, gate) in self.gates.iter().enumerate() {
            if live[i] {
                remap[i] = gates.len();
                let fix = |r: CRef| match r {
                    CRef::Gate(g) => CRef::Gate(remap[g]),
                    other => other,
                };
                gates.push((fix(gate.0), fix(gate.1)));
            }
        }
        let out = match out {
            CRef::Gate(g) => CRef::Gate(remap[g]),
            other => other,
        };
        Circuit {
            inputs: self.inputs,
            gates,
            out,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RefJson {
    In {
        #[serde(rename = "in")]
        input: String,
    },
    Gate {
        g: usize,
    },
    Const {
        #[serde(rename = "const")]
        value: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    a: RefJson,
    b: RefJson,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    inputs: Vec<String>,
    gates: Vec<GateJson>,
    out: RefJson,
}

impl CircuitJson {
    fn from(c: &Circuit) -> Self {
        let conv = |r: CRef| match r {
            CRef::In(i) => RefJson::In {
                input: c.inputs[i].clone(),
            },
            CRef::Gate(g) => RefJson::Gate { g },
            CRef::Const(value) => RefJson::Const { value },
        };
        CircuitJson {
            inputs: c.inputs.clone(),
            gates: c
                .gates
                .iter()
                .map(|(a, b)| GateJson {
                    a: conv(*a),
                    b: conv(*b),
                })
                .collect(),
            out: conv(c.out),
        }
    }

    fn into_circuit(self) -> Result<Circuit, CircuitError> {
        let mut index = HashMap::new();
        for (i, label) in self.inputs.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(CircuitError::DuplicateInput(label.clone()));
            }
        }
        let conv = |r: RefJson| -> Result<CRef, CircuitError> {
            Ok(match r {
                RefJson::In { input } => CRef::In(
                    *index
                        .get(&input)
                        .ok_or(CircuitError::UnknownInput(input.clone()))?,
                ),
                RefJson::Gate { g } => CRef::Gate(g),
                RefJson::Const { value } => CRef::Const(value),
            })
        };
        let gates = self
            .gates
            .into_iter()
            .map(|g| Ok((conv(g.a)?, conv(g.b)?)))
            .collect::<Result<Vec<_>, CircuitError>>()?;
        Ok(Circuit {
            inputs: self.inputs,
            gates,
            out: conv(self.out)?,
        })
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "circuit({} inputs, {} gates)",
            self.inputs.len(),
            self.gates.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn gate_costs() {
        let mut b = Builder::new();
        let x = b.input("x");
        let _ = b.not(x);
        assert_eq!(b.gates.len(), 1);

        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let _ = b.and(x, y);
        assert_eq!(b.gates.len(), 2);

        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let _ = b.or(x, y);
        assert_eq!(b.gates.len(), 3);

        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let _ = b.xor(x, y);
        assert_eq!(b.gates.len(), 4);
    }

    #[test]
    fn truth_tables() {
        let table: &[(&str, fn(&mut Builder, CRef, CRef) -> CRef, [bool; 4])] = &[
            ("and", Builder::and, [false, false, false, true]),
            ("or", Builder::or, [false, true, true, true]),
            ("xor", Builder::xor, [false, true, true, false]),
            ("nand", Builder::nand, [true, true, true, false]),
        ];
        for (name, op, expect) in table {
            for (i, (vx, vy)) in [(false, false), (false, true), (true, false), (true, true)]
                .into_iter()
                .enumerate()
            {
                let mut b = Builder::new();
                let x = b.input("x");
                let y = b.input("y");
                let o = op(&mut b, x, y);
                let c = b.finish(o);
                let got = c.eval_with(|l| if l == "x" { vx } else { vy });
                assert_eq!(got, expect[i], "{name}({vx},{vy})");
            }
        }
    }

    #[test]
    fn constant_folding() {
        let mut b = Builder::new();
        let x = b.input("x");
        let t = CRef::Const(true);
        let f = CRef::Const(false);
        assert_eq!(b.nand(f, x), CRef::Const(true));
        assert_eq!(b.and(t, t), CRef::Const(true));
        assert_eq!(b.or(f, f), CRef::Const(false));
        let nx = b.nand(t, x);
        assert_eq!(nx, b.not(x));
    }

    #[test]
    fn hash_consing_shares_gates() {
        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let g1 = b.nand(x, y);
        let g2 = b.nand(y, x);
        assert_eq!(g1, g2);
        assert_eq!(b.gates.len(), 1);
    }

    #[test]
    fn finish_drops_dead_gates() {
        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let _dead = b.and(x, y);
        let keep = b.not(x);
        let c = b.finish(keep);
        assert_eq!(c.gate_count(), 1);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn substitute_or_of_two() {
        let mut b = Builder::new();
        let p = b.input("p");
        let q = b.input("q");
        let o = b.and(p, q);
        let c = b.finish(o);
        let s = c.substitute(|label| match label {
            "p" => InputSubst::Or(vec!["p0".into(), "p1".into()]),
            other => InputSubst::Input(other.to_string()),
        });
        assert!(s.validate().is_ok());
        assert!(s.eval_set(&set(&["p0", "q"])));
        assert!(s.eval_set(&set(&["p1", "q"])));
        assert!(!s.eval_set(&set(&["p0", "p1"])));
        assert!(!s.eval_set(&set(&["q"])));
    }

    #[test]
    fn substitute_const_refolds() {
        let mut b = Builder::new();
        let p = b.input("p");
        let q = b.input("q");
        let o = b.or(p, q);
        let c = b.finish(o);
        let s = c.substitute(|label| match label {
            "p" => InputSubst::Const(false),
            other => InputSubst::Input(other.to_string()),
        });
        assert!(s.eval_set(&set(&["q"])));
        assert!(!s.eval_set(&set(&[])));
        let t = c.substitute(|_| InputSubst::Const(true));
        assert_eq!(t.out(), CRef::Const(true));
        assert_eq!(t.gate_count(), 0);
    }

    #[test]
    fn simplified_removes_double_negation() {
        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let nx = b.not(x);
        let nnx = b.not(nx);
        let o = b.and(nnx, y);
        let c = b.finish(o);
        assert_eq!(c.gate_count(), 4);
        let s = c.simplified();
        assert_eq!(s.gate_count(), 2);
        for (vx, vy) in [(false, false), (false, true), (true, false), (true, true)] {
            let f = |l: &str| if l == "x" { vx } else { vy };
            assert_eq!(s.eval_with(f), c.eval_with(f));
        }
    }

    #[test]
    fn simplified_folds_contradictions() {
        let mut b = Builder::new();
        let x = b.input("x");
        let nx = b.not(x);
        let o = b.nand(x, nx);
        let c = b.finish(o);
        let s = c.simplified();
        assert_eq!(s.out(), CRef::Const(true));
        assert_eq!(s.gate_count(), 0);
        assert_eq!(s.inputs(), c.inputs());
    }

    #[test]
    fn simplified_keeps_xor_intact() {
        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let o = b.xor(x, y);
        let c = b.finish(o);
        let s = c.simplified();
        assert_eq!(s.gate_count(), c.gate_count());
        assert_eq!(s, c.simplified().simplified());
    }

    #[test]
    fn json_round_trip() {
        let mut b = Builder::new();
        let x = b.input("x");
        let y = b.input("y");
        let o = b.xor(x, y);
        let c = b.finish(o);
        let v = c.to_json();
        let back = Circuit::from_json(&v).unwrap();
        assert_eq!(back, c);
        let constant = Circuit::constant(true);
        let v = constant.to_json();
        assert_eq!(v["out"]["const"], serde_json::Value::Bool(true));
        assert_eq!(Circuit::from_json(&v).unwrap(), constant);
    }

    #[test]
    fn validate_rejects_forward_reference() {
        let v = serde_json::json!({
            "inputs": ["x"],
            "gates": [{"a": {"g": 1}, "b": {"in": "x"}}, {"a": {"in": "x"}, "b": {"in": "x"}}],
            "out": {"g": 0}
        });
        assert!(Circuit::from_json(&v).is_err());
    }
}
