//! Exact rational linear programming for potential synthesis.
//!
//! Solves systems of the form `find x >= 0 with A x >= b` over arbitrary
//! precision rationals. Small systems go through Fourier-Motzkin elimination
//! with multiplier tracking, so an infeasible system yields the exact
//! combination of rows that proves infeasibility. Larger systems fall back to
//! a two-phase primal simplex with Bland's rule, where the same certificate is
//! recovered from the reduced costs of the artificial columns.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;

/// A constraint row `coeffs . x >= rhs`.
#[derive(Clone, Debug)]
pub(crate) struct LpRow {
    pub coeffs: Vec<BigRational>,
    pub rhs: BigRational,
}

/// Result of solving `find x >= 0 with A x >= b`.
pub(crate) enum LpOutcome {
    /// A feasible point, one value per variable.
    Feasible(Vec<BigRational>),
    /// Multipliers `y >= 0`, one per input row, with `y^T A = 0` and
    /// `y^T b > 0`.
    Infeasible(Vec<BigRational>),
}

/// Row count above which Fourier-Motzkin aborts in favour of simplex.
const FM_ROW_LIMIT: usize = 20_000;

pub(crate) fn solve_nonneg(rows: &[LpRow], num_vars: usize) -> LpOutcome {
    if num_vars <= 20 {
        if let Some(outcome) = fourier_motzkin(rows, num_vars) {
            return outcome;
        }
    }
    simplex(rows, num_vars)
}

/// One working row during elimination: the constraint itself plus the
/// multipliers of the original rows it combines.
#[derive(Clone)]
struct TrackedRow {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
    combo: Vec<BigRational>,
}

impl TrackedRow {
    fn normalise(&mut self) {
        let mut scale: Option<BigRational> = None;
        for c in self.coeffs.iter().chain(std::iter::once(&self.rhs)) {
            if !c.is_zero() {
                let mag = c.abs();
                scale = Some(match scale {
                    Some(s) if s <= mag => s,
                    _ => mag,
                });
            }
        }
        if let Some(s) = scale {
            if !s.is_one() {
                for c in &mut self.coeffs {
                    *c = &*c / &s;
                }
                self.rhs = &self.rhs / &s;
                for c in &mut self.combo {
                    *c = &*c / &s;
                }
            }
        }
    }

}

/// Fourier-Motzkin elimination over `A x >= b, x >= 0`.
///
/// Returns `None` when the intermediate system outgrows [`FM_ROW_LIMIT`], in
/// which case the caller retries with simplex.
fn fourier_motzkin(rows: &[LpRow], num_vars: usize) -> Option<LpOutcome> {
    let num_tracked = rows.len();
    let mut work: Vec<TrackedRow> = Vec::with_capacity(rows.len() + num_vars);
    for (i, row) in rows.iter().enumerate() {
        let mut combo = vec![BigRational::zero(); num_tracked];
        combo[i] = BigRational::one();
        work.push(TrackedRow {
            coeffs: row.coeffs.clone(),
            rhs: row.rhs.clone(),
            combo,
        });
    }
    for v in 0..num_vars {
        let mut coeffs = vec![BigRational::zero(); num_vars];
        coeffs[v] = BigRational::one();
        work.push(TrackedRow {
            coeffs,
            rhs: BigRational::zero(),
            combo: vec![BigRational::zero(); num_tracked],
        });
    }

    // Bounds on each eliminated variable, kept for back substitution. Each
    // entry is (variable, lower-bound rows rewritten as
    // `x_v >= (rhs - sum coeffs[w] x_w) / pivot`).
    let mut levels: Vec<(usize, Vec<TrackedRow>)> = Vec::new();
    let mut remaining: Vec<usize> = (0..num_vars).collect();

    while !remaining.is_empty() {
        // Greedy order: eliminate the variable producing the fewest products.
        let var = *remaining
            .iter()
            .min_by_key(|&&v| {
                let pos = work.iter().filter(|r| r.coeffs[v].is_positive()).count();
                let neg = work.iter().filter(|r| r.coeffs[v].is_negative()).count();
                (pos * neg, v)
            })
            .unwrap();
        remaining.retain(|&w| w != var);

        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut next = Vec::new();
        for row in work.drain(..) {
            if row.coeffs[var].is_positive() {
                pos.push(row);
            } else if row.coeffs[var].is_negative() {
                neg.push(row);
            } else {
                next.push(row);
            }
        }
        if pos.len() * neg.len() + next.len() > FM_ROW_LIMIT {
            return None;
        }
        for p in &pos {
            for n in &neg {
                let a = p.coeffs[var].clone();
                let b = -n.coeffs[var].clone();
                let mut coeffs = Vec::with_capacity(num_vars);
                for w in 0..num_vars {
                    coeffs.push(&p.coeffs[w] * &b + &n.coeffs[w] * &a);
                }
                let rhs = &p.rhs * &b + &n.rhs * &a;
                let mut combo = Vec::with_capacity(num_tracked);
                for t in 0..num_tracked {
                    combo.push(&p.combo[t] * &b + &n.combo[t] * &a);
                }
                let mut row = TrackedRow { coeffs, rhs, combo };
                row.normalise();
                if row.coeffs.iter().all(|c| c.is_zero()) {
                    if row.rhs.is_positive() {
                        return Some(LpOutcome::Infeasible(row.combo));
                    }
                    continue;
                }
                next.push(row);
            }
        }
        // Keep, per coefficient vector, only the strongest right hand side.
        let mut best: HashMap<String, usize> = HashMap::new();
        let mut deduped: Vec<TrackedRow> = Vec::new();
        for row in next {
            let mut key = String::new();
            for c in &row.coeffs {
                key.push_str(&c.to_string());
                key.push(',');
            }
            match best.get(&key) {
                Some(&i) if deduped[i].rhs >= row.rhs => {}
                Some(&i) => deduped[i] = row,
                None => {
                    best.insert(key, deduped.len());
                    deduped.push(row);
                }
            }
        }
        work = deduped;
        levels.push((var, pos));
        if work.len() > FM_ROW_LIMIT {
            return None;
        }
    }

    for row in &work {
        if row.rhs.is_positive() {
            return Some(LpOutcome::Infeasible(row.combo.clone()));
        }
    }

    // Feasible: assign each variable its tightest lower bound, walking the
    // elimination levels backwards.
    let mut x = vec![BigRational::zero(); num_vars];
    for (var, lowers) in levels.iter().rev() {
        let mut value = BigRational::zero();
        for row in lowers {
            let mut rest = row.rhs.clone();
            for w in 0..num_vars {
                if w != *var {
                    rest -= &row.coeffs[w] * &x[w];
                }
            }
            let bound = rest / row.coeffs[*var].clone();
            if bound > value {
                value = bound;
            }
        }
        x[*var] = value;
    }
    Some(LpOutcome::Feasible(x))
}

/// Phase-one primal simplex with Bland's rule over exact rationals.
///
/// Columns are laid out as `x` variables, then one surplus per row, then one
/// artificial per row; the initial basis is the artificials. Feasibility is
/// decided by the phase-one optimum, and an infeasible system hands back the
/// simplex multipliers recovered via `pi_i = 1 - redcost(z_i)`.
fn simplex(rows: &[LpRow], num_vars: usize) -> LpOutcome {
    let m = rows.len();
    let cols = num_vars + 2 * m;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    for (i, row) in rows.iter().enumerate() {
        let mut r = vec![BigRational::zero(); cols + 1];
        for (j, c) in row.coeffs.iter().enumerate() {
            r[j] = c.clone();
        }
        r[num_vars + i] = -BigRational::one();
        r[num_vars + m + i] = BigRational::one();
        r[cols] = row.rhs.clone();
        if r[cols].is_negative() {
            for c in r.iter_mut() {
                *c = -c.clone();
            }
            r[num_vars + m + i] = BigRational::one();
            r[num_vars + i] = BigRational::one();
        }
        basis.push(num_vars + m + i);
        t.push(r);
    }

    loop {
        // Reduced cost of column j for the phase-one objective: the cost of
        // the artificials minus the current row combination.
        let mut redcost = vec![BigRational::zero(); cols];
        for (j, rc) in redcost.iter_mut().enumerate() {
            let mut sum = BigRational::zero();
            for (i, row) in t.iter().enumerate() {
                if basis[i] >= num_vars + m {
                    sum += &row[j];
                }
            }
            let c = if j >= num_vars + m {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            *rc = c - sum;
        }
        let entering = (0..cols).find(|&j| redcost[j].is_negative());
        let Some(enter) = entering else {
            let mut objective = BigRational::zero();
            for (i, row) in t.iter().enumerate() {
                if basis[i] >= num_vars + m {
                    objective += &row[cols];
                }
            }
            if objective.is_positive() {
                let mut y = Vec::with_capacity(m);
                for i in 0..m {
                    y.push(BigRational::one() - redcost[num_vars + m + i].clone());
                }
                return LpOutcome::Infeasible(y);
            }
            let mut x = vec![BigRational::zero(); num_vars];
            for (i, &b) in basis.iter().enumerate() {
                if b < num_vars {
                    x[b] = t[i][cols].clone();
                }
            }
            return LpOutcome::Feasible(x);
        };

        let mut leave: Option<usize> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cur = &t[l][cols] / &t[l][enter];
                        let cand = &t[i][cols] / &t[i][enter];
                        cand < cur || (cand == cur && basis[i] < basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Unbounded phase-one objective cannot happen (costs are
            // nonnegative); treat defensively as feasible at the origin.
            return LpOutcome::Feasible(vec![BigRational::zero(); num_vars]);
        };

        let pivot = t[leave][enter].clone();
        for c in t[leave].iter_mut() {
            *c = &*c / &pivot;
        }
        for i in 0..m {
            if i != leave && !t[i][enter].is_zero() {
                let factor = t[i][enter].clone();
                for j in 0..=cols {
                    let delta = &factor * &t[leave][j];
                    t[i][j] = &t[i][j] - &delta;
                }
            }
        }
        basis[leave] = enter;
    }
}
