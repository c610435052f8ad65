use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::{GeneratorMatrix, MarkovError, StationaryDistribution, Tolerances};

/// States reachable from `initial` through positive-rate transitions
/// (including `initial` itself).
pub fn reachable_states(generator: &GeneratorMatrix, initial: usize) -> Result<BTreeSet<usize>, MarkovError> {
    check_state(generator, initial)?;
    let mut seen = vec![false; generator.n_states()];
    let mut queue = VecDeque::from([initial]);
    seen[initial] = true;
    while let Some(i) = queue.pop_front() {
        for &(j, _) in generator.row(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(seen.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect())
}

/// Stationary distribution of the chain started in `initial`, using the
/// default [`Tolerances`].
pub fn steady_state(generator: &GeneratorMatrix, initial: usize) -> Result<StationaryDistribution, MarkovError> {
    steady_state_with(generator, initial, &Tolerances::default())
}

/// Stationary distribution of the chain started in `initial`.
///
/// The reachable part of the chain must contain exactly one closed
/// communicating class; transient reachable states and unreachable states get
/// probability zero. The class is solved directly: one balance equation is
/// replaced by the normalization constraint and the dense system is solved by
/// LU with partial pivoting plus one step of iterative refinement.
pub fn steady_state_with(
    generator: &GeneratorMatrix,
    initial: usize,
    tol: &Tolerances,
) -> Result<StationaryDistribution, MarkovError> {
    let reachable: Vec<usize> = reachable_states(generator, initial)?.into_iter().collect();
    let class = closed_class(generator, &reachable)?;
    let n = generator.n_states();
    let m = class.len();

    // local index of each class state, usize::MAX outside
    let mut local = vec![usize::MAX; n];
    for (k, &s) in class.iter().enumerate() {
        local[s] = k;
    }

    // A = Q_Cᵀ with the last row replaced by ones; A x = e_m
    let mut a = vec![vec![0.0; m]; m];
    for (k, &s) in class.iter().enumerate() {
        a[k][k] = generator.entry(s, s);
        for &(j, r) in generator.row(s) {
            let lj = local[j];
            // closed class: every target is inside
            debug_assert!(lj != usize::MAX);
            a[lj][k] += r;
        }
    }
    for v in a[m - 1].iter_mut() {
        *v = 1.0;
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;

    let lu = Lu::factor(a.clone())?;
    let mut x = lu.solve(&b);
    // one refinement step: x += A⁻¹ (b − A x)
    let r: Vec<f64> = (0..m)
        .map(|i| b[i] - a[i].iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>())
        .collect();
    let d = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(&d) {
        *xi += di;
    }

    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    let mut pi = vec![0.0; n];
    for (k, &s) in class.iter().enumerate() {
        pi[s] = x[k] / total;
    }

    let dist = StationaryDistribution::from_vec(pi);
    let sum: f64 = dist.probabilities().iter().sum();
    if libm::fabs(sum - 1.0) > tol.normalization {
        return Err(MarkovError::Residual {
            residual: libm::fabs(sum - 1.0),
            tolerance: tol.normalization,
        });
    }
    let residual = dist.residual(generator);
    if residual > tol.residual {
        return Err(MarkovError::Residual {
            residual,
            tolerance: tol.residual,
        });
    }
    Ok(dist)
}

fn check_state(generator: &GeneratorMatrix, s: usize) -> Result<(), MarkovError> {
    if s >= generator.n_states() {
        return Err(MarkovError::Validation(alloc::format!(
            "state {s} out of range for {} states",
            generator.n_states()
        )));
    }
    Ok(())
}

/// The unique closed communicating class among `states` (sorted), found with
/// Tarjan's strongly connected components restricted to that subgraph.
fn closed_class(generator: &GeneratorMatrix, states: &[usize]) -> Result<Vec<usize>, MarkovError> {
    let comps = tarjan(generator, states);
    let n = generator.n_states();
    let mut comp_of = vec![usize::MAX; n];
    for (c, members) in comps.iter().enumerate() {
        for &s in members {
            comp_of[s] = c;
        }
    }
    let closed: Vec<usize> = comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&s| generator.row(s).iter().all(|&(j, _)| comp_of[j] == *c))
        })
        .map(|(c, _)| c)
        .collect();
    match closed.as_slice() {
        [c] => {
            let mut members = comps[*c].clone();
            members.sort_unstable();
            Ok(members)
        }
        _ => Err(MarkovError::Structure(alloc::format!(
            "reachable subchain has {} closed communicating classes; the stationary limit depends on the start state",
            closed.len()
        ))),
    }
}

fn tarjan(generator: &GeneratorMatrix, states: &[usize]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = generator.n_states();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0usize;
    // (node, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for &root in states {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let row = generator.row(v);
            if *pos < row.len() {
                let w = row[*pos].0;
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Dense LU factorization with partial pivoting.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<Vec<f64>>) -> Result<Lu, MarkovError> {
        let m = a.len();
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let (p, max) =
                (k..m)
                    .map(|i| (i, libm::fabs(a[i][k])))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max == 0.0 {
                return Err(MarkovError::Structure("singular balance system".into()));
            }
            a.swap(k, p);
            perm.swap(k, p);
            let pivot = a[k][k];
            let (upper, lower) = a.split_at_mut(k + 1);
            let row_k = &upper[k];
            for row in lower.iter_mut() {
                let f = row[k] / pivot;
                if f == 0.0 {
                    continue;
                }
                row[k] = f;
                for j in k + 1..m {
                    row[j] -= f * row_k[j];
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.lu.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..m {
            let s: f64 = (0..i).map(|j| self.lu[i][j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|j| self.lu[i][j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i][i];
        }
        y
    }
}
