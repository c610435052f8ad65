use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{Expr, ModelSpec};
use super::eval::{compile, resolve_constants, Compiled};
use super::LangError;
use crate::markov::{build_generator, GeneratorMatrix, RewardVector, Transition};

/// Name and range of one state variable of a composed chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVariable {
    pub name: String,
    pub low: i64,
    pub high: i64,
}

/// A CTMC whose states are labeled by assignments to named variables,
/// together with its named reward vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedChain {
    variables: Vec<StateVariable>,
    states: Vec<Vec<i64>>,
    index: BTreeMap<Vec<i64>, usize>,
    generator: GeneratorMatrix,
    rewards: Vec<(String, RewardVector)>,
    initial: usize,
}

impl ComposedChain {
    pub fn new(
        variables: Vec<StateVariable>,
        states: Vec<Vec<i64>>,
        generator: GeneratorMatrix,
        rewards: Vec<(String, RewardVector)>,
        initial: usize,
    ) -> Result<Self, LangError> {
        if states.len() != generator.n_states() {
            return Err(LangError::Structure(alloc::format!(
                "{} state labels for a {}-state generator",
                states.len(),
                generator.n_states()
            )));
        }
        if initial >= states.len() {
            return Err(LangError::Structure("initial state out of range".into()));
        }
        let mut index = BTreeMap::new();
        for (i, s) in states.iter().enumerate() {
            if s.len() != variables.len() {
                return Err(LangError::Structure(alloc::format!(
                    "state {i} has the wrong number of variables"
                )));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(LangError::Structure(alloc::format!("duplicate state label {s:?}")));
            }
        }
        for (name, r) in &rewards {
            if r.len() != states.len() {
                return Err(LangError::Structure(alloc::format!(
                    "reward structure \"{name}\" has the wrong length"
                )));
            }
        }
        Ok(ComposedChain {
            variables,
            states,
            index,
            generator,
            rewards,
            initial,
        })
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn variables(&self) -> &[StateVariable] {
        &self.variables
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Variable assignment of state `i`, in [`variables`](Self::variables) order.
    pub fn state(&self, i: usize) -> &[i64] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn state_index(&self, assignment: &[i64]) -> Option<usize> {
        self.index.get(assignment).copied()
    }

    pub fn variable_position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Value of variable `name` in state `i`.
    pub fn value(&self, i: usize, name: &str) -> Option<i64> {
        self.variable_position(name).map(|k| self.states[i][k])
    }

    pub fn rewards(&self) -> &[(String, RewardVector)] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardVector> {
        self.rewards.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    /// Human-readable label such as `s_U=1,s_W=3,s_oracle=2`.
    pub fn label(&self, i: usize) -> String {
        let mut out = String::new();
        for (k, v) in self.variables.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&alloc::format!("{}={}", v.name, self.states[i][k]));
        }
        out
    }

    /// States satisfying a boolean predicate over the chain's variables and
    /// the given constants.
    pub fn states_where(&self, predicate: &Expr, constants: &BTreeMap<String, f64>) -> Result<Vec<bool>, LangError> {
        let vars: BTreeMap<String, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        let c = compile(predicate, constants, &vars)?;
        self.states
            .iter()
            .map(|s| c.eval(s).and_then(|v| v.as_bool()))
            .collect()
    }
}

struct CompiledBranch {
    rate: Option<Compiled>,
    updates: Vec<(usize, Compiled)>,
}

struct CompiledCommand {
    module: usize,
    label: Option<String>,
    guard: Compiled,
    branches: Vec<CompiledBranch>,
}

/// Composes the modules of `spec` into a single CTMC restricted to the states
/// reachable from the initial assignment.
///
/// Unlabeled commands interleave. A label declared by two or more modules
/// synchronizes them: the joint transition exists when every such module has
/// an enabled command for it and its rate is the product of the branch rates
/// (an omitted rate counts as 1). A label used by a single module behaves as
/// unlabeled. All rates and updates are evaluated in the source state;
/// self-loops are dropped.
pub fn compose(spec: &ModelSpec, bindings: &BTreeMap<String, f64>) -> Result<ComposedChain, LangError> {
    let constants = resolve_constants(spec, bindings)?;

    let mut variables = Vec::new();
    let mut var_index = BTreeMap::new();
    let mut initial = Vec::new();
    for v in spec.variables() {
        var_index.insert(v.name.clone(), variables.len());
        variables.push(StateVariable {
            name: v.name.clone(),
            low: v.low,
            high: v.high,
        });
        initial.push(v.init);
    }

    let mut commands = Vec::new();
    let mut participants: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (mi, m) in spec.modules.iter().enumerate() {
        for c in &m.commands {
            if let Some(l) = &c.label {
                participants.entry(l.clone()).or_default().insert(mi);
            }
            let mut branches = Vec::new();
            for b in &c.branches {
                let rate = match &b.rate {
                    Some(r) => Some(compile(r, &constants, &var_index)?),
                    None => None,
                };
                let updates = b
                    .updates
                    .iter()
                    .map(|u| Ok((var_index[&u.variable], compile(&u.value, &constants, &var_index)?)))
                    .collect::<Result<Vec<_>, LangError>>()?;
                branches.push(CompiledBranch { rate, updates });
            }
            commands.push(CompiledCommand {
                module: mi,
                label: c.label.clone(),
                guard: compile(&c.guard, &constants, &var_index)?,
                branches,
            });
        }
    }
    let synced: BTreeMap<String, Vec<usize>> = participants
        .into_iter()
        .filter(|(_, ms)| ms.len() > 1)
        .map(|(l, ms)| (l, ms.into_iter().collect()))
        .collect();

    let mut rewards_compiled = Vec::new();
    for r in &spec.rewards {
        let items = r
            .items
            .iter()
            .map(|it| {
                Ok((
                    compile(&it.guard, &constants, &var_index)?,
                    compile(&it.value, &constants, &var_index)?,
                ))
            })
            .collect::<Result<Vec<_>, LangError>>()?;
        rewards_compiled.push((r.name.clone(), items));
    }

    let describe = |s: &[i64]| -> String {
        let mut out = String::new();
        for (k, v) in variables.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&alloc::format!("{}={}", v.name, s[k]));
        }
        out
    };

    let mut states: Vec<Vec<i64>> = alloc::vec![initial.clone()];
    let mut index: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    index.insert(initial, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut transitions: Vec<Transition> = Vec::new();

    while let Some(si) = queue.pop_front() {
        let src = states[si].clone();
        let mut out: Vec<(Vec<i64>, f64)> = Vec::new();

        // independent moves
        for c in &commands {
            let local = match &c.label {
                None => true,
                Some(l) => !synced.contains_key(l),
            };
            if !local || !c.guard.eval(&src)?.as_bool()? {
                continue;
            }
            for b in &c.branches {
                let rate = branch_rate(b, &src, &spec.modules[c.module].name, &describe)?;
                if rate == 0.0 {
                    continue;
                }
                let mut dst = src.clone();
                apply(&b.updates, &src, &mut dst, &variables)?;
                out.push((dst, rate));
            }
        }

        // synchronized moves
        for (label, modules) in &synced {
            // per participating module: enabled (rate, updates) alternatives
            let mut per_module: Vec<Vec<(f64, &[(usize, Compiled)])>> = Vec::new();
            for &mi in modules {
                let mut alts = Vec::new();
                for c in commands
                    .iter()
                    .filter(|c| c.module == mi && c.label.as_deref() == Some(label))
                {
                    if !c.guard.eval(&src)?.as_bool()? {
                        continue;
                    }
                    for b in &c.branches {
                        let rate = branch_rate(b, &src, &spec.modules[mi].name, &describe)?;
                        alts.push((rate, b.updates.as_slice()));
                    }
                }
                per_module.push(alts);
            }
            if per_module.iter().any(Vec::is_empty) {
                continue;
            }
            let mut choice = alloc::vec![0usize; per_module.len()];
            loop {
                let mut rate = 1.0;
                let mut dst = src.clone();
                for (k, alts) in per_module.iter().enumerate() {
                    let (r, ups) = alts[choice[k]];
                    rate *= r;
                    apply(ups, &src, &mut dst, &variables)?;
                }
                if rate > 0.0 {
                    out.push((dst, rate));
                }
                // odometer over the alternatives
                let mut k = 0;
                while k < choice.len() {
                    choice[k] += 1;
                    if choice[k] < per_module[k].len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
        }

        for (dst, rate) in out {
            if dst == src {
                continue;
            }
            let di = match index.get(&dst) {
                Some(&d) => d,
                None => {
                    let d = states.len();
                    index.insert(dst.clone(), d);
                    states.push(dst);
                    queue.push_back(d);
                    d
                }
            };
            transitions.push(Transition::new(si, di, rate));
        }
    }

    let generator = build_generator(states.len(), transitions)?;

    let mut rewards = Vec::new();
    for (name, items) in &rewards_compiled {
        let mut values = Vec::with_capacity(states.len());
        for s in &states {
            let mut acc = 0.0;
            for (g, v) in items {
                if g.eval(s)?.as_bool()? {
                    acc += v.eval(s)?.as_num()?;
                }
            }
            values.push(acc);
        }
        rewards.push((name.clone(), RewardVector::new(values)?));
    }

    ComposedChain::new(variables, states, generator, rewards, 0)
}

fn branch_rate(
    b: &CompiledBranch,
    src: &[i64],
    module: &str,
    describe: &dyn Fn(&[i64]) -> String,
) -> Result<f64, LangError> {
    let rate = match &b.rate {
        Some(r) => r.eval(src)?.as_num()?,
        None => 1.0,
    };
    if !rate.is_finite() || rate < 0.0 {
        return Err(LangError::NegativeRate {
            module: module.to_string(),
            state: describe(src),
            rate,
        });
    }
    Ok(rate)
}

fn apply(
    updates: &[(usize, Compiled)],
    src: &[i64],
    dst: &mut [i64],
    variables: &[StateVariable],
) -> Result<(), LangError> {
    for (i, e) in updates {
        let v = e.eval(src)?.as_num()?;
        let var = &variables[*i];
        if libm::trunc(v) != v || (v as i64) < var.low || (v as i64) > var.high {
            return Err(LangError::UpdateOutOfRange {
                variable: var.name.clone(),
                value: v,
            });
        }
        dst[*i] = v as i64;
    }
    Ok(())
}

/// Outcome of [`equivalent`].
#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub equal: bool,
    pub differences: Vec<String>,
}

/// Absolute tolerance used when comparing rates and rewards.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

/// Checks whether two labeled chains are the same up to a renumbering of
/// states by variable assignment: same states, same initial state, all rates
/// and shared reward structures equal within [`EQUIVALENCE_TOLERANCE`].
pub fn equivalent(a: &ComposedChain, b: &ComposedChain) -> Equivalence {
    let mut diffs = Vec::new();
    let names_a: BTreeSet<&str> = a.variables.iter().map(|v| v.name.as_str()).collect();
    let names_b: BTreeSet<&str> = b.variables.iter().map(|v| v.name.as_str()).collect();
    if names_a != names_b {
        diffs.push(alloc::format!("variable sets differ: {names_a:?} vs {names_b:?}"));
        return Equivalence {
            equal: false,
            differences: diffs,
        };
    }
    // position in b of each of a's variables
    let perm: Vec<usize> = a
        .variables
        .iter()
        .map(|v| b.variable_position(&v.name).expect("same variable set"))
        .collect();
    let to_b = |s: &[i64]| -> Vec<i64> {
        let mut out = alloc::vec![0; s.len()];
        for (k, &p) in perm.iter().enumerate() {
            out[p] = s[k];
        }
        out
    };

    let mut map = alloc::vec![usize::MAX; a.n_states()];
    for i in 0..a.n_states() {
        match b.state_index(&to_b(&a.states[i])) {
            Some(j) => map[i] = j,
            None => diffs.push(alloc::format!("state ({}) missing from second chain", a.label(i))),
        }
    }
    if a.n_states() != b.n_states() {
        diffs.push(alloc::format!(
            "state counts differ: {} vs {}",
            a.n_states(),
            b.n_states()
        ));
    }
    if map[a.initial] != b.initial {
        diffs.push(alloc::format!(
            "initial states differ: ({}) vs ({})",
            a.label(a.initial),
            b.label(b.initial)
        ));
    }

    let mut seen_b = BTreeSet::new();
    for t in a.generator.transitions() {
        let (i, j) = (map[t.from], map[t.to]);
        if i == usize::MAX || j == usize::MAX {
            continue;
        }
        seen_b.insert((i, j));
        let rb = b.generator.entry(i, j);
        if libm::fabs(t.rate - rb) > EQUIVALENCE_TOLERANCE {
            diffs.push(alloc::format!(
                "rate ({}) -> ({}): {:e} vs {:e}",
                a.label(t.from),
                a.label(t.to),
                t.rate,
                rb
            ));
        }
    }
    for t in b.generator.transitions() {
        if !seen_b.contains(&(t.from, t.to)) {
            diffs.push(alloc::format!(
                "rate ({}) -> ({}): missing vs {:e}",
                b.label(t.from),
                b.label(t.to),
                t.rate
            ));
        }
    }

    for (name, ra) in &a.rewards {
        if let Some(rb) = b.reward(name) {
            for i in 0..a.n_states() {
                if map[i] == usize::MAX {
                    continue;
                }
                let (x, y) = (ra.as_slice()[i], rb.as_slice()[map[i]]);
                if libm::fabs(x - y) > EQUIVALENCE_TOLERANCE {
                    diffs.push(alloc::format!("reward \"{name}\" at ({}): {x} vs {y}", a.label(i)));
                }
            }
        }
    }

    Equivalence {
        equal: diffs.is_empty(),
        differences: diffs,
    }
}
