//! The plain and oracle-driven ABPS chains, built directly from
//! [`AbpsParams`], and their stationary metrics.

mod params;

pub use params::{default_params, AbpsParams, Mode, Nic, OracleState, Phase, Variant};

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::lang::{ComposedChain, LangError, StateVariable};
use crate::markov::{
    build_generator, expected_reward, steady_state, steady_state_probability, GeneratorMatrix, MarkovError,
    RewardVector, StationaryDistribution, Transition,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("chain has no {0}")]
    Missing(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub const VAR_UMTS: &str = "s_U";
pub const VAR_WIFI: &str = "s_W";
pub const VAR_ORACLE: &str = "s_oracle";
pub const REWARD_ENERGY: &str = "energy";
pub const REWARD_THROUGHPUT: &str = "throughput";

/// Global state of an ABPS chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbpsState {
    pub umts: Phase,
    pub wifi: Phase,
    pub oracle: OracleState,
}

impl AbpsState {
    pub const INITIAL: AbpsState = AbpsState {
        umts: Phase::Disconnected,
        wifi: Phase::Disconnected,
        oracle: OracleState::Both,
    };

    pub fn phase(&self, nic: Nic) -> Phase {
        match nic {
            Nic::Umts => self.umts,
            Nic::Wifi => self.wifi,
        }
    }

    fn with_phase(mut self, nic: Nic, phase: Phase) -> Self {
        match nic {
            Nic::Umts => self.umts = phase,
            Nic::Wifi => self.wifi = phase,
        }
        self
    }

    fn with_oracle(mut self, oracle: OracleState) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn is_available(&self) -> bool {
        self.umts == Phase::Connected || self.wifi == Phase::Connected
    }

    fn code(&self) -> [i64; 3] {
        [self.umts.code(), self.wifi.code(), self.oracle.code()]
    }
}

impl fmt::Display for AbpsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(U={}, W={}, {})",
            self.umts.name(),
            self.wifi.name(),
            self.oracle.name()
        )
    }
}

/// Outgoing transitions of `s` (self-loops excluded).
pub fn successors(s: AbpsState, params: &AbpsParams, variant: Variant, mode: Mode) -> Vec<(AbpsState, f64)> {
    let mut out = Vec::with_capacity(8);
    for nic in Nic::ALL {
        let next = |p| s.with_phase(nic, p);
        match s.phase(nic) {
            Phase::Off => {}
            Phase::Disconnected => out.push((next(Phase::Setup), params.alpha(nic))),
            Phase::Setup => {
                out.push((next(Phase::Connected), params.setup_success_rate(nic, mode)));
                out.push((next(Phase::Disconnected), params.setup_failure_rate(nic)));
            }
            Phase::Connected => out.push((next(Phase::Failed), params.loss_rate(nic, s.oracle))),
            Phase::Failed => out.push((next(Phase::Disconnected), params.mu(nic))),
        }
    }
    use OracleState::*;
    let moves: &[(OracleState, Option<(Nic, bool)>)] = match s.oracle {
        UmtsOnly => &[(Both, Some((Nic::Wifi, true)))],
        Both => &[
            (UmtsOnly, Some((Nic::Wifi, false))),
            (WifiOnly, Some((Nic::Umts, false))),
        ],
        WifiOnly => &[(Both, Some((Nic::Umts, true)))],
    };
    for &(to, action) in moves {
        let rate = params.oracle_rate(s.oracle, to);
        let target = match (variant, action) {
            (Variant::Plain, _) | (_, None) => s.with_oracle(to),
            (Variant::Oracle, Some((nic, true))) => {
                // power-on only synchronizes with an NIC that is off
                if s.phase(nic) != Phase::Off {
                    continue;
                }
                s.with_oracle(to).with_phase(nic, Phase::Disconnected)
            }
            (Variant::Oracle, Some((nic, false))) => s.with_oracle(to).with_phase(nic, Phase::Off),
        };
        if target != s && rate > 0.0 {
            out.push((target, rate));
        }
    }
    out
}

/// Builds the reachable chain of `variant` from [`AbpsState::INITIAL`].
///
/// State variables and reward structure names match the model listings, so
/// the result can be compared with a chain composed from them.
pub fn build(params: &AbpsParams, variant: Variant, mode: Mode) -> Result<ComposedChain, ModelError> {
    params.validate()?;
    let mut index: BTreeMap<AbpsState, usize> = BTreeMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let mut transitions = Vec::new();
    index.insert(AbpsState::INITIAL, 0);
    states.push(AbpsState::INITIAL);
    queue.push_back(AbpsState::INITIAL);
    while let Some(s) = queue.pop_front() {
        let from = index[&s];
        for (t, rate) in successors(s, params, variant, mode) {
            let to = *index.entry(t).or_insert_with(|| {
                states.push(t);
                queue.push_back(t);
                states.len() - 1
            });
            transitions.push(Transition::new(from, to, rate));
        }
    }
    let generator = build_generator(states.len(), transitions)?;

    let energy = states
        .iter()
        .map(|s| params.state_power(s.umts, s.wifi, variant, mode))
        .collect();
    let throughput = states.iter().map(|s| params.state_throughput(s.umts, s.wifi)).collect();
    let rewards = alloc::vec![
        (REWARD_ENERGY.to_string(), RewardVector::new(energy)?),
        (REWARD_THROUGHPUT.to_string(), RewardVector::new(throughput)?),
    ];

    let nic_low = match variant {
        Variant::Plain => Phase::Disconnected.code(),
        Variant::Oracle => Phase::Off.code(),
    };
    let variables = alloc::vec![
        StateVariable {
            name: VAR_UMTS.into(),
            low: nic_low,
            high: Phase::Failed.code(),
        },
        StateVariable {
            name: VAR_WIFI.into(),
            low: nic_low,
            high: Phase::Failed.code(),
        },
        StateVariable {
            name: VAR_ORACLE.into(),
            low: OracleState::UmtsOnly.code(),
            high: OracleState::WifiOnly.code(),
        },
    ];
    let labels = states.iter().map(|s| s.code().to_vec()).collect();
    Ok(ComposedChain::new(variables, labels, generator, rewards, 0)?)
}

pub fn build_plain(params: &AbpsParams, mode: Mode) -> Result<ComposedChain, ModelError> {
    build(params, Variant::Plain, mode)
}

pub fn build_oracle(params: &AbpsParams, mode: Mode) -> Result<ComposedChain, ModelError> {
    build(params, Variant::Oracle, mode)
}

/// Generator of the oracle chain alone, indexed `code - 1`.
pub fn oracle_generator(params: &AbpsParams) -> Result<GeneratorMatrix, ModelError> {
    let mut t = Vec::new();
    for from in OracleState::ALL {
        for to in OracleState::ALL {
            let r = params.oracle_rate(from, to);
            if r > 0.0 {
                t.push(Transition::new(from as usize - 1, to as usize - 1, r));
            }
        }
    }
    Ok(build_generator(3, t)?)
}

/// Decodes state `i` of a chain that uses the listing variables.
pub fn decode_state(chain: &ComposedChain, i: usize) -> Option<AbpsState> {
    Some(AbpsState {
        umts: Phase::from_code(chain.value(i, VAR_UMTS)?)?,
        wifi: Phase::from_code(chain.value(i, VAR_WIFI)?)?,
        oracle: OracleState::from_code(chain.value(i, VAR_ORACLE)?)?,
    })
}

/// Stationary metrics of an ABPS chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsResult {
    /// Probability that at least one NIC is connected.
    pub availability: f64,
    /// Mean power draw (W).
    pub power: f64,
    /// Mean throughput (Mbps).
    pub throughput: f64,
    pub distribution: StationaryDistribution,
}

/// Solves `chain` and evaluates availability (`s_U=3 | s_W=3`) and the
/// `energy` and `throughput` rewards.
pub fn evaluate(chain: &ComposedChain) -> Result<MetricsResult, ModelError> {
    let pu = chain
        .variable_position(VAR_UMTS)
        .ok_or_else(|| ModelError::Missing(alloc::format!("variable {VAR_UMTS}")))?;
    let pw = chain
        .variable_position(VAR_WIFI)
        .ok_or_else(|| ModelError::Missing(alloc::format!("variable {VAR_WIFI}")))?;
    let energy = chain
        .reward(REWARD_ENERGY)
        .ok_or_else(|| ModelError::Missing(alloc::format!("reward structure \"{REWARD_ENERGY}\"")))?;
    let throughput = chain
        .reward(REWARD_THROUGHPUT)
        .ok_or_else(|| ModelError::Missing(alloc::format!("reward structure \"{REWARD_THROUGHPUT}\"")))?;
    let connected = Phase::Connected.code();
    let distribution = steady_state(chain.generator(), chain.initial())?;
    let availability = steady_state_probability(&distribution, |i| {
        let s = chain.state(i);
        s[pu] == connected || s[pw] == connected
    });
    Ok(MetricsResult {
        availability,
        power: expected_reward(&distribution, energy)?,
        throughput: expected_reward(&distribution, throughput)?,
        distribution,
    })
}

/// Grid of `(T_W^-, T_W^+)` connection durations in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t_w_minus: Vec<f64>,
    pub t_w_plus: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t_w_minus: alloc::vec![5.0, 10.0, 20.0, 40.0],
            t_w_plus: alloc::vec![40.0, 80.0, 120.0],
        }
    }
}

impl GridSpec {
    /// All points, `T_W^-` varying slowest.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.t_w_minus.len() * self.t_w_plus.len());
        for &m in &self.t_w_minus {
            for &p in &self.t_w_plus {
                out.push((m, p));
            }
        }
        out
    }
}

/// One evaluated grid point. A point that fails validation or solving keeps
/// its error instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub t_w_minus: f64,
    pub t_w_plus: f64,
    pub result: Result<SweepMetrics, ModelError>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMetrics {
    pub availability: f64,
    pub power: f64,
    pub throughput: f64,
}

impl From<&MetricsResult> for SweepMetrics {
    fn from(m: &MetricsResult) -> Self {
        SweepMetrics {
            availability: m.availability,
            power: m.power,
            throughput: m.throughput,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, variant: Variant, t_w_minus: f64, t_w_plus: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.t_w_minus == t_w_minus && r.t_w_plus == t_w_plus)
    }

    pub fn errors(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.result.is_err())
    }
}

/// Evaluates one grid point.
pub fn evaluate_point(params: &AbpsParams, variant: Variant, mode: Mode, t_w_minus: f64, t_w_plus: f64) -> SweepRow {
    let p = params.clone().with_durations(t_w_minus, t_w_plus);
    let result = build(&p, variant, mode)
        .and_then(|c| evaluate(&c))
        .map(|m| SweepMetrics::from(&m));
    SweepRow {
        variant,
        t_w_minus,
        t_w_plus,
        result,
    }
}

/// Evaluates every grid point for each variant, in order.
pub fn sweep(params: &AbpsParams, mode: Mode, grid: &GridSpec, variants: &[Variant]) -> SweepTable {
    let mut rows = Vec::new();
    for &v in variants {
        for (m, p) in grid.points() {
            rows.push(evaluate_point(params, v, mode, m, p));
        }
    }
    SweepTable { rows }
}
