//! Discrete-event, packet-level simulation of the ABPS client and server
//! proxies on top of the NIC and oracle state processes.
//!
//! The state processes follow the same rates as the analytic chains, so the
//! time-integrated availability, power and state throughput of a long run
//! estimate the stationary metrics. On top of them a constant-rate flow of
//! numbered datagrams is sent over the preferred NIC, acknowledged by the
//! server proxy, and retransmitted over an alternative NIC on timeout.

mod engine;
mod receiver;

pub use receiver::{Receipt, Receiver};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::models::{AbpsParams, AbpsState, Mode, ModelError, Variant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Simulated time (s).
    pub duration: f64,
    pub seed: u64,
    /// Datagrams generated per second; 0 disables traffic.
    pub data_rate: f64,
    pub datagram_bytes: u32,
    pub ack_timeout: f64,
    /// Server-to-client ACK delay (s). ACKs are never lost.
    pub ack_delay: f64,
    pub latency_umts: f64,
    pub latency_wifi: f64,
    /// Datagrams the server holds behind a gap before skipping it.
    pub reorder_window: usize,
    pub replications: usize,
    pub mode: Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 1e5,
            seed: 1,
            data_rate: 50.0,
            datagram_bytes: 1250,
            ack_timeout: 1.0,
            ack_delay: 0.0,
            latency_umts: 0.15,
            latency_wifi: 0.02,
            reorder_window: 4096,
            replications: 30,
            mode: Mode::Text,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return err(alloc::format!("duration must be positive, got {}", self.duration));
        }
        if !(self.ack_timeout > 0.0 && self.ack_timeout.is_finite()) {
            return err(alloc::format!("ACK timeout must be positive, got {}", self.ack_timeout));
        }
        if !(self.data_rate >= 0.0 && self.data_rate.is_finite()) {
            return err(alloc::format!("data rate must be non-negative, got {}", self.data_rate));
        }
        for (name, v) in [
            ("ACK delay", self.ack_delay),
            ("UMTS latency", self.latency_umts),
            ("WiFi latency", self.latency_wifi),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(alloc::format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.datagram_bytes == 0 {
            return err("datagram size must be positive".into());
        }
        if self.replications == 0 {
            return err("at least one replication is required".into());
        }
        Ok(())
    }
}

/// Completed sojourns in one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SojournStat {
    pub count: u64,
    pub total: f64,
}

impl SojournStat {
    pub fn add(&mut self, d: f64) {
        self.count += 1;
        self.total += d;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total / self.count as f64)
    }
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimMetrics {
    pub duration: f64,
    /// Fraction of time with at least one NIC connected.
    pub availability: f64,
    /// Mean power draw (W).
    pub power: f64,
    /// Time-average of the per-state throughput reward (Mbps).
    pub state_throughput: f64,
    /// Distinct acknowledged payload per unit time (Mbps).
    pub goodput: f64,
    /// Oracle sojourns, indexed `OracleState as usize - 1`.
    pub oracle_sojourn: [SojournStat; 3],
    /// NIC phase sojourns, indexed `[Nic::index()][Phase as usize]`.
    pub nic_sojourn: [[SojournStat; 5]; 2],
    /// Sojourns in each visited global state.
    pub state_sojourn: Vec<(AbpsState, SojournStat)>,
    /// Fraction of time spent in each visited global state.
    pub occupancy: Vec<(AbpsState, f64)>,
    pub generated: u64,
    /// Transmissions, including retransmissions.
    pub sent: u64,
    pub retransmissions: u64,
    /// Transmissions that never reached the server.
    pub lost: u64,
    /// Copies the server discarded as already received.
    pub duplicates: u64,
    pub acked: u64,
    /// Datagrams released to the application.
    pub delivered: u64,
    pub late: u64,
    pub skipped: u64,
    /// Datagrams waiting for a usable NIC at the end of the run.
    pub parked: u64,
    /// Transmissions on a NIC that was switched off. Always 0.
    pub inactive_sends: u64,
    /// Sequence numbers released twice to the application. Always 0.
    pub app_duplicates: u64,
    /// Out-of-order releases to the application. Always 0.
    pub order_violations: u64,
}

impl SimMetrics {
    pub fn occupancy_of(&self, s: &AbpsState) -> f64 {
        self.occupancy.iter().find(|(t, _)| t == s).map_or(0.0, |(_, f)| *f)
    }
}

/// Receives `time,entity,event,detail` records during a run.
pub trait TraceSink {
    fn record(&mut self, time: f64, entity: &str, event: &str, detail: fmt::Arguments<'_>);
}

/// One run on stream 0 of `config.seed`.
pub fn simulate(params: &AbpsParams, config: &SimConfig, variant: Variant) -> Result<SimMetrics, SimError> {
    engine::run(params, config, variant, 0, None)
}

/// Replication `index` of `config.seed`. Replications use disjoint streams
/// of the same generator, so they are independent and reproducible.
pub fn simulate_replication(
    params: &AbpsParams,
    config: &SimConfig,
    variant: Variant,
    index: u64,
) -> Result<SimMetrics, SimError> {
    engine::run(params, config, variant, index, None)
}

pub fn simulate_traced(
    params: &AbpsParams,
    config: &SimConfig,
    variant: Variant,
    trace: &mut dyn TraceSink,
) -> Result<SimMetrics, SimError> {
    engine::run(params, config, variant, 0, Some(trace))
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Infinite for a single sample.
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Estimate> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            f64::INFINITY
        } else {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            math::sqrt(var / n as f64)
        };
        Some(Estimate { mean, std_error, n })
    }

    /// Whether `reference` lies within `k` standard errors of the mean.
    pub fn covers(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }
}

/// Per-metric estimates across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub availability: Estimate,
    pub power: Estimate,
    pub state_throughput: Estimate,
    pub goodput: Estimate,
    /// Mean sojourn per oracle state, over replications that completed one.
    pub oracle_sojourn: [Option<Estimate>; 3],
    pub retransmissions: Estimate,
    pub duplicates: Estimate,
    pub runs: Vec<SimMetrics>,
}

/// Summarizes completed runs. `None` if `runs` is empty.
pub fn summarize(runs: Vec<SimMetrics>) -> Option<ReplicationSummary> {
    let est = |f: &dyn Fn(&SimMetrics) -> f64| {
        let xs: Vec<f64> = runs.iter().map(f).collect();
        Estimate::from_samples(&xs)
    };
    let sojourn = |k: usize| {
        let xs: Vec<f64> = runs.iter().filter_map(|r| r.oracle_sojourn[k].mean()).collect();
        Estimate::from_samples(&xs)
    };
    Some(ReplicationSummary {
        availability: est(&|r| r.availability)?,
        power: est(&|r| r.power)?,
        state_throughput: est(&|r| r.state_throughput)?,
        goodput: est(&|r| r.goodput)?,
        oracle_sojourn: [sojourn(0), sojourn(1), sojourn(2)],
        retransmissions: est(&|r| r.retransmissions as f64)?,
        duplicates: est(&|r| r.duplicates as f64)?,
        runs,
    })
}

/// Runs `config.replications` replications one after another.
pub fn replicate(params: &AbpsParams, config: &SimConfig, variant: Variant) -> Result<ReplicationSummary, SimError> {
    config.validate()?;
    let runs = (0..config.replications as u64)
        .map(|i| simulate_replication(params, config, variant, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(runs).expect("at least one replication"))
}
