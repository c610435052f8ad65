use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::receiver::{Receipt, Receiver};
use super::{SimConfig, SimError, SimMetrics, SojournStat, TraceSink};
use crate::math;
use crate::models::{AbpsParams, AbpsState, Nic, OracleState, Phase, Variant};

const ACKED: u32 = u32::MAX;
const N_GLOBAL: usize = 5 * 5 * 3;

// tie-break order between event kinds at equal timestamps
const ORD_ORACLE: u8 = 0;
const ORD_NIC: u8 = 1;
const ORD_ARRIVAL: u8 = 3;
const ORD_ACK: u8 = 4;
const ORD_TIMEOUT: u8 = 5;
const ORD_GENERATE: u8 = 6;

fn global_index(s: &AbpsState) -> usize {
    (s.umts as usize * 5 + s.wifi as usize) * 3 + (s.oracle as usize - 1)
}

fn global_state(i: usize) -> AbpsState {
    AbpsState {
        umts: Phase::ALL[i / 15],
        wifi: Phase::ALL[(i / 3) % 5],
        oracle: OracleState::ALL[i % 3],
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Oracle,
    Nic(Nic),
    Arrival(Nic),
    Ack,
    Timeout,
    Generate,
}

#[derive(Debug, Clone)]
struct NicSlot {
    phase: Phase,
    active: bool,
    next: f64,
    epoch: u64,
    entered: f64,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    at: f64,
    seq: u64,
    epoch: u64,
}

#[derive(Debug, Clone, Copy)]
struct Timer {
    at: f64,
    seq: u64,
    attempt: u32,
    nic: Nic,
}

struct Sim<'a> {
    params: &'a AbpsParams,
    config: &'a SimConfig,
    variant: Variant,
    rng: ChaCha8Rng,
    trace: Option<&'a mut dyn TraceSink>,

    now: f64,
    last_accounted: f64,
    nics: [NicSlot; 2],
    oracle: OracleState,
    oracle_next: f64,
    oracle_entered: f64,
    global_entered: f64,

    next_generate: f64,
    next_seq: u64,
    attempts: Vec<u32>,
    pending: VecDeque<u64>,
    in_flight: [VecDeque<InFlight>; 2],
    acks: VecDeque<(f64, u64)>,
    timers: VecDeque<Timer>,
    receiver: Receiver,

    m: SimMetrics,
    occupancy: [f64; N_GLOBAL],
    global_sojourn: [SojournStat; N_GLOBAL],
    available_time: f64,
    energy: f64,
    state_bits: f64,
}

/// Runs one replication on random stream `stream` of `config.seed`.
pub fn run<'a>(
    params: &'a AbpsParams,
    config: &'a SimConfig,
    variant: Variant,
    stream: u64,
    trace: Option<&'a mut dyn TraceSink>,
) -> Result<SimMetrics, SimError> {
    params.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let slot = || NicSlot {
        phase: Phase::Disconnected,
        active: true,
        next: f64::INFINITY,
        epoch: 0,
        entered: 0.0,
    };
    let mut sim = Sim {
        params,
        config,
        variant,
        rng,
        trace,
        now: 0.0,
        last_accounted: 0.0,
        nics: [slot(), slot()],
        oracle: AbpsState::INITIAL.oracle,
        oracle_next: f64::INFINITY,
        oracle_entered: 0.0,
        global_entered: 0.0,
        next_generate: if config.data_rate > 0.0 { 0.0 } else { f64::INFINITY },
        next_seq: 0,
        attempts: Vec::new(),
        pending: VecDeque::new(),
        in_flight: [VecDeque::new(), VecDeque::new()],
        acks: VecDeque::new(),
        timers: VecDeque::new(),
        receiver: Receiver::new(config.reorder_window),
        m: SimMetrics::default(),
        occupancy: [0.0; N_GLOBAL],
        global_sojourn: [SojournStat::default(); N_GLOBAL],
        available_time: 0.0,
        energy: 0.0,
        state_bits: 0.0,
    };
    sim.schedule_nic(Nic::Umts);
    sim.schedule_nic(Nic::Wifi);
    sim.schedule_oracle();
    sim.run_loop();
    Ok(sim.finish())
}

impl Sim<'_> {
    fn exp(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        let u: f64 = self.rng.random();
        -math::ln(1.0 - u) / rate
    }

    fn state(&self) -> AbpsState {
        AbpsState {
            umts: self.nics[0].phase,
            wifi: self.nics[1].phase,
            oracle: self.oracle,
        }
    }

    fn nic_rate(&self, nic: Nic) -> f64 {
        let p = self.params;
        match self.nics[nic.index()].phase {
            Phase::Off => 0.0,
            Phase::Disconnected => p.alpha(nic),
            Phase::Setup => p.setup_success_rate(nic, self.config.mode) + p.setup_failure_rate(nic),
            Phase::Connected => p.loss_rate(nic, self.oracle),
            Phase::Failed => p.mu(nic),
        }
    }

    fn schedule_nic(&mut self, nic: Nic) {
        let dt = self.exp(self.nic_rate(nic));
        self.nics[nic.index()].next = self.now + dt;
    }

    fn schedule_oracle(&mut self) {
        let rate: f64 = OracleState::ALL
            .iter()
            .map(|&to| self.params.oracle_rate(self.oracle, to))
            .sum();
        let dt = self.exp(rate);
        self.oracle_next = self.now + dt;
    }

    fn trace(&mut self, entity: &str, event: &str, detail: core::fmt::Arguments<'_>) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.record(self.now, entity, event, detail);
        }
    }

    /// Integrates state-based metrics up to `self.now`.
    fn account(&mut self) {
        let dt = self.now - self.last_accounted;
        if dt <= 0.0 {
            return;
        }
        let s = self.state();
        self.occupancy[global_index(&s)] += dt;
        if s.is_available() {
            self.available_time += dt;
        }
        self.energy += dt * self.params.state_power(s.umts, s.wifi, self.variant, self.config.mode);
        self.state_bits += dt * self.params.state_throughput(s.umts, s.wifi);
        self.last_accounted = self.now;
    }

    /// Call before any state change, with the change applied in `f`.
    fn change_state(&mut self, f: impl FnOnce(&mut Self)) {
        self.account();
        let before = self.state();
        f(self);
        let after = self.state();
        if after != before {
            self.global_sojourn[global_index(&before)].add(self.now - self.global_entered);
            self.global_entered = self.now;
        }
    }

    fn set_phase(&mut self, nic: Nic, phase: Phase) {
        let now = self.now;
        let slot = &mut self.nics[nic.index()];
        if slot.phase == phase {
            return;
        }
        let old = slot.phase;
        self.m.nic_sojourn[nic.index()][old as usize].add(now - slot.entered);
        slot.entered = now;
        if old == Phase::Connected {
            // whatever is in flight on this NIC is lost
            slot.epoch += 1;
        }
        slot.phase = phase;
        slot.active = phase != Phase::Off;
        self.trace(
            match nic {
                Nic::Umts => "umts",
                Nic::Wifi => "wifi",
            },
            "phase",
            format_args!("{}->{}", old.name(), phase.name()),
        );
    }

    fn next_event(&self) -> Option<(f64, Event)> {
        let mut best: Option<(f64, u8, u64, Event)> = None;
        let mut offer = |t: f64, ord: u8, seq: u64, e: Event| {
            if t.is_finite() && best.is_none_or(|(bt, bo, bs, _)| (t, ord, seq) < (bt, bo, bs)) {
                best = Some((t, ord, seq, e));
            }
        };
        offer(self.oracle_next, ORD_ORACLE, 0, Event::Oracle);
        offer(self.nics[0].next, ORD_NIC, 0, Event::Nic(Nic::Umts));
        offer(self.nics[1].next, ORD_NIC, 1, Event::Nic(Nic::Wifi));
        for nic in Nic::ALL {
            if let Some(f) = self.in_flight[nic.index()].front() {
                offer(f.at, ORD_ARRIVAL, f.seq, Event::Arrival(nic));
            }
        }
        if let Some(&(at, seq)) = self.acks.front() {
            offer(at, ORD_ACK, seq, Event::Ack);
        }
        if let Some(t) = self.timers.front() {
            offer(t.at, ORD_TIMEOUT, t.seq, Event::Timeout);
        }
        offer(self.next_generate, ORD_GENERATE, self.next_seq, Event::Generate);
        best.map(|(t, _, _, e)| (t, e))
    }

    fn run_loop(&mut self) {
        while let Some((t, event)) = self.next_event() {
            if t > self.config.duration {
                break;
            }
            self.now = t;
            match event {
                Event::Oracle => self.on_oracle(),
                Event::Nic(nic) => self.on_nic(nic),
                Event::Arrival(nic) => self.on_arrival(nic),
                Event::Ack => self.on_ack(),
                Event::Timeout => self.on_timeout(),
                Event::Generate => self.on_generate(),
            }
        }
        self.now = self.config.duration;
        self.account();
    }

    fn on_nic(&mut self, nic: Nic) {
        let p = self.params;
        let next = match self.nics[nic.index()].phase {
            Phase::Off => unreachable!("off NICs have no pending event"),
            Phase::Disconnected => Phase::Setup,
            Phase::Setup => {
                let ok = p.setup_success_rate(nic, self.config.mode);
                let total = ok + p.setup_failure_rate(nic);
                let u: f64 = self.rng.random();
                if u * total < ok {
                    Phase::Connected
                } else {
                    Phase::Disconnected
                }
            }
            Phase::Connected => Phase::Failed,
            Phase::Failed => Phase::Disconnected,
        };
        self.change_state(|s| s.set_phase(nic, next));
        self.schedule_nic(nic);
        if next == Phase::Connected {
            self.flush();
        }
    }

    fn on_oracle(&mut self) {
        let from = self.oracle;
        let total: f64 = OracleState::ALL
            .iter()
            .map(|&to| self.params.oracle_rate(from, to))
            .sum();
        let mut u: f64 = self.rng.random::<f64>() * total;
        let mut to = from;
        for cand in OracleState::ALL {
            let r = self.params.oracle_rate(from, cand);
            if r > 0.0 {
                to = cand;
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        self.m.oracle_sojourn[from as usize - 1].add(self.now - self.oracle_entered);
        self.oracle_entered = self.now;
        let variant = self.variant;
        self.change_state(|s| {
            s.oracle = to;
            if variant == Variant::Oracle {
                for nic in Nic::ALL {
                    let on = to.activates(nic);
                    let phase = s.nics[nic.index()].phase;
                    if !on && phase != Phase::Off {
                        s.set_phase(nic, Phase::Off);
                    } else if on && phase == Phase::Off {
                        s.set_phase(nic, Phase::Disconnected);
                    }
                }
            }
        });
        self.trace("oracle", "state", format_args!("{}->{}", from.name(), to.name()));
        // the WiFi loss rate depends on the oracle state
        self.schedule_nic(Nic::Umts);
        self.schedule_nic(Nic::Wifi);
        self.schedule_oracle();
        self.flush();
    }

    fn sendable(&self, nic: Nic) -> bool {
        let s = &self.nics[nic.index()];
        s.active && matches!(s.phase, Phase::Connected | Phase::Failed)
    }

    /// WiFi when the client believes it usable, else UMTS.
    fn preferred(&self) -> Option<Nic> {
        [Nic::Wifi, Nic::Umts].into_iter().find(|&n| self.sendable(n))
    }

    fn alternative(&self, used: Nic) -> Option<Nic> {
        Nic::ALL
            .into_iter()
            .find(|&n| n != used && self.nics[n.index()].active && self.nics[n.index()].phase == Phase::Connected)
    }

    fn send(&mut self, seq: u64, nic: Nic) {
        let i = seq as usize;
        debug_assert_ne!(self.attempts[i], ACKED);
        if self.attempts[i] > 0 {
            self.m.retransmissions += 1;
        }
        self.attempts[i] += 1;
        let attempt = self.attempts[i];
        self.m.sent += 1;
        let slot = &self.nics[nic.index()];
        if !slot.active {
            self.m.inactive_sends += 1;
        }
        if slot.phase == Phase::Connected {
            let latency = match nic {
                Nic::Umts => self.config.latency_umts,
                Nic::Wifi => self.config.latency_wifi,
            };
            self.in_flight[nic.index()].push_back(InFlight {
                at: self.now + latency,
                seq,
                epoch: slot.epoch,
            });
        } else {
            self.m.lost += 1;
        }
        self.timers.push_back(Timer {
            at: self.now + self.config.ack_timeout,
            seq,
            attempt,
            nic,
        });
    }

    fn flush(&mut self) {
        while !self.pending.is_empty() {
            let Some(nic) = self.preferred() else { break };
            let seq = self.pending.pop_front().expect("non-empty");
            if self.attempts[seq as usize] != ACKED {
                self.send(seq, nic);
            }
        }
    }

    fn on_generate(&mut self) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.attempts.push(0);
        self.m.generated += 1;
        self.next_generate = self.now + 1.0 / self.config.data_rate;
        if self.pending.is_empty() {
            if let Some(nic) = self.preferred() {
                self.send(seq, nic);
                return;
            }
        }
        self.pending.push_back(seq);
        self.flush();
    }

    fn on_arrival(&mut self, nic: Nic) {
        let f = self.in_flight[nic.index()].pop_front().expect("scheduled");
        if f.epoch != self.nics[nic.index()].epoch {
            self.m.lost += 1;
            return;
        }
        match self.receiver.receive(f.seq) {
            Receipt::Duplicate => self.trace("server", "duplicate", format_args!("{}", f.seq)),
            Receipt::Late => self.trace("server", "late", format_args!("{}", f.seq)),
            Receipt::Accepted(_) => {}
        }
        self.acks.push_back((self.now + self.config.ack_delay, f.seq));
    }

    fn on_ack(&mut self) {
        let (_, seq) = self.acks.pop_front().expect("scheduled");
        let a = &mut self.attempts[seq as usize];
        if *a != ACKED {
            *a = ACKED;
            self.m.acked += 1;
        }
    }

    fn on_timeout(&mut self) {
        let t = self.timers.pop_front().expect("scheduled");
        if self.attempts[t.seq as usize] != t.attempt {
            // acked, or superseded by a later attempt
            return;
        }
        self.trace("client", "timeout", format_args!("{} attempt {}", t.seq, t.attempt));
        match self.alternative(t.nic) {
            Some(nic) => self.send(t.seq, nic),
            None => {
                self.pending.push_front(t.seq);
                self.flush();
            }
        }
    }

    fn finish(mut self) -> SimMetrics {
        let d = self.config.duration;
        let mut m = core::mem::take(&mut self.m);
        m.duration = d;
        m.availability = self.available_time / d;
        m.power = self.energy / d;
        m.state_throughput = self.state_bits / d;
        m.goodput = m.acked as f64 * self.config.datagram_bytes as f64 * 8.0 / d / 1e6;
        m.occupancy = (0..N_GLOBAL)
            .filter(|&i| self.occupancy[i] > 0.0)
            .map(|i| (global_state(i), self.occupancy[i] / d))
            .collect();
        m.state_sojourn = (0..N_GLOBAL)
            .filter(|&i| self.global_sojourn[i].count > 0)
            .map(|i| (global_state(i), self.global_sojourn[i]))
            .collect();
        let r = &self.receiver;
        m.delivered = r.released;
        m.duplicates = r.duplicates;
        m.late = r.late;
        m.skipped = r.skipped;
        m.app_duplicates = r.app_duplicates;
        m.order_violations = r.order_violations;
        m.parked = self.pending.len() as u64;
        m
    }
}
