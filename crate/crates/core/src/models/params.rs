use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};

use super::ModelError;

/// Network interface technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nic {
    Umts,
    Wifi,
}

impl Nic {
    pub const ALL: [Nic; 2] = [Nic::Umts, Nic::Wifi];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Nic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nic::Umts => "UMTS",
            Nic::Wifi => "WiFi",
        })
    }
}

/// NIC lifecycle phase. The discriminant is the state code used by the
/// model listings (`0` = off ... `4` = failed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Off = 0,
    Disconnected = 1,
    Setup = 2,
    Connected = 3,
    Failed = 4,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Off,
        Phase::Disconnected,
        Phase::Setup,
        Phase::Connected,
        Phase::Failed,
    ];

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<Phase> {
        Phase::ALL.get(usize::try_from(code).ok()?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Off => "off",
            Phase::Disconnected => "disconnected",
            Phase::Setup => "setup",
            Phase::Connected => "connected",
            Phase::Failed => "failed",
        }
    }
}

/// State of the oracle chain. Discriminants follow the listings (`1..3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OracleState {
    /// `O_U`: only UMTS active (entered on EV_NO_WIFI).
    UmtsOnly = 1,
    /// `O_UW`: both active (EV_SHORT_WIFI).
    Both = 2,
    /// `O_W`: only WiFi active (EV_LONG_WIFI).
    WifiOnly = 3,
}

impl OracleState {
    pub const ALL: [OracleState; 3] = [OracleState::UmtsOnly, OracleState::Both, OracleState::WifiOnly];

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<OracleState> {
        match code {
            1 => Some(OracleState::UmtsOnly),
            2 => Some(OracleState::Both),
            3 => Some(OracleState::WifiOnly),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OracleState::UmtsOnly => "O_U",
            OracleState::Both => "O_UW",
            OracleState::WifiOnly => "O_W",
        }
    }

    /// Whether `nic` is powered in this oracle state.
    pub fn activates(self, nic: Nic) -> bool {
        !matches!(
            (self, nic),
            (OracleState::UmtsOnly, Nic::Wifi) | (OracleState::WifiOnly, Nic::Umts)
        )
    }
}

/// Which ABPS chain to build or simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Both NICs always on; the oracle only modulates WiFi connection length.
    Plain,
    /// The oracle powers NICs on and off through synchronized actions.
    Oracle,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Plain, Variant::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Variant::Plain),
            "oracle" => Ok(Variant::Oracle),
            other => Err(ModelError::Params(alloc::format!("unknown variant '{other}'"))),
        }
    }
}

/// How literally the builders follow the published model listings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Energy of an idle connected UMTS NIC is `idle_connected_fraction` of
    /// its peak while WiFi is also connected; WiFi setup succeeds with `p_W`.
    #[default]
    Text,
    /// Reproduces the listings exactly: full per-state energy and a WiFi
    /// setup success rate of `beta_W * p_U`.
    Appendix,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Text => "text",
            Mode::Appendix => "appendix",
        }
    }
}

impl FromStr for Mode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Mode::Text),
            "appendix" => Ok(Mode::Appendix),
            other => Err(ModelError::Params(alloc::format!("unknown mode '{other}'"))),
        }
    }
}

/// Every rate (1/s), probability, power (W) and throughput (Mbps) of the
/// ABPS models.
#[derive(Debug, Clone, PartialEq)]
pub struct AbpsParams {
    pub alpha_u: f64,
    pub beta_u: f64,
    pub gamma_u: f64,
    pub mu_u: f64,
    pub p_u: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
    pub mu_w: f64,
    pub p_w: f64,
    /// Mean duration of a long WiFi connection (s).
    pub t_w_plus: f64,
    /// Mean duration of a short WiFi connection (s).
    pub t_w_minus: f64,
    pub lambda_u_uw: f64,
    pub lambda_uw_u: f64,
    pub lambda_uw_w: f64,
    pub lambda_w_uw: f64,
    /// Power draw per NIC and phase, indexed `[Nic::index()][Phase as usize]`.
    pub energy: [[f64; 5]; 2],
    pub tput_u: f64,
    pub tput_w: f64,
    pub oracle_baseline_power: f64,
    pub idle_connected_fraction: f64,
}

impl Default for AbpsParams {
    fn default() -> Self {
        default_params()
    }
}

/// Measured parameter values, Table I energy draws and mid-grid WiFi
/// connection durations (`T_W^- = 20 s`, `T_W^+ = 80 s`).
pub fn default_params() -> AbpsParams {
    let mut p = AbpsParams {
        alpha_u: 1.0 / 6.024,
        beta_u: 1.0 / 1.5,
        gamma_u: 1.0 / 600.0,
        mu_u: 1.0,
        p_u: 0.99,
        alpha_w: 1.0 / 7.5,
        beta_w: 1.0 / 1.5,
        mu_w: 1.0,
        p_w: 0.9,
        t_w_plus: 0.0,
        t_w_minus: 0.0,
        lambda_u_uw: 1.0 / 30.0,
        lambda_uw_u: 0.0,
        lambda_uw_w: 0.0,
        lambda_w_uw: 0.0,
        energy: [[0.0, 0.12, 0.31, 0.62, 0.25], [0.0, 0.08, 0.19, 0.38, 0.15]],
        tput_u: 0.2,
        tput_w: 26.0,
        oracle_baseline_power: 0.1,
        idle_connected_fraction: 0.2,
    };
    p.set_durations(20.0, 80.0);
    p
}

impl AbpsParams {
    /// Parameters exactly as written in the model listings, including the
    /// literal `lambda_12 = 30`.
    pub fn appendix_listing() -> AbpsParams {
        AbpsParams {
            lambda_u_uw: 30.0,
            ..default_params()
        }
    }

    pub fn gamma_w_plus(&self) -> f64 {
        1.0 / self.t_w_plus
    }

    pub fn gamma_w_minus(&self) -> f64 {
        1.0 / self.t_w_minus
    }

    /// WiFi connection loss rate for the given oracle state.
    pub fn gamma_w(&self, oracle: OracleState) -> f64 {
        match oracle {
            OracleState::WifiOnly => self.gamma_w_plus(),
            _ => self.gamma_w_minus(),
        }
    }

    /// Sets the short/long WiFi durations and the oracle rates derived from
    /// them: `λ_{UW,U} = λ_{UW,W} = γ_W^-/2`, `λ_{W,UW} = γ_W^+`.
    pub fn set_durations(&mut self, t_w_minus: f64, t_w_plus: f64) {
        self.t_w_minus = t_w_minus;
        self.t_w_plus = t_w_plus;
        self.lambda_uw_u = 0.5 * self.gamma_w_minus();
        self.lambda_uw_w = self.lambda_uw_u;
        self.lambda_w_uw = self.gamma_w_plus();
    }

    pub fn with_durations(mut self, t_w_minus: f64, t_w_plus: f64) -> Self {
        self.set_durations(t_w_minus, t_w_plus);
        self
    }

    pub fn energy(&self, nic: Nic, phase: Phase) -> f64 {
        self.energy[nic.index()][phase as usize]
    }

    pub fn alpha(&self, nic: Nic) -> f64 {
        match nic {
            Nic::Umts => self.alpha_u,
            Nic::Wifi => self.alpha_w,
        }
    }

    pub fn beta(&self, nic: Nic) -> f64 {
        match nic {
            Nic::Umts => self.beta_u,
            Nic::Wifi => self.beta_w,
        }
    }

    pub fn mu(&self, nic: Nic) -> f64 {
        match nic {
            Nic::Umts => self.mu_u,
            Nic::Wifi => self.mu_w,
        }
    }

    pub fn p(&self, nic: Nic) -> f64 {
        match nic {
            Nic::Umts => self.p_u,
            Nic::Wifi => self.p_w,
        }
    }

    pub fn tput(&self, nic: Nic) -> f64 {
        match nic {
            Nic::Umts => self.tput_u,
            Nic::Wifi => self.tput_w,
        }
    }

    /// Setup success rate of `nic` (`β·p`); in appendix mode WiFi uses `p_U`
    /// as the listings do.
    pub fn setup_success_rate(&self, nic: Nic, mode: Mode) -> f64 {
        match (nic, mode) {
            (Nic::Wifi, Mode::Appendix) => self.beta_w * self.p_u,
            _ => self.beta(nic) * self.p(nic),
        }
    }

    pub fn setup_failure_rate(&self, nic: Nic) -> f64 {
        self.beta(nic) * (1.0 - self.p(nic))
    }

    /// Connection loss rate of `nic` given the oracle state.
    pub fn loss_rate(&self, nic: Nic, oracle: OracleState) -> f64 {
        match nic {
            Nic::Umts => self.gamma_u,
            Nic::Wifi => self.gamma_w(oracle),
        }
    }

    /// Rate at which the oracle leaves `from` towards `to` (0 if no edge).
    pub fn oracle_rate(&self, from: OracleState, to: OracleState) -> f64 {
        use OracleState::*;
        match (from, to) {
            (UmtsOnly, Both) => self.lambda_u_uw,
            (Both, UmtsOnly) => self.lambda_uw_u,
            (Both, WifiOnly) => self.lambda_uw_w,
            (WifiOnly, Both) => self.lambda_w_uw,
            _ => 0.0,
        }
    }

    /// Power draw of a state with the given phases.
    pub fn state_power(&self, umts: Phase, wifi: Phase, variant: Variant, mode: Mode) -> f64 {
        let umts_power = if mode == Mode::Text && umts == Phase::Connected && wifi == Phase::Connected {
            self.idle_connected_fraction * self.energy(Nic::Umts, Phase::Connected)
        } else {
            self.energy(Nic::Umts, umts)
        };
        let base = match variant {
            Variant::Plain => 0.0,
            Variant::Oracle => self.oracle_baseline_power,
        };
        base + umts_power + self.energy(Nic::Wifi, wifi)
    }

    /// Throughput of a state: WiFi whenever it is connected, else UMTS.
    pub fn state_throughput(&self, umts: Phase, wifi: Phase) -> f64 {
        if wifi == Phase::Connected {
            self.tput_w
        } else if umts == Phase::Connected {
            self.tput_u
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("alpha_U", self.alpha_u),
            ("beta_U", self.beta_u),
            ("gamma_U", self.gamma_u),
            ("mu_U", self.mu_u),
            ("alpha_W", self.alpha_w),
            ("beta_W", self.beta_w),
            ("mu_W", self.mu_w),
            ("lambda_U_UW", self.lambda_u_uw),
            ("lambda_UW_U", self.lambda_uw_u),
            ("lambda_UW_W", self.lambda_uw_w),
            ("lambda_W_UW", self.lambda_w_uw),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Params(alloc::format!(
                    "{name} must be a positive rate, got {v}"
                )));
            }
        }
        for (name, v) in [("p_U", self.p_u), ("p_W", self.p_w)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ModelError::Params(alloc::format!("{name} must lie in (0,1], got {v}")));
            }
        }
        if !(self.t_w_minus > 0.0 && self.t_w_minus.is_finite()) {
            return Err(ModelError::Params(alloc::format!(
                "T_W_minus must be positive, got {}",
                self.t_w_minus
            )));
        }
        if !(self.t_w_plus >= self.t_w_minus && self.t_w_plus.is_finite()) {
            return Err(ModelError::Params(alloc::format!(
                "T_W_plus ({}) must not be shorter than T_W_minus ({})",
                self.t_w_plus,
                self.t_w_minus
            )));
        }
        for nic in Nic::ALL {
            for phase in Phase::ALL {
                let e = self.energy(nic, phase);
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(ModelError::Params(alloc::format!(
                        "energy of {nic} in {} must be non-negative, got {e}",
                        phase.name()
                    )));
                }
            }
            if self.energy(nic, Phase::Off) != 0.0 {
                return Err(ModelError::Params(alloc::format!("energy of {nic} when off must be 0")));
            }
        }
        for (name, v) in [
            ("tput_U", self.tput_u),
            ("tput_W", self.tput_w),
            ("oracle_baseline_power", self.oracle_baseline_power),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::Params(alloc::format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.idle_connected_fraction) {
            return Err(ModelError::Params(alloc::format!(
                "idle_connected_fraction must lie in [0,1], got {}",
                self.idle_connected_fraction
            )));
        }
        Ok(())
    }

    /// Sets one field by name. Names follow the model notation
    /// (`alpha_U`, `T_W_plus`, `lambda_UW_W`, `e_U_3`, `tput_W`, ...) and
    /// are matched case-insensitively. Setting `T_W_minus` or `T_W_plus`
    /// also refreshes the oracle rates derived from it.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ModelError> {
        let k = key.to_ascii_lowercase();
        let slot: &mut f64 = match k.as_str() {
            "alpha_u" => &mut self.alpha_u,
            "beta_u" => &mut self.beta_u,
            "gamma_u" => &mut self.gamma_u,
            "mu_u" => &mut self.mu_u,
            "p_u" => &mut self.p_u,
            "alpha_w" => &mut self.alpha_w,
            "beta_w" => &mut self.beta_w,
            "mu_w" => &mut self.mu_w,
            "p_w" => &mut self.p_w,
            "t_w_plus" => {
                let minus = self.t_w_minus;
                self.set_durations(minus, value);
                return Ok(());
            }
            "t_w_minus" => {
                let plus = self.t_w_plus;
                self.set_durations(value, plus);
                return Ok(());
            }
            "lambda_u_uw" => &mut self.lambda_u_uw,
            "lambda_uw_u" => &mut self.lambda_uw_u,
            "lambda_uw_w" => &mut self.lambda_uw_w,
            "lambda_w_uw" => &mut self.lambda_w_uw,
            "tput_u" => &mut self.tput_u,
            "tput_w" => &mut self.tput_w,
            "oracle_baseline_power" => &mut self.oracle_baseline_power,
            "idle_connected_fraction" => &mut self.idle_connected_fraction,
            other => {
                let bytes = other.as_bytes();
                // e_u_0 .. e_w_4
                if bytes.len() == 5 && other.starts_with("e_") && bytes[3] == b'_' {
                    let nic = match bytes[2] {
                        b'u' => Some(Nic::Umts),
                        b'w' => Some(Nic::Wifi),
                        _ => None,
                    };
                    let phase = (bytes[4] as char).to_digit(10).and_then(|d| Phase::from_code(d as i64));
                    if let (Some(nic), Some(phase)) = (nic, phase) {
                        self.energy[nic.index()][phase as usize] = value;
                        return Ok(());
                    }
                }
                return Err(ModelError::Params(alloc::format!("unknown parameter '{key}'")));
            }
        };
        *slot = value;
        Ok(())
    }

    /// Applies `key=value` overrides. Duration keys are applied first so that
    /// explicit oracle-rate overrides win over the derived values.
    pub fn apply_overrides<'a, I>(&mut self, overrides: I) -> Result<(), ModelError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let (durations, rest): (alloc::vec::Vec<_>, alloc::vec::Vec<_>) = overrides
            .into_iter()
            .partition(|(k, _)| matches!(k.to_ascii_lowercase().as_str(), "t_w_plus" | "t_w_minus"));
        for (k, v) in durations.into_iter().chain(rest) {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// All settable keys with their current values, in a stable order.
    pub fn entries(&self) -> alloc::vec::Vec<(String, f64)> {
        let mut out: alloc::vec::Vec<(String, f64)> = [
            ("alpha_U", self.alpha_u),
            ("beta_U", self.beta_u),
            ("gamma_U", self.gamma_u),
            ("mu_U", self.mu_u),
            ("p_U", self.p_u),
            ("alpha_W", self.alpha_w),
            ("beta_W", self.beta_w),
            ("mu_W", self.mu_w),
            ("p_W", self.p_w),
            ("T_W_plus", self.t_w_plus),
            ("T_W_minus", self.t_w_minus),
            ("lambda_U_UW", self.lambda_u_uw),
            ("lambda_UW_U", self.lambda_uw_u),
            ("lambda_UW_W", self.lambda_uw_w),
            ("lambda_W_UW", self.lambda_w_uw),
            ("tput_U", self.tput_u),
            ("tput_W", self.tput_w),
            ("oracle_baseline_power", self.oracle_baseline_power),
            ("idle_connected_fraction", self.idle_connected_fraction),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        for nic in Nic::ALL {
            let tag = match nic {
                Nic::Umts => 'U',
                Nic::Wifi => 'W',
            };
            for phase in Phase::ALL {
                out.push((alloc::format!("e_{tag}_{}", phase as u8), self.energy(nic, phase)));
            }
        }
        out
    }
}
