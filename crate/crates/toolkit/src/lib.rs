//! IO, file formats, remote catalog access, parallel sweeps and the `abps`
//! command line on top of `abps-core`.
//!
//! File formats:
//!
//! - parameter files: one `key = value` per line, `#` starts a comment. Keys
//!   are [`AbpsParams`](abps_core::models::AbpsParams) names (`alpha_U`,
//!   `T_W_plus`, `e_W_3`, ...). Values are numbers or `a/b` fractions.
//! - AP catalog fixtures: CSV `essid,lat,lon,radius_m,group,open`, see
//!   [`catalog`].
//! - trajectories: CSV `t,lat,lon[,speed]`, see [`trajectory`].
//! - sweep output: CSV `variant,T_W_minus,T_W_plus,availability,power_W,throughput_Mbps,error`.
//! - simulation traces: CSV `time,entity,event,detail`.

pub mod catalog;
pub mod cli;
pub mod crossval;
pub mod error;
pub mod format;
pub mod params_file;
pub mod sweep;
pub mod trace;
pub mod trajectory;

pub use error::{Error, InputError};
