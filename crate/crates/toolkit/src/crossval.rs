//! Parallel replications and the analytic-vs-simulated comparison.

use abps_core::models::{build, evaluate, AbpsParams, OracleState, Variant};
use abps_core::sim::{simulate_replication, summarize, Estimate, ReplicationSummary, SimConfig, SimError};
use rayon::prelude::*;

use crate::error::Error;

/// Standard errors within which a simulated mean must fall.
pub const COMPARE_SE: f64 = 3.0;

/// Runs `config.replications` independent replications concurrently. The
/// result equals [`abps_core::sim::replicate`].
pub fn replicate_parallel(
    params: &AbpsParams,
    config: &SimConfig,
    variant: Variant,
) -> Result<ReplicationSummary, SimError> {
    config.validate()?;
    let runs = (0..config.replications as u64)
        .into_par_iter()
        .map(|i| simulate_replication(params, config, variant, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(runs).expect("validated config has replications"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub variant: Variant,
    pub metric: String,
    pub reference: f64,
    pub estimate: Estimate,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.estimate.covers(self.reference, COMPARE_SE)
    }

    /// Distance from the reference in standard errors.
    pub fn z(&self) -> f64 {
        (self.estimate.mean - self.reference) / self.estimate.std_error
    }
}

/// Analytic metrics of `variant` against the replication means: availability,
/// power and state throughput. With `sojourns`, also the mean residence in
/// each oracle state against its exponential mean.
pub fn compare(
    params: &AbpsParams,
    config: &SimConfig,
    variant: Variant,
    sojourns: bool,
) -> Result<(Vec<Check>, ReplicationSummary), Error> {
    let analytic = evaluate(&build(params, variant, config.mode)?)?;
    let sim = replicate_parallel(params, config, variant)?;
    let check = |metric: &str, reference: f64, estimate: Estimate| Check {
        variant,
        metric: metric.to_string(),
        reference,
        estimate,
    };
    let mut out = vec![
        check("availability", analytic.availability, sim.availability),
        check("power_W", analytic.power, sim.power),
        check("throughput_Mbps", analytic.throughput, sim.state_throughput),
    ];
    if sojourns {
        for (k, o) in [OracleState::UmtsOnly, OracleState::Both, OracleState::WifiOnly]
            .into_iter()
            .enumerate()
        {
            let exit: f64 = [OracleState::UmtsOnly, OracleState::Both, OracleState::WifiOnly]
                .into_iter()
                .map(|to| params.oracle_rate(o, to))
                .sum();
            if let Some(est) = sim.oracle_sojourn[k] {
                out.push(check(&format!("sojourn_{}_s", o.name()), 1.0 / exit, est));
            }
        }
    }
    Ok((out, sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use abps_core::models::default_params;
    use abps_core::sim::replicate;

    #[test]
    fn parallel_equals_sequential() {
        let cfg = SimConfig {
            duration: 500.0,
            replications: 4,
            ..SimConfig::default()
        };
        let p = default_params();
        assert_eq!(
            replicate_parallel(&p, &cfg, Variant::Plain).unwrap(),
            replicate(&p, &cfg, Variant::Plain).unwrap()
        );
    }

    #[test]
    fn degenerate_single_replication() {
        let cfg = SimConfig {
            duration: 100.0,
            replications: 1,
            ..SimConfig::default()
        };
        let (checks, _) = compare(&default_params(), &cfg, Variant::Oracle, false).unwrap();
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.estimate.std_error.is_infinite() && c.pass()));
    }
}
