//! Parallel parameter sweeps, their CSV form and the ordering checks between
//! the two variants.

use std::io::{Read, Write};

use abps_core::models::{evaluate_point, AbpsParams, GridSpec, Mode, SweepMetrics, SweepRow, SweepTable, Variant};
use rayon::prelude::*;

use crate::error::InputError;
use crate::format::sig6;

pub const HEADER: [&str; 7] = [
    "variant",
    "T_W_minus",
    "T_W_plus",
    "availability",
    "power_W",
    "throughput_Mbps",
    "error",
];

/// Same rows, in the same order, as [`abps_core::models::sweep`], with the
/// points evaluated concurrently.
pub fn run_sweep(params: &AbpsParams, mode: Mode, grid: &GridSpec, variants: &[Variant]) -> SweepTable {
    let jobs: Vec<(Variant, f64, f64)> = variants
        .iter()
        .flat_map(|&v| grid.points().into_iter().map(move |(m, p)| (v, m, p)))
        .collect();
    let rows = jobs
        .into_par_iter()
        .map(|(v, m, p)| evaluate_point(params, v, mode, m, p))
        .collect();
    SweepTable { rows }
}

/// One CSV row. Failed points keep their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub variant: Variant,
    pub t_w_minus: f64,
    pub t_w_plus: f64,
    pub metrics: Result<SweepMetrics, String>,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        SweepRecord {
            variant: r.variant,
            t_w_minus: r.t_w_minus,
            t_w_plus: r.t_w_plus,
            metrics: r.result.clone().map_err(|e| e.to_string()),
        }
    }
}

pub fn records(table: &SweepTable) -> Vec<SweepRecord> {
    table.rows.iter().map(SweepRecord::from).collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[SweepRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        let (a, p, t, e) = match &r.metrics {
            Ok(m) => (sig6(m.availability), sig6(m.power), sig6(m.throughput), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.clone()),
        };
        w.write_record([
            r.variant.name().to_string(),
            sig6(r.t_w_minus),
            sig6(r.t_w_plus),
            a,
            p,
            t,
            e,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Vec<SweepRecord>, InputError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| InputError::line(source_name, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 6 || names[..6] != HEADER[..6] {
        return Err(InputError::line(source_name, 1, format!("unexpected header {names:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| InputError::line(source_name, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| InputError::line(source_name, line, m);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| err(format!("invalid {} '{}'", HEADER[i], field(i))))
        };
        let variant = field(0).parse::<Variant>().map_err(|e| err(e.to_string()))?;
        let error = field(6);
        let metrics = if error.is_empty() {
            Ok(SweepMetrics {
                availability: num(3)?,
                power: num(4)?,
                throughput: num(5)?,
            })
        } else {
            Err(error.to_string())
        };
        out.push(SweepRecord {
            variant,
            t_w_minus: num(1)?,
            t_w_plus: num(2)?,
            metrics,
        });
    }
    Ok(out)
}

/// Parses `tmin:5,10,20 tplus:40,80`. Either axis may be omitted and then
/// keeps its default values.
pub fn parse_grid<S: AsRef<str>>(parts: &[S]) -> Result<GridSpec, InputError> {
    let mut grid = GridSpec::default();
    for tok in parts
        .iter()
        .flat_map(|p| p.as_ref().split_whitespace().map(str::to_string).collect::<Vec<_>>())
    {
        let (axis, list) = tok
            .split_once(':')
            .ok_or_else(|| InputError::Invalid(format!("grid axis '{tok}' is not name:list")))?;
        let values = list
            .split(',')
            .map(|v| match v.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(InputError::Invalid(format!("invalid grid value '{v}' in '{tok}'"))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match axis {
            "tmin" | "T_W_minus" => grid.t_w_minus = values,
            "tplus" | "T_W_plus" => grid.t_w_plus = values,
            other => return Err(InputError::Invalid(format!("unknown grid axis '{other}'"))),
        }
    }
    Ok(grid)
}

/// Breaches of the expected plain-vs-oracle orderings:
///
/// - plain availability ≥ oracle availability,
/// - oracle power < plain power,
/// - oracle throughput ≤ plain throughput,
/// - oracle availability nondecreasing in `T_W^-` at fixed `T_W^+`.
///
/// `tol` absorbs rounding in the non-strict comparisons. Points where
/// either variant failed or is missing are reported too.
pub fn ordering_violations(rows: &[SweepRecord], tol: f64) -> Vec<String> {
    let find = |v: Variant, m: f64, p: f64| {
        rows.iter()
            .find(|r| r.variant == v && r.t_w_minus == m && r.t_w_plus == p)
    };
    let mut points: Vec<(f64, f64)> = rows.iter().map(|r| (r.t_w_minus, r.t_w_plus)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup();
    let mut out = Vec::new();
    for &(m, p) in &points {
        let at = format!("(T_W_minus={m}, T_W_plus={p})");
        let (pl, or) = match (find(Variant::Plain, m, p), find(Variant::Oracle, m, p)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                out.push(format!("{at}: missing a variant"));
                continue;
            }
        };
        let (pl, or) = match (&pl.metrics, &or.metrics) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                out.push(format!("{at}: {e}"));
                continue;
            }
        };
        if pl.availability + tol < or.availability {
            out.push(format!(
                "{at}: availability plain {} < oracle {}",
                sig6(pl.availability),
                sig6(or.availability)
            ));
        }
        if or.power >= pl.power {
            out.push(format!(
                "{at}: power oracle {} >= plain {}",
                sig6(or.power),
                sig6(pl.power)
            ));
        }
        if or.throughput > pl.throughput + tol {
            out.push(format!(
                "{at}: throughput oracle {} > plain {}",
                sig6(or.throughput),
                sig6(pl.throughput)
            ));
        }
    }
    // monotonicity along T_W^- for each T_W^+
    let mut plus: Vec<f64> = points.iter().map(|x| x.1).collect();
    plus.sort_by(f64::total_cmp);
    plus.dedup();
    for p in plus {
        let series: Vec<(f64, f64)> = points
            .iter()
            .filter(|x| x.1 == p)
            .filter_map(|&(m, _)| {
                find(Variant::Oracle, m, p)
                    .and_then(|r| r.metrics.as_ref().ok())
                    .map(|x| (m, x.availability))
            })
            .collect();
        for w in series.windows(2) {
            if w[1].1 + tol < w[0].1 {
                out.push(format!(
                    "T_W_plus={p}: oracle availability falls from {} at T_W_minus={} to {} at T_W_minus={}",
                    sig6(w[0].1),
                    w[0].0,
                    sig6(w[1].1),
                    w[1].0
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use abps_core::models::{default_params, sweep};

    #[test]
    fn parallel_matches_sequential() {
        let p = default_params();
        let g = GridSpec::default();
        for mode in [Mode::Text, Mode::Appendix] {
            assert_eq!(
                run_sweep(&p, mode, &g, &Variant::ALL),
                sweep(&p, mode, &g, &Variant::ALL)
            );
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let g = GridSpec {
            t_w_minus: vec![20.0, 90.0],
            t_w_plus: vec![80.0],
        };
        let table = run_sweep(&default_params(), Mode::Text, &g, &Variant::ALL);
        let rows = records(&table);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "variant,T_W_minus,T_W_plus,availability,power_W,throughput_Mbps,error"
        );
        assert_eq!(lines.len(), 5);
        // T_W^- > T_W^+ is rejected per point, not for the whole sweep
        assert!(lines[2].starts_with("plain,90,80,,,,"), "{}", lines[2]);
        let back = read_csv(&buf[..], "s.csv").unwrap();
        assert_eq!(back.len(), 4);
        assert!(back[1].metrics.is_err());
        let m = back[0].metrics.as_ref().unwrap();
        let orig = rows[0].metrics.as_ref().unwrap();
        assert!((m.availability - orig.availability).abs() < 1e-6);
    }

    #[test]
    fn grid_spec() {
        let g = parse_grid(&["tmin:5,10", "tplus:40"]).unwrap();
        assert_eq!(g.points(), vec![(5.0, 40.0), (10.0, 40.0)]);
        let g = parse_grid(&["tmin:1,2 tplus:3"]).unwrap();
        assert_eq!(g.points().len(), 2);
        assert_eq!(parse_grid::<&str>(&[]).unwrap(), GridSpec::default());
        assert!(parse_grid(&["tmin:5,x"]).is_err());
        assert!(parse_grid(&["tmin:-5"]).is_err());
        assert!(parse_grid(&["foo:5"]).is_err());
        assert!(parse_grid(&["tmin"]).is_err());
    }

    fn rec(v: Variant, m: f64, a: f64, p: f64, t: f64) -> SweepRecord {
        SweepRecord {
            variant: v,
            t_w_minus: m,
            t_w_plus: 80.0,
            metrics: Ok(SweepMetrics {
                availability: a,
                power: p,
                throughput: t,
            }),
        }
    }

    #[test]
    fn ordering_checks() {
        let good = vec![
            rec(Variant::Plain, 5.0, 0.99, 0.6, 10.0),
            rec(Variant::Oracle, 5.0, 0.95, 0.5, 9.0),
            rec(Variant::Plain, 10.0, 0.99, 0.6, 10.0),
            rec(Variant::Oracle, 10.0, 0.96, 0.5, 9.0),
        ];
        assert!(ordering_violations(&good, 0.0).is_empty());
        let mut bad = good.clone();
        bad[3] = rec(Variant::Oracle, 10.0, 0.94, 0.7, 11.0);
        assert_eq!(ordering_violations(&bad, 0.0).len(), 3);
        bad[3] = rec(Variant::Oracle, 10.0, 0.999, 0.5, 9.0);
        assert_eq!(ordering_violations(&bad, 0.0).len(), 1);
        assert_eq!(ordering_violations(&good[..3], 0.0).len(), 1);
    }
}
