//! Trajectory CSV: `t,lat,lon[,speed]` with `t` in seconds, coordinates in
//! degrees and the optional speed in m/s. A header line is optional and `#`
//! starts a comment line.

use std::path::Path;

use abps_core::coverage::{Trajectory, TrajectorySample};

use crate::error::InputError;

pub fn parse_trajectory(text: &str, source_name: &str) -> Result<Trajectory, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples: Vec<TrajectorySample> = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            InputError::line(source_name, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| InputError::line(source_name, line, m);
        if std::mem::take(&mut first) && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("t")) {
            continue;
        }
        if !(3..=4).contains(&rec.len()) {
            return Err(err(format!("expected t,lat,lon[,speed], got {} fields", rec.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64, InputError> {
            let f = &rec[i];
            match f.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(err(format!("invalid {name} '{f}'"))),
            }
        };
        let mut s = TrajectorySample::new(num(0, "t")?, num(1, "lat")?, num(2, "lon")?);
        if !s.position.is_valid() {
            return Err(err(format!(
                "coordinates ({}, {}) out of range",
                s.position.lat, s.position.lon
            )));
        }
        if rec.len() == 4 && !rec[3].is_empty() {
            let v = num(3, "speed")?;
            if v < 0.0 {
                return Err(err(format!("negative speed {v}")));
            }
            s.speed = Some(v);
        }
        if let Some(prev) = samples.last() {
            if s.t <= prev.t {
                return Err(err(format!("timestamp {} does not increase", s.t)));
            }
        }
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(InputError::Invalid(format!("{source_name}: empty trajectory")));
    }
    Trajectory::new(samples).map_err(|e| InputError::Invalid(format!("{source_name}: {e}")))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    parse_trajectory(&text, &path.display().to_string())
}
