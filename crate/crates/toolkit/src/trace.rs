use std::fmt;
use std::io::Write;

use abps_core::sim::TraceSink;

/// Writes simulation events as CSV `time,entity,event,detail`.
///
/// The sink cannot fail mid-run, so the first write error is kept and
/// returned by [`CsvTrace::finish`]; later records are dropped.
pub struct CsvTrace<W: Write> {
    writer: csv::Writer<W>,
    error: Option<csv::Error>,
    records: u64,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(out: W) -> Self {
        let mut writer = csv::Writer::from_writer(out);
        let error = writer.write_record(["time", "entity", "event", "detail"]).err();
        CsvTrace {
            writer,
            error,
            records: 0,
        }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W, csv::Error> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn record(&mut self, time: f64, entity: &str, event: &str, detail: fmt::Arguments<'_>) {
        if self.error.is_some() {
            return;
        }
        let time = format!("{time:.6}");
        let detail = detail.to_string();
        match self
            .writer
            .write_record([time.as_str(), entity, event, detail.as_str()])
        {
            Ok(()) => self.records += 1,
            Err(e) => self.error = Some(e),
        }
    }
}
