use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    /// Updates completed.
    pub step: usize,
    pub lr: f64,
    /// Mean weighted training loss since the previous record.
    pub loss: f64,
    pub dev_metric: Option<f64>,
    /// Cumulative unique trigrams in the text training has consumed.
    pub unique_trigrams: usize,
    /// Global gradient norm of the last update.
    pub grad_norm: f64,
    /// Seconds since training started. Not written to the CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

pub const LOG_COLUMNS: [&str; 6] = ["step", "lr", "loss", "dev_metric", "unique_trigrams", "grad_norm"];

/// Append-only CSV sink for [`TrainLogRecord`]s. Rows are flushed as they
/// are written.
pub struct LogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(LOG_COLUMNS)?;
        inner.flush().map_err(csv::Error::from)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &TrainLogRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// First logged step whose dev metric is at least `threshold`.
pub fn steps_to_threshold(log: &[TrainLogRecord], threshold: f64) -> Option<usize> {
    log.iter()
        .find(|r| r.dev_metric.is_some_and(|m| m >= threshold))
        .map(|r| r.step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, dev: Option<f64>) -> TrainLogRecord {
        TrainLogRecord {
            step,
            lr: 1e-3,
            loss: 2.5,
            dev_metric: dev,
            unique_trigrams: 7,
            grad_norm: 0.5,
            wall_time: 3.0,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        {
            let mut w = LogWriter::new(&mut buf).unwrap();
            w.write(&rec(10, Some(0.25))).unwrap();
            w.write(&rec(20, None)).unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,lr,loss,dev_metric,unique_trigrams,grad_norm\n10,0.001,2.5,0.25,7,0.5\n20,0.001,2.5,,7,0.5\n"
        );
    }

    #[test]
    fn threshold_scan() {
        let log = vec![rec(10, Some(0.3)), rec(20, None), rec(30, Some(0.8)), rec(40, Some(0.9))];
        assert_eq!(steps_to_threshold(&log, 0.8), Some(30));
        assert_eq!(steps_to_threshold(&log, 0.95), None);
    }
}
