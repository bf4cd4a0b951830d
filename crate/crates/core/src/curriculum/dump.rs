use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{CurriculumConfig, Variant};
use crate::error::{Error, Result};
use crate::rng::keyed;

/// One cell of the (step, position) weight grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub i: usize,
    /// 1-based token position.
    pub t: usize,
    pub len: usize,
    pub weight: f64,
}

/// Weights of a length-`len` target at each of `steps`.
pub fn schedule_grid(config: &CurriculumConfig, len: usize, steps: &[usize], seed: u64) -> Result<Vec<ScheduleRow>> {
    if len == 0 {
        return Err(Error::invalid("schedule dump needs len >= 1"));
    }
    if config.variant == Variant::AblationLowLoss {
        return Err(Error::invalid("ablation-lowloss weights depend on model losses and cannot be dumped"));
    }
    let mut rows = Vec::with_capacity(len * steps.len());
    for &i in steps {
        let mut rng: ChaCha8Rng = keyed(seed, &[i as u64]);
        let w = config.token_weights(len, i, Some(&mut rng), None)?;
        rows.extend(w.weights().iter().enumerate().map(|(t, &weight)| ScheduleRow {
            i,
            t: t + 1,
            len,
            weight,
        }));
    }
    Ok(rows)
}

/// Writes `i,t,len,weight` rows as CSV.
pub fn write_schedule_csv<W: Write>(rows: &[ScheduleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<schedule csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_first_row() {
        let cfg = CurriculumConfig::new(Variant::TcHard).with_steps(100);
        let rows = schedule_grid(&cfg, 10, &[0], 0).unwrap();
        let w: Vec<f64> = rows.iter().map(|r| r.weight).collect();
        assert_eq!(w, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_layout() {
        let cfg = CurriculumConfig::new(Variant::TcSoft).with_steps(4);
        let rows = schedule_grid(&cfg, 2, &[0, 4], 0).unwrap();
        let mut buf = Vec::new();
        write_schedule_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,t,len,weight");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "4,2,2,1.0");
    }
}
