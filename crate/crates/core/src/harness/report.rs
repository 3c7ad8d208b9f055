use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One (equalizer, grid point, seed) measurement, or the mean over seeds
/// when `seed` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub equalizer: String,
    pub n_pilots: usize,
    pub snr_align_db: f64,
    pub snr_eval_db: f64,
    pub fading: bool,
    pub seed: Option<u64>,
    pub mean_psnr: f64,
    pub mean_mse: f64,
    /// Seconds spent fitting; `None` on aggregate rows.
    pub fit_wallclock: Option<f64>,
}

impl SweepRow {
    pub fn is_aggregate(&self) -> bool {
        self.seed.is_none()
    }

    fn order(&self, other: &Self) -> Ordering {
        self.equalizer
            .cmp(&other.equalizer)
            .then(self.n_pilots.cmp(&other.n_pilots))
            .then(self.snr_align_db.total_cmp(&other.snr_align_db))
            .then(self.snr_eval_db.total_cmp(&other.snr_eval_db))
            .then(self.fading.cmp(&other.fading))
            // per-seed rows first, then the aggregate
            .then(match (self.seed, other.seed) {
                (Some(a), Some(b)) => a.cmp(&b),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
    }

    fn same_point(&self, other: &Self) -> bool {
        self.equalizer == other.equalizer
            && self.n_pilots == other.n_pilots
            && self.snr_align_db.total_cmp(&other.snr_align_db).is_eq()
            && self.snr_eval_db.total_cmp(&other.snr_eval_db).is_eq()
            && self.fading == other.fading
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Grid points that failed, as `point: error` messages.
    pub failures: Vec<String>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl SweepReport {
    /// Builds a report from per-seed rows: sorts them and appends one mean
    /// row per grid point.
    pub fn from_seed_rows(mut rows: Vec<SweepRow>, failures: Vec<String>) -> Self {
        rows.retain(|r| !r.is_aggregate());
        rows.sort_by(SweepRow::order);
        let mut out = Vec::with_capacity(rows.len() + rows.len() / 2);
        let mut start = 0;
        while start < rows.len() {
            let mut end = start + 1;
            while end < rows.len() && rows[end].same_point(&rows[start]) {
                end += 1;
            }
            let group = &rows[start..end];
            let n = group.len() as f64;
            let mean = SweepRow {
                seed: None,
                mean_psnr: group.iter().map(|r| r.mean_psnr).sum::<f64>() / n,
                mean_mse: group.iter().map(|r| r.mean_mse).sum::<f64>() / n,
                fit_wallclock: None,
                ..group[0].clone()
            };
            out.extend_from_slice(group);
            out.push(mean);
            start = end;
        }
        Self { rows: out, failures }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn aggregates(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_aggregate())
    }

    pub fn per_seed(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.is_aggregate())
    }

    /// Writes the CSV; `timing` adds the `fit_wallclock_s` column.
    pub fn write_csv<W: Write>(&self, w: W, timing: bool) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InsufficientData("report has no rows".into()));
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header =
            vec!["equalizer", "n_pilots", "snr_align_db", "snr_eval_db", "fading", "seed", "mean_psnr_db", "mean_mse"];
        if timing {
            header.push("fit_wallclock_s");
        }
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.equalizer.clone(),
                r.n_pilots.to_string(),
                fmt_f64(r.snr_align_db),
                fmt_f64(r.snr_eval_db),
                r.fading.to_string(),
                r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
                fmt_f64(r.mean_psnr),
                fmt_f64(r.mean_mse),
            ];
            if timing {
                rec.push(r.fit_wallclock.map_or_else(String::new, fmt_f64));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Writes `report` to `path` as CSV.
pub fn emit_csv(report: &SweepReport, path: impl AsRef<Path>, timing: bool) -> Result<()> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf, timing)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eq: &str, n: usize, seed: u64, psnr: f64) -> SweepRow {
        SweepRow {
            equalizer: eq.into(),
            n_pilots: n,
            snr_align_db: 10.0,
            snr_eval_db: 10.0,
            fading: false,
            seed: Some(seed),
            mean_psnr: psnr,
            mean_mse: 0.1 / 3.0,
            fit_wallclock: Some(0.5),
        }
    }

    #[test]
    fn single_row_is_two_lines_plus_mean() {
        let rep = SweepReport::from_seed_rows(vec![row("linear", 4, 1, 20.0)], vec![]);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("equalizer,n_pilots,"));
    }

    #[test]
    fn sorted_and_aggregated() {
        let rows = vec![
            row("pfe", 8, 2, 1.0),
            row("linear", 8, 43, 3.0),
            row("linear", 8, 42, 5.0),
            row("linear", 2, 42, 0.0),
        ];
        let rep = SweepReport::from_seed_rows(rows, vec![]);
        let keys: Vec<(String, usize, Option<u64>)> =
            rep.rows.iter().map(|r| (r.equalizer.clone(), r.n_pilots, r.seed)).collect();
        assert_eq!(
            keys,
            vec![
                ("linear".into(), 2, Some(42)),
                ("linear".into(), 2, None),
                ("linear".into(), 8, Some(42)),
                ("linear".into(), 8, Some(43)),
                ("linear".into(), 8, None),
                ("pfe".into(), 8, Some(2)),
                ("pfe".into(), 8, None),
            ]
        );
        assert_eq!(rep.rows[4].mean_psnr, 4.0);
    }

    #[test]
    fn csv_parses_back_exactly() {
        let mut r = row("mlp", 1, 7, std::f64::consts::PI);
        r.mean_mse = 1.0 / 7.0;
        r.snr_align_db = f64::INFINITY;
        let rep = SweepReport::from_seed_rows(vec![r.clone()], vec![]);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf, true).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let rec = rd.records().next().unwrap().unwrap();
        assert_eq!(rec[6].parse::<f64>().unwrap(), r.mean_psnr);
        assert_eq!(rec[7].parse::<f64>().unwrap(), r.mean_mse);
        assert_eq!(rec[2].parse::<f64>().unwrap(), f64::INFINITY);
        assert_eq!(rec[8].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn empty_report_rejected() {
        assert!(SweepReport::default().write_csv(Vec::new(), false).is_err());
    }
}
