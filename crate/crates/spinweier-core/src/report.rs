//! Machine-readable reports: CSV rows of (entity_id, residual_name, value)
//! and the log-log slope fit used by the refinement studies.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Accumulates report rows and serialises them as deterministic CSV.
#[derive(Debug, Clone, Default)]
pub struct CsvReport {
    rows: Vec<(String, String, f64)>,
}

impl CsvReport {
    pub fn new() -> CsvReport {
        CsvReport { rows: Vec::new() }
    }

    pub fn push(&mut self, entity: impl Into<String>, name: impl Into<String>, value: f64) {
        self.rows.push((entity.into(), name.into(), value));
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "entity_id,residual_name,value")?;
        for (entity, name, value) in &self.rows {
            writeln!(out, "{entity},{name},{value:.12e}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }
}

/// Least-squares slope of log(residual) against log(h). Residuals at or
/// below `floor` are clamped so exactly-zero rows do not poison the fit.
pub fn loglog_slope(hs: &[f64], residuals: &[f64]) -> f64 {
    let floor = 1e-300;
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(residuals)
        .map(|(&h, &r)| (h.ln(), r.max(floor).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format_and_determinism() {
        let mut report = CsvReport::new();
        report.push("edge_3", "killing", 1.25e-4);
        report.push("vertex_0", "gram", 0.0);
        let mut a = Vec::new();
        report.write_to(&mut a).unwrap();
        let mut b = Vec::new();
        report.write_to(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("entity_id,residual_name,value\n"));
        assert!(text.contains("edge_3,killing,1.250000000000e-4"));
    }

    #[test]
    fn slope_recovers_order() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let first: Vec<f64> = hs.iter().map(|h| 3.0 * h).collect();
        let second: Vec<f64> = hs.iter().map(|h| 0.5 * h * h).collect();
        assert!((loglog_slope(&hs, &first) - 1.0).abs() < 1e-12);
        assert!((loglog_slope(&hs, &second) - 2.0).abs() < 1e-12);
    }
}
