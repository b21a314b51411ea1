//! Error metrics and the per-section results report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::SectionKind;
use crate::regress::{CvReport, Family, Variant};

/// Root-mean-square difference of two equal-length series.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "rmse of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Domain("rmse of empty series".into()));
    }
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Location error as a percentage of the section length.
pub fn percent_error(actual_km: f64, estimated_km: f64, total_length_km: f64) -> Result<f64> {
    if !(total_length_km > 0.0) || !total_length_km.is_finite() {
        return Err(Error::Domain(format!(
            "section length must be positive, got {total_length_km}"
        )));
    }
    Ok((actual_km - estimated_km).abs() / total_length_km * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub actual_km: f64,
    pub estimated_km: f64,
    pub percent_error: f64,
}

impl EvalRow {
    pub fn new(actual_km: f64, estimated_km: f64, total_length_km: f64) -> Result<Self> {
        Ok(Self {
            actual_km,
            estimated_km,
            percent_error: percent_error(actual_km, estimated_km, total_length_km)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRmse {
    pub family: Family,
    pub variant: Variant,
    pub rmse: f64,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub section: SectionKind,
    pub total_length_km: f64,
    pub cv_folds: usize,
    pub seed: u64,
    pub model_rmse: Vec<ModelRmse>,
    pub best_variant: Variant,
    pub rows: Vec<EvalRow>,
}

/// Assembles the report: one RMSE row per cross-validated variant in table
/// order (all 19 under the default model list), the best variant (lowest
/// RMSE, earliest on ties) and test rows for that variant.
pub fn build_report(
    cv: &CvReport,
    test_rows: Vec<EvalRow>,
    section: SectionKind,
    total_length_km: f64,
) -> Result<EvalReport> {
    if cv.variants.is_empty() || cv.variants.len() != cv.rmse.len() {
        return Err(Error::Report(format!(
            "cross-validation lists {} variants and {} RMSE values",
            cv.variants.len(),
            cv.rmse.len()
        )));
    }
    let mut model_rmse = Vec::with_capacity(cv.variants.len());
    for v in Variant::ALL.into_iter().filter(|v| cv.variants.contains(v)) {
        let rmse = cv
            .rmse_of(v)
            .ok_or_else(|| Error::Report(format!("cross-validation has no result for {v}")))?;
        model_rmse.push(ModelRmse {
            family: v.family(),
            variant: v,
            rmse,
        });
    }
    let best_variant = best_of(&model_rmse);
    for r in &test_rows {
        let pe = percent_error(r.actual_km, r.estimated_km, total_length_km)?;
        if (pe - r.percent_error).abs() > 1e-9 {
            return Err(Error::Report(format!(
                "row at {} km has error {} but recomputes to {pe}",
                r.actual_km, r.percent_error
            )));
        }
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        section,
        total_length_km,
        cv_folds: cv.k,
        seed: cv.seed,
        model_rmse,
        best_variant,
        rows: test_rows,
    })
}

/// Lowest RMSE; NaN never wins; ties go to the earlier row.
pub fn best_of(rows: &[ModelRmse]) -> Variant {
    let mut best = &rows[0];
    for r in &rows[1..] {
        if r.rmse < best.rmse || (best.rmse.is_nan() && !r.rmse.is_nan()) {
            best = r;
        }
    }
    best.variant
}

/// Fixed-point rendering with `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let mag = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit (9.999995 → 10.00000).
    let shown = s.trim_start_matches('-').replace('.', "");
    if shown.trim_start_matches('0').len() > digits && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

impl EvalReport {
    pub fn best_rmse(&self) -> f64 {
        self.model_rmse[self.best_variant.table_index()].rmse
    }

    pub fn max_percent_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.percent_error)
            .fold(0.0, f64::max)
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let title = match self.section {
            SectionKind::Overhead => "Overhead line section",
            SectionKind::Cable => "Underground cable section",
        };
        let _ = writeln!(
            out,
            "{title} ({} km)",
            format_significant(self.total_length_km, 6)
        );
        let _ = writeln!(
            out,
            "{}-fold cross-validation, seed {}",
            self.cv_folds, self.seed
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<30} {:<26} {:>12}",
            "Model family", "Variant", "RMSE"
        );
        let _ = writeln!(out, "{}", "-".repeat(70));
        let mut last_family = None;
        for m in &self.model_rmse {
            let fam = if last_family == Some(m.family) {
                ""
            } else {
                m.family.label()
            };
            last_family = Some(m.family);
            let mark = if m.variant == self.best_variant {
                " *"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:<30} {:<26} {:>12}{mark}",
                fam,
                m.variant.name(),
                format_significant(m.rmse, 6)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Best model: {}", self.best_variant);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>14} {:>16} {:>12}",
            "Actual (km)", "Estimated (km)", "Error (%)"
        );
        let _ = writeln!(out, "{}", "-".repeat(44));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>14} {:>16} {:>12}",
                format_significant(r.actual_km, 6),
                format_significant(r.estimated_km, 7),
                format_significant(r.percent_error, 6)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }
}
