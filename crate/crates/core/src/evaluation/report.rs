use std::fmt::Write;

use super::{ConfusionMatrix, EvaluationReport};
use crate::data_model::ClassLabel;
use crate::error::{Error, Result};

/// Cell-wise `a - b`.
pub fn confusion_delta(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<Vec<Vec<i64>>> {
    if a.k() != b.k() {
        return Err(Error::InvalidParameter("confusion matrices differ in size".into()));
    }
    Ok(a.counts
        .iter()
        .zip(&b.counts)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| x as i64 - y as i64).collect())
        .collect())
}

fn class_names(k: usize) -> Vec<String> {
    if k == ClassLabel::COUNT {
        ClassLabel::ALL.iter().map(|c| c.name().to_string()).collect()
    } else {
        (0..k).map(|c| format!("class{c}")).collect()
    }
}

/// Results table (mean ± std macro-F1 per configuration) followed by the
/// summed confusion matrix of every configuration. With a baseline, each
/// cell also shows its difference to the baseline's matrix.
pub fn render_text(reports: &[EvaluationReport], baseline: Option<&str>) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Empty("no results to report".into()));
    }
    let base = match baseline {
        Some(name) => Some(
            reports
                .iter()
                .find(|r| r.config.name == name)
                .ok_or_else(|| Error::UnknownBaseline(name.to_string()))?,
        ),
        None => None,
    };
    let width = reports.iter().map(|r| r.config.name.len()).max().unwrap_or(0).max(13);
    let mut out = String::new();
    writeln!(out, "{:<width$}  macro-F1 (mean ± std over folds)", "configuration").unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<width$}  {:.4} ± {:.4}",
            r.config.name, r.summary.macro_f1_mean, r.summary.macro_f1_std
        )
        .unwrap();
    }

    for r in reports {
        let cm = &r.summary.confusion;
        let names = class_names(cm.k());
        let delta = base.map(|b| confusion_delta(cm, &b.summary.confusion)).transpose()?;
        writeln!(out).unwrap();
        match base {
            Some(b) => writeln!(out, "confusion {} (rows truth, columns predicted; delta vs {})", r.config.name, b.config.name),
            None => writeln!(out, "confusion {} (rows truth, columns predicted)", r.config.name),
        }
        .unwrap();
        let col = names.iter().map(String::len).max().unwrap_or(0).max(14);
        write!(out, "{:<col$}", "").unwrap();
        for n in &names {
            write!(out, " {n:>col$}").unwrap();
        }
        writeln!(out).unwrap();
        for (t, row) in cm.counts.iter().enumerate() {
            write!(out, "{:<col$}", names[t]).unwrap();
            for (p, v) in row.iter().enumerate() {
                let cell = match &delta {
                    Some(d) => format!("{v} ({:+})", d[t][p]),
                    None => v.to_string(),
                };
                write!(out, " {cell:>col$}").unwrap();
            }
            writeln!(out).unwrap();
        }
    }
    Ok(out)
}

/// Machine-readable form: an array of `{config, folds, summary}` objects.
pub fn render_json(reports: &[EvaluationReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}
