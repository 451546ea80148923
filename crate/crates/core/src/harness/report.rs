use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Confusion, TrainConfig};
use crate::data::Task;
use crate::error::{arg_err, Result};
use crate::model::Variant;

/// Held-out results for one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject: u32,
    pub acc: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub n_train: usize,
    pub final_loss: f32,
}

/// Summary statistics; a pure function of the per-subject rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_acc: f64,
    /// Population standard deviation.
    pub std_acc: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub top_k: usize,
    pub top_k_acc: f64,
    pub top_k_f1: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Aggregate {
    /// `k` is clamped to the number of rows; top-k ranks by accuracy, ties
    /// by subject id.
    pub fn from_rows(rows: &[SubjectRow], k: usize) -> Result<Self> {
        if rows.is_empty() {
            return arg_err("cannot aggregate zero subjects");
        }
        let acc: Vec<f64> = rows.iter().map(|r| r.acc).collect();
        let f1: Vec<f64> = rows.iter().map(|r| r.f1).collect();
        let (mean_acc, std_acc) = mean_std(&acc);
        let (mean_f1, std_f1) = mean_std(&f1);
        let mut ranked: Vec<&SubjectRow> = rows.iter().collect();
        ranked.sort_by(|a, b| b.acc.total_cmp(&a.acc).then(a.subject.cmp(&b.subject)));
        let top = &ranked[..k.clamp(1, rows.len())];
        Ok(Self {
            mean_acc,
            std_acc,
            mean_f1,
            std_f1,
            top_k: top.len(),
            top_k_acc: top.iter().map(|r| r.acc).sum::<f64>() / top.len() as f64,
            top_k_f1: top.iter().map(|r| r.f1).sum::<f64>() / top.len() as f64,
        })
    }
}

/// Leave-one-subject-out results for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Row label: the variant name, or the swept value.
    pub tag: String,
    pub variant: Variant,
    pub task: Task,
    pub per_subject: Vec<SubjectRow>,
    pub summary: Aggregate,
    pub split_hash: String,
    pub param_count: usize,
    /// Checksum of the initial parameters shared by every fold.
    pub init_checksum: String,
    pub config: TrainConfig,
}

impl EvalReport {
    pub fn load_json(path: &Path) -> Result<Vec<EvalReport>> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// `mean (std)` at four decimals.
pub fn cell(mean: f64, std: f64) -> String {
    format!("{mean:.4} ({std:.4})")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Json,
        ReportFormat::Csv,
        ReportFormat::Markdown,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        }
    }

    fn render(self, reports: &[EvalReport]) -> Result<String> {
        Ok(match self {
            ReportFormat::Json => serde_json::to_string_pretty(reports)? + "\n",
            ReportFormat::Csv => sweep_csv(reports),
            ReportFormat::Markdown => markdown(reports),
        })
    }
}

/// One line per (report, subject) at full precision, ready for box plots.
pub fn sweep_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("tag,variant,task,subject,acc,f1,tp,fp,fn,tn,n_train,final_loss\n");
    for r in reports {
        for row in &r.per_subject {
            let c = row.confusion;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tag,
                r.variant,
                r.task,
                row.subject,
                row.acc,
                row.f1,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                row.n_train,
                row.final_loss
            );
        }
    }
    s
}

fn markdown(reports: &[EvalReport]) -> String {
    let mut s = String::from("## Summary\n\n");
    s.push_str(
        "| Setting | Variant | Task | Params | P_acc | P_F1 |\n|---|---|---|---:|---:|---:|\n",
    );
    for r in reports {
        let a = &r.summary;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.tag,
            r.variant,
            r.task,
            r.param_count,
            cell(a.mean_acc, a.std_acc),
            cell(a.mean_f1, a.std_f1)
        );
    }
    for r in reports {
        let a = &r.summary;
        let _ = write!(
            s,
            "\n## {} ({})\n\n| Subject | P_acc | P_F1 |\n|---|---:|---:|\n",
            r.tag, r.task
        );
        for row in &r.per_subject {
            let _ = writeln!(
                s,
                "| s{:02} | {:.4} | {:.4} |",
                row.subject, row.acc, row.f1
            );
        }
        let _ = writeln!(
            s,
            "| Average | {} | {} |",
            cell(a.mean_acc, a.std_acc),
            cell(a.mean_f1, a.std_f1)
        );
        let _ = writeln!(
            s,
            "| TOP{} Subjects | {:.4} | {:.4} |",
            a.top_k, a.top_k_acc, a.top_k_f1
        );
    }
    s
}

/// Writes the requested formats into `dir`. Everything is rendered before
/// the first file is touched, and each file is written to a temporary name
/// and renamed into place.
pub fn emit_report(
    reports: &[EvalReport],
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return arg_err("no reports to emit");
    }
    if formats.is_empty() {
        return arg_err("no report formats requested");
    }
    let rendered = formats
        .iter()
        .map(|f| Ok((f.file_name(), f.render(reports)?)))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, text) in &rendered {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, text) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, path) in &staged {
        fs::rename(tmp, path)?;
    }
    Ok(staged.into_iter().map(|(_, p)| p).collect())
}
