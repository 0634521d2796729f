//! Datasets, answer metrics, batch evaluation and error breakdowns.

mod metrics;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

pub use metrics::{exact_match, judge_match, normalize, parse_judgement, superset_match};

use crate::config::{sources_label, Source};
use crate::entity::LinkedEntity;
use crate::fusion::{EvidenceKind, Prediction};
use crate::pipeline::Pipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetExample {
    pub id: String,
    pub question: String,
    pub gold: String,
    #[serde(default)]
    pub gold_sources: Vec<String>,
    /// Gold entities, used only in oracle entity mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<LinkedEntity>>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads JSON lines, skipping blank ones. Errors carry 1-based line numbers.
pub fn read_dataset(input: impl BufRead) -> Result<Vec<DatasetExample>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| EvalError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: DatasetExample =
            serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: line_no, message: e.to_string() })?;
        if ex.question.trim().is_empty() || ex.gold.trim().is_empty() {
            return Err(EvalError::Parse { line: line_no, message: "question and gold must be non-empty".into() });
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetExample>, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    read_dataset(std::io::BufReader::new(file))
}

/// How often the gold answer shows up in the evidence of failed predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub total_errors: usize,
    pub gold_in_evidence: usize,
    pub gold_in_kb: usize,
    pub gold_in_text: usize,
    pub gold_in_tables: usize,
}

/// Counts failures whose normalized gold is a substring of some normalized
/// evidence text, overall and per source (tables include infoboxes).
/// Predictions without gold are ignored.
pub fn categorize_errors<'a>(failures: impl IntoIterator<Item = &'a Prediction>) -> ErrorBreakdown {
    let mut b = ErrorBreakdown::default();
    for p in failures {
        let Some(gold) = p.gold.as_deref() else { continue };
        b.total_errors += 1;
        let gold = normalize(gold);
        if gold.is_empty() {
            continue;
        }
        let hit = |kinds: &[EvidenceKind]| {
            p.evidences.iter().any(|(k, t)| kinds.contains(k) && normalize(t).contains(&gold))
        };
        let kb = hit(&[EvidenceKind::Kb]);
        let text = hit(&[EvidenceKind::Text]);
        let tables = hit(&[EvidenceKind::Table, EvidenceKind::Infobox]);
        let any = kb || text || tables || hit(&[EvidenceKind::LlmClaim]);
        b.gold_in_kb += kb as usize;
        b.gold_in_text += text as usize;
        b.gold_in_tables += tables as usize;
        b.gold_in_evidence += any as usize;
    }
    b
}

/// Scores of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scored {
    pub em: bool,
    pub superset: bool,
    /// `None` when not judged (judging off or the judge failed).
    pub judge: Option<bool>,
}

impl Scored {
    /// Judge verdict when there is one, otherwise EM.
    pub fn correct(&self) -> bool {
        self.judge.unwrap_or(self.em)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: String,
    pub n: usize,
    pub judged: usize,
    pub em_rate: f64,
    pub superset_rate: f64,
    /// Over judged examples; `None` when nothing was judged.
    pub judge_rate: Option<f64>,
    pub errors: ErrorBreakdown,
    pub evidence_failures: usize,
}

impl MetricReport {
    pub fn from_scores(config: &str, predictions: &[Prediction], scores: &[Scored], evidence_failures: usize) -> Self {
        let n = scores.len();
        let rate = |count: usize, of: usize| if of == 0 { 0.0 } else { count as f64 / of as f64 };
        let judged: Vec<bool> = scores.iter().filter_map(|s| s.judge).collect();
        let failures = predictions.iter().zip(scores).filter(|(_, s)| !s.correct()).map(|(p, _)| p);
        Self {
            config: config.into(),
            n,
            judged: judged.len(),
            em_rate: rate(scores.iter().filter(|s| s.em).count(), n),
            superset_rate: rate(scores.iter().filter(|s| s.superset).count(), n),
            judge_rate: (!judged.is_empty()).then(|| rate(judged.iter().filter(|j| **j).count(), judged.len())),
            errors: categorize_errors(failures),
            evidence_failures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub judge: bool,
    /// Examples in flight at once.
    pub concurrency: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { judge: true, concurrency: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: MetricReport,
    /// In dataset order.
    pub predictions: Vec<Prediction>,
    pub scores: Vec<Scored>,
}

/// Answers and scores every example. Predictions come back in dataset order
/// whatever the completion order.
pub async fn run_eval(dataset: &[DatasetExample], pipeline: &Pipeline, options: &EvalOptions) -> Result<EvalRun, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let llm = pipeline.llm();
    let results: Vec<(Prediction, Scored, usize)> = stream::iter(dataset)
        .map(|ex| async move {
            let answered = pipeline.answer_with(&ex.question, ex.entities.as_deref()).await;
            let prediction = answered.prediction(Some(ex.gold.clone()));
            let pred = &prediction.answer_generated;
            let judge = if options.judge {
                match judge_match(&ex.question, &ex.gold, pred, llm).await {
                    Ok(v) => Some(v),
                    Err(e) => {
                        tracing::warn!(id = %ex.id, error = %e, "example left unjudged");
                        None
                    }
                }
            } else {
                None
            };
            let scored = Scored { em: exact_match(&ex.gold, pred), superset: superset_match(&ex.gold, pred), judge };
            (prediction, scored, answered.diagnostics.evidence_failures)
        })
        .buffered(options.concurrency.max(1))
        .collect()
        .await;

    let failures: usize = results.iter().map(|r| r.2).sum();
    let (predictions, scores): (Vec<_>, Vec<_>) = results.into_iter().map(|(p, s, _)| (p, s)).unzip();
    let label = sources_label(&pipeline.config().sources);
    let report = MetricReport::from_scores(&label, &predictions, &scores, failures);
    Ok(EvalRun { report, predictions, scores })
}

/// One run per source subset over the same services.
pub async fn run_ablation(
    dataset: &[DatasetExample],
    pipeline: &Pipeline,
    configs: &[BTreeSet<Source>],
    options: &EvalOptions,
) -> Result<Vec<EvalRun>, EvalError> {
    let mut runs = Vec::new();
    for sources in configs {
        runs.push(run_eval(dataset, &pipeline.with_sources(sources.iter().copied()), options).await?);
    }
    Ok(runs)
}

/// Writes one prediction per line.
pub fn write_predictions(mut out: impl Write, predictions: &[Prediction]) -> std::io::Result<()> {
    for p in predictions {
        writeln!(out, "{}", p.to_json_line())?;
    }
    Ok(())
}

pub fn read_predictions(input: impl BufRead) -> Result<Vec<Prediction>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// Plain-text table with one row per config and EM / Superset / Judge
/// columns.
pub fn render_table(reports: &[MetricReport]) -> String {
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.config.clone(),
                r.n.to_string(),
                pct(r.em_rate),
                pct(r.superset_rate),
                r.judge_rate.map_or_else(|| "--".to_string(), pct),
            ]
        })
        .collect();
    let header = ["Config", "N", "EM", "Superset", "Judge Match"].map(String::from);
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String; 5]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!("  {cell:>w$}", w = *w));
        }
        s.trim_end().to_string()
    };
    let mut out = vec![line(&header), "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))];
    out.extend(rows.iter().map(line));
    out.join("\n") + "\n"
}

/// Error-case counts with shares of all errors.
pub fn render_breakdown(b: &ErrorBreakdown) -> String {
    let share = |n: usize| if b.total_errors == 0 { 0.0 } else { n as f64 * 100.0 / b.total_errors as f64 };
    [
        ("All Error Cases", b.total_errors),
        ("Gold in Evidence", b.gold_in_evidence),
        ("Gold in KB", b.gold_in_kb),
        ("Gold in Text", b.gold_in_text),
        ("Gold in Tables", b.gold_in_tables),
    ]
    .iter()
    .map(|(name, n)| format!("{name:<18}{n:>6} ({:.2}%)\n", share(*n)))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(gold: &str, evidences: &[(EvidenceKind, &str)]) -> Prediction {
        Prediction {
            question: "q".into(),
            gold: Some(gold.into()),
            answer_generated: "wrong".into(),
            evidences: evidences.iter().map(|(k, t)| (*k, t.to_string())).collect(),
        }
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let input = "{\"id\":\"1\",\"question\":\"q\",\"gold\":\"g\",\"gold_sources\":[\"KB\"]}\n\n{bad json}\n";
        match read_dataset(input.as_bytes()) {
            Err(EvalError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let empty_gold = "{\"id\":\"1\",\"question\":\"q\",\"gold\":\"\"}";
        assert!(matches!(read_dataset(empty_gold.as_bytes()), Err(EvalError::Parse { line: 1, .. })));
        assert_eq!(read_dataset("".as_bytes()).unwrap().len(), 0);
    }

    #[test]
    fn categorization() {
        let bob = pred(
            "baritone",
            &[(EvidenceKind::Kb, "Wikidata says the answer to \"What is the voice type of the Bob Dylan?\" is: baritone.")],
        );
        let empty = pred("x", &[]);
        let b = categorize_errors([&bob, &empty]);
        assert_eq!(b, ErrorBreakdown { total_errors: 2, gold_in_evidence: 1, gold_in_kb: 1, gold_in_text: 0, gold_in_tables: 0 });
        let infobox = pred("1605", &[(EvidenceKind::Infobox, "Published: 1605.<tr>")]);
        assert_eq!(categorize_errors([&infobox]).gold_in_tables, 1);
    }

    #[test]
    fn report_rates() {
        let preds = vec![pred("a", &[]), pred("b", &[])];
        let scores = [
            Scored { em: true, superset: true, judge: Some(true) },
            Scored { em: false, superset: true, judge: None },
        ];
        let r = MetricReport::from_scores("text", &preds, &scores, 0);
        assert_eq!((r.n, r.judged), (2, 1));
        assert_eq!((r.em_rate, r.superset_rate, r.judge_rate), (0.5, 1.0, Some(1.0)));
        assert_eq!(r.errors.total_errors, 1);
        let table = render_table(&[r]);
        assert!(table.starts_with("Config  N     EM  Superset  Judge Match\n"));
        assert!(table.contains("text    2  50.0%    100.0%       100.0%"));
    }
}
