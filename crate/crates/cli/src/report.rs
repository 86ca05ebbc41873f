//! Output files and plain-text tables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use activetest::engine::{read_jsonl, write_jsonl};
use anyhow::{Context, Result};

use crate::experiment::{Manifest, RawRun, SummaryRow, SUMMARY_HEADER};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RAW_FILE: &str = "raw.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TYPE_I_FILE: &str = "type_i.csv";
pub const TABLES_FILE: &str = "tables.txt";

const MISSING: &str = "—";

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    Ok(w.into_inner()?)
}

/// The Type I series per (parameter, prior, classifier, strategy) over the
/// budgets, for the null cells only.
pub fn type_i_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "param",
        "prior",
        "classifier",
        "strategy",
        "budget",
        "type_i_error",
        "runs",
    ])?;
    for r in rows.iter().filter(|r| r.error_kind == "type_i") {
        w.write_record([
            r.param.to_string(),
            r.prior.to_string(),
            r.classifier.to_string(),
            r.strategy.clone(),
            r.budget.to_string(),
            format!("{:.4}", r.error_rate),
            r.runs.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn render(title: &str, header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = format!("{title}\n");
    out += &line(header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out += &format!("|-{}-|\n", rule.join("-|-"));
    for row in body {
        out += &line(row);
    }
    out
}

fn find<'a>(
    rows: &'a [SummaryRow],
    param: f64,
    prior: f64,
    classifier: activetest::classifier::ClassifierKind,
    strategy: &str,
    budget: usize,
) -> Option<&'a SummaryRow> {
    rows.iter().find(|r| {
        r.param == param
            && r.prior == prior
            && r.classifier == classifier
            && r.strategy == strategy
            && r.budget == budget
    })
}

/// Error-rate and label-count tables, one pair per scenario parameter.
/// Rows are budgets; columns are (prior, classifier) in grid order; each
/// entry lists the strategies in grid order separated by ` / `.
pub fn tables(manifest: &Manifest, rows: &[SummaryRow]) -> String {
    let mut header = vec!["budget".to_string()];
    for prior in &manifest.priors {
        for c in &manifest.classifiers {
            header.push(format!("prior={prior} {c}"));
        }
    }
    let strategies = manifest.strategies.join(" / ");
    let mut out = String::new();
    for &param in &manifest.params {
        let kind = if crate::config::is_null(&manifest.scenario, param) {
            "Type I error"
        } else {
            "Type II error"
        };
        let cell = |budget: usize, f: &dyn Fn(&SummaryRow) -> String| -> Vec<String> {
            let mut line = vec![budget.to_string()];
            for &prior in &manifest.priors {
                for &c in &manifest.classifiers {
                    let parts: Vec<String> = manifest
                        .strategies
                        .iter()
                        .map(|s| {
                            find(rows, param, prior, c, s, budget)
                                .map(f)
                                .unwrap_or_else(|| MISSING.to_string())
                        })
                        .collect();
                    line.push(parts.join(" / "));
                }
            }
            line
        };
        let errors: Vec<Vec<String>> = manifest
            .budgets
            .iter()
            .map(|&b| cell(b, &|r| format!("{:.3}", r.error_rate)))
            .collect();
        let labels: Vec<Vec<String>> = manifest
            .budgets
            .iter()
            .map(|&b| {
                cell(b, &|r| match r.labels_sd {
                    Some(sd) => format!("{:.1} ± {sd:.1}", r.labels_mean),
                    None => format!("{:.1}", r.labels_mean),
                })
            })
            .collect();
        let name = format!("{} = {param}", manifest.param_name);
        out += &render(&format!("{kind}, {name} ({strategies})"), &header, &errors);
        out.push('\n');
        out += &render(
            &format!("Labels spent, mean ± sd, {name} ({strategies})"),
            &header,
            &labels,
        );
        out.push('\n');
    }
    out
}

pub fn write_all(
    dir: &Path,
    manifest: &Manifest,
    raw: &[RawRun],
    rows: &[SummaryRow],
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let m = File::create(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(m, manifest)?;
    let mut w = BufWriter::new(File::create(dir.join(RAW_FILE))?);
    write_jsonl(&mut w, raw)?;
    w.flush()?;
    std::fs::write(dir.join(SUMMARY_FILE), summary_csv(rows)?)?;
    std::fs::write(dir.join(TYPE_I_FILE), type_i_csv(rows)?)?;
    std::fs::write(dir.join(TABLES_FILE), tables(manifest, rows))?;
    Ok(())
}

pub fn read_run_dir(dir: &Path) -> Result<(Manifest, Vec<RawRun>)> {
    let path = dir.join(MANIFEST_FILE);
    let m = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let manifest = serde_json::from_reader(BufReader::new(m))
        .with_context(|| format!("malformed {}", path.display()))?;
    let path = dir.join(RAW_FILE);
    let r = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let raw =
        read_jsonl(BufReader::new(r)).with_context(|| format!("malformed {}", path.display()))?;
    Ok((manifest, raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use activetest::classifier::ClassifierKind;

    fn manifest(budgets: Vec<usize>) -> Manifest {
        Manifest {
            scenario: "gaussian".into(),
            param_name: "delta".into(),
            params: vec![0.2],
            priors: vec![0.5],
            classifiers: vec![ClassifierKind::Logistic],
            strategies: vec!["bimodal".into(), "random".into()],
            baseline: Some("random".into()),
            budgets,
            replications: 1,
            base_seed: 0,
            n0: 10,
            alpha: 0.05,
        }
    }

    fn row(strategy: &str, budget: usize, rate: f64) -> SummaryRow {
        SummaryRow {
            scenario: "gaussian".into(),
            param: 0.2,
            prior: 0.5,
            classifier: ClassifierKind::Logistic,
            strategy: strategy.into(),
            budget,
            runs: 2,
            failures: 0,
            rejections: 1,
            error_kind: "type_ii",
            error_rate: rate,
            labels_mean: 42.0,
            labels_sd: Some(1.5),
            reject_labels_mean: None,
            reject_labels_sd: None,
            t_test_p: None,
        }
    }

    #[test]
    fn empty_summary_gives_header_only_tables() {
        let csv = summary_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1);
        let t = tables(&manifest(vec![]), &[]);
        let lines: Vec<&str> = t.lines().filter(|l| l.starts_with('|')).collect();
        // header and rule for each of the two tables
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn one_cell_with_a_missing_strategy() {
        let t = tables(&manifest(vec![200]), &[row("bimodal", 200, 0.25)]);
        assert!(t.contains("| 200    | 0.250 / —          |"), "{t}");
        assert!(t.contains("42.0 ± 1.5 / —"), "{t}");
    }

    #[test]
    fn csv_fields_are_fixed_precision() {
        let csv = String::from_utf8(summary_csv(&[row("random", 400, 0.5)]).unwrap()).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "gaussian,0.2,0.5,logistic,random,400,2,0,1,type_ii,0.5000,42.000,1.500,,,"
        );
    }
}
