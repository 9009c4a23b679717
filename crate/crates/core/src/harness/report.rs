//! Aggregate tables written after a run (or on demand from a records directory).
//!
//! Aggregation is a single-threaded fold over records in file order, grouped
//! through ordered maps, so a report is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_records, read_jsonl, HarnessError, EDIT_DISTANCES_FILE};
use crate::metrics::{
    choice_distribution, compositional_rate, correctness_vs_consistency, geoquery_rate,
    hypothetical_accuracy, CcOutcome, ConsistencyRecord, Rate, TaskKind,
};

pub const RATES_FILE: &str = "rates.csv";
pub const SUMMARY_FILE: &str = "summary.md";
pub const REPORT_FILES: [&str; 7] = [
    RATES_FILE,
    "fig2_accuracy_by_m.csv",
    "fig3_choice_distribution.csv",
    "fig4_cc_by_k.csv",
    "fig5_corr_vs_cons.csv",
    "table2_edit_distances.csv",
    SUMMARY_FILE,
];

/// Percent edit distance between two models' completions of one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditDistanceRecord {
    pub task: TaskKind,
    pub item: String,
    pub model_a: String,
    pub model_b: String,
    pub percent: f64,
}

const ALL: &str = "all";

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    fn markdown(&self, out: &mut String) {
        let _ = writeln!(out, "## {}\n", self.name.trim_end_matches(".csv"));
        if self.rows.is_empty() {
            out.push_str("_no rows_\n\n");
            return;
        }
        let _ = writeln!(out, "| {} |", self.header.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.header.len()));
        for r in &self.rows {
            let _ = writeln!(out, "| {} |", r.join(" | "));
        }
        out.push('\n');
    }
}

fn rate_cells(r: Rate) -> [String; 3] {
    [
        r.numerator.to_string(),
        r.denominator.to_string(),
        fmt_value(r.value()),
    ]
}

type Group<'a> = BTreeMap<(TaskKind, &'a str), Vec<&'a ConsistencyRecord>>;

fn by_task_model(records: &[ConsistencyRecord]) -> Group<'_> {
    let mut g: Group<'_> = BTreeMap::new();
    for r in records {
        g.entry((r.task, r.model.as_str())).or_default().push(r);
    }
    g
}

fn owned(rs: &[&ConsistencyRecord]) -> Vec<ConsistencyRecord> {
    rs.iter().map(|r| (*r).clone()).collect()
}

/// Reads `records_dir` and writes every report file into `out_dir`.
pub fn write_reports(records_dir: &Path, out_dir: &Path) -> Result<(), HarnessError> {
    let records = load_records(records_dir)?;
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords(records_dir.to_path_buf()));
    }
    let ed_path = records_dir.join(EDIT_DISTANCES_FILE);
    let edits: Vec<EditDistanceRecord> = if ed_path.exists() {
        read_jsonl(&ed_path)?
    } else {
        Vec::new()
    };

    let groups = by_task_model(&records);
    let mut rates = Table::new(
        RATES_FILE,
        &[
            "task",
            "model",
            "k",
            "m",
            "template",
            "metric",
            "numerator",
            "denominator",
            "value",
        ],
    );
    let mut fig2 = Table::new(
        "fig2_accuracy_by_m.csv",
        &[
            "task",
            "model",
            "m",
            "template",
            "numerator",
            "denominator",
            "accuracy",
        ],
    );
    let mut fig3 = Table::new(
        "fig3_choice_distribution.csv",
        &[
            "task",
            "model",
            "m",
            "provenance",
            "count",
            "parseable",
            "frequency",
        ],
    );
    let mut fig4 = Table::new(
        "fig4_cc_by_k.csv",
        &[
            "task",
            "model",
            "k",
            "numerator",
            "denominator",
            "rate",
            "consistent",
            "sub_wrong_root_same",
            "sub_right_root_differs",
            "undefined",
        ],
    );
    let mut fig5 = Table::new(
        "fig5_corr_vs_cons.csv",
        &[
            "task",
            "model",
            "k",
            "correctness_numerator",
            "correctness_denominator",
            "correctness",
            "consistency_numerator",
            "consistency_denominator",
            "consistency",
        ],
    );
    let mut table2 = Table::new(
        "table2_edit_distances.csv",
        &[
            "dataset",
            "model_a",
            "model_b",
            "pairs",
            "mean_percent_edit_distance",
        ],
    );

    for (&(task, model), rs) in &groups {
        let t = task.as_str().to_string();
        let base =
            |k: String, m: String, tpl: String| vec![t.clone(), model.to_string(), k, m, tpl];
        if task.is_hypothetical() {
            // Full (k, m, template) grid, then the marginal over k per
            // (m, template), per m, and overall.
            let mut cells: BTreeMap<(String, String, String), Vec<&ConsistencyRecord>> =
                BTreeMap::new();
            for r in rs {
                let (k, m, tpl) = (r.k.to_string(), r.m.unwrap_or(0), r.template.unwrap_or(0));
                for key in [
                    (k.clone(), m.to_string(), tpl.to_string()),
                    (ALL.into(), m.to_string(), tpl.to_string()),
                    (ALL.into(), m.to_string(), ALL.into()),
                    (ALL.into(), ALL.into(), ALL.into()),
                ] {
                    cells.entry(key).or_default().push(r);
                }
            }
            let mut ordered: Vec<_> = cells.into_iter().collect();
            ordered.sort_by_key(|((k, m, tpl), _)| (sort_key(k), sort_key(m), sort_key(tpl)));
            for ((k, m, tpl), cell) in ordered {
                let acc = hypothetical_accuracy(&owned(&cell)).expect("non-empty cell");
                let mut row = base(k.clone(), m.clone(), tpl.clone());
                row.push("hypothetical_accuracy".into());
                row.extend(rate_cells(acc));
                rates.push(row);
                if k == ALL && m != ALL {
                    let mut row = vec![t.clone(), model.to_string(), m.clone(), tpl.clone()];
                    row.extend(rate_cells(acc));
                    fig2.push(row);
                }
            }

            let mut per_m: BTreeMap<usize, Vec<&ConsistencyRecord>> = BTreeMap::new();
            for r in rs {
                per_m.entry(r.m.unwrap_or(0)).or_default().push(r);
            }
            let slices = per_m
                .iter()
                .map(|(m, v)| (m.to_string(), v.clone()))
                .chain(std::iter::once((ALL.to_string(), rs.clone())));
            for (m, slice) in slices {
                let (dist, parseable) =
                    choice_distribution(&owned(&slice)).expect("non-empty slice");
                for (prov, count) in dist {
                    let freq = Rate::new(count, parseable).value();
                    fig3.push(vec![
                        t.clone(),
                        model.to_string(),
                        m.clone(),
                        prov,
                        count.to_string(),
                        parseable.to_string(),
                        fmt_value(freq),
                    ]);
                }
            }
        } else {
            let mut per_k: BTreeMap<usize, Vec<&ConsistencyRecord>> = BTreeMap::new();
            for r in rs {
                per_k.entry(r.k).or_default().push(r);
            }
            let slices = per_k
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .chain(std::iter::once((ALL.to_string(), rs.clone())));
            for (k, slice) in slices {
                let slice = owned(&slice);
                let (rate, breakdown) = compositional_rate(&slice).expect("non-empty slice");
                let headline = if task == TaskKind::CompGeo {
                    geoquery_rate(&slice).expect("non-empty slice")
                } else {
                    rate
                };
                let mut row = base(k.clone(), String::new(), String::new());
                row.push("cc_rate".into());
                row.extend(rate_cells(headline));
                rates.push(row);
                for o in CcOutcome::ALL {
                    let mut row = base(k.clone(), String::new(), String::new());
                    row.push(format!("cc_{}", o.as_str()));
                    row.extend(rate_cells(Rate::new(breakdown.get(o), breakdown.total())));
                    rates.push(row);
                }
                if k != ALL {
                    let mut row = vec![t.clone(), model.to_string(), k.clone()];
                    row.extend(rate_cells(headline));
                    row.extend(CcOutcome::ALL.iter().map(|&o| breakdown.get(o).to_string()));
                    fig4.push(row);
                }
            }
            for point in correctness_vs_consistency(&owned(rs)) {
                let mut row = base(point.k.to_string(), String::new(), String::new());
                row.push("root_correctness".into());
                row.extend(rate_cells(point.correctness));
                rates.push(row);
                let mut row = vec![t.clone(), model.to_string(), point.k.to_string()];
                row.extend(rate_cells(point.correctness));
                row.extend(rate_cells(point.consistency));
                fig5.push(row);
            }
        }
    }

    let mut pairs: BTreeMap<(TaskKind, &str, &str), (u64, f64)> = BTreeMap::new();
    for e in &edits {
        let (a, b) = if e.model_a <= e.model_b {
            (&e.model_a, &e.model_b)
        } else {
            (&e.model_b, &e.model_a)
        };
        let cell = pairs.entry((e.task, a, b)).or_insert((0, 0.0));
        cell.0 += 1;
        cell.1 += e.percent;
    }
    for ((task, a, b), (n, sum)) in pairs {
        table2.push(vec![
            task.as_str().to_string(),
            a.to_string(),
            b.to_string(),
            n.to_string(),
            fmt_value(sum / n as f64),
        ]);
    }

    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut summary = String::from("# Consistency report\n\n");
    for table in [&rates, &fig2, &fig3, &fig4, &fig5, &table2] {
        let path = out_dir.join(table.name);
        fs::write(&path, table.csv()).map_err(|e| HarnessError::io(&path, e))?;
        if table.name != RATES_FILE {
            table.markdown(&mut summary);
        }
    }
    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, summary).map_err(|e| HarnessError::io(&path, e))?;
    Ok(())
}

/// Numbers in numeric order, with "all" last.
fn sort_key(s: &str) -> (u8, usize) {
    match s.parse() {
        Ok(n) => (0, n),
        Err(_) => (1, 0),
    }
}
