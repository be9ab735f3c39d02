//! Collects train.json files into CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use snowv_ml::Activation;
use snowv_sca::attack::{majority_vote_prob, Method, Preprocess};

use crate::args::{Command, Global, ReportArgs};
use crate::manifest::Manifest;
use crate::run::TrainRecord;
use crate::Outcome;

const BITS: [u8; 4] = [1, 2, 4, 8];

fn find_records(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = fs::metadata(dir).with_context(|| format!("reading {}", dir.display()))?;
    if meta.is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            find_records(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "train.json") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn load_records(dirs: &[PathBuf]) -> Result<Vec<(String, TrainRecord)>> {
    let mut paths = Vec::new();
    for d in dirs {
        find_records(d, &mut paths)?;
    }
    paths.sort();
    paths.dedup();
    paths
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
            let rec: TrainRecord = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))?;
            let run = p.parent().map(|d| d.display().to_string()).unwrap_or_default();
            Ok((run, rec))
        })
        .collect()
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        if x.is_finite() {
            self.sum += x;
            self.n += 1;
        }
    }

    fn cell(&self) -> String {
        if self.n == 0 {
            String::new()
        } else {
            format!("{:.4}", self.sum / self.n as f64)
        }
    }
}

/// Activation rows by bit-width columns, train and test accuracy per cell.
pub fn fcn_table(records: &[(String, TrainRecord)], preprocess: Preprocess) -> String {
    let mut cells: BTreeMap<(usize, u8, bool), Mean> = BTreeMap::new();
    for (_, r) in records {
        let Method::Fcn(act) = r.method else { continue };
        if r.preprocess != preprocess {
            continue;
        }
        let row = Activation::ALL.iter().position(|a| *a == act).unwrap_or(0);
        for t in &r.targets {
            cells.entry((row, t.bits, false)).or_default().push(t.train_accuracy);
            cells.entry((row, t.bits, true)).or_default().push(t.test_accuracy);
        }
    }
    let mut out = String::from("activation");
    for b in BITS {
        let _ = write!(out, ",{b}b_train,{b}b_test");
    }
    out.push('\n');
    for (row, act) in Activation::ALL.iter().enumerate() {
        out.push_str(act.name());
        for b in BITS {
            for test in [false, true] {
                let c = cells.get(&(row, b, test)).map(Mean::cell).unwrap_or_default();
                let _ = write!(out, ",{c}");
            }
        }
        out.push('\n');
    }
    out
}

/// LDA test accuracy by training-set size and bit width.
pub fn lda_table(records: &[(String, TrainRecord)]) -> String {
    let mut cells: BTreeMap<(usize, u8), Mean> = BTreeMap::new();
    for (_, r) in records.iter().filter(|(_, r)| r.method == Method::Lda) {
        for t in &r.targets {
            cells.entry((r.split.0, t.bits)).or_default().push(t.test_accuracy);
        }
    }
    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = cells.keys().map(|k| k.0).collect();
        s.dedup();
        s
    };
    let mut out = String::from("train_traces,1b_test,2b_test,4b_test,8b_test\n");
    for n in sizes {
        out.push_str(&n.to_string());
        for b in BITS {
            let c = cells.get(&(n, b)).map(Mean::cell).unwrap_or_default();
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

fn comparison_table(records: &[(String, TrainRecord)]) -> String {
    let mut cells: BTreeMap<(String, String, u8), (Mean, Mean)> = BTreeMap::new();
    for (_, r) in records {
        let pre = match r.preprocess {
            Preprocess::None => "none",
            Preprocess::Pca => "pca",
        };
        for t in &r.targets {
            let e = cells.entry((r.method.to_string(), pre.into(), t.bits)).or_default();
            e.0.push(t.train_accuracy);
            e.1.push(t.test_accuracy);
        }
    }
    let mut out = String::from("method,preprocess,bits,train_accuracy,test_accuracy\n");
    for ((m, p, b), (tr, te)) in &cells {
        let _ = writeln!(out, "{m},{p},{b},{},{}", tr.cell(), te.cell());
    }
    out
}

fn history_table(records: &[(String, TrainRecord)]) -> String {
    let mut out = String::from("run,method,target,epoch,train_loss,val_loss,val_accuracy\n");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (run, r) in records {
        for t in &r.targets {
            for e in &t.history {
                let _ = writeln!(
                    out,
                    "{run},{},{},{},{},{},{}",
                    r.method,
                    t.target,
                    e.epoch,
                    e.train_loss,
                    opt(e.val_loss),
                    opt(e.val_accuracy)
                );
            }
        }
    }
    out
}

/// Majority-vote success against attack length for every 8-bit target.
fn vote_table(records: &[(String, TrainRecord)], max_votes: usize) -> Result<String> {
    let mut out = String::from("run,method,target,p,n,probability\n");
    for (run, r) in records {
        for t in r.targets.iter().filter(|t| t.bits == 8 && t.test_accuracy.is_finite()) {
            for n in (1..=max_votes).step_by(2) {
                let prob = majority_vote_prob(t.test_accuracy, n)?;
                let _ = writeln!(out, "{run},{},{},{},{n},{prob}", r.method, t.target, t.test_accuracy);
            }
        }
    }
    Ok(out)
}

pub fn run(g: &Global, cmd: &Command, a: &ReportArgs) -> Result<Outcome> {
    let records = load_records(&a.runs)?;
    if records.is_empty() {
        bail!("no train.json under {:?}", a.runs);
    }
    let files = [
        ("fcn_pca_table.csv", fcn_table(&records, Preprocess::Pca)),
        ("fcn_table.csv", fcn_table(&records, Preprocess::None)),
        ("lda_table.csv", lda_table(&records)),
        ("comparison.csv", comparison_table(&records)),
        ("history.csv", history_table(&records)),
        ("vote_curves.csv", vote_table(&records, a.max_votes)?),
    ];
    let mut outputs = Vec::new();
    for (name, body) in &files {
        let path = g.out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(name.to_string());
    }
    println!("{} runs summarised into {}", records.len(), g.out_dir.display());
    Manifest::new(g, cmd, json!({ "runs": records.len() }), outputs).write(&g.out_dir)?;
    Ok(Outcome::Clean)
}
