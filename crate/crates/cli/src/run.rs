use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;
use snowv_ml::{EpochStats, Scalar, TrainConfig};
use snowv_sca::attack::vote::{mtd_bounded, odd_at_least, REPORTED_MTD};
use snowv_sca::attack::{
    feedback_targets, fit_bank, recover_full_key, AttackResult, ClassifierBank, KeystreamCheck, Method,
    Preprocess, ProfileConfig, RecoverConfig, TargetSpec,
};
use snowv_sca::campaign::{Campaign, IvPolicy, KeyPolicy, TraceSet};
use snowv_sca::cipher::{IV_LEN, KEY_LEN};
use snowv_sca::leakage::{trace_rng, LeakModel, Simulator};
use snowv_sca::store::{self, SplitSpec};
use snowv_sca::tvla::welch_t;

use crate::args::*;
use crate::manifest::Manifest;
use crate::{report, Outcome};

pub fn dispatch(g: &Global, cmd: &Command) -> Result<Outcome> {
    if !matches!(cmd, Command::Replay(_)) {
        fs::create_dir_all(&g.out_dir).with_context(|| format!("creating {}", g.out_dir.display()))?;
    }
    match cmd {
        Command::Simulate(a) => simulate(g, cmd, a),
        Command::Tvla(a) => tvla(g, cmd, a),
        Command::Train(a) => train(g, cmd, a),
        Command::Attack(a) => attack(g, cmd, a),
        Command::Mtd(a) => mtd(g, cmd, a),
        Command::Report(a) => report::run(g, cmd, a),
        Command::Replay(a) => {
            let m = Manifest::read(&a.manifest)?;
            if matches!(m.run, Command::Replay(_)) {
                bail!("{} records a replay, not a command", a.manifest.display());
            }
            let g = Global {
                out_dir: g.out_dir.clone(),
                seed: m.seed,
                jobs: g.jobs,
            };
            dispatch(&g, &m.run)
        }
    }
}

fn parse_hex<const N: usize>(what: &str, s: &str) -> Result<[u8; N]> {
    let v = hex::decode(s.trim()).with_context(|| format!("{what} is not hex"))?;
    v.as_slice()
        .try_into()
        .map_err(|_| anyhow!("{what} must be {} hex digits, got {}", 2 * N, 2 * v.len()))
}

/// Stable bytes derived from the seed, for defaults the user did not give.
fn seeded_bytes<const N: usize>(seed: u64, stream: u64) -> [u8; N] {
    let mut out = [0u8; N];
    trace_rng(seed, stream).fill_bytes(&mut out);
    out
}

const KEY_STREAM: u64 = u64::MAX - 1;
const IV_STREAM: u64 = u64::MAX - 2;

pub fn load_traces(path: &Path) -> Result<TraceSet> {
    Ok(store::load(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn leak_model(a: &SimulateArgs) -> LeakModel {
    match a.model {
        ModelArg::Default => {
            let mut m = LeakModel {
                noise_sigma: a.noise_sigma,
                ..LeakModel::default()
            };
            if let Some(s) = a.device_seed {
                m.device_seed = s;
            }
            m
        }
        ModelArg::Hw => LeakModel::hamming_weight(a.noise_sigma),
    }
}

fn simulate(g: &Global, cmd: &Command, a: &SimulateArgs) -> Result<Outcome> {
    let key: [u8; KEY_LEN] = match &a.key {
        Some(k) => parse_hex("--key", k)?,
        None => seeded_bytes(g.seed, KEY_STREAM),
    };
    let iv: [u8; IV_LEN] = match &a.iv {
        Some(v) => parse_hex("--iv", v)?,
        None => seeded_bytes(g.seed, IV_STREAM),
    };
    let model = leak_model(a);
    let sim = Simulator::new(model.clone())?;
    let campaign = Campaign {
        n: a.n,
        key_policy: match a.key_policy {
            KeyPolicyArg::Fixed => KeyPolicy::Fixed(key),
            KeyPolicyArg::Fresh => KeyPolicy::Fresh,
        },
        iv_policy: match a.iv_policy {
            IvPolicyArg::Fixed => IvPolicy::Fixed(iv),
            IvPolicyArg::Random => IvPolicy::Random,
            IvPolicyArg::FixedVsRandom => IvPolicy::FixedVsRandom(iv),
            IvPolicyArg::FixedVsFixed => IvPolicy::FixedVsFixed(iv),
        },
        seed: g.seed,
        store_keys: !a.no_keys,
    };
    let ts = campaign.simulate(&sim);
    let out = a.out.clone().unwrap_or_else(|| g.out_dir.join("traces.svtr"));
    store::save(&ts, &out)?;
    let mut outputs = vec![file_name(&out)];
    if a.csv {
        let path = g.out_dir.join("traces.csv");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        store::write_csv(&ts, BufWriter::new(f))?;
        outputs.push("traces.csv".into());
    }
    println!(
        "wrote {} traces x {} samples to {}",
        ts.len(),
        ts.samples_per_trace(),
        out.display()
    );
    let resolved = json!({
        "leak_model": model,
        "key": hex::encode(key),
        "iv": hex::encode(iv),
        "samples_per_trace": sim.trace_len(),
    });
    Manifest::new(g, cmd, resolved, outputs).write(&g.out_dir)?;
    Ok(Outcome::Clean)
}

fn tvla(g: &Global, cmd: &Command, a: &TvlaArgs) -> Result<Outcome> {
    let ts = load_traces(&a.input)?;
    let report = match a.precision {
        Precision::F32 => welch_t::<f32>(&ts, a.threshold)?,
        Precision::F64 => welch_t::<f64>(&ts, a.threshold)?,
    };
    let path = g.out_dir.join("tvla.csv");
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    report.write_csv(BufWriter::new(f))?;
    println!("{}", report.summary());
    let resolved = json!({
        "max_abs_t": report.max_abs_t(),
        "leak_points": report.leak_points.len(),
    });
    Manifest::new(g, cmd, resolved, vec!["tvla.csv".into()]).write(&g.out_dir)?;
    Ok(if report.has_leaks() {
        Outcome::Findings
    } else {
        Outcome::Clean
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

impl From<&EpochStats> for EpochRecord {
    fn from(e: &EpochStats) -> Self {
        EpochRecord {
            epoch: e.epoch,
            train_loss: e.train_loss,
            val_loss: e.val_loss,
            val_accuracy: e.val_accuracy,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: String,
    pub bits: u8,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub pca_components: Option<usize>,
    pub history: Vec<EpochRecord>,
}

/// Contents of train.json.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainRecord {
    pub method: Method,
    pub preprocess: Preprocess,
    pub precision: Precision,
    pub traces: usize,
    /// Train, validation and test sizes.
    pub split: (usize, usize, usize),
    pub samples_per_trace: usize,
    pub targets: Vec<TargetRecord>,
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| anyhow!("bad {what} entry {x:?}")))
        .collect()
}

fn train_typed<T: Scalar>(
    sets: [&TraceSet; 3],
    targets: &[TargetSpec],
    method: Method,
    preprocess: Preprocess,
    cfg: &ProfileConfig,
) -> Result<(Vec<u8>, Vec<TargetRecord>)> {
    let [train, val, test] = sets;
    let val_opt = (!val.is_empty()).then_some(val);
    let (bank, histories) = fit_bank::<T>(train, val_opt, targets, method, preprocess, cfg)?;
    let mut records = Vec::new();
    for (c, h) in bank.classifiers.iter().zip(&histories) {
        records.push(TargetRecord {
            target: c.target.to_string(),
            bits: c.target.bits,
            train_accuracy: c.accuracy(train)?,
            val_accuracy: val_opt.map(|v| c.accuracy(v)).transpose()?,
            test_accuracy: if test.is_empty() { f64::NAN } else { c.accuracy(test)? },
            pca_components: c.pca.as_ref().map(|p| p.n_components()),
            history: h.iter().map(EpochRecord::from).collect(),
        });
    }
    Ok((bank.to_bytes(), records))
}

fn train(g: &Global, cmd: &Command, a: &TrainArgs) -> Result<Outcome> {
    let ts = load_traces(&a.input)?;
    ensure!(
        ts.keys.is_some(),
        "{} has no per-trace keys; simulate profiling traces without --no-keys",
        a.input.display()
    );
    let fractions: Vec<f64> = parse_list("--split", &a.split)?;
    let [tr, va, te] = fractions[..] else {
        bail!("--split needs three fractions, got {}", fractions.len());
    };
    let (train, val, test) = store::split(&ts, &SplitSpec::new(tr, va, te, g.seed)?)?;
    let targets = if a.targets.trim() == "feedback" {
        feedback_targets()
    } else {
        parse_list("--targets", &a.targets)?
    };
    ensure!(!targets.is_empty(), "no targets given");
    let method: Method = a.method.parse()?;
    let preprocess = if a.pca { Preprocess::Pca } else { Preprocess::None };
    let precision = a.precision.unwrap_or(match method {
        Method::Lda => Precision::F64,
        Method::Fcn(_) => Precision::F32,
    });
    let cfg = ProfileConfig {
        top_k: a.top_k,
        shrinkage: a.shrinkage,
        pca_variance: a.pca_variance,
        pca_max_components: a.pca_max,
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            hidden: parse_list("--hidden", &a.hidden)?,
            seed: g.seed,
            ..TrainConfig::default()
        },
    };
    let sets = [&train, &val, &test];
    let (bytes, records) = match precision {
        Precision::F32 => train_typed::<f32>(sets, &targets, method, preprocess, &cfg)?,
        Precision::F64 => train_typed::<f64>(sets, &targets, method, preprocess, &cfg)?,
    };
    let model_path = g.out_dir.join("bank.svml");
    fs::write(&model_path, &bytes).with_context(|| format!("writing {}", model_path.display()))?;
    for r in &records {
        println!(
            "{:<14} train {:.4}  val {}  test {:.4}",
            r.target,
            r.train_accuracy,
            r.val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
            r.test_accuracy
        );
    }
    let record = TrainRecord {
        method,
        preprocess,
        precision,
        traces: ts.len(),
        split: (train.len(), val.len(), test.len()),
        samples_per_trace: ts.samples_per_trace(),
        targets: records,
    };
    write_json(&g.out_dir.join("train.json"), &record)?;
    let resolved = json!({ "profile_config": cfg, "targets": targets.iter().map(|t| t.to_string()).collect::<Vec<_>>() });
    Manifest::new(g, cmd, resolved, vec!["bank.svml".into(), "train.json".into()]).write(&g.out_dir)?;
    Ok(Outcome::Clean)
}

enum AnyBank {
    F32(ClassifierBank<f32>),
    F64(ClassifierBank<f64>),
}

fn load_bank(path: &Path) -> Result<AnyBank> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match ClassifierBank::<f64>::from_bytes(&bytes) {
        Ok(b) => Ok(AnyBank::F64(b)),
        Err(e64) => ClassifierBank::<f32>::from_bytes(&bytes)
            .map(AnyBank::F32)
            .map_err(|_| anyhow!("{}: not a classifier bank ({e64})", path.display())),
    }
}

/// The key shared by every trace, when the file stores keys.
fn common_key(ts: &TraceSet) -> Option<[u8; KEY_LEN]> {
    let keys = ts.keys.as_ref()?;
    let first = *keys.first()?;
    keys.iter().all(|k| *k == first).then_some(first)
}

fn attack(g: &Global, cmd: &Command, a: &AttackArgs) -> Result<Outcome> {
    let bank = load_bank(&a.model)?;
    let mut ts = load_traces(&a.input)?;
    if let Some(n) = a.traces {
        let n = odd_at_least(n);
        ensure!(
            n <= ts.len(),
            "{} holds {} traces, fewer than the {n} requested",
            a.input.display(),
            ts.len()
        );
        ts = ts.subset(&(0..n).collect::<Vec<_>>());
    }
    let ground_truth = match &a.key {
        Some(k) => Some(parse_hex::<KEY_LEN>("--key", k)?),
        None => common_key(&ts),
    };
    let check = match (&a.check_iv, &a.check_keystream) {
        (Some(iv), Some(ks)) => Some(KeystreamCheck {
            iv: parse_hex::<IV_LEN>("--check-iv", iv)?.to_vec(),
            keystream: hex::decode(ks.trim()).context("--check-keystream is not hex")?,
        }),
        _ => None,
    };
    let cfg = RecoverConfig {
        min_margin: a.min_margin,
        check,
        ground_truth,
    };
    let result = match &bank {
        AnyBank::F32(b) => recover_full_key(b, &ts, &cfg)?,
        AnyBank::F64(b) => recover_full_key(b, &ts, &cfg)?,
    };
    write_json(&g.out_dir.join("attack.json"), &result)?;
    print_attack(&result);
    Manifest::new(g, cmd, json!({ "traces_used": ts.len() }), vec!["attack.json".into()]).write(&g.out_dir)?;
    Ok(if result.success {
        Outcome::Clean
    } else {
        Outcome::Findings
    })
}

fn print_attack(r: &AttackResult) {
    println!("recovered key {}", hex::encode(&r.recovered_key));
    println!(
        "traces {}  low-confidence words {}  success {}",
        r.traces_used,
        r.low_confidence_words(),
        r.success
    );
    if !r.mismatched_bytes.is_empty() {
        println!("mismatched bytes {:?}", r.mismatched_bytes);
    }
    if let Some(ok) = r.keystream_verified {
        println!("keystream check {}", if ok { "passed" } else { "failed" });
    }
}

fn mtd(g: &Global, cmd: &Command, a: &MtdArgs) -> Result<Outcome> {
    let mut inputs: Vec<(String, f64)> = a.p.iter().map(|&p| (format!("p={p}"), p)).collect();
    if let Some(path) = &a.result {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let r: AttackResult = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        for w in &r.words {
            let acc = w
                .byte_accuracy
                .ok_or_else(|| anyhow!("{} has no accuracies; attack with a known key", path.display()))?;
            inputs.push((format!("k{}", w.key_word), acc[0].min(acc[1])));
        }
    }
    let mut table = String::from("label,p,mtd\n");
    let mut curve = String::from("label,p,n,probability\n");
    println!("{:<10} {:>10} {:>8}", "input", "p", "mtd");
    for (label, p) in &inputs {
        let cell = match mtd_bounded(*p, a.target, a.max_traces) {
            Ok(m) => {
                for (n, prob) in &m.curve {
                    curve.push_str(&format!("{label},{p},{n},{prob}\n"));
                }
                m.traces.to_string()
            }
            Err(_) => "none".into(),
        };
        println!("{label:<10} {p:>10.5} {cell:>8}");
        table.push_str(&format!("{label},{p},{cell}\n"));
    }
    println!();
    println!("{:<10} {:>10} {:>10} {:>10}", "reported", "p", "claimed", "formula");
    for (name, p, claimed) in REPORTED_MTD {
        let formula = p.map_or("n/a".to_string(), |p| {
            mtd_bounded(p, a.target, a.max_traces).map_or("none".into(), |m| m.traces.to_string())
        });
        let p = p.map_or("n/a".to_string(), |p| p.to_string());
        println!("{name:<10} {p:>10} {claimed:>10} {formula:>10}");
    }
    let write = |name: &str, body: &str| -> Result<()> {
        let path: PathBuf = g.out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    write("mtd.csv", &table)?;
    write("mtd_curve.csv", &curve)?;
    Manifest::new(g, cmd, json!({}), vec!["mtd.csv".into(), "mtd_curve.csv".into()]).write(&g.out_dir)?;
    Ok(Outcome::Clean)
}

