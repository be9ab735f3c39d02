use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "snowv-lab", version, about = "SNOW-V power side-channel laboratory")]
pub struct Cli {
    /// Directory for every file a command writes, including manifest.json.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Seed for trace generation, splits and training.
    #[arg(long, global = true, env = "SNOWV_SCA_SEED", default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Clone, Debug)]
pub struct Global {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Cli {
    pub fn global(&self) -> Global {
        Global {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            jobs: self.jobs,
        }
    }
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Simulate a trace campaign and write it as an SVTR file.
    Simulate(SimulateArgs),
    /// Fixed-vs-random Welch t-test. Exits 2 when any point leaks.
    Tvla(TvlaArgs),
    /// Fit classifiers for one or more targets.
    Train(TrainArgs),
    /// Recover the 256-bit key from attack traces with a trained bank.
    Attack(AttackArgs),
    /// Minimum traces to disclosure from per-trace accuracies.
    Mtd(MtdArgs),
    /// Collect train results into CSV tables and curves.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyPolicyArg {
    Fixed,
    Fresh,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IvPolicyArg {
    Fixed,
    Random,
    FixedVsRandom,
    FixedVsFixed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    /// Six intermediates plus register writes, four samples each.
    Default,
    /// Hamming weight of the six intermediates, one sample each.
    Hw,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Number of traces.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = KeyPolicyArg::Fixed)]
    pub key_policy: KeyPolicyArg,
    /// Fixed key as 64 hex digits (default: derived from the seed).
    #[arg(long)]
    pub key: Option<String>,
    #[arg(long, value_enum, default_value_t = IvPolicyArg::Random)]
    pub iv_policy: IvPolicyArg,
    /// Fixed IV as 32 hex digits (default: derived from the seed).
    #[arg(long)]
    pub iv: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Default)]
    pub model: ModelArg,
    /// Seed for the per-bit leakage weights (default model only).
    #[arg(long)]
    pub device_seed: Option<u64>,
    /// Omit per-trace keys from the file.
    #[arg(long)]
    pub no_keys: bool,
    /// Also write traces.csv.
    #[arg(long)]
    pub csv: bool,
    /// Output file (default: <out-dir>/traces.svtr).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TvlaArgs {
    /// SVTR file with fixed and random groups.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Profiling SVTR file with per-trace keys.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated targets such as u-s0-lo-8b or a8-s0-lo-4b, or
    /// `feedback` for the 32 byte targets key recovery needs.
    #[arg(long, default_value = "a8-s0-lo-8b")]
    pub targets: String,
    /// lda, or fcn-<activation> (relu, leaky-relu, prelu, elu, selu, swish, mish).
    #[arg(long, default_value = "lda")]
    pub method: String,
    /// Reduce the KVC window with PCA before the classifier.
    #[arg(long)]
    pub pca: bool,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.64,0.16,0.2")]
    pub split: String,
    /// Samples kept by KVC.
    #[arg(long, default_value_t = 128)]
    pub top_k: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub shrinkage: f64,
    #[arg(long, default_value_t = 0.99)]
    pub pca_variance: f64,
    #[arg(long, default_value_t = 2000)]
    pub pca_max: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Hidden layer widths.
    #[arg(long, default_value = "512,256,128")]
    pub hidden: String,
    /// Default: f64 for LDA, f32 for networks.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct AttackArgs {
    /// Classifier bank written by `train --targets feedback`.
    #[arg(long)]
    pub model: PathBuf,
    /// Attack SVTR file: one fixed key, known IVs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Use only the first N traces (rounded up to odd).
    #[arg(long)]
    pub traces: Option<usize>,
    /// True key for scoring, 64 hex digits. Taken from the file when it
    /// stores one key for every trace.
    #[arg(long)]
    pub key: Option<String>,
    /// IV of a known keystream sample, 32 hex digits.
    #[arg(long, requires = "check_keystream")]
    pub check_iv: Option<String>,
    /// Keystream produced under --check-iv, hex.
    #[arg(long, requires = "check_iv")]
    pub check_keystream: Option<String>,
    /// Flag words whose vote margin falls below this fraction.
    #[arg(long, default_value_t = 0.05)]
    pub min_margin: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MtdArgs {
    /// Per-trace accuracies.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// attack.json whose per-word accuracies to evaluate.
    #[arg(long)]
    pub result: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9999)]
    pub target: f64,
    #[arg(long, default_value_t = 200_001)]
    pub max_traces: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Directories searched (recursively) for train.json files.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Longest attack in the voting curves.
    #[arg(long, default_value_t = 51)]
    pub max_votes: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
