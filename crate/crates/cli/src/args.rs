use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rdcnn::data::Split;
use rdcnn::retrieval::Metric;
use rdcnn::Normalization;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "rdcnn", version, about = "Random depthwise signed convolutional features")]
pub struct Cli {
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true, env = "RDCNN_THREADS")]
    pub threads: Option<usize>,

    /// Log more; repeat for trace output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Print the fully resolved command line and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract random features from a dataset into an RDCF file.
    Extract(ExtractArgs),
    /// Train one-vs-rest linear SVMs on a labeled feature file.
    Train(TrainArgs),
    /// Top-k accuracies of a model on a labeled feature file.
    Eval(EvalArgs),
    /// k-nearest-neighbour retrieval over a gallery feature file.
    Retrieve(RetrieveArgs),
    /// Separability and augmentation statistics.
    #[command(subcommand)]
    Analyze(Analysis),
    /// Write randomly flipped and rotated copies of a dataset as RDIM.
    Augment(AugmentArgs),
    /// Train and test accuracy over a grid of kernel sizes and block counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Across/within-class Jensen-Shannon ratio in pixel and feature space.
    JsRatio(JsRatioArgs),
    /// Cosine similarity of augmented feature rows to their originals.
    AugCosine(AugCosineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Mnist,
    Cifar10,
    Cifar100,
    Stl10,
    /// An RDIM file.
    Raw,
}

impl Format {
    /// Kernel size and block count that suit the dataset.
    pub fn default_network(self) -> Option<(usize, usize)> {
        match self {
            Format::Mnist => Some((7, 1)),
            Format::Cifar10 | Format::Cifar100 => Some((5, 1)),
            Format::Stl10 => Some((5, 2)),
            Format::Raw => None,
        }
    }

    pub fn default_c(self) -> Option<f64> {
        match self {
            Format::Mnist => DatasetName::Mnist.c(),
            Format::Cifar10 | Format::Cifar100 | Format::Stl10 => DatasetName::Cifar10.c(),
            Format::Raw => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Cifar100,
    Stl10,
    MiniImagenet,
}

impl DatasetName {
    pub fn c(self) -> Option<f64> {
        Some(match self {
            DatasetName::Mnist | DatasetName::MiniImagenet => 0.01,
            DatasetName::Cifar10 | DatasetName::Cifar100 | DatasetName::Stl10 => 0.5,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Pixel,
    Feature,
    Both,
}

fn name_of<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// A command line under construction, one `--flag value` at a time.
#[derive(Debug, Default)]
pub struct Resolved(Vec<String>);

impl Resolved {
    pub fn value(&mut self, flag: &str, value: impl Display) -> &mut Self {
        self.0.push(format!("--{flag}"));
        self.0.push(value.to_string());
        self
    }

    pub fn path(&mut self, flag: &str, path: &Path) -> &mut Self {
        self.value(flag, path.display())
    }

    pub fn choice<T: ValueEnum>(&mut self, flag: &str, v: &T) -> &mut Self {
        self.value(flag, name_of(v))
    }

    pub fn maybe<T: Display>(&mut self, flag: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.value(flag, v);
        }
        self
    }

    pub fn switch(&mut self, flag: &str, on: bool) -> &mut Self {
        if on {
            self.0.push(format!("--{flag}"));
        }
        self
    }

    pub fn list<T: Display>(&mut self, flag: &str, items: &[T]) -> &mut Self {
        let joined: Vec<String> = items.iter().map(|v| v.to_string()).collect();
        self.value(flag, joined.join(","))
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|t| quote(t)).collect::<Vec<_>>().join(" ")
    }
}

fn quote(s: &str) -> String {
    let plain = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./:=,+@%".contains(c));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, value_enum)]
    pub format: Format,

    /// Dataset directory, or the file itself for raw.
    #[arg(long)]
    pub input: PathBuf,

    /// Ignored for raw input.
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,

    /// Zero-pad 28x28 digits to 32x32.
    #[arg(long)]
    pub pad_mnist: bool,

    /// Keep only the first N images.
    #[arg(long)]
    pub limit: Option<usize>,
}

impl DatasetArgs {
    pub fn resolve(&self, r: &mut Resolved) {
        r.choice("format", &self.format)
            .path("input", &self.input)
            .choice("split", &self.split)
            .switch("pad-mnist", self.pad_mnist)
            .maybe("limit", self.limit);
    }
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Kernel size k [default: per format].
    #[arg(long)]
    pub kernel_size: Option<usize>,

    /// Number of blocks b [default: per format].
    #[arg(long)]
    pub blocks: Option<usize>,

    /// Number of kernel stacks, one feature each.
    #[arg(long, default_value_t = 2048)]
    pub num_kernels: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Pixel scaling: none, unit or symmetric.
    #[arg(long, default_value_t = Normalization::Unit)]
    pub normalization: Normalization,

    /// Add a random bias before every sign.
    #[arg(long)]
    pub bias: bool,
}

impl NetworkArgs {
    pub fn shape(&self, format: Format) -> Result<(usize, usize)> {
        let defaults = format.default_network();
        match (
            self.kernel_size.or(defaults.map(|d| d.0)),
            self.blocks.or(defaults.map(|d| d.1)),
        ) {
            (Some(k), Some(b)) => Ok((k, b)),
            _ => Err(CliError::Usage(
                "--kernel-size and --blocks are required for raw input".into(),
            )),
        }
    }

    pub fn config(&self, format: Format, channels: usize) -> Result<rdcnn::NetworkConfig> {
        let (k, b) = self.shape(format)?;
        Ok(rdcnn::NetworkConfig::new(k, b, self.num_kernels, channels)
            .with_seed(self.seed)
            .with_normalization(self.normalization)
            .with_bias(self.bias))
    }

    pub fn resolve(&self, format: Format, r: &mut Resolved) -> Result<()> {
        let (k, b) = self.shape(format)?;
        r.value("kernel-size", k)
            .value("blocks", b)
            .value("num-kernels", self.num_kernels)
            .value("seed", self.seed)
            .value("normalization", self.normalization)
            .switch("bias", self.bias);
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,

    #[command(flatten)]
    pub network: NetworkArgs,

    /// RDCF file to write.
    #[arg(long, short)]
    pub output: PathBuf,

    /// Feature memory held at once; larger runs are computed in column blocks.
    #[arg(long, default_value_t = 1024)]
    pub memory_budget_mb: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled RDCF file.
    #[arg(long)]
    pub features: PathBuf,

    /// RDSM file to write.
    #[arg(long, short)]
    pub output: PathBuf,

    /// Regularization constant; overrides the dataset default.
    #[arg(long)]
    pub c: Option<f64>,

    /// Picks the regularization constant when --c is absent.
    #[arg(long, value_enum)]
    pub dataset_name: Option<DatasetName>,

    /// Value of the constant feature appended for the intercept.
    #[arg(long, default_value_t = 1.0)]
    pub bias: f64,

    /// Relative gradient-norm stopping tolerance.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,

    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
}

impl TrainArgs {
    pub fn c(&self) -> Result<f64> {
        self.c
            .or_else(|| self.dataset_name.and_then(DatasetName::c))
            .ok_or_else(|| CliError::Usage("give --c or --dataset-name".into()))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// RDSM model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Labeled RDCF file.
    #[arg(long)]
    pub features: PathBuf,

    /// Report top-1 through top-K [default: min(5, classes)].
    #[arg(long)]
    pub top_k: Option<usize>,

    /// CSV destination [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Gallery RDCF file.
    #[arg(long)]
    pub gallery: PathBuf,

    /// One id per line for the gallery rows [default: row numbers].
    #[arg(long)]
    pub gallery_ids: Option<PathBuf>,

    /// RDCF file whose rows are the queries.
    #[arg(long, required_unless_present = "query_index", conflicts_with = "query_index")]
    pub queries: Option<PathBuf>,

    /// One id per line for the query rows [default: row numbers].
    #[arg(long, requires = "queries")]
    pub query_ids: Option<PathBuf>,

    /// Gallery rows to use as queries, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub query_index: Vec<usize>,

    /// Neighbours per query.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// cosine or euclidean.
    #[arg(long, default_value_t = Metric::Cosine)]
    pub metric: Metric,

    /// CSV of query_id,item_id,score rankings to score the results against.
    #[arg(long, requires = "metrics")]
    pub ground_truth: Option<PathBuf>,

    /// Where to write precision and score sums per query.
    #[arg(long, requires = "ground_truth")]
    pub metrics: Option<PathBuf>,

    /// Ranked results CSV [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JsRatioArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,

    #[command(flatten)]
    pub network: NetworkArgs,

    #[arg(long, default_value_t = 0)]
    pub class_a: u32,

    #[arg(long, default_value_t = 1)]
    pub class_b: u32,

    /// First N images of each class.
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,

    #[arg(long, value_enum, default_value_t = Space::Both)]
    pub space: Space,

    #[arg(long, default_value_t = rdcnn::analysis::PIXEL_BINS)]
    pub pixel_bins: usize,

    #[arg(long, default_value_t = rdcnn::analysis::FEATURE_BINS)]
    pub feature_bins: usize,

    /// Mass added to every bin before renormalizing; 0 disables.
    #[arg(long, default_value_t = rdcnn::analysis::DEFAULT_SMOOTHING)]
    pub smoothing: f64,

    /// CSV destination [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugCosineArgs {
    /// Features of the original images.
    #[arg(long)]
    pub original: PathBuf,

    /// Features of the augmented images, grouped by original.
    #[arg(long)]
    pub augmented: PathBuf,

    /// Destination, one value per line [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,

    /// RDIM file to write.
    #[arg(long, short)]
    pub output: PathBuf,

    #[arg(long, default_value_t = rdcnn::data::AUGMENTS_PER_IMAGE)]
    pub per_image: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also zero a random square of this side.
    #[arg(long)]
    pub cutout: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub format: Format,

    /// Dataset directory, or an RDIM file for raw.
    #[arg(long)]
    pub input: PathBuf,

    /// Test RDIM file; required for raw input.
    #[arg(long)]
    pub test_input: Option<PathBuf>,

    #[arg(long)]
    pub pad_mnist: bool,

    #[arg(long)]
    pub train_limit: Option<usize>,

    #[arg(long)]
    pub test_limit: Option<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [3, 5])]
    pub kernel_sizes: Vec<usize>,

    #[arg(long = "blocks", value_delimiter = ',', default_values_t = [1, 2])]
    pub block_counts: Vec<usize>,

    #[arg(long, default_value_t = 1024)]
    pub num_kernels: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = Normalization::Unit)]
    pub normalization: Normalization,

    #[arg(long)]
    pub bias: bool,

    /// Regularization constant [default: per format].
    #[arg(long)]
    pub c: Option<f64>,

    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,

    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,

    /// CSV destination [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
