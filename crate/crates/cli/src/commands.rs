use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info, warn};
use rdcnn::analysis::{
    augmentation_cosine_distribution, avg_js_ratio, grouped_pairing, image_histogram, JsRatioReport,
    FEATURE_RANGE, PIXEL_RANGE,
};
use rdcnn::data::{
    augment, augment_images, dataset_to_raw, load_cifar, load_mnist, load_raw, load_stl10, Augmentation,
    CifarVariant, Dataset, Split,
};
use rdcnn::persistence::{read_features, read_model, write_model, write_raw_images};
use rdcnn::retrieval::{intersection_score_sum, precision_at_k, read_ground_truth, write_results, Gallery};
use rdcnn::rng::Stream;
use rdcnn::svm::{self, topk_accuracy};
use rdcnn::{extract_features, extract_features_to_file, FeatureMatrix, NetworkConfig, Normalization, SvmConfig};

use crate::args::{
    Analysis, AugCosineArgs, AugmentArgs, Cli, Command, DatasetArgs, EvalArgs, ExtractArgs, Format,
    JsRatioArgs, Resolved, RetrieveArgs, Space, SweepArgs, TrainArgs,
};
use crate::error::{CliError, Result};

struct Context {
    threads: usize,
    print_config: bool,
}

impl Context {
    /// Logs the resolved command line, or prints it when only that was asked
    /// for. Returns whether the command should go on to run.
    fn announce(&self, command: &str, r: &Resolved) -> bool {
        let line = format!("rdcnn --threads {} {command} {}", self.threads, r.render());
        if self.print_config {
            println!("{line}");
            false
        } else {
            info!("{line}");
            true
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("cannot start {threads} threads: {e}")))?;
    let ctx = Context {
        threads,
        print_config: cli.print_config,
    };
    match &cli.command {
        Command::Extract(a) => extract(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Retrieve(a) => retrieve(&ctx, a),
        Command::Analyze(Analysis::JsRatio(a)) => js_ratio(&ctx, a),
        Command::Analyze(Analysis::AugCosine(a)) => aug_cosine(&ctx, a),
        Command::Augment(a) => augment_dataset(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
    }
}

fn load(format: Format, input: &Path, split: Split, pad_mnist: bool, limit: Option<usize>) -> Result<Dataset> {
    if pad_mnist && format != Format::Mnist {
        return Err(CliError::Usage("--pad-mnist only applies to --format mnist".into()));
    }
    let start = Instant::now();
    let mut ds = match format {
        Format::Mnist => load_mnist(input, split, pad_mnist)?,
        Format::Cifar10 => load_cifar(input, CifarVariant::Cifar10, split)?,
        Format::Cifar100 => load_cifar(input, CifarVariant::Cifar100, split)?,
        Format::Stl10 => load_stl10(input, split)?,
        Format::Raw => load_raw(input)?,
    };
    if let Some(n) = limit {
        ds.truncate(n);
    }
    match ds.shape() {
        Some((c, h, w)) => info!(
            "loaded {} {c}x{h}x{w} images of {} in {:.2?}",
            ds.len(),
            ds.name,
            start.elapsed()
        ),
        None => return Err(CliError::Invalid(format!("{} holds no images", input.display()))),
    }
    Ok(ds)
}

fn load_dataset(a: &DatasetArgs) -> Result<Dataset> {
    load(a.format, &a.input, a.split.into(), a.pad_mnist, a.limit)
}

fn channels(ds: &Dataset) -> usize {
    ds.shape().map_or(0, |s| s.0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Opens `path`, or stdout when absent. Also returns a name for messages.
fn output(path: Option<&Path>) -> Result<(Box<dyn Write>, PathBuf)> {
    match path {
        Some(p) => Ok((Box::new(create(p)?), p.to_path_buf())),
        None => Ok((Box::new(io::stdout().lock()), PathBuf::from("<stdout>"))),
    }
}

fn csv_writer(path: Option<&Path>) -> Result<(csv::Writer<Box<dyn Write>>, PathBuf)> {
    let (w, name) = output(path)?;
    Ok((csv::Writer::from_writer(w), name))
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, dest: &Path, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(|source| CliError::Csv {
        path: dest.to_path_buf(),
        source,
    })
}

fn finish<W: Write>(mut w: csv::Writer<W>, dest: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(dest, e))
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
}

fn describe(config: &NetworkConfig) -> String {
    format!(
        "k={} b={} m={} seed={} channels={} normalization={} bias={}",
        config.kernel_size,
        config.blocks,
        config.num_kernels,
        config.seed,
        config.input_channels,
        config.normalization,
        config.bias_enabled
    )
}

fn extract(ctx: &Context, a: &ExtractArgs) -> Result<()> {
    let mut r = Resolved::default();
    a.dataset.resolve(&mut r);
    a.network.resolve(a.dataset.format, &mut r)?;
    r.path("output", &a.output).value("memory-budget-mb", a.memory_budget_mb);
    if !ctx.announce("extract", &r) {
        return Ok(());
    }
    let ds = load_dataset(&a.dataset)?;
    let config = a.network.config(a.dataset.format, channels(&ds))?;
    info!("network {}", describe(&config));
    let start = Instant::now();
    let budget = a.memory_budget_mb.saturating_mul(1 << 20);
    let range = extract_features_to_file(&ds.images, ds.labels.as_deref(), &config, &a.output, budget)?;
    let elapsed = start.elapsed();
    info!(
        "wrote {} x {} features to {} in {elapsed:.2?} ({:.3} ms per image on {} threads)",
        ds.len(),
        config.num_kernels,
        a.output.display(),
        elapsed.as_secs_f64() * 1e3 / ds.len() as f64,
        ctx.threads
    );
    match range {
        Some((lo, hi)) if (-1.0..=1.0).contains(&lo) && (-1.0..=1.0).contains(&hi) => {
            info!("feature range [{lo}, {hi}] within [-1, 1]");
            Ok(())
        }
        Some((lo, hi)) => Err(CliError::Invalid(format!("feature range [{lo}, {hi}] leaves [-1, 1]"))),
        None => Ok(()),
    }
}

fn svm_config(c: f64, bias: f64, tolerance: f64, max_iterations: usize) -> SvmConfig {
    let mut config = SvmConfig::new(c);
    config.bias = bias;
    config.tolerance = tolerance;
    config.max_iterations = max_iterations;
    config
}

/// Trains and reports non-converged classes.
fn fit(features: &FeatureMatrix, config: &SvmConfig) -> Result<rdcnn::SvmModel> {
    let start = Instant::now();
    let fit = svm::train(features, config)?;
    for f in &fit.fits {
        debug!(
            "class {}: {} iterations, objective {:.6}, gradient norm {:.3e}",
            f.class, f.iterations, f.objective, f.gradient_norm
        );
        if !f.converged {
            warn!("class {} stopped after {} iterations without converging", f.class, f.iterations);
        }
    }
    info!(
        "trained {} classes on {} x {} in {:.2?}",
        fit.model.classes().len(),
        features.n_samples(),
        features.n_features(),
        start.elapsed()
    );
    Ok(fit.model)
}

fn labels_of<'a>(features: &'a FeatureMatrix, path: &Path) -> Result<&'a [u32]> {
    features
        .labels()
        .ok_or_else(|| CliError::Invalid(format!("{} has no labels", path.display())))
}

fn top1(model: &rdcnn::SvmModel, features: &FeatureMatrix, labels: &[u32]) -> Result<f64> {
    Ok(topk_accuracy(&model.discriminants(features)?, labels, 1)?)
}

fn train(ctx: &Context, a: &TrainArgs) -> Result<()> {
    let c = a.c()?;
    let mut r = Resolved::default();
    r.path("features", &a.features)
        .path("output", &a.output)
        .value("c", c)
        .value("bias", a.bias)
        .value("tolerance", a.tolerance)
        .value("max-iterations", a.max_iterations);
    if !ctx.announce("train", &r) {
        return Ok(());
    }
    let features = read_features(&a.features)?;
    let labels = labels_of(&features, &a.features)?;
    let model = fit(&features, &svm_config(c, a.bias, a.tolerance, a.max_iterations))?;
    info!("training top-1 accuracy {:.4}", top1(&model, &features, labels)?);
    write_model(&model, &a.output)?;
    info!("wrote {}", a.output.display());
    Ok(())
}

fn eval(ctx: &Context, a: &EvalArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let classes = model.classes().len();
    let top_k = a.top_k.unwrap_or(classes.min(5));
    if top_k == 0 || top_k > classes {
        return Err(CliError::Usage(format!(
            "--top-k {top_k} must be between 1 and the {classes} classes of the model"
        )));
    }
    let mut r = Resolved::default();
    r.path("model", &a.model)
        .path("features", &a.features)
        .value("top-k", top_k)
        .maybe("output", a.output.as_ref().map(|p| p.display()));
    if !ctx.announce("eval", &r) {
        return Ok(());
    }
    let features = read_features(&a.features)?;
    let labels = labels_of(&features, &a.features)?;
    let d = model.discriminants(&features)?;
    let (mut w, dest) = csv_writer(a.output.as_deref())?;
    write_row(&mut w, &dest, &["k".into(), "accuracy".into()])?;
    for k in 1..=top_k {
        let acc = topk_accuracy(&d, labels, k)?;
        info!("top-{k} accuracy {acc:.4} on {} samples", labels.len());
        write_row(&mut w, &dest, &[k.to_string(), acc.to_string()])?;
    }
    finish(w, &dest)
}

fn retrieve(ctx: &Context, a: &RetrieveArgs) -> Result<()> {
    let mut r = Resolved::default();
    r.path("gallery", &a.gallery)
        .maybe("gallery-ids", a.gallery_ids.as_ref().map(|p| p.display()))
        .maybe("queries", a.queries.as_ref().map(|p| p.display()))
        .maybe("query-ids", a.query_ids.as_ref().map(|p| p.display()));
    if !a.query_index.is_empty() {
        r.list("query-index", &a.query_index);
    }
    r.value("k", a.k)
        .value("metric", a.metric)
        .maybe("ground-truth", a.ground_truth.as_ref().map(|p| p.display()))
        .maybe("metrics", a.metrics.as_ref().map(|p| p.display()))
        .maybe("output", a.output.as_ref().map(|p| p.display()));
    if !ctx.announce("retrieve", &r) {
        return Ok(());
    }

    let features = read_features(&a.gallery)?;
    let ids = a.gallery_ids.as_deref().map(read_ids).transpose()?;
    let gallery = Gallery::new(&features, ids)?;
    let start = Instant::now();
    let results = match &a.queries {
        Some(path) => {
            let queries = read_features(path)?;
            let ids = match &a.query_ids {
                Some(p) => read_ids(p)?,
                None => (0..queries.n_samples()).map(|i| i.to_string()).collect(),
            };
            if ids.len() != queries.n_samples() {
                return Err(CliError::Invalid(format!(
                    "{} query ids for {} query rows",
                    ids.len(),
                    queries.n_samples()
                )));
            }
            queries
                .rows()
                .zip(&ids)
                .map(|(row, id)| gallery.query(id, row, a.k, a.metric))
                .collect::<rdcnn::Result<Vec<_>>>()?
        }
        None => a
            .query_index
            .iter()
            .map(|&i| {
                if i >= gallery.len() {
                    return Err(CliError::Invalid(format!(
                        "query index {i} is outside the {}-row gallery",
                        gallery.len()
                    )));
                }
                Ok(gallery.query(&gallery.ids()[i], features.row(i), a.k, a.metric)?)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    info!(
        "{} queries against {} gallery rows in {:.2?}",
        results.len(),
        gallery.len(),
        start.elapsed()
    );
    let (w, dest) = output(a.output.as_deref())?;
    write_results(w, &results, &dest)?;

    if let (Some(gt), Some(metrics)) = (&a.ground_truth, &a.metrics) {
        let truths: HashMap<String, _> = read_ground_truth(gt)?
            .into_iter()
            .map(|t| (t.query_id().to_string(), t))
            .collect();
        let mut w = csv::Writer::from_writer(create(metrics)?);
        write_row(&mut w, metrics, &["query_id", "k", "precision", "score_sum"].map(String::from))?;
        let mut precisions = Vec::new();
        for result in &results {
            let Some(truth) = truths.get(&result.query_id) else {
                warn!("no ground truth for query {}", result.query_id);
                continue;
            };
            let p = precision_at_k(result, truth, a.k)?;
            let s = intersection_score_sum(result, truth, a.k)?;
            precisions.push(p);
            write_row(
                &mut w,
                metrics,
                &[result.query_id.clone(), a.k.to_string(), p.to_string(), s.to_string()],
            )?;
        }
        finish(w, metrics)?;
        if !precisions.is_empty() {
            info!(
                "mean precision@{} {:.4} over {} queries",
                a.k,
                precisions.iter().sum::<f64>() / precisions.len() as f64,
                precisions.len()
            );
        }
    }
    Ok(())
}

/// Indices of the first `per_class` images of `class`.
fn class_members(labels: &[u32], class: u32, per_class: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .take(per_class)
        .collect()
}

fn js_ratio(ctx: &Context, a: &JsRatioArgs) -> Result<()> {
    let mut r = Resolved::default();
    a.dataset.resolve(&mut r);
    if a.space != Space::Pixel {
        a.network.resolve(a.dataset.format, &mut r)?;
    }
    r.value("class-a", a.class_a)
        .value("class-b", a.class_b)
        .value("per-class", a.per_class)
        .choice("space", &a.space)
        .value("pixel-bins", a.pixel_bins)
        .value("feature-bins", a.feature_bins)
        .value("smoothing", a.smoothing)
        .maybe("output", a.output.as_ref().map(|p| p.display()));
    if !ctx.announce("analyze js-ratio", &r) {
        return Ok(());
    }
    if a.class_a == a.class_b {
        return Err(CliError::Usage("--class-a and --class-b must differ".into()));
    }
    let ds = load_dataset(&a.dataset)?;
    let labels = ds
        .labels
        .as_deref()
        .ok_or_else(|| CliError::Invalid(format!("{} has no labels", a.dataset.input.display())))?;
    let members = [
        class_members(labels, a.class_a, a.per_class),
        class_members(labels, a.class_b, a.per_class),
    ];
    for (class, m) in [a.class_a, a.class_b].iter().zip(&members) {
        if m.len() < a.per_class {
            warn!("class {class} has only {} images", m.len());
        }
    }
    info!("comparing {} images of class {} with {} of class {}", members[0].len(), a.class_a, members[1].len(), a.class_b);

    let mut reports: Vec<(&str, JsRatioReport)> = Vec::new();
    if a.space != Space::Feature {
        let hist = |i: &usize| {
            let px: Vec<f32> = ds.images[*i].data().iter().map(|&v| Normalization::Unit.apply(v)).collect();
            image_histogram(&px, a.pixel_bins, PIXEL_RANGE, a.smoothing)
        };
        let h: Vec<Vec<_>> = members
            .iter()
            .map(|m| m.iter().map(hist).collect::<rdcnn::Result<Vec<_>>>())
            .collect::<rdcnn::Result<_>>()?;
        reports.push(("pixel", avg_js_ratio(&h[0], &h[1])?));
    }
    if a.space != Space::Pixel {
        let config = a.network.config(a.dataset.format, channels(&ds))?;
        info!("network {}", describe(&config));
        let mut h = Vec::new();
        for m in &members {
            let images: Vec<_> = m.iter().map(|&i| ds.images[i].clone()).collect();
            let fm = extract_features(&images, None, &config)?;
            h.push(
                fm.rows()
                    .map(|row| image_histogram(row, a.feature_bins, FEATURE_RANGE, a.smoothing))
                    .collect::<rdcnn::Result<Vec<_>>>()?,
            );
        }
        reports.push(("feature", avg_js_ratio(&h[0], &h[1])?));
    }

    let (mut w, dest) = csv_writer(a.output.as_deref())?;
    write_row(&mut w, &dest, &["metric".into(), "value".into()])?;
    for (space, report) in &reports {
        info!("{space} space ratio {:.4}", report.ratio);
        for (name, value) in report.metrics() {
            write_row(&mut w, &dest, &[format!("{space}_{name}"), value.to_string()])?;
        }
    }
    finish(w, &dest)
}

fn aug_cosine(ctx: &Context, a: &AugCosineArgs) -> Result<()> {
    let mut r = Resolved::default();
    r.path("original", &a.original)
        .path("augmented", &a.augmented)
        .maybe("output", a.output.as_ref().map(|p| p.display()));
    if !ctx.announce("analyze aug-cosine", &r) {
        return Ok(());
    }
    let original = read_features(&a.original)?;
    let augmented = read_features(&a.augmented)?;
    let pairing = grouped_pairing(original.n_samples(), augmented.n_samples())?;
    let values = augmentation_cosine_distribution(&original, &augmented, &pairing)?;
    if !values.is_empty() {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        info!("{} cosines, mean {mean:.4}", values.len());
    }
    let (mut w, dest) = csv_writer(a.output.as_deref())?;
    write_row(&mut w, &dest, &["cosine".into()])?;
    for v in values {
        write_row(&mut w, &dest, &[v.to_string()])?;
    }
    finish(w, &dest)
}

fn augment_dataset(ctx: &Context, a: &AugmentArgs) -> Result<()> {
    let mut r = Resolved::default();
    a.dataset.resolve(&mut r);
    r.path("output", &a.output)
        .value("per-image", a.per_image)
        .value("seed", a.seed)
        .maybe("cutout", a.cutout);
    if !ctx.announce("augment", &r) {
        return Ok(());
    }
    if a.per_image == 0 {
        return Err(CliError::Usage("--per-image must be at least 1".into()));
    }
    let ds = load_dataset(&a.dataset)?;
    let mut images = augment_images(&ds.images, a.per_image, a.seed)?;
    if let Some(size) = a.cutout {
        for (k, im) in images.iter_mut().enumerate() {
            // a stream family of its own, apart from the flips and rotations
            let seed = Stream::new(!a.seed, k as u64).next_u64();
            *im = augment(im, Augmentation::Cutout { size, seed })?;
        }
    }
    let labels = ds
        .labels
        .as_ref()
        .map(|l| l.iter().flat_map(|&v| std::iter::repeat_n(v, a.per_image)).collect());
    let out = Dataset::new(format!("{}-augmented", ds.name), images, labels, ds.class_count)?;
    write_raw_images(&dataset_to_raw(&out)?, &a.output)?;
    info!("wrote {} augmented images to {}", out.len(), a.output.display());
    Ok(())
}

fn sweep(ctx: &Context, a: &SweepArgs) -> Result<()> {
    let c = a
        .c
        .or(a.format.default_c())
        .ok_or_else(|| CliError::Usage("--c is required for raw input".into()))?;
    if a.format == Format::Raw && a.test_input.is_none() {
        return Err(CliError::Usage("--test-input is required for raw input".into()));
    }
    let mut r = Resolved::default();
    r.choice("format", &a.format)
        .path("input", &a.input)
        .maybe("test-input", a.test_input.as_ref().map(|p| p.display()))
        .switch("pad-mnist", a.pad_mnist)
        .maybe("train-limit", a.train_limit)
        .maybe("test-limit", a.test_limit)
        .list("kernel-sizes", &a.kernel_sizes)
        .list("blocks", &a.block_counts)
        .value("num-kernels", a.num_kernels)
        .value("seed", a.seed)
        .value("normalization", a.normalization)
        .switch("bias", a.bias)
        .value("c", c)
        .value("tolerance", a.tolerance)
        .value("max-iterations", a.max_iterations)
        .maybe("output", a.output.as_ref().map(|p| p.display()));
    if !ctx.announce("sweep", &r) {
        return Ok(());
    }
    let train_set = load(a.format, &a.input, Split::Train, a.pad_mnist, a.train_limit)?;
    let test_path = a.test_input.as_deref().unwrap_or(&a.input);
    let test_set = load(a.format, test_path, Split::Test, a.pad_mnist, a.test_limit)?;
    let missing = |p: &Path| CliError::Invalid(format!("{} has no labels", p.display()));
    let train_labels = train_set.labels.as_deref().ok_or_else(|| missing(&a.input))?;
    let test_labels = test_set.labels.as_deref().ok_or_else(|| missing(test_path))?;
    let svm = svm_config(c, 1.0, a.tolerance, a.max_iterations);

    let (mut w, dest) = csv_writer(a.output.as_deref())?;
    write_row(
        &mut w,
        &dest,
        &["k", "b", "m", "c", "train_accuracy", "test_accuracy"].map(String::from),
    )?;
    for &k in &a.kernel_sizes {
        for &b in &a.block_counts {
            let config = NetworkConfig::new(k, b, a.num_kernels, channels(&train_set))
                .with_seed(a.seed)
                .with_normalization(a.normalization)
                .with_bias(a.bias);
            let start = Instant::now();
            let train_fm = extract_features(&train_set.images, Some(train_labels), &config)?;
            let test_fm = extract_features(&test_set.images, Some(test_labels), &config)?;
            let model = fit(&train_fm, &svm)?;
            let train_acc = top1(&model, &train_fm, train_labels)?;
            let test_acc = top1(&model, &test_fm, test_labels)?;
            info!(
                "k={k} b={b}: train {train_acc:.4} test {test_acc:.4} in {:.2?}",
                start.elapsed()
            );
            write_row(
                &mut w,
                &dest,
                &[
                    k.to_string(),
                    b.to_string(),
                    a.num_kernels.to_string(),
                    c.to_string(),
                    train_acc.to_string(),
                    test_acc.to_string(),
                ],
            )?;
        }
    }
    finish(w, &dest)
}
