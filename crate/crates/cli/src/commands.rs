use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use freeshap::applications::{
    correlate_tables, heldout_game, mislabel_detection, removal_curve, selection_curve, Direction,
};
use freeshap::kernel::KernelHeader;
use freeshap::robustness::{
    format_rate, remark_diagnostics, robustness_protocol, sample_pool, ProtocolConfig, ProtocolMethod,
};
use freeshap::shapley::{exact_shapley, freeshap, loo, read_scores, tmc_freeshap, Game};
use freeshap::synthetic::{default_bandwidth, Benchmark, BenchmarkConfig, SyntheticWorld};
use freeshap::{
    load_dataset, synth_kernel, write_kernel, DistributionSpec, EmptyModelPolicy, EngineConfig, KernelGame,
    KernelStore, LabeledDataset, Method, ScoreTable, SynthKernel, Target,
};

use crate::config::{out_dir, pick, FileConfig};
use crate::{
    CorrArgs, KernelArgs, KernelInfoArgs, MislabelArgs, RemovalArgs, RobustnessArgs, SampleArgs, SelectArgs,
    SynthDataArgs, SynthKernelArgs, ValuateArgs,
};

/// A sampling run that stopped early; outputs were written but are partial.
#[derive(Debug)]
pub struct PartialRun(pub String);

impl std::fmt::Display for PartialRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run is partial: {}", self.0)
    }
}

impl std::error::Error for PartialRun {}

pub struct RunContext {
    pub file: FileConfig,
    pub out: PathBuf,
}

impl RunContext {
    pub fn new(config: Option<&Path>, out: Option<PathBuf>) -> Result<Self> {
        let file = FileConfig::load(config)?;
        let out = out_dir(out, file.out.clone());
        fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(RunContext { file, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn engine(&self, flag: Option<String>) -> Result<EngineConfig> {
        let name = pick(flag, self.file.empty_policy.clone(), EmptyModelPolicy::default().to_string());
        Ok(EngineConfig {
            empty: name.parse()?,
            ..EngineConfig::default()
        })
    }
}

/// Run manifest: every key is written in sorted order.
struct Manifest {
    fields: Map<String, Value>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        Manifest {
            fields,
            outputs: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.fields.insert(key.into(), value.into());
        self
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        ));
    }

    fn write(mut self, ctx: &RunContext, command: &str) -> Result<PathBuf> {
        self.fields.insert("outputs".into(), json!(self.outputs));
        let path = ctx.path(&format!("{command}.manifest.json"));
        let text = serde_json::to_string_pretty(&Value::Object(self.fields))?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

struct Inputs {
    store: KernelStore,
    digest: String,
    train: LabeledDataset,
    test: LabeledDataset,
}

fn load_inputs(args: &KernelArgs) -> Result<Inputs> {
    let bytes = fs::read(&args.kernel).with_context(|| format!("reading kernel {}", args.kernel.display()))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let store = KernelStore::from_bytes(&bytes)?;
    let train = load_dataset(&args.train_labels, Some(store.n_classes()))?;
    let test = load_dataset(&args.test_labels, Some(store.n_classes()))?;
    Ok(Inputs {
        store,
        digest,
        train,
        test,
    })
}

fn record_inputs(manifest: &mut Manifest, args: &KernelArgs, inputs: &Inputs) {
    manifest
        .set("kernel", args.kernel.display().to_string())
        .set("kernel_sha256", inputs.digest.clone())
        .set("train_labels", args.train_labels.display().to_string())
        .set("test_labels", args.test_labels.display().to_string());
}

/// `all`, a test id, or `@file` naming a labels CSV whose ids select the rows.
fn parse_target(spec: &str, test: &LabeledDataset) -> Result<Target> {
    if spec == "all" {
        return Ok(Target::All);
    }
    let locate = |id: &str| {
        test.position(id)
            .ok_or_else(|| anyhow!("target id {id:?} is not among the test rows"))
    };
    match spec.strip_prefix('@') {
        Some(path) => {
            let rows = load_dataset(Path::new(path), None)?;
            let positions = rows.ids().iter().map(|id| locate(id)).collect::<Result<Vec<_>>>()?;
            Ok(Target::Points(positions))
        }
        None => Ok(Target::Point(locate(spec)?)),
    }
}

fn parse_method(name: &str) -> Result<Method> {
    Ok(name.parse::<Method>()?)
}

/// Scores every training point of `game` with `method`.
fn score(game: &KernelGame, method: Method, iters: usize, tolerance: f64, seed: u64) -> freeshap::Result<ScoreTable> {
    Ok(match method {
        Method::Exact => exact_shapley(game)?,
        Method::Mc => freeshap(game, iters, seed)?.0,
        Method::Tmc => tmc_freeshap(game, iters, tolerance, seed)?.0,
        Method::Loo => loo(game)?,
    })
}

struct Sampling {
    method: Method,
    iters: usize,
    tolerance: f64,
    seed: u64,
}

impl Sampling {
    fn resolve(ctx: &RunContext, args: &SampleArgs) -> Result<Self> {
        let f = &ctx.file;
        Ok(Sampling {
            method: parse_method(&pick(args.method.clone(), f.method.clone(), "tmc".into()))?,
            iters: pick(args.iters, f.iters, 200),
            tolerance: pick(args.tolerance, f.tolerance, 0.05),
            seed: pick(args.seed, f.seed, 0),
        })
    }

    fn record(&self, manifest: &mut Manifest) {
        manifest.set("method", self.method.tag()).set("seed", self.seed);
        if matches!(self.method, Method::Mc | Method::Tmc) {
            manifest.set("iters", self.iters);
        }
        if self.method == Method::Tmc {
            manifest.set("tolerance", self.tolerance);
        }
    }
}

fn finish(manifest: Manifest, ctx: &RunContext, command: &str, partial: bool) -> Result<()> {
    let mut manifest = manifest;
    manifest.set("partial", partial);
    let path = manifest.write(ctx, command)?;
    eprintln!("manifest: {}", path.display());
    if partial {
        return Err(PartialRun("a permutation failed twice; scores cover the permutations before it".into()).into());
    }
    Ok(())
}

pub fn valuate(ctx: &RunContext, args: ValuateArgs) -> Result<()> {
    let inputs = load_inputs(&args.kernel)?;
    let sampling = Sampling::resolve(ctx, &args.sample)?;
    let engine = ctx.engine(args.empty_policy)?;
    let target_spec = pick(args.target, ctx.file.target.clone(), "all".into());
    let target = parse_target(&target_spec, &inputs.test)?;
    let game = KernelGame::new(&inputs.store, &inputs.train, &inputs.test, &target, engine.clone())?;
    let table = score(&game, sampling.method, sampling.iters, sampling.tolerance, sampling.seed)?;

    let out = ctx.path("scores.csv");
    table.save(&out)?;
    let mut manifest = Manifest::new("valuate");
    record_inputs(&mut manifest, &args.kernel, &inputs);
    sampling.record(&mut manifest);
    manifest
        .set("empty_policy", engine.empty.name())
        .set("target", target_spec);
    manifest.output(&out);
    println!("wrote {} scores to {}", table.len(), out.display());
    finish(manifest, ctx, "valuate", table.partial)
}

fn distribution(path: Option<&Path>) -> Result<DistributionSpec> {
    let dist = match path {
        None => DistributionSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| anyhow!("distribution config {}: {e}", p.display()))?
        }
    };
    dist.validate()?;
    Ok(dist)
}

pub fn robustness(ctx: &RunContext, args: RobustnessArgs) -> Result<()> {
    let f = &ctx.file;
    let dist = distribution(args.dist_config.as_deref())?;
    let n = pick(args.n, f.n, 200);
    if n < 2 {
        bail!("dataset size must be at least 2, got {n}");
    }
    let cfg = ProtocolConfig {
        resamples: pick(args.resamples, f.resamples, 5),
        n_others: n - 1,
        iters: pick(args.iters, f.iters, 200),
        tolerance: pick(args.tolerance, f.tolerance, 0.05),
        seed: pick(args.seed, f.seed, 0),
        methods: vec![ProtocolMethod::Shapley, ProtocolMethod::Loo],
    };
    let pool_size = pick(args.pool, f.pool, 50);
    let test_size = pick(args.test_size, f.test_size, 200);
    let bandwidth = pick(args.bandwidth, f.bandwidth, default_bandwidth(&dist));
    let engine = ctx.engine(args.empty_policy)?;
    let world = SyntheticWorld::new(&dist, test_size, SynthKernel::Rbf { bandwidth }, engine.clone(), cfg.seed)?;
    let pool = sample_pool(&dist, pool_size, cfg.seed)?;
    let results = robustness_protocol(&dist, &pool, &world, &cfg)?;

    let mut manifest = Manifest::new("robustness");
    let mut rates = Map::new();
    for res in &results {
        let path = ctx.path(&format!("robustness_{}.csv", res.method.name()));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        res.write_csv(std::io::BufWriter::new(file))?;
        manifest.output(&path);
        println!(
            "{}: {} of {} points non-robust ({})",
            res.method.name(),
            res.flagged(),
            res.points.len(),
            format_rate(res.rate)
        );
        rates.insert(
            res.method.name().into(),
            json!({ "rate": res.rate, "percent": format_rate(res.rate), "flagged": res.flagged() }),
        );
    }
    let ids: Vec<String> = pool.iter().map(|e| e.id.clone()).collect();
    let diag = remark_diagnostics(&ids, &results[0].score_samples(), &results[1].score_samples())?;
    let diag_path = ctx.path("robustness_diagnostics.csv");
    diag.write_csv(std::io::BufWriter::new(fs::File::create(&diag_path)?))?;
    manifest.output(&diag_path);

    let summary = json!({
        "methods": rates,
        "pool": pool_size,
        "resamples": cfg.resamples,
        "dataset_size": n,
        "test_size": test_size,
        "bandwidth": bandwidth,
        "seed": cfg.seed,
        "complement_seeds": (0..cfg.resamples).map(|r| freeshap::robustness::complement_seed(cfg.seed, r)).collect::<Vec<_>>(),
        "empty_policy": engine.empty.name(),
        "shapley_iters": cfg.iters,
        "shapley_tolerance": cfg.tolerance,
        "diagnostics": {
            "avg_abs_mean_shapley": diag.avg_abs_mean_shapley,
            "avg_abs_mean_loo": diag.avg_abs_mean_loo,
            "avg_std_shapley": diag.avg_std_shapley,
            "avg_std_loo": diag.avg_std_loo,
        },
        "distribution": serde_json::to_value(&dist)?,
    });
    let summary_path = ctx.path("robustness_summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    manifest.output(&summary_path);
    manifest
        .set("seed", cfg.seed)
        .set("method", "tmc+loo")
        .set("iters", cfg.iters)
        .set("tolerance", cfg.tolerance)
        .set("empty_policy", engine.empty.name());
    finish(manifest, ctx, "robustness", false)
}

fn load_scores(path: &Path, train: &LabeledDataset) -> Result<ScoreTable> {
    let file = fs::File::open(path).with_context(|| format!("opening scores {}", path.display()))?;
    let table = read_scores(std::io::BufReader::new(file))?;
    if table.ids != train.ids() {
        bail!("score table {} does not list the training ids in order", path.display());
    }
    Ok(table)
}

pub fn removal(ctx: &RunContext, args: RemovalArgs) -> Result<()> {
    let inputs = load_inputs(&args.kernel)?;
    let engine = ctx.engine(args.empty_policy)?;
    let target_spec = pick(args.target, ctx.file.target.clone(), "all".into());
    let target = parse_target(&target_spec, &inputs.test)?;
    let game = KernelGame::new(&inputs.store, &inputs.train, &inputs.test, &target, engine.clone())?;
    let scores = load_scores(&args.scores, &inputs.train)?;
    let step = pick(args.step, ctx.file.step, 0.1);
    let direction = pick(args.direction, ctx.file.direction.clone(), "both".into());
    let directions = match direction.as_str() {
        "both" => vec![Direction::HighFirst, Direction::LowFirst],
        other => vec![other.parse::<Direction>()?],
    };

    let mut manifest = Manifest::new("removal");
    record_inputs(&mut manifest, &args.kernel, &inputs);
    for d in directions {
        let curve = removal_curve(&scores, d, step, &game)?;
        let path = ctx.path(&format!("removal_{}.csv", d.name()));
        curve.save(&path)?;
        manifest.output(&path);
        println!("{}: area {:.6}", d.name(), curve.area());
    }
    manifest
        .set("scores", args.scores.display().to_string())
        .set("method", scores.method.tag())
        .set("step", step)
        .set("empty_policy", engine.empty.name())
        .set("target", target_spec);
    if let Some(seed) = scores.seed {
        manifest.set("seed", seed);
    }
    finish(manifest, ctx, "removal", false)
}

fn parse_steps(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("bad selection fraction {s:?}")))
        .collect()
}

pub fn select(ctx: &RunContext, args: SelectArgs) -> Result<()> {
    let inputs = load_inputs(&args.kernel)?;
    let engine = ctx.engine(args.empty_policy)?;
    let heldout = load_dataset(&args.heldout_labels, Some(inputs.store.n_classes()))?;
    let target_spec = pick(args.target, ctx.file.target.clone(), "all".into());
    let target = parse_target(&target_spec, &inputs.test)?;
    let steps = match (args.steps, ctx.file.steps.clone()) {
        (Some(text), _) => parse_steps(&text)?,
        (None, Some(v)) => v,
        (None, None) => (1..=10).map(|k| k as f64 / 10.0).collect(),
    };
    let game = heldout_game(&inputs.store, &inputs.train, &inputs.test, &heldout, &target, engine.clone())?;
    let scores = load_scores(&args.scores, &inputs.train)?;
    let curve = selection_curve(&scores, &steps, &game)?;
    let path = ctx.path("selection.csv");
    curve.save(&path)?;

    let mut manifest = Manifest::new("select");
    record_inputs(&mut manifest, &args.kernel, &inputs);
    manifest
        .set("heldout_labels", args.heldout_labels.display().to_string())
        .set("scores", args.scores.display().to_string())
        .set("method", scores.method.tag())
        .set("steps", json!(steps))
        .set("empty_policy", engine.empty.name())
        .set("baseline", game.empty_value())
        .set("target", target_spec);
    if let Some(seed) = scores.seed {
        manifest.set("seed", seed);
    }
    manifest.output(&path);
    println!("wrote {} selection levels to {}", curve.points.len(), path.display());
    finish(manifest, ctx, "select", false)
}

pub fn mislabel(ctx: &RunContext, args: MislabelArgs) -> Result<()> {
    let inputs = load_inputs(&args.kernel)?;
    let sampling = Sampling::resolve(ctx, &args.sample)?;
    let engine = ctx.engine(args.empty_policy)?;
    let flip = pick(args.flip, ctx.file.flip, 0.10);
    let target_spec = pick(args.target, ctx.file.target.clone(), "all".into());
    let target = parse_target(&target_spec, &inputs.test)?;
    let game = KernelGame::new(&inputs.store, &inputs.train, &inputs.test, &target, engine.clone())?;
    let outcome = mislabel_detection(&game, inputs.train.labels(), flip, sampling.seed, |g| {
        score(g, sampling.method, sampling.iters, sampling.tolerance, sampling.seed)
    })?;

    let mut manifest = Manifest::new("mislabel");
    record_inputs(&mut manifest, &args.kernel, &inputs);
    sampling.record(&mut manifest);
    let curve_path = ctx.path("detection.csv");
    outcome.curve.save(&curve_path)?;
    let scores_path = ctx.path("mislabel_scores.csv");
    outcome.scores.save(&scores_path)?;
    let labels_path = ctx.path("mislabel_train.csv");
    inputs.train.with_labels(outcome.labels.clone())?.save(&labels_path)?;
    for p in [&curve_path, &scores_path, &labels_path] {
        manifest.output(p);
    }
    manifest
        .set("flip", flip)
        .set("flipped", outcome.flipped.len())
        .set("empty_policy", engine.empty.name())
        .set("target", target_spec);
    println!(
        "flipped {} labels; detection area {:.6} (random {:.6})",
        outcome.flipped.len(),
        outcome.curve.area(),
        outcome.curve.baseline_area()
    );
    finish(manifest, ctx, "mislabel", outcome.scores.partial)
}

pub fn corr(args: CorrArgs) -> Result<()> {
    let open = |p: &Path| -> Result<ScoreTable> {
        let file = fs::File::open(p).with_context(|| format!("opening scores {}", p.display()))?;
        Ok(read_scores(std::io::BufReader::new(file))?)
    };
    let c = correlate_tables(&open(&args.a)?, &open(&args.b)?)?;
    println!("pearson={:.6} spearman={:.6}", c.pearson, c.spearman);
    Ok(())
}

pub fn synth_kernel_cmd(ctx: &RunContext, args: SynthKernelArgs) -> Result<()> {
    let train = load_dataset(&args.train_labels, None)?;
    let test = load_dataset(&args.test_labels, Some(train.n_classes()))?;
    let kind = pick(args.kind, ctx.file.kind.clone(), "rbf".into());
    let kernel = match kind.as_str() {
        "linear" => SynthKernel::Linear,
        "rbf" => SynthKernel::Rbf {
            bandwidth: pick(args.bandwidth, ctx.file.bandwidth, 1.0),
        },
        other => bail!("unknown kernel kind {other:?} (expected linear or rbf)"),
    };
    let store = synth_kernel(&train, &test, kernel)?;
    let path = ctx.path("kernel.bin");
    write_kernel(&store, &path)?;
    let digest = hex::encode(Sha256::digest(&fs::read(&path)?));

    let mut manifest = Manifest::new("synth-kernel");
    manifest
        .set("train_labels", args.train_labels.display().to_string())
        .set("test_labels", args.test_labels.display().to_string())
        .set("kind", kind)
        .set("kernel_sha256", digest);
    if let SynthKernel::Rbf { bandwidth } = kernel {
        manifest.set("bandwidth", bandwidth);
    }
    manifest.output(&path);
    println!(
        "wrote {}x{} kernel ({} classes) to {}",
        store.n_rows(),
        store.n_train(),
        store.n_classes(),
        path.display()
    );
    finish(manifest, ctx, "synth-kernel", false)
}

pub fn synth_data(ctx: &RunContext, args: SynthDataArgs) -> Result<()> {
    let f = &ctx.file;
    let dist = distribution(args.dist_config.as_deref())?;
    let cfg = BenchmarkConfig {
        n_train: args.n_train,
        n_test: pick(args.test_size, f.test_size, 500),
        n_heldout: args.n_heldout,
        kernel: SynthKernel::Rbf {
            bandwidth: default_bandwidth(&dist),
        },
        dist,
        seed: pick(args.seed, f.seed, 0),
    };
    let bench = Benchmark::generate(&cfg)?;
    let mut manifest = Manifest::new("synth-data");
    for (name, ds) in [
        ("train.csv", &bench.train),
        ("test.csv", &bench.test),
        ("heldout.csv", &bench.heldout),
        ("rows.csv", &bench.test_rows()),
    ] {
        let path = ctx.path(name);
        ds.save(&path)?;
        manifest.output(&path);
    }
    manifest
        .set("seed", cfg.seed)
        .set("n_train", cfg.n_train)
        .set("n_test", cfg.n_test)
        .set("n_heldout", cfg.n_heldout)
        .set("distribution", serde_json::to_value(&cfg.dist)?);
    println!(
        "wrote {} train, {} test and {} held-out points to {}",
        cfg.n_train,
        cfg.n_test,
        cfg.n_heldout,
        ctx.out.display()
    );
    finish(manifest, ctx, "synth-data", false)
}

pub fn kernel_info(args: KernelInfoArgs) -> Result<()> {
    let bytes = fs::read(&args.kernel).with_context(|| format!("reading kernel {}", args.kernel.display()))?;
    let header = KernelHeader::parse(&bytes)?;
    println!(
        "n_train={} n_test={} n_classes={} layout={}",
        header.n_train,
        header.n_test,
        header.n_classes,
        header.layout.code()
    );
    if args.check {
        let store = KernelStore::from_bytes(&bytes)?;
        println!(
            "symmetry_defect={:e} mean_train_diagonal={:e}",
            store.symmetry_defect(),
            store.mean_train_diagonal()
        );
    }
    println!("sha256={}", hex::encode(Sha256::digest(&bytes)));
    Ok(())
}
