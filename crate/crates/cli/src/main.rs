//! `tracecast` command line.
//!
//! Every subcommand reads its inputs from `--out-dir` unless given explicit
//! paths, writes its artifacts there and records a `<subcommand>.manifest.json`
//! beside them. All randomness comes from `--seed`; each stage (corpus,
//! traces, faults, sampling, split, weights, initial tests, random planner)
//! derives its own stream from it by name.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tracecast::classifier::{NetConfig, TraceClassifier};
use tracecast::diagnosis::{self, DiagnosisReport, Observation, Outcome};
use tracecast::features::{build_dataset, DatasetConfig, LabeledDataset};
use tracecast::ldp::{self, outcome_oracle, LdpConfig, Predictor, Retraining, Workbench};
use tracecast::metrics::{evaluate, feature_importance};
use tracecast::planner::Strategy;
use tracecast::project::{load_faults, save_faults};
use tracecast::report::{json_with_hash, with_hash_comment, RunManifest};
use tracecast::synth::{generate_corpus, inject_faults, GenConfig};
use tracecast::{FaultSet, NodeId, Project, TraceTable};

#[derive(Parser, Debug)]
#[command(name = "tracecast", version, about = "Trace prediction and test planning for fault diagnosis")]
struct Cli {
    /// Root seed for every random stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for inputs and outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// JSON file with optional "generate", "dataset", "net" and "ldp" sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a project, its ground-truth traces and injected faults.
    Generate(GenerateArgs),
    /// Build the dataset, train a classifier and report held-out metrics.
    Train(TrainArgs),
    /// Evaluate a saved model on the held-out split.
    Eval(EvalArgs),
    /// All-but-one feature importance.
    Importance(DatasetArgs),
    /// Diagnose from executed tests.
    Diagnose(DiagnoseArgs),
    /// Run the troubleshooting experiment across planners and budgets.
    Simulate(SimulateArgs),
    /// Summarize metrics and experiment results found in the output directory.
    Report,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    tests_per_class: Option<usize>,
    #[arg(long, value_parser = unit_interval)]
    dynamic_fraction: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    naming_correlation: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    branch_prob: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    dynamic_prob: Option<f64>,
    /// Number of fault sets to inject.
    #[arg(long, default_value_t = 30)]
    faults: usize,
    /// Functions per injected fault.
    #[arg(long, default_value_t = 1)]
    fault_cardinality: usize,
}

#[derive(Args, Debug, Clone)]
struct CorpusArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct DatasetArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Share of functions whose traces are recorded.
    #[arg(long, value_parser = unit_interval)]
    sample_fraction: Option<f64>,
    /// Share of instances used for training.
    #[arg(long, value_parser = unit_interval)]
    split_ratio: Option<f64>,
    #[arg(long, value_enum, default_value_t = Arch::Nn)]
    arch: Arch,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Also compute all-but-one feature importance.
    #[arg(long)]
    importance: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Fault file used to decide outcomes.
    #[arg(long)]
    fault_file: Option<PathBuf>,
    /// Which fault of the fault file is active.
    #[arg(long, default_value_t = 0)]
    fault_index: usize,
    /// Executed test ids, comma separated. Defaults to every test.
    #[arg(long, value_delimiter = ',')]
    tests: Vec<u32>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    fault_file: Option<PathBuf>,
    /// Needed by the predicted planner.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "predicted,oracle,random")]
    planners: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "50,75,100,125,150")]
    budgets: Vec<usize>,
    /// Use only the first N faults of the fault file.
    #[arg(long)]
    faults: Option<usize>,
    #[arg(long, value_parser = open_unit_interval)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Retrain the classifier after every N planned executions.
    #[arg(long)]
    retrain_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Arch {
    Nn,
    Dnn,
}

/// Optional configuration sections. Flags override them.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    generate: Option<GenConfig>,
    dataset: Option<DatasetConfig>,
    net: Option<NetConfig>,
    ldp: Option<LdpConfig>,
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn open_unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    file: FileConfig,
}

impl Ctx {
    fn path(&self, explicit: &Option<PathBuf>, default: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join(default))
    }

    fn load_corpus(&self, args: &CorpusArgs) -> Result<(Project, TraceTable, PathBuf, PathBuf)> {
        let cp = self.path(&args.corpus, "corpus.json");
        let tp = self.path(&args.traces, "traces.json");
        let project = Project::load(&cp).with_context(|| format!("loading corpus {}", cp.display()))?;
        let traces = TraceTable::load(&tp, &project).with_context(|| format!("loading traces {}", tp.display()))?;
        Ok((project, traces, cp, tp))
    }

    fn dataset_config(&self, args: &DatasetArgs) -> DatasetConfig {
        let mut cfg = self.file.dataset.unwrap_or_default();
        if let Some(f) = args.sample_fraction {
            cfg.sample_fraction = f;
        }
        if let Some(r) = args.split_ratio {
            cfg.split_ratio = r;
        }
        cfg
    }

    fn net_config(&self, args: &DatasetArgs) -> NetConfig {
        let mut cfg = match (&self.file.net, args.arch) {
            (Some(net), Arch::Nn) => net.clone(),
            (_, Arch::Nn) => NetConfig::nn(),
            (Some(net), Arch::Dnn) => NetConfig {
                hidden_layers: NetConfig::dnn().hidden_layers,
                ..net.clone()
            },
            (None, Arch::Dnn) => NetConfig::dnn(),
        };
        if let Some(n) = args.max_iterations {
            cfg.max_iterations = n;
        }
        cfg.seed = self.seed;
        cfg
    }

    fn dataset(&self, args: &DatasetArgs) -> Result<(Project, LabeledDataset, RunManifestInputs)> {
        let (project, traces, cp, tp) = self.load_corpus(&args.corpus)?;
        let cfg = self.dataset_config(args);
        let dataset = build_dataset(&project, &traces, &cfg, self.seed).context("building the dataset")?;
        Ok((project, dataset, vec![("corpus", cp), ("traces", tp)]))
    }

    /// Writes `body` to `name`, returning its path.
    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn finish(&self, manifest: RunManifest) -> Result<()> {
        let path = self.out.join(format!("{}.manifest.json", manifest.subcommand));
        manifest.write(&path).with_context(|| format!("writing {}", path.display()))
    }
}

type RunManifestInputs = Vec<(&'static str, PathBuf)>;

fn manifest(ctx: &Ctx, sub: &str, config: serde_json::Value, inputs: &RunManifestInputs) -> RunManifest {
    let mut m = RunManifest::new(sub, ctx.seed, config);
    for (role, path) in inputs {
        m = m.input(role, path);
    }
    m
}

fn generate(ctx: &Ctx, args: &GenerateArgs) -> Result<()> {
    let mut cfg = ctx.file.generate.clone().unwrap_or_default();
    if let Some(v) = args.classes {
        cfg.n_classes = v;
    }
    if let Some(v) = args.tests_per_class {
        cfg.tests_per_class = v;
    }
    if let Some(v) = args.dynamic_fraction {
        cfg.dynamic_edge_fraction = v;
    }
    if let Some(v) = args.naming_correlation {
        cfg.naming_correlation = v;
    }
    if let Some(v) = args.branch_prob {
        cfg.branch_prob = v;
    }
    if let Some(v) = args.dynamic_prob {
        cfg.dynamic_prob = v;
    }
    cfg.seed = ctx.seed;
    let (project, traces) = generate_corpus(&cfg).context("generating the corpus")?;
    let faults = inject_faults(&traces, args.fault_cardinality, args.faults, ctx.seed).context("injecting faults")?;

    let corpus_path = ctx.out.join("corpus.json");
    let traces_path = ctx.out.join("traces.json");
    let faults_path = ctx.out.join("faults.json");
    project.save(&corpus_path)?;
    traces.save(&traces_path)?;
    save_faults(&faults_path, &faults)?;

    let config = serde_json::json!({
        "generate": cfg,
        "faults": args.faults,
        "fault_cardinality": args.fault_cardinality,
    });
    let m = RunManifest::new("generate", ctx.seed, config)
        .output("corpus", &corpus_path)
        .output("traces", &traces_path)
        .output("faults", &faults_path);
    ctx.finish(m)?;

    println!("project      {}", project.name());
    println!("functions    {}", project.functions().len());
    println!("tests        {}", project.tests().len());
    println!("static edges {}", project.static_edges().len());
    println!("dynamic edges {}", project.dynamic_edges().len());
    println!("mean trace   {:.2}", traces.mean_trace_len());
    println!("faults       {}", faults.len());
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    #[serde(flatten)]
    metrics: &'a tracecast::metrics::MetricsReport,
    arch: Arch,
    hidden_layers: &'a [usize],
    train_instances: usize,
    test_instances: usize,
    positive_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    importance: Option<&'a std::collections::BTreeMap<String, f64>>,
}

fn write_metrics(
    ctx: &Ctx,
    m: &RunManifest,
    model: &TraceClassifier,
    dataset: &LabeledDataset,
    project: &Project,
    arch: Arch,
    importance: Option<&std::collections::BTreeMap<String, f64>>,
) -> Result<(PathBuf, tracecast::metrics::MetricsReport)> {
    let algorithm = match arch {
        Arch::Nn => "NN",
        Arch::Dnn => "DNN",
    };
    let metrics = evaluate(model, dataset, algorithm, project.name()).context("evaluating the model")?;
    let file = MetricsFile {
        metrics: &metrics,
        arch,
        hidden_layers: &model.config.hidden_layers,
        train_instances: dataset.split(tracecast::features::Split::Train).count(),
        test_instances: dataset.split(tracecast::features::Split::Test).count(),
        positive_rate: dataset.positive_rate(),
        importance,
    };
    let path = ctx.write("metrics.json", &json_with_hash(&file, &m.hash())?)?;
    Ok((path, metrics))
}

fn print_metrics(m: &tracecast::metrics::MetricsReport) {
    println!("algorithm project      TN      FP      FN      TP      Acc     AUC");
    println!(
        "{:<9} {:<12} {:.4}  {:.4}  {:.4}  {:.4}  {:.4}  {:.4}",
        m.algorithm, m.project, m.tn, m.fp, m.fn_, m.tp, m.acc, m.auc
    );
}

fn train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let (project, dataset, inputs) = ctx.dataset(&args.data)?;
    let net = ctx.net_config(&args.data);
    let config = serde_json::json!({
        "dataset": ctx.dataset_config(&args.data),
        "net": net,
        "importance": args.importance,
    });
    let model_path = ctx.out.join("model.json");
    let metrics_path = ctx.out.join("metrics.json");
    let m = manifest(ctx, "train", config, &inputs)
        .output("model", &model_path)
        .output("metrics", &metrics_path);

    let model = TraceClassifier::train(&dataset, &net).context("training the classifier")?;
    model.save(&model_path)?;
    let importance = if args.importance {
        Some(feature_importance(&dataset, &net).context("computing feature importance")?)
    } else {
        None
    };
    let (_, metrics) = write_metrics(ctx, &m, &model, &dataset, &project, args.data.arch, importance.as_ref())?;
    ctx.finish(m)?;
    print_metrics(&metrics);
    if let Some(imp) = &importance {
        print_importance(imp);
    }
    Ok(())
}

fn eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let (project, dataset, mut inputs) = ctx.dataset(&args.data)?;
    let model_path = ctx.path(&args.model, "model.json");
    let model = TraceClassifier::load(&model_path).with_context(|| format!("loading {}", model_path.display()))?;
    inputs.push(("model", model_path));
    let arch = if model.config.hidden_layers.len() > 1 { Arch::Dnn } else { Arch::Nn };
    let config = serde_json::json!({ "dataset": ctx.dataset_config(&args.data) });
    let m = manifest(ctx, "eval", config, &inputs).output("metrics", &ctx.out.join("metrics.json"));
    let (_, metrics) = write_metrics(ctx, &m, &model, &dataset, &project, arch, None)?;
    ctx.finish(m)?;
    print_metrics(&metrics);
    Ok(())
}

fn print_importance(imp: &std::collections::BTreeMap<String, f64>) {
    let mut rows: Vec<(&String, &f64)> = imp.iter().collect();
    rows.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    println!("feature                  AUC drop");
    for (name, drop) in rows {
        println!("{name:<24} {drop:+.4}");
    }
}

fn importance(ctx: &Ctx, args: &DatasetArgs) -> Result<()> {
    let (_, dataset, inputs) = ctx.dataset(args)?;
    let net = ctx.net_config(args);
    let config = serde_json::json!({ "dataset": ctx.dataset_config(args), "net": net });
    let path = ctx.out.join("importance.json");
    let m = manifest(ctx, "importance", config, &inputs).output("importance", &path);
    let imp = feature_importance(&dataset, &net).context("computing feature importance")?;
    ctx.write("importance.json", &json_with_hash(&serde_json::json!({ "auc_drop": imp }), &m.hash())?)?;
    ctx.finish(m)?;
    print_importance(&imp);
    Ok(())
}

fn load_fault_file(ctx: &Ctx, explicit: &Option<PathBuf>, project: &Project) -> Result<(Vec<FaultSet>, PathBuf)> {
    let path = ctx.path(explicit, "faults.json");
    let faults = load_faults(&path, project).with_context(|| format!("loading faults {}", path.display()))?;
    Ok((faults, path))
}

fn ldp_config(ctx: &Ctx) -> LdpConfig {
    ctx.file.ldp.clone().unwrap_or_default()
}

fn diagnose(ctx: &Ctx, args: &DiagnoseArgs) -> Result<()> {
    let (project, traces, cp, tp) = ctx.load_corpus(&args.corpus)?;
    let (faults, fp) = load_fault_file(ctx, &args.fault_file, &project)?;
    let Some(fault) = faults.get(args.fault_index) else {
        bail!("fault index {} is out of range ({} faults)", args.fault_index, faults.len());
    };
    let tests: Vec<NodeId> = if args.tests.is_empty() {
        traces.iter().map(|(t, _)| t).collect()
    } else {
        args.tests.iter().map(|&t| NodeId(t)).collect()
    };
    let observations = tests
        .iter()
        .map(|&t| {
            Ok(Observation {
                test: t,
                trace: traces.trace(t).clone(),
                outcome: outcome_oracle(t, &traces, fault)?,
            })
        })
        .collect::<tracecast::Result<Vec<_>>>()?;
    let cfg = ldp_config(ctx);
    let failed = observations.iter().filter(|o| o.outcome == Outcome::Failed).count();
    let config = serde_json::json!({
        "max_diag_cardinality": cfg.max_diag_cardinality,
        "prior_fault_prob": cfg.prior_fault_prob,
        "fault_index": args.fault_index,
        "tests": tests,
    });
    let path = ctx.out.join("diagnosis.json");
    let m = manifest(ctx, "diagnose", config, &vec![("corpus", cp), ("traces", tp), ("faults", fp)])
        .output("diagnosis", &path);
    let ds = diagnosis::diagnose(
        &observations,
        cfg.max_diag_cardinality,
        cfg.prior_fault_prob,
        project.functions().len(),
    )
    .context("diagnosing")?;
    ctx.write("diagnosis.json", &json_with_hash(&DiagnosisReport::new(&ds), &m.hash())?)?;
    ctx.finish(m)?;
    println!("{} tests executed, {failed} failed, {} candidate diagnoses", observations.len(), ds.len());
    for d in ds.diagnoses.iter().take(5) {
        let names: Vec<String> = d
            .components
            .iter()
            .map(|&c| match project.names(c) {
                Some((class, method)) => format!("{class}.{method}"),
                None => c.to_string(),
            })
            .collect();
        println!("{:.4}  {}", d.score, names.join(", "));
    }
    Ok(())
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> tracecast::Result<()>, hash: &str) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(with_hash_comment(&buf, hash)?)
}

fn simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<()> {
    let (project, traces, cp, tp) = ctx.load_corpus(&args.corpus)?;
    let (mut faults, fp) = load_fault_file(ctx, &args.fault_file, &project)?;
    if let Some(n) = args.faults {
        if n > faults.len() {
            bail!("{n} faults requested but the fault file holds {}", faults.len());
        }
        faults.truncate(n);
    }
    let mut cfg = ldp_config(ctx);
    if let Some(s) = args.threshold {
        cfg.score_threshold = s;
    }
    if let Some(k) = args.top_k {
        cfg.top_k = k;
    }
    if let Some(n) = args.retrain_every {
        cfg.online_retraining = Retraining::Every(n);
    }
    cfg.test_budget = args.budgets.iter().copied().max().unwrap_or(0);
    let mut inputs: RunManifestInputs = vec![("corpus", cp), ("traces", tp), ("faults", fp)];

    let predictor = if args.planners.contains(&Strategy::Predicted) {
        let path = ctx.path(&args.model, "model.json");
        if !path.exists() {
            bail!(
                "the predicted planner needs a model; {} does not exist (run `train` or pass --model)",
                path.display()
            );
        }
        let model = TraceClassifier::load(&path).with_context(|| format!("loading {}", path.display()))?;
        inputs.push(("model", path));
        let mut predictor = Predictor::new(model, &project)?;
        if cfg.online_retraining != Retraining::Off {
            let data_cfg = ctx.file.dataset.unwrap_or_default();
            predictor = predictor.with_training(build_dataset(&project, &traces, &data_cfg, ctx.seed)?);
        }
        Some(predictor)
    } else {
        None
    };

    let names = ["experiment.csv", "convergence.csv", "steps.csv", "episodes.jsonl"];
    let config = serde_json::json!({
        "ldp": cfg,
        "planners": args.planners,
        "budgets": args.budgets,
        "faults": faults.len(),
    });
    let mut m = manifest(ctx, "simulate", config, &inputs);
    for name in names {
        m = m.output(name.split('.').next().unwrap(), &ctx.out.join(name));
    }
    let hash = m.hash();

    let bench = Workbench {
        project: &project,
        traces: &traces,
        predictor: predictor.as_ref(),
    };
    let report = ldp::run_experiment(&bench, &faults, &args.planners, &args.budgets, &cfg, ctx.seed)
        .context("running the experiment")?;
    ctx.write(names[0], &csv_text(|b| report.write_csv(b), &hash)?)?;
    ctx.write(names[1], &csv_text(|b| report.write_convergence_csv(b), &hash)?)?;
    ctx.write(names[2], &csv_text(|b| report.write_steps_csv(b), &hash)?)?;
    ctx.write(names[3], &csv_text(|b| report.write_log(b), &hash)?)?;
    ctx.finish(m)?;
    print_convergence(&report.rows(), &args.budgets);
    Ok(())
}

fn print_convergence(rows: &[ldp::EpisodeRow], budgets: &[usize]) {
    let counts = ldp::convergence_counts(rows);
    let mut budgets = budgets.to_vec();
    budgets.sort_unstable();
    budgets.dedup();
    let header: Vec<String> = budgets.iter().map(|b| format!("{b:>6}")).collect();
    println!("converged  {}", header.join(""));
    let planners: std::collections::BTreeSet<Strategy> = counts.iter().map(|c| c.planner).collect();
    for p in planners {
        let cells: Vec<String> = budgets
            .iter()
            .map(|&b| {
                let n = counts
                    .iter()
                    .find(|c| c.planner == p && c.budget == b)
                    .map_or(0, |c| c.converged);
                format!("{n:>6}")
            })
            .collect();
        println!("{:<10} {}", p.to_string(), cells.join(""));
    }
    if let Some(&max) = budgets.last() {
        let (means, n) = ldp::paired_mean_steps(rows, max);
        if n > 0 {
            let parts: Vec<String> = means.iter().map(|(p, s)| format!("{p} {s:.2}")).collect();
            println!("mean steps at B={max} over {n} faults solved by every planner: {}", parts.join(", "));
        }
    }
}

fn report(ctx: &Ctx) -> Result<()> {
    let mut summary = serde_json::Map::new();
    let mut m = RunManifest::new("report", ctx.seed, serde_json::json!({}));
    let metrics_path = ctx.out.join("metrics.json");
    if metrics_path.exists() {
        let text = fs::read_to_string(&metrics_path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let metrics: tracecast::metrics::MetricsReport = serde_json::from_value(value.clone())?;
        print_metrics(&metrics);
        summary.insert("metrics".into(), value);
        m = m.input("metrics", &metrics_path);
    }
    let exp_path = ctx.out.join("experiment.csv");
    if exp_path.exists() {
        let rows = ldp::read_experiment_csv(fs::File::open(&exp_path)?)?;
        let budgets: Vec<usize> = rows.iter().map(|r| r.budget).collect();
        print_convergence(&rows, &budgets);
        let max = budgets.iter().copied().max().unwrap_or(0);
        let (means, n) = ldp::paired_mean_steps(&rows, max);
        summary.insert("convergence".into(), serde_json::to_value(ldp::convergence_counts(&rows))?);
        summary.insert(
            "paired_mean_steps".into(),
            serde_json::json!({ "budget": max, "faults": n, "steps": means }),
        );
        m = m.input("experiment", &exp_path);
    }
    if summary.is_empty() {
        bail!("nothing to report in {}: run train or simulate first", ctx.out.display());
    }
    let path = ctx.out.join("report.json");
    m = m.output("report", &path);
    ctx.write("report.json", &json_with_hash(&summary, &m.hash())?)?;
    ctx.finish(m)
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out_dir,
        file,
    };
    match &cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Importance(a) => importance(&ctx, a),
        Command::Diagnose(a) => diagnose(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Report => report(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
