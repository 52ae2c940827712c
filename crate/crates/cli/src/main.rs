//! `simtree`: the induction and refinement pipeline as file-to-file steps.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use simtree::embed::{ground_similar, ground_similar_anchored, load_embeddings, EmbeddingStore, SimilarityConfig};
use simtree::fuzzy::{apply_refined, finetune, Classifier, FinetuneConfig, FuzzyConfig, FuzzyError, OptimConfig, TraceRow, Variant};
use simtree::harness::{
    induce_params, load_dataset, metrics, partition, run_ablation, split, validate_ratios, ExperimentConfig, HarnessError, PROFILES,
};
use simtree::induce::{induce_tree, parse_tree, Heuristic, InduceParams, LanguageBias, LogicalDecisionTree};
use simtree::kb::{parse_facts, KnowledgeBase};
use simtree::rules::{convert_tree_to_rules, parse_rules, serialize_rules, RuleSet};
use simtree::som::{layout, project, select_entities, train_som, SomParams};
use simtree::synthetic::{self, SyntheticConfig};
use simtree::Sym;

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "simtree", version, about = "Logical decision trees with embedding similarity and fuzzy refinement")]
struct Cli {
    /// Where to write the run manifest; defaults to `<first output>.manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile the dataset named in a config into a fact file.
    Compile(CompileArgs),
    /// Materialize similar/2 facts for the entities of a fact file.
    Ground(GroundArgs),
    /// Split a fact file into train, validation and test files.
    Split(SplitArgs),
    /// Induce a logical decision tree.
    Induce(InduceArgs),
    /// Convert a tree into an equivalent rule set.
    Convert(ConvertArgs),
    /// Refine embeddings so the rules hold on training data.
    Finetune(FinetuneArgs),
    /// Predict a class for every example of a fact file.
    Classify(ClassifyArgs),
    /// Score predictions against labels.
    Evaluate(EvaluateArgs),
    /// Run the variant grid of a config and write the report.
    Ablate(AblateArgs),
    /// Project original and refined embeddings through one SOM.
    Som(SomArgs),
    /// Write the generated planted-rule corpus.
    Synth(SynthArgs),
    /// Print a built-in dataset profile.
    Profile { name: String },
}

#[derive(Args, Serialize)]
struct CompileArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the embedding rows the dataset uses.
    #[arg(long)]
    embeddings_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GroundArgs {
    #[arg(long)]
    facts: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    tau: f64,
    /// Only pairs with one side among these constants (comma-separated).
    #[arg(long, value_delimiter = ',')]
    anchors: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    facts: PathBuf,
    /// Takes `[split]` and `[ablation] undersample` from this config.
    #[arg(long, required_unless_present = "ratios")]
    config: Option<PathBuf>,
    /// Train, validation and test fractions, e.g. `0.5,0.25,0.25`.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Writes `train.pl`, `val.pl` and `test.pl` here.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct InduceArgs {
    #[arg(long)]
    facts: PathBuf,
    /// A similar/2 fact file from `ground`.
    #[arg(long)]
    similar: Option<PathBuf>,
    /// Takes `[induce]` defaults from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    minimal_cases: Option<usize>,
    #[arg(long)]
    positive_class: Option<String>,
    #[arg(long)]
    pool_cap: Option<usize>,
    #[arg(long, value_enum)]
    heuristic: Option<HeuristicArg>,
    /// Membership predicates; every binary predicate of the facts when omitted.
    #[arg(long, value_delimiter = ',')]
    predicates: Vec<String>,
    /// Plain symbolic bias: `pred(T, #)` without similar/2.
    #[arg(long)]
    no_similar: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum HeuristicArg {
    GainRatio,
    InfoGain,
}

#[derive(Args, Serialize)]
struct ConvertArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum VariantArg {
    ConstantsOnly,
    All,
}

#[derive(Args, Serialize)]
struct FinetuneArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Validate with this tree instead of the rules.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Takes `[fuzzy]`, `[optim]` and the positive class from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    variant: VariantArg,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    positive_class: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Accumulated gradient norm per entity, for `som --grad-norms`.
    #[arg(long)]
    grad_norms: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    #[arg(long, conflicts_with = "crisp_rules", required_unless_present = "crisp_rules")]
    tree: Option<PathBuf>,
    #[arg(long)]
    crisp_rules: Option<PathBuf>,
    #[arg(long)]
    facts: PathBuf,
    /// Needed when the classifier uses similar/2.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Fact file whose target/2 facts are the labels.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    positive_class: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the formatted table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SomArgs {
    /// Original embeddings; the map is trained on these.
    #[arg(long)]
    before: PathBuf,
    #[arg(long)]
    after: PathBuf,
    /// Rule file whose similar/2 constants are highlighted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// `entity,grad_norm` CSV from `finetune --grad-norms`.
    #[arg(long)]
    grad_norms: Option<PathBuf>,
    /// Entities plotted besides the constants when `--grad-norms` is given.
    #[arg(long, default_value_t = 30)]
    top: usize,
    #[arg(long, default_value_t = 20)]
    width: usize,
    #[arg(long, default_value_t = 20)]
    height: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    messages: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Errors that should exit with the usage code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read `{}`", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_toml(&read(path)?, base).with_context(|| format!("in config `{}`", path.display()))
}

fn load_store(path: &Path) -> Result<EmbeddingStore> {
    let f = fs::File::open(path).with_context(|| format!("cannot read `{}`", path.display()))?;
    load_embeddings(f).with_context(|| format!("in embeddings `{}`", path.display()))
}

fn load_kb(path: &Path, similar: Option<&Path>) -> Result<KnowledgeBase> {
    let mut text = read(path)?;
    if let Some(s) = similar {
        text.push('\n');
        text.push_str(&read(s)?);
    }
    parse_facts(&text).with_context(|| format!("in fact file `{}`", path.display()))
}

fn load_tree(path: &Path) -> Result<LogicalDecisionTree> {
    parse_tree(&read(path)?).with_context(|| format!("in tree `{}`", path.display()))
}

fn load_rules(path: &Path) -> Result<RuleSet> {
    parse_rules(&read(path)?).with_context(|| format!("in rules `{}`", path.display()))
}

fn predictions_csv(kb: &KnowledgeBase, preds: &[Sym]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "prediction"])?;
    for (i, p) in kb.interpretations().iter().zip(preds) {
        w.write_record([i.id.as_str(), p.as_str()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut m = Manifest::default();
    match cli.command {
        Command::Compile(a) => {
            m.begin("compile", &a)?;
            let cfg = load_config(&a.config)?;
            m.input(&a.config)?;
            m.config_echo(&cfg)?;
            let data = load_dataset(&cfg.dataset)?;
            write(&a.out, &data.kb.to_fact_text())?;
            m.output(&a.out)?;
            if let Some(e) = &a.embeddings_out {
                write(e, &data.store.to_text())?;
                m.output(e)?;
            }
        }
        Command::Ground(a) => {
            m.begin("ground", &a)?;
            m.inputs(&[&a.facts, &a.embeddings])?;
            let kb = load_kb(&a.facts, None)?;
            let store = load_store(&a.embeddings)?;
            let sim = SimilarityConfig::new(a.tau)?;
            let ents: Vec<Sym> = kb.entities().into_iter().filter(|e| store.contains(*e)).collect();
            let g = if a.anchors.is_empty() {
                ground_similar(&store, &ents, &sim)?
            } else {
                let anchors: Vec<Sym> = a.anchors.iter().map(|s| Sym::new(s)).collect();
                ground_similar_anchored(&store, &ents, &anchors, &sim)?
            };
            log::info!("{} similar pairs over {} entities", g.len(), ents.len());
            write(&a.out, &g.to_fact_text())?;
            m.output(&a.out)?;
        }
        Command::Split(a) => {
            m.begin("split", &a)?;
            m.input(&a.facts)?;
            let kb = load_kb(&a.facts, None)?;
            let (train, val, test) = if let Some(c) = &a.config {
                m.input(c)?;
                let cfg = load_config(c)?;
                let seed = a.seed.unwrap_or(cfg.split.seed);
                m.seeds = vec![seed];
                let p = partition(&cfg, &kb, seed)?;
                (p.train, p.val, p.test)
            } else {
                let r = a.ratios.as_deref().expect("clap requires --config or --ratios");
                if r.len() != 3 {
                    return Err(usage(format!("--ratios takes three fractions, got {}", r.len())));
                }
                let ratios = [r[0], r[1], r[2]];
                validate_ratios(ratios).map_err(|e| usage(e.to_string()))?;
                let seed = a.seed.unwrap_or(0);
                m.seeds = vec![seed];
                let all: Vec<usize> = (0..kb.len()).collect();
                let (tr, va, te) = split(&all, ratios, seed)?;
                (kb.subset(&tr), kb.subset(&va), kb.subset(&te))
            };
            for (name, part) in [("train.pl", train), ("val.pl", val), ("test.pl", test)] {
                let path = a.out_dir.join(name);
                write(&path, &part.to_fact_text())?;
                m.output(&path)?;
            }
        }
        Command::Induce(a) => {
            m.begin("induce", &a)?;
            m.input(&a.facts)?;
            if let Some(s) = &a.similar {
                m.input(s)?;
            }
            let kb = load_kb(&a.facts, a.similar.as_deref())?;
            let mut params = InduceParams::default();
            let mut predicates = a.predicates.clone();
            if let Some(c) = &a.config {
                m.input(c)?;
                let cfg = load_config(c)?;
                params = induce_params(&cfg);
                if predicates.is_empty() {
                    predicates = cfg.predicates();
                }
            }
            if let Some(v) = a.minimal_cases {
                params.minimal_cases = v;
            }
            if let Some(v) = a.pool_cap {
                params.constant_pool_cap = v;
            }
            if let Some(v) = &a.positive_class {
                params.positive_class = Some(Sym::new(v));
            }
            if let Some(h) = a.heuristic {
                params.heuristic = match h {
                    HeuristicArg::GainRatio => Heuristic::GainRatio,
                    HeuristicArg::InfoGain => Heuristic::InfoGain,
                };
            }
            if predicates.is_empty() {
                predicates = kb
                    .schema()
                    .iter()
                    .filter(|(p, &n)| n == 2 && !matches!(p.as_str(), "target" | "similar"))
                    .map(|(p, _)| p.to_string())
                    .collect();
            }
            if predicates.is_empty() {
                return Err(usage("no binary predicate to learn from; pass --predicates"));
            }
            let preds: Vec<&str> = predicates.iter().map(String::as_str).collect();
            let bias = if a.no_similar { LanguageBias::symbolic(&preds) } else { LanguageBias::with_similar(&preds) };
            if bias.uses_similar() && kb.similar().is_none() {
                return Err(usage("the similar/2 bias needs a grounding; pass --similar (from `simtree ground`) or --no-similar"));
            }
            let all: Vec<usize> = (0..kb.len()).collect();
            let tree = induce_tree(&kb, &all, &bias, &params)?;
            write(&a.out, &tree.to_string())?;
            m.output(&a.out)?;
        }
        Command::Convert(a) => {
            m.begin("convert", &a)?;
            m.input(&a.tree)?;
            let tree = load_tree(&a.tree)?;
            write(&a.out, &serialize_rules(&convert_tree_to_rules(&tree)))?;
            m.output(&a.out)?;
        }
        Command::Finetune(a) => {
            m.begin("finetune", &a)?;
            m.inputs(&[&a.rules, &a.train, &a.val, &a.embeddings])?;
            let rules = load_rules(&a.rules)?;
            let tree = a.tree.as_deref().map(load_tree).transpose()?;
            if let Some(t) = &a.tree {
                m.input(t)?;
            }
            let (mut fuzzy, mut optim, mut positive) = (None, None, a.positive_class.clone());
            if let Some(c) = &a.config {
                m.input(c)?;
                let cfg = load_config(c)?;
                fuzzy = Some(cfg.fuzzy);
                optim = Some(cfg.optim);
                positive = positive.or(Some(cfg.induce.positive_class));
            }
            let fuzzy = match (fuzzy, a.tau) {
                (Some(f), Some(t)) => FuzzyConfig { tau: t, ..f },
                (Some(f), None) => f,
                (None, Some(t)) => FuzzyConfig::new(t),
                (None, None) => return Err(usage("pass --tau or --config")),
            };
            fuzzy.validate()?;
            let mut optim = match (optim, a.learning_rate) {
                (Some(o), Some(lr)) => OptimConfig { learning_rate: lr, ..o },
                (Some(o), None) => o,
                (None, Some(lr)) => OptimConfig::new(lr),
                (None, None) => return Err(usage("pass --learning-rate or --config")),
            };
            if let Some(e) = a.max_epochs {
                optim.max_epochs = e;
            }
            let positive = Sym::new(&positive.ok_or_else(|| usage("pass --positive-class or --config"))?);
            let train = load_kb(&a.train, None)?;
            let val = load_kb(&a.val, None)?;
            let store = load_store(&a.embeddings)?;
            let variant = match a.variant {
                VariantArg::All => Variant::All,
                VariantArg::ConstantsOnly => Variant::ConstantsOnly,
            };
            let classifier = match &tree {
                Some(t) => Classifier::Tree(t),
                None => Classifier::Rules(&rules),
            };
            let cfg = FinetuneConfig { fuzzy, optim, variant, positive_class: positive };
            let r = finetune(&rules, classifier, &train, &val, &store, &cfg)?;
            log::info!("best epoch {} of {}; {} domain entities lacked vectors", r.best_epoch, r.trace.len() - 1, r.dropped);
            write(&a.out, &r.store.to_text())?;
            let mut buf = Vec::new();
            TraceRow::write_csv(&r.trace, &mut buf)?;
            write(&a.trace, &String::from_utf8(buf)?)?;
            m.output(&a.out)?;
            m.output(&a.trace)?;
            if let Some(g) = &a.grad_norms {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["entity", "grad_norm"])?;
                for (e, n) in &r.grad_norms {
                    w.write_record([e.as_str(), &format!("{n:e}")])?;
                }
                write(g, &String::from_utf8(w.into_inner()?)?)?;
                m.output(g)?;
            }
        }
        Command::Classify(a) => {
            m.begin("classify", &a)?;
            m.input(&a.facts)?;
            let kb = load_kb(&a.facts, None)?;
            let (tree, rules);
            let classifier = if let Some(t) = &a.tree {
                m.input(t)?;
                tree = load_tree(t)?;
                Classifier::Tree(&tree)
            } else {
                let r = a.crisp_rules.as_ref().expect("clap requires one of --tree and --crisp-rules");
                m.input(r)?;
                rules = load_rules(r)?;
                Classifier::Rules(&rules)
            };
            let preds = if classifier.constants().is_empty() {
                classifier.classify_all(&kb)?
            } else {
                let (Some(e), Some(tau)) = (&a.embeddings, a.tau) else {
                    return Err(usage("this classifier uses similar/2; pass --embeddings and --tau"));
                };
                m.input(e)?;
                apply_refined(classifier, &load_store(e)?, &kb, &SimilarityConfig::new(tau)?)?
            };
            write(&a.out, &predictions_csv(&kb, &preds)?)?;
            m.output(&a.out)?;
        }
        Command::Evaluate(a) => {
            m.begin("evaluate", &a)?;
            m.inputs(&[&a.predictions, &a.labels])?;
            let kb = load_kb(&a.labels, None)?;
            let mut rdr = csv::Reader::from_path(&a.predictions).with_context(|| format!("cannot read `{}`", a.predictions.display()))?;
            let mut by_id: BTreeMap<String, String> = BTreeMap::new();
            for rec in rdr.records() {
                let rec = rec?;
                if rec.len() != 2 {
                    bail!("`{}`: expected `id,prediction` rows", a.predictions.display());
                }
                by_id.insert(rec[0].to_owned(), rec[1].to_owned());
            }
            let mut preds = Vec::new();
            let mut labels = Vec::new();
            for i in kb.interpretations() {
                let p = by_id.get(i.id.as_str()).with_context(|| format!("no prediction for example `{}`", i.id))?;
                preds.push(Sym::new(p));
                labels.push(i.label);
            }
            if by_id.len() != preds.len() {
                bail!("{} predictions for {} labeled examples", by_id.len(), preds.len());
            }
            let r = metrics(&preds, &labels, Sym::new(&a.positive_class))?;
            let json = serde_json::to_string_pretty(&r)? + "\n";
            print!("{json}");
            if let Some(o) = &a.out {
                write(o, &json)?;
                m.output(o)?;
            }
        }
        Command::Ablate(a) => {
            m.begin("ablate", &a)?;
            m.input(&a.config)?;
            let cfg = load_config(&a.config)?;
            if let Some(h) = &cfg.ablation.handcrafted_rules {
                if cfg.ablation.variants.iter().any(|v| v.is_handcrafted()) {
                    m.input(h)?;
                }
            }
            m.config_echo(&cfg)?;
            m.seeds = cfg.seeds();
            let report = run_ablation(&cfg)?;
            write(&a.out, &report.to_csv())?;
            m.output(&a.out)?;
            let table = report.table();
            print!("{table}");
            if let Some(t) = &a.table {
                write(t, &table)?;
                m.output(t)?;
            }
        }
        Command::Som(a) => {
            m.begin("som", &a)?;
            m.inputs(&[&a.before, &a.after])?;
            let before = load_store(&a.before)?;
            let after = load_store(&a.after)?;
            let constants = match &a.rules {
                Some(r) => {
                    m.input(r)?;
                    load_rules(r)?.similar_constants()
                }
                None => Vec::new(),
            };
            let entities: Vec<Sym> = match &a.grad_norms {
                Some(g) => {
                    m.input(g)?;
                    let mut norms = BTreeMap::new();
                    let mut rdr = csv::Reader::from_path(g).with_context(|| format!("cannot read `{}`", g.display()))?;
                    for rec in rdr.records() {
                        let rec = rec?;
                        let v: f64 = rec.get(1).unwrap_or("").parse().with_context(|| format!("`{}`: bad grad_norm", g.display()))?;
                        norms.insert(Sym::new(rec.get(0).unwrap_or("")), v);
                    }
                    select_entities(&norms, &constants, a.top)
                }
                None => before.tokens().to_vec(),
            };
            let rows = |s: &EmbeddingStore| -> Vec<(Sym, Vec<f64>)> {
                entities.iter().filter_map(|&e| s.vector(e).map(|v| (e, v.to_vec()))).collect()
            };
            let training: Vec<(Sym, Vec<f64>)> = before.tokens().iter().map(|&t| (t, before.vector(t).expect("own token").to_vec())).collect();
            let params = SomParams { width: a.width, height: a.height, epochs: a.epochs, seed: a.seed, ..SomParams::default() };
            m.seeds = vec![a.seed];
            let som = train_som(&training, &params)?;
            log::info!("quantization error {:.4} -> {:.4}", som.errors[0], som.errors.last().copied().unwrap_or(0.0));
            let fig = layout(&som.grid, &project(&som.grid, &rows(&before))?, &project(&som.grid, &rows(&after))?, &constants);
            write(&a.svg, &fig.to_svg())?;
            write(&a.csv, &fig.to_csv())?;
            m.output(&a.svg)?;
            m.output(&a.csv)?;
        }
        Command::Synth(a) => {
            m.begin("synth", &a)?;
            let mut cfg = SyntheticConfig { seed: a.seed, ..SyntheticConfig::default() };
            if let Some(n) = a.messages {
                cfg.messages = n;
            }
            m.seeds = vec![a.seed];
            let c = synthetic::generate(&cfg)?;
            let facts = a.out_dir.join("facts.pl");
            let emb = a.out_dir.join("embeddings.txt");
            write(&facts, &c.kb.to_fact_text())?;
            write(&emb, &c.store.to_text())?;
            m.output(&facts)?;
            m.output(&emb)?;
        }
        Command::Profile { name } => {
            let Some((_, text)) = PROFILES.iter().find(|(n, _)| *n == name) else {
                return Err(usage(format!("unknown profile `{name}`")));
            };
            print!("{}", text.trim_start());
            return Ok(());
        }
    }
    m.finish(cli.manifest.as_deref())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        let diverged = |f: &FuzzyError| matches!(f, FuzzyError::Diverged { .. });
        if cause.downcast_ref::<FuzzyError>().is_some_and(diverged)
            || cause.downcast_ref::<HarnessError>().is_some_and(|h| matches!(h, HarnessError::Fuzzy(f) if diverged(f)))
        {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_cause() {
        assert_eq!(exit_code(&usage("x")), 1);
        assert_eq!(exit_code(&anyhow::Error::from(FuzzyError::Diverged { epoch: 3 })), 3);
        let wrapped = anyhow::Error::from(HarnessError::Fuzzy(FuzzyError::Diverged { epoch: 1 })).context("ablate");
        assert_eq!(exit_code(&wrapped), 3);
        assert_eq!(exit_code(&anyhow::Error::from(FuzzyError::EmptyBatch)), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("cannot read")), 2);
    }
}
