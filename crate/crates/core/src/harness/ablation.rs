use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::{ground_similar, load_embeddings_filtered, EmbeddingStore, SimilarityConfig};
use crate::fuzzy::{apply_refined, finetune, Classifier, FinetuneConfig, Variant};
use crate::induce::{classify, induce_tree, InduceParams, LanguageBias, LogicalDecisionTree};
use crate::kb::{
    candidate_tokens, compile_omics_dataset, compile_text_dataset, parse_facts, read_label_file, read_text_records,
    KnowledgeBase, OmicsConfig, OmicsMatrix, TextConfig,
};
use crate::rules::{convert_tree_to_rules, parse_rules, RuleSet};
use crate::symbol::Sym;
use crate::synthetic;

use super::{metrics, split, undersample, AblationVariant, DatasetConfig, ExperimentConfig, HarnessError, Metrics};

/// A compiled dataset and the vectors of its entities.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub kb: KnowledgeBase,
    pub store: EmbeddingStore,
}

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(|source| HarnessError::Open { path: path.to_path_buf(), source })
}

fn read_to_string(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Open { path: path.to_path_buf(), source })
}

fn delimiter(c: char) -> Result<u8, HarnessError> {
    u8::try_from(c).map_err(|_| HarnessError::Config(format!("delimiter `{c}` is not a single byte")))
}

/// Loads and compiles the dataset a config names. Only embedding rows the
/// dataset can use are kept in memory.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<LoadedDataset, HarnessError> {
    match cfg {
        DatasetConfig::Synthetic { generator, .. } => {
            let c = synthetic::generate(generator)?;
            Ok(LoadedDataset { kb: c.kb, store: c.store })
        }
        DatasetConfig::Text { records, embeddings, delimiter: d, label_threshold, stemmer, .. } => {
            let recs = read_text_records(open(records)?, delimiter(*d)?, *label_threshold)?;
            let wanted = candidate_tokens(&recs, *stemmer);
            let store = load_embeddings_filtered(open(embeddings)?, |t| wanted.contains(t))?;
            let mut text = TextConfig::new(&store);
            text.stemmer = *stemmer;
            let kb = compile_text_dataset(&recs, &text)?;
            Ok(LoadedDataset { kb, store })
        }
        DatasetConfig::Omics { expression, mutation, cna, labels, embeddings, delimiter: d, feature_cap, threshold, .. } => {
            let d = delimiter(*d)?;
            let expr = OmicsMatrix::from_reader(open(expression)?, d)?;
            let muts = OmicsMatrix::from_reader(open(mutation)?, d)?;
            let cnas = OmicsMatrix::from_reader(open(cna)?, d)?;
            let labels = read_label_file(open(labels)?, d)?;
            let kb = compile_omics_dataset(&expr, &muts, &cnas, &labels, &OmicsConfig { threshold: *threshold, feature_cap: *feature_cap })?;
            let store = entity_store(&kb, embeddings)?;
            Ok(LoadedDataset { kb, store })
        }
        DatasetConfig::Facts { facts, embeddings, .. } => {
            let kb = parse_facts(&read_to_string(facts)?)?;
            let store = entity_store(&kb, embeddings)?;
            Ok(LoadedDataset { kb, store })
        }
    }
}

fn entity_store(kb: &KnowledgeBase, embeddings: &Path) -> Result<EmbeddingStore, HarnessError> {
    let wanted: HashSet<String> = kb.entities().iter().map(|e| e.as_str().to_owned()).collect();
    Ok(load_embeddings_filtered(open(embeddings)?, |t| wanted.contains(t))?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub variant: AblationVariant,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// The resolved configuration the rows came from.
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "variant", "seed", "acc", "f1", "tp", "fp", "fn", "tn"])?;
        for r in &self.rows {
            let c = r.metrics.confusion;
            w.write_record([
                r.dataset.clone(),
                r.variant.id().to_owned(),
                r.seed.to_string(),
                format!("{:.6}", r.metrics.accuracy),
                format!("{:.6}", r.metrics.f1),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Accuracy and F1 per method, one block per seed.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.dedup();
        for seed in seeds {
            let _ = writeln!(out, "{} (seed {seed})", self.config.dataset.id());
            let _ = writeln!(out, "| {:<26} | {:>8} | {:>6} |", "Method", "Accuracy", "F1");
            let _ = writeln!(out, "|{}|{}|{}|", "-".repeat(28), "-".repeat(10), "-".repeat(8));
            for r in self.rows.iter().filter(|r| r.seed == seed) {
                let _ = writeln!(out, "| {:<26} | {:>8.4} | {:>6.4} |", r.variant.label(), r.metrics.accuracy, r.metrics.f1);
            }
        }
        out
    }
}

/// Train, validation and test knowledge bases for one seed.
pub struct Partition {
    pub train: KnowledgeBase,
    pub val: KnowledgeBase,
    pub test: KnowledgeBase,
}

/// Optional seeded subsample, then split, then (if configured)
/// undersampling of the training part only.
pub fn partition(cfg: &ExperimentConfig, kb: &KnowledgeBase, seed: u64) -> Result<Partition, HarnessError> {
    let labels: Vec<Sym> = kb.interpretations().iter().map(|i| i.label).collect();
    let mut pool: Vec<usize> = (0..kb.len()).collect();
    if let Some(n) = cfg.split.sample.filter(|&n| n < pool.len()) {
        // A distinct stream so the sample does not mirror the split order.
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed)));
        pool.truncate(n);
        pool.sort_unstable();
    }
    let (mut train, val, test) = split(&pool, cfg.split.ratios, seed)?;
    if cfg.ablation.undersample {
        train = undersample(&train, &labels, seed)?;
    }
    Ok(Partition { train: kb.subset(&train), val: kb.subset(&val), test: kb.subset(&test) })
}

pub fn induce_params(cfg: &ExperimentConfig) -> InduceParams {
    InduceParams {
        minimal_cases: cfg.induce.minimal_cases,
        constant_pool_cap: cfg.induce.constant_pool_cap,
        heuristic: cfg.induce.heuristic,
        positive_class: Some(Sym::new(&cfg.induce.positive_class)),
    }
}

/// Attaches the exact `similar/2` grounding over every embedded entity of `kb`.
pub fn attach_grounding(kb: &mut KnowledgeBase, store: &EmbeddingStore, sim: &SimilarityConfig) -> Result<(), HarnessError> {
    let ents: Vec<Sym> = kb.entities().into_iter().filter(|e| store.contains(*e)).collect();
    kb.attach_similar(ground_similar(store, &ents, sim)?);
    Ok(())
}

pub fn load_handcrafted(cfg: &ExperimentConfig) -> Result<RuleSet, HarnessError> {
    let path = cfg.ablation.handcrafted_rules.as_ref().ok_or(HarnessError::MissingHandcrafted)?;
    Ok(parse_rules(&read_to_string(path)?)?)
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    let data = load_dataset(&cfg.dataset)?;
    run_ablation_on(cfg, &data)
}

/// Runs every configured variant for every seed on one dataset.
pub fn run_ablation_on(cfg: &ExperimentConfig, data: &LoadedDataset) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    let handcrafted = if cfg.ablation.variants.iter().any(|v| v.is_handcrafted()) {
        let rules = load_handcrafted(cfg)?;
        rules.validate(&data.kb)?;
        Some(rules)
    } else {
        None
    };
    let mut rows = Vec::new();
    for seed in cfg.seeds() {
        let runs = run_seed(cfg, data, handcrafted.as_ref(), seed)?;
        rows.extend(runs.into_iter().map(|(variant, metrics)| ReportRow {
            dataset: cfg.dataset.id().to_owned(),
            variant,
            seed,
            metrics,
        }));
    }
    Ok(MetricsReport { config: cfg.clone(), rows })
}

fn run_seed(
    cfg: &ExperimentConfig,
    data: &LoadedDataset,
    handcrafted: Option<&RuleSet>,
    seed: u64,
) -> Result<Vec<(AblationVariant, Metrics)>, HarnessError> {
    let part = partition(cfg, &data.kb, seed)?;
    let positive = Sym::new(&cfg.induce.positive_class);
    let sim = cfg.fuzzy.similarity();
    let params = induce_params(cfg);
    let preds: Vec<String> = cfg.predicates();
    let preds: Vec<&str> = preds.iter().map(String::as_str).collect();
    let train_idx: Vec<usize> = (0..part.train.len()).collect();
    let labels: Vec<Sym> = part.test.interpretations().iter().map(|i| i.label).collect();
    let score = |p: Vec<Sym>| metrics(&p, &labels, positive);

    let mut sim_train: Option<KnowledgeBase> = None;
    let mut sim_tree: Option<LogicalDecisionTree> = None;
    let mut out = Vec::new();
    for &variant in &cfg.ablation.variants {
        log::info!("seed {seed}: {}", variant.label());
        let finetune_cfg = |v: Variant| FinetuneConfig { fuzzy: cfg.fuzzy, optim: cfg.optim, variant: v, positive_class: positive };
        let m = match variant {
            AblationVariant::Tilde => {
                let tree = induce_tree(&part.train, &train_idx, &LanguageBias::symbolic(&preds), &params)?;
                let p = part.test.interpretations().iter().map(|i| classify(&tree, i, &part.test)).collect::<Result<_, _>>()?;
                score(p)?
            }
            v if !v.is_handcrafted() => {
                if sim_tree.is_none() {
                    let mut kb = part.train.clone();
                    attach_grounding(&mut kb, &data.store, &sim)?;
                    sim_tree = Some(induce_tree(&kb, &train_idx, &LanguageBias::with_similar(&preds), &params)?);
                    sim_train = Some(kb);
                }
                let tree = sim_tree.as_ref().expect("induced above");
                let store = match v {
                    AblationVariant::TildeSimilar => data.store.clone(),
                    _ => {
                        let variant = if v == AblationVariant::TildeLtnAll { Variant::All } else { Variant::ConstantsOnly };
                        let rules = convert_tree_to_rules(tree);
                        let train = sim_train.as_ref().expect("grounded above");
                        finetune(&rules, Classifier::Tree(tree), train, &part.val, &data.store, &finetune_cfg(variant))?.store
                    }
                };
                score(apply_refined(Classifier::Tree(tree), &store, &part.test, &sim)?)?
            }
            v => {
                let rules = handcrafted.expect("loaded when a hand-crafted variant is requested");
                let store = match v {
                    AblationVariant::HandcraftedSimilar => data.store.clone(),
                    _ => {
                        let variant = if v == AblationVariant::HandcraftedLtnAll { Variant::All } else { Variant::ConstantsOnly };
                        finetune(rules, Classifier::Rules(rules), &part.train, &part.val, &data.store, &finetune_cfg(variant))?.store
                    }
                };
                score(apply_refined(Classifier::Rules(rules), &store, &part.test, &sim)?)?
            }
        };
        debug_assert_eq!(m.confusion.total(), part.test.len());
        out.push((variant, m));
    }
    Ok(out)
}
