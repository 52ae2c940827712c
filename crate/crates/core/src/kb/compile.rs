//! Compilation of raw datasets into fact-based knowledge bases.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use rust_stemmers::{Algorithm, Stemmer as SnowballStemmer};
use serde::{Deserialize, Serialize};

use crate::symbol::Sym;

use super::{GroundAtom, KbError, KnowledgeBase};

/// Token membership test used to drop out-of-vocabulary words.
pub trait Vocabulary {
    fn contains_token(&self, token: &str) -> bool;
}

impl Vocabulary for HashSet<String> {
    fn contains_token(&self, token: &str) -> bool {
        self.contains(token)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    #[default]
    Porter,
    None,
}

#[derive(Clone, Debug)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
    pub label: String,
}

pub struct TextConfig<'a> {
    pub stop_words: HashSet<String>,
    pub stemmer: Stemmer,
    pub vocabulary: &'a dyn Vocabulary,
    /// Predicate emitted per surviving token.
    pub predicate: String,
}

impl<'a> TextConfig<'a> {
    pub fn new(vocabulary: &'a dyn Vocabulary) -> Self {
        TextConfig {
            stop_words: default_stop_words(),
            stemmer: Stemmer::Porter,
            vocabulary,
            predicate: "contains_word".into(),
        }
    }
}

const STOP_WORDS: &str = "a about above after again against all am an and any are as at be because been \
before being below between both but by can could did do does doing down during each few for from \
further had has have having he her here hers herself him himself his how i if in into is it its \
itself just me more most my myself no nor not now of off on once only or other our ours ourselves \
out over own same she should so some such than that the their theirs them themselves then there \
these they this those through to too under until up very was we were what when where which while \
who whom why will with would you your yours yourself yourselves s t d ll m o re ve y";

/// A standard English stop-word list (lowercase).
pub fn default_stop_words() -> HashSet<String> {
    STOP_WORDS.split_whitespace().map(str::to_owned).collect()
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Every lowercased token and stem the records could emit, before the
/// vocabulary filter. Lets callers load only the needed rows of a large
/// embedding file.
pub fn candidate_tokens(records: &[TextRecord], stemmer: Stemmer) -> HashSet<String> {
    let stemmer = match stemmer {
        Stemmer::Porter => Some(SnowballStemmer::create(Algorithm::English)),
        Stemmer::None => None,
    };
    let mut out = HashSet::new();
    for rec in records {
        for token in tokenize(&rec.text) {
            if let Some(s) = &stemmer {
                out.insert(s.stem(&token).into_owned());
            }
            out.insert(token);
        }
    }
    out
}

/// Emits `contains_word(id, token)` and `target(id, label)` facts.
///
/// Tokens are lowercased, stop words dropped, then stemmed. The stem is kept
/// if the vocabulary knows it, else the unstemmed token if the vocabulary
/// knows that, else the token is discarded.
pub fn compile_text_dataset(records: &[TextRecord], config: &TextConfig<'_>) -> Result<KnowledgeBase, KbError> {
    let stemmer = match config.stemmer {
        Stemmer::Porter => Some(SnowballStemmer::create(Algorithm::English)),
        Stemmer::None => None,
    };
    let predicate = Sym::new(&config.predicate);
    let mut kb = KnowledgeBase::new();
    kb.declare(predicate, 2);
    let mut any_token = false;
    for (index, rec) in records.iter().enumerate() {
        if rec.id.trim().is_empty() {
            return Err(KbError::EmptyId { index });
        }
        let id = Sym::new(&rec.id);
        kb.add_example(id, Sym::new(&rec.label))?;
        for token in tokenize(&rec.text) {
            if config.stop_words.contains(&token) {
                continue;
            }
            let stem = stemmer.as_ref().map(|s| s.stem(&token).into_owned());
            let kept = match stem {
                Some(s) if config.vocabulary.contains_token(&s) => s,
                _ if config.vocabulary.contains_token(&token) => token,
                _ => continue,
            };
            any_token = true;
            kb.add_fact(GroundAtom { predicate, args: vec![id, Sym::new(&kept)] })?;
        }
    }
    if !any_token {
        return Err(KbError::EmptyVocabulary);
    }
    Ok(kb)
}

/// Reads `id,text,label` records from a delimited file with a header row.
/// When `label_threshold` is set, numeric labels are binarized to "1"/"0"
/// by `score > threshold`.
pub fn read_text_records<R: Read>(reader: R, delimiter: u8, label_threshold: Option<f64>) -> Result<Vec<TextRecord>, KbError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| KbError::Data {
            context: "text dataset".into(),
            message: format!("missing column `{name}`"),
        })
    };
    let (ci, ct, cl) = (col("id")?, col("text")?, col("label")?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_owned();
        let mut label = field(cl);
        if let Some(th) = label_threshold {
            let score: f64 = label.trim().parse().map_err(|_| KbError::Data {
                context: format!("text dataset row {}", row + 2),
                message: format!("label `{label}` is not numeric"),
            })?;
            label = if score > th { "1".into() } else { "0".into() };
        }
        out.push(TextRecord { id: field(ci), text: field(ct), label });
    }
    Ok(out)
}

/// Reads a two-column `id,label` file with a header row.
pub fn read_label_file<R: Read>(reader: R, delimiter: u8) -> Result<Vec<(String, String)>, KbError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(KbError::Data { context: "label file".into(), message: "expected two columns".into() });
        }
        out.push((rec[0].trim().to_owned(), rec[1].trim().to_owned()));
    }
    Ok(out)
}

/// A feature × sample matrix; the header row lists sample ids.
#[derive(Clone, Debug, PartialEq)]
pub struct OmicsMatrix {
    pub features: Vec<String>,
    pub samples: Vec<String>,
    /// `values[f][s]`
    pub values: Vec<Vec<f64>>,
}

impl OmicsMatrix {
    pub fn from_reader<R: Read>(reader: R, delimiter: u8) -> Result<Self, KbError> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).from_reader(reader);
        let samples: Vec<String> = rdr.headers()?.iter().skip(1).map(|s| s.trim().to_owned()).collect();
        let mut features = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != samples.len() + 1 {
                return Err(KbError::Data {
                    context: format!("matrix row {}", row + 2),
                    message: format!("expected {} columns, found {}", samples.len() + 1, rec.len()),
                });
            }
            features.push(rec[0].trim().to_owned());
            let row_vals = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| KbError::Data {
                        context: format!("matrix row {}", row + 2),
                        message: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row_vals);
        }
        Ok(OmicsMatrix { features, samples, values })
    }

    fn column_of(&self) -> HashMap<&str, usize> {
        self.samples.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionThreshold {
    /// `expression(s, g)` iff the value exceeds the gene's median.
    PerGeneMedian,
    /// `expression(s, g)` iff the value exceeds this constant.
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct OmicsConfig {
    pub threshold: ExpressionThreshold,
    pub feature_cap: usize,
}

impl Default for OmicsConfig {
    fn default() -> Self {
        OmicsConfig { threshold: ExpressionThreshold::PerGeneMedian, feature_cap: 1000 }
    }
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Emits `expression/2`, `mutation/2`, `cna/2` and `target/2` facts.
///
/// Genes are ranked by the variance of their expression values (ties by
/// name) and truncated to `feature_cap`; only retained genes appear in any
/// predicate. Interpretations follow the sample order of `labels`.
pub fn compile_omics_dataset(
    expr: &OmicsMatrix,
    mutation: &OmicsMatrix,
    cna: &OmicsMatrix,
    labels: &[(String, String)],
    config: &OmicsConfig,
) -> Result<KnowledgeBase, KbError> {
    let label_ids: HashSet<&str> = labels.iter().map(|(s, _)| s.as_str()).collect();
    for (name, m) in [("expression", expr), ("mutation", mutation), ("cna", cna)] {
        let ids: HashSet<&str> = m.samples.iter().map(String::as_str).collect();
        if ids != label_ids || ids.len() != m.samples.len() {
            return Err(KbError::AxisMismatch(format!(
                "{name} matrix has {} samples, labels cover {}; sample ids must match exactly",
                m.samples.len(),
                labels.len()
            )));
        }
    }

    let mut ranked: Vec<(usize, f64)> = expr.values.iter().enumerate().map(|(g, row)| (g, variance(row))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| expr.features[a.0].cmp(&expr.features[b.0])));
    if config.feature_cap > ranked.len() {
        log::warn!("feature cap {} exceeds the {} available genes; keeping all", config.feature_cap, ranked.len());
    }
    ranked.truncate(config.feature_cap);
    let mut kept: Vec<usize> = ranked.into_iter().map(|(g, _)| g).collect();
    kept.sort_unstable();
    let kept_names: HashSet<&str> = kept.iter().map(|&g| expr.features[g].as_str()).collect();

    let (p_expr, p_mut, p_cna) = (Sym::new("expression"), Sym::new("mutation"), Sym::new("cna"));
    let mut kb = KnowledgeBase::new();
    for p in [p_expr, p_mut, p_cna] {
        kb.declare(p, 2);
    }
    for (sample, label) in labels {
        kb.add_example(Sym::new(sample), Sym::new(label))?;
    }

    let expr_col = expr.column_of();
    for &g in &kept {
        let row = &expr.values[g];
        let cut = match config.threshold {
            ExpressionThreshold::PerGeneMedian => median(row),
            ExpressionThreshold::Fixed(t) => t,
        };
        let gene = Sym::new(&expr.features[g]);
        for (sample, _) in labels {
            if row[expr_col[sample.as_str()]] > cut {
                kb.add_fact(GroundAtom { predicate: p_expr, args: vec![Sym::new(sample), gene] })?;
            }
        }
    }
    for (pred, m) in [(p_mut, mutation), (p_cna, cna)] {
        let col = m.column_of();
        for (fi, feature) in m.features.iter().enumerate() {
            if !kept_names.contains(feature.as_str()) {
                continue;
            }
            let gene = Sym::new(feature);
            for (sample, _) in labels {
                if m.values[fi][col[sample.as_str()]] != 0.0 {
                    kb.add_fact(GroundAtom { predicate: pred, args: vec![Sym::new(sample), gene] })?;
                }
            }
        }
    }
    Ok(kb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn rec(id: &str, text: &str, label: &str) -> TextRecord {
        TextRecord { id: id.into(), text: text.into(), label: label.into() }
    }

    #[test]
    fn text_trace() {
        let v = vocab(&["free", "call"]);
        let kb = compile_text_dataset(&[rec("ex1", "Free FREE money!!", "spam")], &TextConfig::new(&v)).unwrap();
        let facts: Vec<String> = kb.interpretations()[0].facts().iter().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["contains_word(ex1, free)"]);
        assert_eq!(kb.interpretations()[0].label, Sym::new("spam"));
    }

    #[test]
    fn stop_word_only_record_is_kept_empty() {
        let v = vocab(&["free"]);
        let kb = compile_text_dataset(&[rec("a", "the and of", "ham"), rec("b", "free", "spam")], &TextConfig::new(&v)).unwrap();
        assert!(kb.interpretations()[0].is_empty());
        assert_eq!(kb.interpretations()[0].label, Sym::new("ham"));
    }

    #[test]
    fn identical_text_distinct_ids() {
        let v = vocab(&["free"]);
        let kb = compile_text_dataset(&[rec("a", "free", "spam"), rec("b", "free", "ham")], &TextConfig::new(&v)).unwrap();
        assert_eq!(kb.len(), 2);
        assert_ne!(kb.interpretations()[0].label, kb.interpretations()[1].label);
    }

    #[test]
    fn stems_when_vocabulary_has_the_stem() {
        let v = vocab(&["win", "prizes"]);
        let kb = compile_text_dataset(&[rec("a", "winning prizes", "spam")], &TextConfig::new(&v)).unwrap();
        let words: Vec<&str> = kb.interpretations()[0].entities_of(Sym::new("contains_word"), 1).map(|s| s.as_str()).collect();
        // "winning" stems to "win"; "prizes" stems to "prize" (absent) and falls back.
        assert_eq!(words, vec!["win", "prizes"]);
    }

    #[test]
    fn text_errors() {
        let v = vocab(&["free"]);
        assert!(matches!(compile_text_dataset(&[rec(" ", "free", "x")], &TextConfig::new(&v)), Err(KbError::EmptyId { index: 0 })));
        assert!(matches!(compile_text_dataset(&[rec("a", "money", "x")], &TextConfig::new(&v)), Err(KbError::EmptyVocabulary)));
    }

    #[test]
    fn reads_csv_records_with_threshold() {
        let data = "id,text,label\n1,\"hello, world\",0.7\n2,bye,0.2\n";
        let recs = read_text_records(data.as_bytes(), b',', Some(0.5)).unwrap();
        assert_eq!(recs[0].text, "hello, world");
        assert_eq!((recs[0].label.as_str(), recs[1].label.as_str()), ("1", "0"));
    }

    fn matrix(features: &[&str], samples: &[&str], values: Vec<Vec<f64>>) -> OmicsMatrix {
        OmicsMatrix {
            features: features.iter().map(|s| s.to_string()).collect(),
            samples: samples.iter().map(|s| s.to_string()).collect(),
            values,
        }
    }

    fn labels(samples: &[&str]) -> Vec<(String, String)> {
        samples.iter().map(|s| (s.to_string(), "responder".to_string())).collect()
    }

    #[test]
    fn fixed_threshold_binarization() {
        let expr = matrix(&["g1", "g2"], &["s1"], vec![vec![2.0], vec![0.5]]);
        let zeros = matrix(&["g1", "g2"], &["s1"], vec![vec![0.0], vec![0.0]]);
        let cfg = OmicsConfig { threshold: ExpressionThreshold::Fixed(1.0), feature_cap: 1000 };
        let kb = compile_omics_dataset(&expr, &zeros, &zeros, &labels(&["s1"]), &cfg).unwrap();
        let facts: Vec<String> = kb.interpretations()[0].facts().iter().map(|f| f.to_string()).collect();
        assert_eq!(facts, vec!["expression(s1, g1)"]);
    }

    #[test]
    fn feature_cap_keeps_highest_variance_gene() {
        // Variances by hand over 4 samples:
        // g1 = [1,1,1,1] -> 0; g2 = [0,2,0,2] -> 1; g3 = [0,4,0,4] -> 4.
        let s = ["s1", "s2", "s3", "s4"];
        let expr = matrix(&["g1", "g2", "g3"], &s, vec![vec![1., 1., 1., 1.], vec![0., 2., 0., 2.], vec![0., 4., 0., 4.]]);
        let ones = matrix(&["g1", "g2", "g3"], &s, vec![vec![1.; 4], vec![1.; 4], vec![1.; 4]]);
        let cfg = OmicsConfig { threshold: ExpressionThreshold::PerGeneMedian, feature_cap: 1 };
        let kb = compile_omics_dataset(&expr, &ones, &ones, &labels(&s), &cfg).unwrap();
        let genes: HashSet<Sym> = kb.entities().into_iter().collect();
        assert_eq!(genes, [Sym::new("g3")].into_iter().collect());
        for p in ["expression", "mutation", "cna"] {
            assert!(kb.interpretations().iter().any(|i| i.facts_of(Sym::new(p)).next().is_some()), "{p}");
        }
    }

    #[test]
    fn all_zero_mutations_emit_nothing() {
        let s = ["s1", "s2"];
        let expr = matrix(&["g1"], &s, vec![vec![0., 1.]]);
        let zeros = matrix(&["g1"], &s, vec![vec![0., 0.]]);
        let kb = compile_omics_dataset(&expr, &zeros, &zeros, &labels(&s), &OmicsConfig::default()).unwrap();
        assert!(kb.interpretations().iter().all(|i| i.facts_of(Sym::new("mutation")).next().is_none()));
    }

    #[test]
    fn axis_mismatch() {
        let expr = matrix(&["g1"], &["s1", "s2"], vec![vec![0., 1.]]);
        let other = matrix(&["g1"], &["s1", "s3"], vec![vec![0., 1.]]);
        let err = compile_omics_dataset(&expr, &other, &expr, &labels(&["s1", "s2"]), &OmicsConfig::default());
        assert!(matches!(err, Err(KbError::AxisMismatch(_))));
    }

    #[test]
    fn matrix_reader() {
        let m = OmicsMatrix::from_reader("gene,s1,s2\ng1,1.5,2\n".as_bytes(), b',').unwrap();
        assert_eq!(m.samples, vec!["s1", "s2"]);
        assert_eq!(m.values, vec![vec![1.5, 2.0]]);
    }
}
