#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use narrative_core::backend::MockScript;
use narrative_core::{load_taxonomy, Document, LabelPair, Taxonomy, OTHER};

pub const STEP1: &str = "classify it into one of the two categories";
pub const STEP2: &str = "most relevant narratives";

pub fn step3(main: &str) -> String {
    format!("its main narrative is: \"{main}\"")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn task_taxonomy() -> Taxonomy {
    load_taxonomy(fixture("taxonomy.json")).unwrap()
}

pub fn small_taxonomy() -> Taxonomy {
    load_taxonomy(fixture("taxonomy_small.json")).unwrap()
}

pub fn pair(main: &str, sub: &str) -> LabelPair {
    LabelPair::new(main, sub).unwrap()
}

// Task taxonomy names.
pub const BLAME: &str = "Blaming the war on others rather than the invader";
pub const DISCREDIT: &str = "Discrediting Ukraine";
pub const PRAISE: &str = "Praise of Russia";
pub const CRITICISM: &str = "Criticism of climate policies";
pub const DOWNPLAY: &str = "Downplaying climate change";
pub const PLOTS: &str = "Hidden plots by secret schemes of powerful groups";

/// One scripted walk through the three steps, with the hand-traced result.
pub struct Scenario {
    pub name: &'static str,
    pub step1: &'static str,
    pub step2: Option<&'static str>,
    pub step3: Vec<(&'static str, &'static str)>,
    pub expected_calls: usize,
    pub expected: Vec<(&'static str, &'static str)>,
}

impl Scenario {
    pub fn marker(&self) -> String {
        format!("<<{}>>", self.name)
    }

    pub fn document(&self) -> Document {
        Document::new(self.name, format!("Body of {} for testing.", self.marker()))
    }

    pub fn script(&self) -> MockScript {
        let m = self.marker();
        let mut script = MockScript::default().respond([m.clone(), STEP1.to_string()], self.step1);
        if let Some(s2) = self.step2 {
            script = script.respond([m.clone(), STEP2.to_string()], s2);
        }
        for (main, resp) in &self.step3 {
            script = script.respond([m.clone(), step3(main)], *resp);
        }
        script
    }

    pub fn expected_labels(&self) -> BTreeSet<LabelPair> {
        self.expected.iter().map(|(m, s)| pair(m, s)).collect()
    }
}

fn sc(
    name: &'static str,
    step1: &'static str,
    step2: Option<&'static str>,
    step3: Vec<(&'static str, &'static str)>,
    expected_calls: usize,
    expected: Vec<(&'static str, &'static str)>,
) -> Scenario {
    Scenario { name, step1, step2, step3, expected_calls, expected }
}

/// Twenty walks covering every branch of the three-step procedure against
/// the task taxonomy. Expected labels and call counts are traced by hand.
pub fn scenarios() -> Vec<Scenario> {
    let other = vec![(OTHER, OTHER)];
    vec![
        sc("s01", "Other", None, vec![], 1, other.clone()),
        sc("s02", "Sports", None, vec![], 1, other.clone()),
        sc("s03", "", None, vec![], 1, other.clone()),
        sc("s04", "Climate Change or Ukraine-Russia War", None, vec![], 1, other.clone()),
        sc("s05", "Climate Change", Some("Other"), vec![], 2, other.clone()),
        sc("s06", "Climate Change", Some("Bogus narrative"), vec![], 2, other.clone()),
        sc("s07", "Ukraine-Russia War", Some(CRITICISM), vec![], 2, other.clone()),
        sc("s08", "Climate Change", Some("Other#Nonsense"), vec![], 2, other.clone()),
        sc(
            "s09",
            "Climate Change",
            Some(CRITICISM),
            vec![(CRITICISM, "Climate policies are ineffective#Climate policies are only for profit")],
            3,
            vec![(CRITICISM, "Climate policies are ineffective"), (CRITICISM, "Climate policies are only for profit")],
        ),
        sc(
            "s10",
            "Climate Change",
            Some("Criticism of climate policies#Downplaying climate change"),
            vec![(CRITICISM, "Other"), (DOWNPLAY, "CO2 is beneficial")],
            4,
            vec![(CRITICISM, OTHER), (DOWNPLAY, "CO2 is beneficial")],
        ),
        sc(
            "s11",
            "Ukraine-Russia War",
            Some(BLAME),
            vec![(BLAME, "Ukraine is the aggressor#Bogus")],
            3,
            vec![(BLAME, "Ukraine is the aggressor"), (BLAME, OTHER)],
        ),
        sc(
            "s12",
            "Ukraine-Russia War",
            Some("Blaming the war on others rather than the invader#Discrediting Ukraine#Praise of Russia"),
            vec![
                (BLAME, "The West are the aggressors"),
                (DISCREDIT, "Ukraine is a puppet of the West"),
                (PRAISE, "Other"),
            ],
            5,
            vec![(BLAME, "The West are the aggressors"), (DISCREDIT, "Ukraine is a puppet of the West"), (PRAISE, OTHER)],
        ),
        sc(
            "s13",
            "Ukraine-Russia War",
            Some("Discrediting Ukraine#Discrediting Ukraine"),
            vec![(DISCREDIT, "Discrediting Ukrainian military")],
            3,
            vec![(DISCREDIT, "Discrediting Ukrainian military")],
        ),
        sc(
            "s14",
            "The category is: Climate Change.",
            Some(" downplaying climate change. "),
            vec![(DOWNPLAY, "climate cycles are natural")],
            3,
            vec![(DOWNPLAY, "Climate cycles are natural")],
        ),
        sc(
            "s15",
            "Climate Change",
            Some("Hidden plots by secret schemes of powerful groups#Other"),
            vec![(PLOTS, "Blaming global elites#Other")],
            3,
            vec![(PLOTS, "Blaming global elites")],
        ),
        sc(
            "s16",
            "Climate Change",
            Some(CRITICISM),
            vec![(CRITICISM, "Ukraine is the aggressor")],
            3,
            vec![(CRITICISM, OTHER)],
        ),
        sc(
            "s17",
            "Climate Change",
            Some("Criticism of climate policies#Downplaying climate change#Hidden plots by secret schemes of powerful groups"),
            vec![(CRITICISM, "Other"), (DOWNPLAY, "Other"), (PLOTS, "Other")],
            5,
            vec![(CRITICISM, OTHER), (DOWNPLAY, OTHER), (PLOTS, OTHER)],
        ),
        sc(
            "s18",
            "Ukraine-Russia War",
            Some("Praise of Russia#Bogus"),
            vec![(PRAISE, "Praise of Russian military might#Russia is a guarantor of peace and prosperity")],
            3,
            vec![(PRAISE, "Praise of Russian military might"), (PRAISE, "Russia is a guarantor of peace and prosperity")],
        ),
        sc("s19", "Climate Change", Some(CRITICISM), vec![(CRITICISM, "")], 3, vec![(CRITICISM, OTHER)]),
        sc(
            "s20",
            "climate change",
            Some("Downplaying climate change#Criticism of climate policies"),
            vec![
                (DOWNPLAY, "Human activities do not impact climate change#Human activities do not impact climate change"),
                (CRITICISM, "Climate policies have negative impact on the economy"),
            ],
            4,
            vec![
                (DOWNPLAY, "Human activities do not impact climate change"),
                (CRITICISM, "Climate policies have negative impact on the economy"),
            ],
        ),
    ]
}

/// Deterministic labelled dataset over the task taxonomy: document `i`
/// carries one sub-narrative chosen by index.
pub fn labelled_dataset(taxonomy: &Taxonomy, n: usize) -> Vec<Document> {
    let subs: Vec<_> = taxonomy.subnarratives().collect();
    (0..n)
        .map(|i| {
            let s = subs[(i * 7) % subs.len()];
            Document::new(format!("doc{i:03}"), format!("News item <<doc{i:03}>> reporting on current events."))
                .with_gold([pair(s.main, &s.sub.name)])
        })
        .collect()
}

/// A scripted "model" that answers correctly for `known` documents and
/// guesses the first sub-narrative of the right main narrative elsewhere.
pub fn model_script(taxonomy: &Taxonomy, docs: &[Document], known: &BTreeSet<String>) -> MockScript {
    let mut script = MockScript::default();
    for doc in docs {
        let marker = format!("<<{}>>", doc.id);
        let gold = doc.gold_set().into_iter().next().unwrap();
        let sref = taxonomy
            .subnarratives()
            .find(|s| s.main == gold.main() && s.sub.name == gold.sub())
            .unwrap();
        let main = taxonomy.main(sref.category, sref.main).unwrap();
        let answer = if known.contains(&doc.id) {
            gold.sub().to_string()
        } else {
            main.subnarratives[0].name.clone()
        };
        script = script
            .respond([marker.clone(), STEP1.to_string()], sref.category)
            .respond([marker.clone(), STEP2.to_string()], sref.main)
            .respond([marker, step3(sref.main)], answer);
    }
    script
}

/// Per-definition scoring reference: precision and recall per document,
/// label-by-label counting for macro F1, two-pass population std.
pub struct NaiveScores {
    pub fine: f64,
    pub fine_std: f64,
    pub coarse_samples: f64,
    pub coarse_macro: f64,
    pub coarse_std: f64,
}

fn naive_f1(pred: &[String], gold: &[String], both_empty: f64) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return both_empty;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let tp = pred.iter().filter(|p| gold.contains(p)).count() as f64;
    let precision = tp / pred.len() as f64;
    let recall = tp / gold.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v.dedup();
    v
}

fn render_fine(p: &LabelPair) -> String {
    if p.main() == OTHER {
        OTHER.to_string()
    } else {
        format!("{}: {}", p.main(), p.sub())
    }
}

fn naive_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn naive_std(xs: &[f64]) -> f64 {
    let m = naive_mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m).powi(2);
    }
    (s / xs.len() as f64).sqrt()
}

pub fn naive_scores(
    pred: &BTreeMap<String, BTreeSet<LabelPair>>,
    gold: &BTreeMap<String, BTreeSet<LabelPair>>,
    both_empty: f64,
) -> NaiveScores {
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    let mut coarse_docs = Vec::new();
    for (id, g) in gold {
        let empty = BTreeSet::new();
        let p = pred.get(id).unwrap_or(&empty);
        let pf = dedup(p.iter().map(render_fine).collect());
        let gf = dedup(g.iter().map(render_fine).collect());
        let pc = dedup(p.iter().map(|x| x.main().to_string()).collect());
        let gc = dedup(g.iter().map(|x| x.main().to_string()).collect());
        fine.push(naive_f1(&pf, &gf, both_empty));
        coarse.push(naive_f1(&pc, &gc, both_empty));
        coarse_docs.push((pc, gc));
    }
    let mut labels: Vec<String> = coarse_docs
        .iter()
        .flat_map(|(p, g)| p.iter().chain(g.iter()).cloned())
        .collect();
    labels = dedup(labels);
    let coarse_macro = if labels.is_empty() {
        both_empty
    } else {
        let mut total = 0.0;
        for label in &labels {
            let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
            for (p, g) in &coarse_docs {
                match (p.contains(label), g.contains(label)) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fneg += 1.0,
                    _ => {}
                }
            }
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = if tp + fneg == 0.0 { 0.0 } else { tp / (tp + fneg) };
            total += if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
        }
        total / labels.len() as f64
    };
    NaiveScores {
        fine: naive_mean(&fine),
        fine_std: naive_std(&fine),
        coarse_samples: naive_mean(&coarse),
        coarse_macro,
        coarse_std: naive_std(&coarse),
    }
}

/// Scalar triple-loop product used as the reference for dense algebra.
pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..m {
                acc += a[i][t] * b[t][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn naive_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| {
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            acc
        })
        .collect()
}

pub fn to_rows(m: &narrative_core::lora::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `n` articles of `words` words each, in the generation prompt's layout.
pub fn compliant_articles(n: usize, words: usize) -> String {
    (1..=n)
        .map(|i| {
            let body = (0..words).map(|w| format!("w{i}x{w}")).collect::<Vec<_>>().join(" ");
            format!("Article {i}:\n{body}")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Artefacts of one classify → ensemble → score run.
pub struct EndToEnd {
    pub model_tsv: Vec<String>,
    pub ensemble_tsv: String,
    pub report_json: String,
    pub report: narrative_core::EvalReport,
    pub docs: Vec<Document>,
}

impl EndToEnd {
    pub fn bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in &self.model_tsv {
            out.extend_from_slice(t.as_bytes());
        }
        out.extend_from_slice(self.ensemble_tsv.as_bytes());
        out.extend_from_slice(self.report_json.as_bytes());
        out
    }
}

/// Three scripted models, each expert on one partition of a 30-document
/// set, combined by union and scored against gold.
pub fn end_to_end(parallelism: usize) -> EndToEnd {
    use narrative_core::{aggregate, classify_dataset, partition_dataset, score, MockBackend};
    use narrative_core::{MetricOptions, PipelineConfig, PredictionFile, Strategy};

    let taxonomy = task_taxonomy();
    let docs = labelled_dataset(&taxonomy, 30);
    let parts = partition_dataset(&docs, 3, 17).unwrap();
    let mut model_tsv = Vec::new();
    let mut model_preds = Vec::new();
    for part in &parts {
        let known: BTreeSet<String> = part.iter().map(|d| d.id.clone()).collect();
        let backend = MockBackend::new(model_script(&taxonomy, &docs, &known));
        let run = classify_dataset(&docs, &taxonomy, &backend, &PipelineConfig::default(), parallelism);
        assert!(run.is_complete());
        let file = PredictionFile::from_predictions(run.results.iter().map(|r| (r.document_id.as_str(), &r.labels)));
        let tsv = file.to_tsv();
        model_preds.push(PredictionFile::parse(&tsv).unwrap().fine_map());
        model_tsv.push(tsv);
    }
    let combined = aggregate(&model_preds, Strategy::Union).unwrap();
    let ensemble_tsv = PredictionFile::from_predictions(combined.iter().map(|(k, v)| (k.as_str(), v))).to_tsv();
    let gold: BTreeMap<String, BTreeSet<LabelPair>> = docs.iter().map(|d| (d.id.clone(), d.gold_set())).collect();
    let report = score(&combined, &gold, &MetricOptions::default()).unwrap();
    let report_json = serde_json::to_string_pretty(&report).unwrap();
    EndToEnd { model_tsv, ensemble_tsv, report_json, report, docs }
}

/// Closed form for [`end_to_end`]: the union holds the gold pair plus the
/// first child of its main, so fine F1 is 1 when those coincide and 2/3
/// otherwise; main narratives always match.
pub fn end_to_end_expected_fine(taxonomy: &Taxonomy, docs: &[Document]) -> f64 {
    let mut total = 0.0;
    for d in docs {
        let gold = d.gold_set().into_iter().next().unwrap();
        let first = taxonomy
            .categories()
            .iter()
            .flat_map(|c| c.narratives.iter())
            .find(|m| m.name == gold.main())
            .map(|m| m.subnarratives[0].name.clone())
            .unwrap();
        total += if first == gold.sub() { 1.0 } else { 2.0 / 3.0 };
    }
    total / docs.len() as f64
}
