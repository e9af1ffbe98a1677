//! Synthetic competition fixtures: judge and venture CSVs, labels, cohort
//! scores and a token-embedding file whose vectors cluster by topic.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const TOKENIZER: &str = "ws-fixture";
pub const MODEL: &str = "fixture-embed";
pub const DIM: usize = 12;
const TOPICS: usize = 8;
const WORDS_PER_TOPIC: usize = 30;

#[derive(Debug, Clone)]
pub struct Spec {
    pub judges: usize,
    pub ventures: usize,
    pub tracks: Vec<String>,
    pub panel_size: usize,
    pub load_max: usize,
    pub labels: usize,
    pub embeddings: bool,
    pub cohort: bool,
    pub seed: u64,
}

impl Spec {
    pub fn small() -> Self {
        Spec {
            judges: 24,
            ventures: 10,
            tracks: vec!["Open".into(), "Social Impact".into()],
            panel_size: 3,
            load_max: 3,
            labels: 60,
            embeddings: true,
            cohort: true,
            seed: 7,
        }
    }

    /// The competition scale: 231 judges, 101 ventures, three tracks.
    pub fn competition() -> Self {
        Spec {
            judges: 231,
            ventures: 101,
            tracks: vec!["Health".into(), "Open".into(), "Social Impact".into()],
            panel_size: 12,
            load_max: 7,
            labels: 400,
            embeddings: true,
            cohort: true,
            seed: 11,
        }
    }
}

const STEMS: [&str; TOPICS] = ["solar", "clinic", "fintech", "agri", "robot", "edu", "water", "media"];

fn word(topic: usize, i: usize) -> String {
    format!("{}{}", STEMS[topic], i)
}

fn word_vector(w: &str, topic: usize) -> Vec<f64> {
    let digest = Sha256::digest(w.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(digest.into());
    (0..DIM)
        .map(|d| {
            let centre = if d % TOPICS == topic { 1.0 } else { 0.0 };
            centre + rng.random_range(-0.35..0.35)
        })
        .collect()
}

fn text(rng: &mut ChaCha8Rng, topics: &[usize], words: usize) -> (String, Vec<usize>) {
    let mut out = Vec::with_capacity(words);
    let mut used = Vec::with_capacity(words);
    for _ in 0..words {
        let t = if rng.random_bool(0.85) { *topics.choose(rng).unwrap() } else { rng.random_range(0..TOPICS) };
        out.push(word(t, rng.random_range(0..WORDS_PER_TOPIC)));
        used.push(t);
    }
    (out.join(" "), used)
}

pub struct Fixture {
    pub dir: PathBuf,
    pub config: PathBuf,
}

/// Write the fixture files and a run config into `dir`. `learners` is the
/// TOML for the `[[learners]]` tables.
pub fn write(dir: &Path, spec: &Spec, learners: &str) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nt = spec.tracks.len();
    let mut embed = String::new();
    let mut emit = |doc_id: &str, txt: &str| {
        let tokens: Vec<&str> = txt.split_whitespace().collect();
        let vectors: Vec<Vec<f64>> = tokens
            .iter()
            .map(|w| {
                let topic = STEMS
                    .iter()
                    .position(|s| w.starts_with(s))
                    .unwrap_or(0);
                word_vector(w, topic)
            })
            .collect();
        let rec = serde_json::json!({
            "doc_id": doc_id,
            "model_id": MODEL,
            "tokenizer_id": TOKENIZER,
            "tokens": tokens,
            "vectors": vectors,
        });
        embed.push_str(&rec.to_string());
        embed.push('\n');
    };

    let mut ventures = String::from("venture_id,track,summary,team_size\n");
    let mut venture_topic = Vec::new();
    for v in 0..spec.ventures {
        let id = format!("V{:03}", v + 1);
        let topic = rng.random_range(0..TOPICS);
        let track = &spec.tracks[v % nt];
        let (summary, _) = text(&mut rng, &[topic], 45);
        writeln!(ventures, "{id},{track},{summary},{}", rng.random_range(1..9)).unwrap();
        emit(&format!("venture:{id}"), &summary);
        venture_topic.push(topic);
    }

    let mut judges = String::from("judge_id,tracks,bio,expertise,conflicts\n");
    let mut judge_topics = Vec::new();
    for j in 0..spec.judges {
        let id = format!("J{:03}", j + 1);
        let mut tracks = vec![j % nt];
        if nt > 1 && rng.random_bool(0.3) {
            tracks.push((j + 1) % nt);
        }
        tracks.sort();
        let topics = vec![rng.random_range(0..TOPICS), rng.random_range(0..TOPICS)];
        let (bio, _) = text(&mut rng, &topics, 40);
        let (expertise, _) = text(&mut rng, &topics, 20);
        let conflict = if rng.random_bool(0.1) {
            format!("V{:03}", rng.random_range(1..=spec.ventures))
        } else {
            String::new()
        };
        let track_names: Vec<&str> = tracks.iter().map(|&t| spec.tracks[t].as_str()).collect();
        writeln!(judges, "{id},{},{bio},{expertise},{conflict}", track_names.join(";")).unwrap();
        emit(&format!("judge:{id}"), &format!("{bio} {expertise}"));
        judge_topics.push(topics);
    }

    let mut labels = String::from("judge_id,venture_id,quality\n");
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < spec.labels.min(spec.judges * spec.ventures) {
        let j = rng.random_range(0..spec.judges);
        let v = rng.random_range(0..spec.ventures);
        if !seen.insert((j, v)) {
            continue;
        }
        let overlap = judge_topics[j].iter().filter(|&&t| t == venture_topic[v]).count() as f64 / 2.0;
        let q = (1.0 + 4.0 * overlap + rng.random_range(-0.6..0.6)).round().clamp(1.0, 5.0) as u8;
        writeln!(labels, "J{:03},V{:03},{q}", j + 1, v + 1).unwrap();
    }

    let mut cohort = String::from("judge_id,venture_id,source,score\n");
    for v in 0..spec.ventures.min(40) {
        for k in 0..3 {
            let j = (v * 3 + k) % spec.judges;
            writeln!(cohort, "J{:03},V{:03},algorithmic,{}", j + 1, v + 1, rng.random_range(2..=5)).unwrap();
        }
        for k in 3..6 {
            let j = (v * 3 + k) % spec.judges;
            writeln!(cohort, "J{:03},V{:03},manual,{}", j + 1, v + 1, rng.random_range(1..=5)).unwrap();
        }
    }

    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("judges.csv"), judges).unwrap();
    fs::write(dir.join("ventures.csv"), ventures).unwrap();
    fs::write(dir.join("labels.csv"), labels).unwrap();
    if spec.embeddings {
        fs::write(dir.join("embeddings.jsonl"), embed).unwrap();
    }
    if spec.cohort {
        fs::write(dir.join("cohort.csv"), cohort).unwrap();
    }
    let tracks: Vec<String> = spec.tracks.iter().map(|t| format!("\"{t}\"")).collect();
    let mut config = format!(
        r#"tracks = [{tracks}]

[paths]
judges = "judges.csv"
ventures = "ventures.csv"
labels = "labels.csv"
{embeddings}{cohort}
[judge_schema]
role = "judge"
id_column = "judge_id"
selected_fields = ["bio", "expertise"]
track_column = "tracks"
coi_column = "conflicts"

[venture_schema]
role = "venture"
id_column = "venture_id"
selected_fields = ["summary"]
track_column = "track"

[constraints]
panel_size = {panel}
judge_load_max = {load}

[evaluation]
resamples = 2000
seed = 3
"#,
        tracks = tracks.join(", "),
        embeddings = if spec.embeddings { "embeddings = \"embeddings.jsonl\"\n" } else { "" },
        cohort = if spec.cohort { "cohort_scores = \"cohort.csv\"\n" } else { "" },
        panel = spec.panel_size,
        load = spec.load_max,
    );
    config.push('\n');
    config.push_str(learners);
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Fixture { dir: dir.to_path_buf(), config: path }
}

pub const LEXICAL_LEARNERS: &str = r#"
[[learners]]
kind = "tfidf"
id = "tfidf_standard"
variant = "standard"

[[learners]]
kind = "tfidf"
id = "tfidf_augmented"
variant = "augmented"
"#;

pub const FULL_LEARNERS: &str = r#"
[[learners]]
kind = "tfidf"
id = "tfidf_standard"
variant = "standard"

[[learners]]
kind = "tfidf"
id = "tfidf_augmented"
variant = "augmented"

[[learners]]
kind = "embedding"
id = "embed_doc"
pooling = "document"

[[learners]]
kind = "hybrid"
id = "hybrid_token"
pooling = "token"
idf = "smoothed"
"#;
