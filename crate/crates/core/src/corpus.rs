//! Ingestion of judge profiles and venture applications, text sanitization
//! and document composition.
//!
//! Source tables are plain CSV. A [`SchemaMap`] names the id column, the
//! metadata columns (tracks, conflicts) and the ordered list of free-text
//! columns that make up the document; every other column is dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Judges whose composed text is shorter than this get supplementary text.
pub const MIN_JUDGE_WORDS: usize = 50;

/// Tokenizer id for whitespace tokens of sanitized text.
pub const WHITESPACE_TOKENIZER: &str = "whitespace";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Judge,
    Venture,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Judge => "judge",
            Role::Venture => "venture",
        }
    }
}

/// Document id used for embeddings and reports: `judge:<id>` or `venture:<id>`.
pub fn doc_id(role: Role, id: &str) -> String {
    format!("{}:{}", role.as_str(), id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaMap {
    pub role: Role,
    pub id_column: String,
    /// Text columns, joined in this order.
    pub selected_fields: Vec<String>,
    #[serde(default = "default_join_separator")]
    pub join_separator: String,
    /// Venture: the track column. Judge: preferred tracks, split on `list_separator`.
    #[serde(default)]
    pub track_column: Option<String>,
    /// Judge only: venture ids the judge is conflicted with.
    #[serde(default)]
    pub coi_column: Option<String>,
    #[serde(default = "default_list_separator")]
    pub list_separator: String,
}

fn default_join_separator() -> String {
    " ".to_string()
}

fn default_list_separator() -> String {
    ";".to_string()
}

impl SchemaMap {
    pub fn new(role: Role, id_column: &str, selected_fields: &[&str]) -> Self {
        SchemaMap {
            role,
            id_column: id_column.to_string(),
            selected_fields: selected_fields.iter().map(|s| s.to_string()).collect(),
            join_separator: default_join_separator(),
            track_column: None,
            coi_column: None,
            list_separator: default_list_separator(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.selected_fields.is_empty() {
            return Err(Error::InvalidInput("schema selects no fields".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.selected_fields {
            if !seen.insert(f) {
                return Err(Error::InvalidInput(format!("field `{f}` selected twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeProfile {
    pub judge_id: String,
    /// Selected text fields in schema order.
    pub fields: Vec<(String, String)>,
    pub preferred_tracks: Vec<String>,
    pub coi_venture_ids: Vec<String>,
    pub supplemented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureApplication {
    pub venture_id: String,
    pub track: String,
    pub fields: Vec<(String, String)>,
}

impl VentureApplication {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub role: Role,
    pub entity_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub word_count: usize,
    pub track_ids: Vec<String>,
}

impl Document {
    pub fn is_empty(&self) -> bool {
        self.word_count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchLabel {
    pub quality: u8,
}

/// A raw table: header row plus string cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(|c| c.to_string()).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Columns of `table` not referenced by `schema`.
pub fn dropped_columns(table: &Table, schema: &SchemaMap) -> Vec<String> {
    let mut used: BTreeSet<&str> = schema.selected_fields.iter().map(String::as_str).collect();
    used.insert(&schema.id_column);
    if let Some(c) = &schema.track_column {
        used.insert(c);
    }
    if let Some(c) = &schema.coi_column {
        used.insert(c);
    }
    table
        .headers
        .iter()
        .filter(|h| !used.contains(h.as_str()))
        .cloned()
        .collect()
}

struct Resolved {
    id: usize,
    fields: Vec<(String, usize)>,
    track: Option<usize>,
    coi: Option<usize>,
}

fn resolve(table: &Table, schema: &SchemaMap) -> Result<Resolved> {
    schema.validate()?;
    let id = table.column(&schema.id_column)?;
    let fields = schema
        .selected_fields
        .iter()
        .map(|f| Ok((f.clone(), table.column(f)?)))
        .collect::<Result<Vec<_>>>()?;
    let track = schema.track_column.as_deref().map(|c| table.column(c)).transpose()?;
    let coi = schema.coi_column.as_deref().map(|c| table.column(c)).transpose()?;
    Ok(Resolved { id, fields, track, coi })
}

fn cell(row: &[String], idx: usize) -> &str {
    row.get(idx).map(|s| s.trim()).unwrap_or("")
}

fn split_list(raw: &str, sep: &str) -> Vec<String> {
    raw.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn collect_ids<'a>(ids: impl Iterator<Item = (usize, &'a str)>) -> Result<()> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for (row, id) in ids {
        if id.is_empty() {
            return Err(Error::MissingId { row });
        }
        if !seen.insert(id) {
            dups.insert(id.to_string());
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(Error::DuplicateIds(dups.into_iter().collect()))
    }
}

pub fn ingest_judges(table: &Table, schema: &SchemaMap) -> Result<Vec<JudgeProfile>> {
    let r = resolve(table, schema)?;
    collect_ids(table.rows.iter().enumerate().map(|(i, row)| (i + 1, cell(row, r.id))))?;
    let judges = table
        .rows
        .iter()
        .map(|row| JudgeProfile {
            judge_id: cell(row, r.id).to_string(),
            fields: r
                .fields
                .iter()
                .map(|(name, idx)| (name.clone(), cell(row, *idx).to_string()))
                .collect(),
            preferred_tracks: r
                .track
                .map(|i| split_list(cell(row, i), &schema.list_separator))
                .unwrap_or_default(),
            coi_venture_ids: r
                .coi
                .map(|i| split_list(cell(row, i), &schema.list_separator))
                .unwrap_or_default(),
            supplemented: false,
        })
        .collect();
    Ok(judges)
}

pub fn ingest_ventures(table: &Table, schema: &SchemaMap) -> Result<Vec<VentureApplication>> {
    let r = resolve(table, schema)?;
    collect_ids(table.rows.iter().enumerate().map(|(i, row)| (i + 1, cell(row, r.id))))?;
    let ventures = table
        .rows
        .iter()
        .map(|row| VentureApplication {
            venture_id: cell(row, r.id).to_string(),
            track: r.track.map(|i| cell(row, i).to_string()).unwrap_or_default(),
            fields: r
                .fields
                .iter()
                .map(|(name, idx)| (name.clone(), cell(row, *idx).to_string()))
                .collect(),
        })
        .collect();
    Ok(ventures)
}

/// Every venture track and every judge preferred track must be configured;
/// judges must name at least one track.
pub fn check_tracks(
    judges: &[JudgeProfile],
    ventures: &[VentureApplication],
    tracks: &[String],
) -> Result<()> {
    let known: BTreeSet<&str> = tracks.iter().map(String::as_str).collect();
    for v in ventures {
        if !known.contains(v.track.as_str()) {
            return Err(Error::InvalidInput(format!(
                "venture `{}` has unknown track `{}`",
                v.venture_id, v.track
            )));
        }
    }
    for j in judges {
        if j.preferred_tracks.is_empty() {
            return Err(Error::InvalidInput(format!("judge `{}` has no preferred track", j.judge_id)));
        }
        if let Some(t) = j.preferred_tracks.iter().find(|t| !known.contains(t.as_str())) {
            return Err(Error::InvalidInput(format!(
                "judge `{}` has unknown track `{t}`",
                j.judge_id
            )));
        }
    }
    Ok(())
}

fn html_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^>]*>").unwrap())
}

fn url() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap())
}

fn sanitize_once(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let lower = nfc.to_lowercase();
    let no_tags = html_tag().replace_all(&lower, " ");
    let no_urls = url().replace_all(&no_tags, " ");
    let mut out = String::with_capacity(no_urls.len());
    for word in no_urls
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.nfc().collect()
}

/// NFC-normalize, lowercase, drop HTML tags and URLs, reduce everything that
/// is not alphanumeric to single spaces.
///
/// The rules are reapplied until the text is stable, so the result is a fixed
/// point: `sanitize(sanitize(x)) == sanitize(x)`.
///
/// ```
/// assert_eq!(judgematch::corpus::sanitize("AI-Driven  FinTech!"), "ai driven fintech");
/// ```
pub fn sanitize(raw: &str) -> String {
    let mut cur = sanitize_once(raw);
    for _ in 0..8 {
        let next = sanitize_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

pub fn whitespace_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceReport {
    pub supplemented_judges: Vec<String>,
    /// Judges under the word threshold with no supplement available.
    pub short_unsupplemented: Vec<String>,
    /// Documents empty after sanitization.
    pub flagged_documents: Vec<String>,
    pub dropped_columns: BTreeMap<String, Vec<String>>,
    pub warnings: Vec<String>,
}

impl ProvenanceReport {
    pub fn record(&mut self, doc: &Document, outcome: &ComposeOutcome) {
        if outcome.supplemented {
            self.supplemented_judges.push(doc.entity_id.clone());
        }
        if outcome.short_without_supplement {
            self.short_unsupplemented.push(doc.entity_id.clone());
            self.warnings.push(format!(
                "judge `{}` has {} words and no supplement",
                doc.entity_id, outcome.words_before_supplement
            ));
        }
        if doc.is_empty() {
            self.flagged_documents.push(doc.doc_id.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComposeOutcome {
    pub supplemented: bool,
    pub short_without_supplement: bool,
    pub words_before_supplement: usize,
}

fn join_fields(fields: &[(String, String)], sep: &str) -> String {
    fields
        .iter()
        .map(|(_, v)| v.trim())
        .collect::<Vec<_>>()
        .join(sep)
}

fn make_document(role: Role, id: &str, text: String, track_ids: Vec<String>) -> Document {
    let tokens = whitespace_tokens(&text);
    Document {
        doc_id: doc_id(role, id),
        role,
        entity_id: id.to_string(),
        word_count: tokens.len(),
        text,
        tokens,
        track_ids,
    }
}

/// Compose a judge document. Judges under [`MIN_JUDGE_WORDS`] words get the
/// supplement appended when one exists; `judge.supplemented` is updated.
pub fn compose_judge(
    judge: &mut JudgeProfile,
    schema: &SchemaMap,
    supplement: Option<&str>,
) -> (Document, ComposeOutcome) {
    let mut text = sanitize(&join_fields(&judge.fields, &schema.join_separator));
    let words = text.split_whitespace().count();
    let mut outcome = ComposeOutcome {
        words_before_supplement: words,
        ..Default::default()
    };
    judge.supplemented = false;
    if words < MIN_JUDGE_WORDS {
        match supplement.map(sanitize).filter(|s| !s.is_empty()) {
            Some(extra) => {
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(&extra);
                judge.supplemented = true;
                outcome.supplemented = true;
            }
            None => outcome.short_without_supplement = true,
        }
    }
    let doc = make_document(Role::Judge, &judge.judge_id, text, judge.preferred_tracks.clone());
    (doc, outcome)
}

pub fn compose_venture(venture: &VentureApplication, schema: &SchemaMap) -> Document {
    let text = sanitize(&join_fields(&venture.fields, &schema.join_separator));
    make_document(Role::Venture, &venture.venture_id, text, vec![venture.track.clone()])
}

/// Supplementary judge text: CSV with columns `judge_id,text`.
pub fn read_supplements<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let table = Table::from_reader(reader)?;
    let id = table.column("judge_id")?;
    let text = table.column("text")?;
    let mut out = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let jid = cell(row, id);
        if jid.is_empty() {
            return Err(Error::MissingId { row: i + 1 });
        }
        out.insert(jid.to_string(), cell(row, text).to_string());
    }
    Ok(out)
}

/// Match-quality labels: CSV with columns `judge_id,venture_id,quality`.
pub fn read_labels<R: Read>(reader: R) -> Result<BTreeMap<(String, String), MatchLabel>> {
    let table = Table::from_reader(reader)?;
    let j = table.column("judge_id")?;
    let v = table.column("venture_id")?;
    let q = table.column("quality")?;
    let mut out = BTreeMap::new();
    let mut dups = BTreeSet::new();
    for (i, row) in table.rows.iter().enumerate() {
        let row_no = i + 1;
        let (jid, vid) = (cell(row, j), cell(row, v));
        if jid.is_empty() || vid.is_empty() {
            return Err(Error::MissingId { row: row_no });
        }
        let quality: u8 = cell(row, q).parse().map_err(|_| Error::InvalidRecord {
            row: row_no,
            message: format!("quality `{}` is not an integer", cell(row, q)),
        })?;
        if !(1..=5).contains(&quality) {
            return Err(Error::InvalidRecord {
                row: row_no,
                message: format!("quality {quality} outside 1..=5"),
            });
        }
        if out
            .insert((jid.to_string(), vid.to_string()), MatchLabel { quality })
            .is_some()
        {
            dups.insert(format!("{jid}/{vid}"));
        }
    }
    if !dups.is_empty() {
        return Err(Error::DuplicateIds(dups.into_iter().collect()));
    }
    Ok(out)
}
