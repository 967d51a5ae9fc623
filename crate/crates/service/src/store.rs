//! Case index and append-only verdict log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use aimguard_core::explainer::ExplanationDoc;

pub const CASES_FILE: &str = "cases.jsonl";
pub const AUDIT_FILE: &str = "verdicts.jsonl";
pub const PAGE_SIZE: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("case {0} not found")]
    NotFound(String),
    #[error("reviewer {reviewer_id} already submitted a verdict for case {case_id}")]
    Conflict { case_id: String, reviewer_id: String },
    #[error("invalid fields: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Cheater,
    Legitimate,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pending,
    Reviewed,
}

impl std::str::FromStr for CaseStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(CaseStatus::Pending),
            "reviewed" => Ok(CaseStatus::Reviewed),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationEntry {
    pub tick: i64,
    pub score: f64,
    pub has_explanation: bool,
}

/// Model output for one player in one match, as first loaded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub match_id: String,
    pub player_id: String,
    pub probability: f64,
    pub flagged: bool,
    pub threshold: f64,
    pub eliminations: Vec<EliminationEntry>,
    pub created_at: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub case_id: String,
    pub reviewer_id: String,
    pub decision: Decision,
    pub confidence: u8,
    pub review_seconds: f64,
    pub timestamp: String,
}

/// Body of a verdict post; the case comes from the URL.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictSubmission {
    #[serde(default)]
    pub case_id: Option<String>,
    pub reviewer_id: Option<String>,
    pub decision: Option<Decision>,
    pub confidence: Option<i64>,
    pub review_seconds: Option<f64>,
}

/// How far reviewers agree. Reported only; nothing is enforced from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub reviews: usize,
    /// Decision with strictly more votes than any other.
    pub majority: Option<Decision>,
    pub agreeing: usize,
    pub unanimous: bool,
}

impl Agreement {
    pub fn of(reviews: &[ReviewVerdict]) -> Self {
        let mut counts: BTreeMap<Decision, usize> = BTreeMap::new();
        for r in reviews {
            *counts.entry(r.decision).or_default() += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        let leaders: Vec<Decision> = counts.iter().filter(|(_, &c)| c == top).map(|(&d, _)| d).collect();
        Agreement {
            reviews: reviews.len(),
            majority: if leaders.len() == 1 { Some(leaders[0]) } else { None },
            agreeing: top,
            unanimous: !reviews.is_empty() && counts.len() == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub match_id: String,
    pub player_id: String,
    pub probability: f64,
    pub flagged: bool,
    pub eliminations: usize,
    pub status: CaseStatus,
    pub reviews: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseView {
    #[serde(flatten)]
    pub record: CaseRecord,
    pub status: CaseStatus,
    pub verdicts: Vec<ReviewVerdict>,
    pub agreement: Agreement,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CaseFilter {
    pub status: Option<CaseStatus>,
    pub min_p: Option<f64>,
    /// 1-based.
    pub page: usize,
    pub per_page: usize,
}

/// One line of the predict output; unknown fields are ignored.
#[derive(Deserialize)]
struct VerdictLine {
    match_id: String,
    player_id: String,
    verdict: bool,
    probability: f64,
    elimination_scores: Vec<f64>,
    #[serde(default)]
    elimination_ticks: Vec<i64>,
    threshold: f64,
}

pub fn case_id(match_id: &str, player_id: &str) -> String {
    format!("{match_id}.{player_id}")
}

#[derive(Default)]
struct Index {
    cases: BTreeMap<String, CaseRecord>,
    reviews: BTreeMap<String, Vec<ReviewVerdict>>,
}

impl Index {
    fn status(&self, id: &str) -> CaseStatus {
        if self.reviews.get(id).is_some_and(|r| !r.is_empty()) {
            CaseStatus::Reviewed
        } else {
            CaseStatus::Pending
        }
    }
}

pub struct CaseStore {
    index: RwLock<Index>,
    /// Serializes appends; held across the write and fsync.
    writer: Mutex<File>,
    audit_path: PathBuf,
    explanations: BTreeMap<(String, i64), PathBuf>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ServiceError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Drops a trailing partial line left by a crash mid-append. Such a line was
/// never acknowledged.
fn trim_torn_tail(path: &Path) -> Result<(), ServiceError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let f = OpenOptions::new().write(true).open(path)?;
    f.set_len(keep as u64)?;
    f.sync_all()?;
    Ok(())
}

fn append_line(file: &mut File, value: &impl Serialize) -> Result<(), ServiceError> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn explanation_files(dir: &Path) -> Result<BTreeMap<(String, i64), PathBuf>, ServiceError> {
    #[derive(Deserialize)]
    struct Head {
        match_id: String,
        player_id: String,
        elim_tick: i64,
    }
    let mut out = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let Ok(head) = serde_json::from_slice::<Head>(&std::fs::read(&path)?) else {
            continue;
        };
        out.insert((case_id(&head.match_id, &head.player_id), head.elim_tick), path);
    }
    Ok(out)
}

impl CaseStore {
    /// Opens (or creates) the store in `data_dir`, registering any player in
    /// `verdicts` that is not known yet and indexing explanation documents.
    pub fn open(data_dir: &Path, verdicts: Option<&Path>, explanations: Option<&Path>) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(data_dir)?;
        let cases_path = data_dir.join(CASES_FILE);
        let audit_path = data_dir.join(AUDIT_FILE);
        trim_torn_tail(&cases_path)?;
        trim_torn_tail(&audit_path)?;

        let explanations = match explanations {
            Some(dir) => explanation_files(dir)?,
            None => BTreeMap::new(),
        };
        let mut index = Index::default();
        if cases_path.exists() {
            for c in read_jsonl::<CaseRecord>(&cases_path)? {
                index.cases.insert(c.case_id.clone(), c);
            }
        }
        let mut cases_file = OpenOptions::new().create(true).append(true).open(&cases_path)?;
        if let Some(path) = verdicts {
            for v in read_jsonl::<VerdictLine>(path)? {
                let id = case_id(&v.match_id, &v.player_id);
                if index.cases.contains_key(&id) {
                    continue;
                }
                let ticks = if v.elimination_ticks.len() == v.elimination_scores.len() {
                    v.elimination_ticks
                } else {
                    vec![0; v.elimination_scores.len()]
                };
                let record = CaseRecord {
                    eliminations: ticks
                        .iter()
                        .zip(&v.elimination_scores)
                        .map(|(&tick, &score)| EliminationEntry {
                            tick,
                            score,
                            has_explanation: explanations.contains_key(&(id.clone(), tick)),
                        })
                        .collect(),
                    case_id: id.clone(),
                    match_id: v.match_id,
                    player_id: v.player_id,
                    probability: v.probability,
                    flagged: v.verdict,
                    threshold: v.threshold,
                    created_at: now(),
                };
                append_line(&mut cases_file, &record)?;
                index.cases.insert(id, record);
            }
        }
        if audit_path.exists() {
            for r in read_jsonl::<ReviewVerdict>(&audit_path)? {
                index.reviews.entry(r.case_id.clone()).or_default().push(r);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(&audit_path)?;
        Ok(CaseStore {
            index: RwLock::new(index),
            writer: Mutex::new(writer),
            audit_path,
            explanations,
        })
    }

    pub fn list_cases(&self, filter: &CaseFilter) -> (usize, Vec<CaseSummary>) {
        let index = self.index.read().expect("index lock");
        let mut hits: Vec<CaseSummary> = index
            .cases
            .values()
            .filter(|c| filter.min_p.is_none_or(|p| c.probability >= p))
            .map(|c| CaseSummary {
                case_id: c.case_id.clone(),
                match_id: c.match_id.clone(),
                player_id: c.player_id.clone(),
                probability: c.probability,
                flagged: c.flagged,
                eliminations: c.eliminations.len(),
                status: index.status(&c.case_id),
                reviews: index.reviews.get(&c.case_id).map_or(0, Vec::len),
            })
            .filter(|c| filter.status.is_none_or(|s| c.status == s))
            .collect();
        hits.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.case_id.cmp(&b.case_id)));
        let total = hits.len();
        let per_page = if filter.per_page == 0 { PAGE_SIZE } else { filter.per_page };
        let skip = filter.page.max(1).saturating_sub(1).saturating_mul(per_page);
        (total, hits.into_iter().skip(skip).take(per_page).collect())
    }

    pub fn get_case(&self, id: &str) -> Result<CaseView, ServiceError> {
        let index = self.index.read().expect("index lock");
        let record = index.cases.get(id).ok_or_else(|| ServiceError::NotFound(id.into()))?.clone();
        let verdicts = index.reviews.get(id).cloned().unwrap_or_default();
        Ok(CaseView {
            record,
            status: index.status(id),
            agreement: Agreement::of(&verdicts),
            verdicts,
        })
    }

    /// Path of the explanation for `tick`, or of the highest-scoring
    /// explained elimination when no tick is given.
    pub fn explanation_path(&self, id: &str, tick: Option<i64>) -> Result<PathBuf, ServiceError> {
        let case = self.get_case(id)?.record;
        let tick = match tick {
            Some(t) => t,
            None => case
                .eliminations
                .iter()
                .filter(|e| self.explanations.contains_key(&(id.to_string(), e.tick)))
                .max_by(|a, b| a.score.total_cmp(&b.score))
                .map(|e| e.tick)
                .ok_or_else(|| ServiceError::NotFound(format!("{id} explanation")))?,
        };
        self.explanations
            .get(&(id.to_string(), tick))
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("{id} explanation at tick {tick}")))
    }

    /// The explanation document exactly as the explainer wrote it.
    pub fn get_explanation(&self, id: &str, tick: Option<i64>) -> Result<Vec<u8>, ServiceError> {
        Ok(std::fs::read(self.explanation_path(id, tick)?)?)
    }

    pub fn explanation_doc(&self, id: &str, tick: Option<i64>) -> Result<ExplanationDoc, ServiceError> {
        Ok(serde_json::from_slice(&self.get_explanation(id, tick)?)?)
    }

    /// Validates, appends and fsyncs the verdict, then indexes it.
    pub fn post_verdict(&self, id: &str, body: VerdictSubmission) -> Result<ReviewVerdict, ServiceError> {
        let mut bad = Vec::new();
        if body.case_id.as_deref().is_some_and(|c| c != id) {
            bad.push("case_id".to_string());
        }
        let reviewer_id = body.reviewer_id.unwrap_or_default();
        if reviewer_id.trim().is_empty() || reviewer_id.len() > 128 || reviewer_id.chars().any(char::is_control) {
            bad.push("reviewer_id".into());
        }
        if body.decision.is_none() {
            bad.push("decision".into());
        }
        let confidence = body.confidence.filter(|c| (1..=5).contains(c));
        if confidence.is_none() {
            bad.push("confidence".into());
        }
        let review_seconds = body.review_seconds.filter(|s| s.is_finite() && *s >= 0.0);
        if review_seconds.is_none() {
            bad.push("review_seconds".into());
        }
        if !bad.is_empty() {
            return Err(ServiceError::Validation(bad));
        }

        let mut file = self.writer.lock().expect("writer lock");
        {
            let index = self.index.read().expect("index lock");
            if !index.cases.contains_key(id) {
                return Err(ServiceError::NotFound(id.into()));
            }
            if index.reviews.get(id).is_some_and(|rs| rs.iter().any(|r| r.reviewer_id == reviewer_id)) {
                return Err(ServiceError::Conflict {
                    case_id: id.into(),
                    reviewer_id,
                });
            }
        }
        let verdict = ReviewVerdict {
            case_id: id.into(),
            reviewer_id,
            decision: body.decision.expect("validated"),
            confidence: confidence.expect("validated") as u8,
            review_seconds: review_seconds.expect("validated"),
            timestamp: now(),
        };
        append_line(&mut file, &verdict)?;
        self.index
            .write()
            .expect("index lock")
            .reviews
            .entry(id.into())
            .or_default()
            .push(verdict.clone());
        Ok(verdict)
    }

    /// The verdict log, byte for byte.
    pub fn export_audit(&self) -> Result<Vec<u8>, ServiceError> {
        let _guard = self.writer.lock().expect("writer lock");
        Ok(std::fs::read(&self.audit_path)?)
    }
}
