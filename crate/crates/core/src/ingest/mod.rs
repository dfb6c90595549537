//! Input parsing: Stack Exchange dumps, generic question TSVs, annotation
//! TSVs and the package feature CSV.

mod dump;
mod html;
mod tables;

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

pub use dump::{parse_dump, DumpParse, RawPost};
pub use html::strip_html;
pub use tables::{
    load_annotations, load_package_features, read_annotations, read_package_features,
    read_question_store, read_question_tsv, write_question_store, Annotations, PackageFeatureTable,
    COVARIATE_NAMES, FEATURE_NAMES, PACKAGE_COLUMN, RESPONSE_NAMES,
};

use crate::Label;

/// A program under study and the tag that identifies its questions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSpec {
    pub name: String,
    pub tag: String,
}

/// A question from any source, before month binning.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceQuestion {
    pub id: u64,
    pub program: String,
    pub title_html: String,
    pub body_html: String,
    pub created: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: u64,
    pub program: String,
    pub title_text: String,
    /// Plain text with code blocks replaced by the `<code>` sentinel.
    pub body_text: String,
    /// Calendar months since the program's first question.
    pub created_month: u32,
    pub label: Option<Label>,
}

/// Parses the timestamp shapes found in dumps and TSVs: RFC 3339, naive
/// `YYYY-MM-DDTHH:MM:SS[.fff]` (taken as UTC), or a bare date.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc())
}

fn month_number(ts: &DateTime<Utc>) -> i64 {
    i64::from(ts.year()) * 12 + i64::from(ts.month0())
}

/// Selects the posts carrying each program's tag.
pub fn posts_for_programs(posts: &[RawPost], programs: &[ProgramSpec]) -> Vec<SourceQuestion> {
    let mut out = Vec::new();
    for program in programs {
        let tag = program.tag.to_lowercase();
        out.extend(posts.iter().filter(|p| p.tags.contains(&tag)).map(|p| {
            SourceQuestion {
                id: p.id,
                program: program.name.clone(),
                title_html: p.title_html.clone(),
                body_html: p.body_html.clone(),
                created: p.creation_date,
            }
        }));
    }
    out
}

/// Strips HTML and assigns month indices per program. Output is ordered by
/// program name, then creation time, then id.
pub fn build_questions(mut sources: Vec<SourceQuestion>) -> Vec<Question> {
    sources.sort_by(|a, b| {
        (a.program.as_str(), a.created, a.id).cmp(&(b.program.as_str(), b.created, b.id))
    });
    let mut first_month: HashMap<&str, i64> = HashMap::new();
    for s in &sources {
        let m = month_number(&s.created);
        first_month
            .entry(s.program.as_str())
            .and_modify(|v| *v = (*v).min(m))
            .or_insert(m);
    }
    sources
        .iter()
        .map(|s| Question {
            id: s.id,
            program: s.program.clone(),
            title_text: strip_html(&s.title_html),
            body_text: strip_html(&s.body_html),
            created_month: (month_number(&s.created) - first_month[s.program.as_str()]) as u32,
            label: None,
        })
        .collect()
}

/// Attaches annotation labels by question id; returns how many matched.
pub fn apply_annotations(questions: &mut [Question], labels: &BTreeMap<u64, Label>) -> usize {
    let mut matched = 0;
    for q in questions.iter_mut() {
        q.label = labels.get(&q.id).copied();
        matched += usize::from(q.label.is_some());
    }
    matched
}
