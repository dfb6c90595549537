use std::collections::HashSet;
use std::io::BufRead;

use chrono::{DateTime, Utc};
use log::warn;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::parse_timestamp;
use crate::Result;

/// A question row from a Stack Exchange `Posts.xml` dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: u64,
    pub post_type: u8,
    pub creation_date: DateTime<Utc>,
    pub title_html: String,
    pub body_html: String,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct DumpParse {
    pub posts: Vec<RawPost>,
    /// Rows that could not be parsed (malformed XML, missing or invalid
    /// required attributes, duplicate ids).
    pub skipped_rows: usize,
}

enum Row {
    Question(RawPost),
    Other,
}

/// Reads a `Posts.xml` stream one `<row .../>` per line and keeps questions
/// (`PostTypeId="1"`). Bad rows are skipped and counted; only I/O failures
/// are fatal.
pub fn parse_dump<R: BufRead>(reader: R) -> Result<DumpParse> {
    let mut parsed = DumpParse::default();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.starts_with("<row") {
            continue;
        }
        match parse_row(trimmed) {
            Ok(Row::Question(post)) => {
                if seen.insert(post.id) {
                    parsed.posts.push(post);
                } else {
                    warn!("line {}: duplicate post id {}, skipped", lineno + 1, post.id);
                    parsed.skipped_rows += 1;
                }
            }
            Ok(Row::Other) => {}
            Err(msg) => {
                warn!("line {}: {msg}", lineno + 1);
                parsed.skipped_rows += 1;
            }
        }
    }
    Ok(parsed)
}

fn parse_row(line: &str) -> std::result::Result<Row, String> {
    let mut reader = Reader::from_str(line);
    let element = match reader.read_event() {
        Ok(Event::Empty(e)) if e.name().as_ref() == b"row" => e.into_owned(),
        Ok(_) => return Err("expected a self-closing <row/> element".into()),
        Err(e) => return Err(format!("malformed row: {e}")),
    };
    match reader.read_event() {
        Ok(Event::Eof) => {}
        Ok(Event::Text(t)) if t.iter().all(u8::is_ascii_whitespace) => {}
        _ => return Err("trailing content after <row/>".into()),
    }

    let mut id = None;
    let mut post_type = None;
    let mut created = None;
    let mut title = String::new();
    let mut body = String::new();
    let mut tags = Vec::new();
    for attr in element.attributes() {
        let attr = attr.map_err(|e| format!("malformed attribute: {e}"))?;
        let value = attr
            .unescape_value()
            .map_err(|e| format!("bad entity in attribute: {e}"))?;
        match attr.key.as_ref() {
            b"Id" => id = Some(value.parse::<u64>().map_err(|_| format!("bad Id `{value}`"))?),
            b"PostTypeId" => {
                post_type = Some(value.parse::<u8>().map_err(|_| format!("bad PostTypeId `{value}`"))?)
            }
            b"CreationDate" => created = Some(value.into_owned()),
            b"Title" => title = value.into_owned(),
            b"Body" => body = value.into_owned(),
            b"Tags" => tags = parse_tags(&value),
            _ => {}
        }
    }

    let id = id.filter(|&id| id > 0).ok_or("missing or zero Id")?;
    let post_type = post_type.ok_or("missing PostTypeId")?;
    if post_type != 1 {
        return Ok(Row::Other);
    }
    let created = created.ok_or("missing CreationDate")?;
    let creation_date = parse_timestamp(&created).ok_or_else(|| format!("bad CreationDate `{created}`"))?;
    Ok(Row::Question(RawPost {
        id,
        post_type,
        creation_date,
        title_html: title,
        body_html: body,
        tags,
    }))
}

/// Accepts both `<a><b>` and `|a|b|` tag encodings.
pub(crate) fn parse_tags(raw: &str) -> Vec<String> {
    let separators: &[char] = if raw.contains('<') { &['<', '>'] } else { &['|'] };
    raw.split(separators)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
