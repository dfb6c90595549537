use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use super::{parse_timestamp, Question, SourceQuestion};
use crate::{Error, Label, Result};

/// The 29 package properties, in reporting order.
pub const FEATURE_NAMES: [&str; 29] = [
    "Churn.Adds",
    "Churn.Dels",
    "Churn.Adds.per.Week",
    "Churn.Dels.per.Week",
    "R.Files",
    "R.Blanks",
    "R.Comments",
    "R.LOC",
    "R.LOC.per.File",
    "R.Blanks.per.LOC",
    "R.Comments.per.LOC",
    "Compiled.Files",
    "Compiled.Blanks",
    "Compiled.Comments",
    "Compiled.LOC",
    "Compiled.LOC.per.File",
    "Compiled.Blanks.per.LOC",
    "Compiled.Comments.per.LOC",
    "Max.Cyclomatic.Complexity",
    "Mean.Cyclomatic.Complexity",
    "Count.Cyclomatic.Complexity",
    "Total.Cyclomatic.Complexity",
    "Codetools.Problems",
    "Test.Coverage",
    "Goodpractice.Problems",
    "Vignettes",
    "Depends",
    "Imports",
    "Suggests",
];

/// Usage covariates: months active, downloads, unique (by IP) downloads.
pub const COVARIATE_NAMES: [&str; 3] = ["Months.Active", "Downloads", "Unique.Downloads"];

/// Response counts, indexed like [`Label::ALL`].
pub const RESPONSE_NAMES: [&str; 2] = ["Problem.Reports", "Support.Requests"];

pub const PACKAGE_COLUMN: &str = "Package";

fn tsv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

fn csv_error(source: &str, err: csv::Error) -> Error {
    let location = match err.position() {
        Some(pos) => format!("{source}:{}", pos.line()),
        None => source.to_string(),
    };
    Error::invalid(location, err.to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Annotated labels keyed by question id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Annotations {
    pub labels: BTreeMap<u64, Label>,
    /// Rows repeating an id with the same label.
    pub duplicate_rows: usize,
}

impl Annotations {
    pub fn count(&self, label: Label) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }
}

pub fn load_annotations(path: &Path) -> Result<Annotations> {
    read_annotations(open(path)?, &path.display().to_string())
}

/// Reads `question_id<TAB>label` rows (with a header line).
pub fn read_annotations<R: Read>(reader: R, source: &str) -> Result<Annotations> {
    let mut out = Annotations::default();
    for (i, record) in tsv_reader(reader).records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = i + 2;
        let location = || format!("{source}:{line}");
        if record.len() != 2 {
            return Err(Error::invalid(location(), "expected 2 columns"));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::invalid(location(), format!("bad question id `{}`", &record[0])))?;
        let label: Label = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::invalid(location(), format!("unknown label `{}`", &record[1])))?;
        match out.labels.insert(id, label) {
            Some(previous) if previous != label => return Err(Error::ConflictingLabel { id }),
            Some(_) => {
                warn!("{}: duplicate annotation for question {id}", location());
                out.duplicate_rows += 1;
            }
            None => {}
        }
    }
    Ok(out)
}

/// Reads a generic question TSV with columns `id, title, body, date, program`.
pub fn read_question_tsv<R: Read>(reader: R, source: &str) -> Result<Vec<SourceQuestion>> {
    let mut rdr = tsv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (c_id, c_title, c_body, c_date, c_program) =
        (col("id")?, col("title")?, col("body")?, col("date")?, col("program")?);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let location = || format!("{source}:{}", i + 2);
        let id = record[c_id]
            .trim()
            .parse()
            .map_err(|_| Error::invalid(location(), "bad id"))?;
        let created = parse_timestamp(&record[c_date])
            .ok_or_else(|| Error::invalid(location(), format!("bad date `{}`", &record[c_date])))?;
        out.push(SourceQuestion {
            id,
            program: record[c_program].trim().to_string(),
            title_html: record[c_title].to_string(),
            body_html: record[c_body].to_string(),
            created,
        });
    }
    Ok(out)
}

const STORE_HEADER: [&str; 6] = ["id", "program", "created_month", "label", "title", "body"];

/// Writes the normalized question store; unlabeled questions carry `?`.
pub fn write_question_store<W: Write>(writer: W, questions: &[Question]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(b'\t').from_writer(writer);
    let csv_err = |e: csv::Error| Error::Stream(e.into());
    wtr.write_record(STORE_HEADER).map_err(csv_err)?;
    for q in questions {
        let label = q.label.map_or("?", Label::as_str);
        wtr.write_record([
            q.id.to_string().as_str(),
            &q.program,
            &q.created_month.to_string(),
            label,
            &q.title_text,
            &q.body_text,
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_question_store<R: Read>(reader: R, source: &str) -> Result<Vec<Question>> {
    let mut out = Vec::new();
    for (i, record) in tsv_reader(reader).records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let location = || format!("{source}:{}", i + 2);
        if record.len() != STORE_HEADER.len() {
            return Err(Error::invalid(location(), "wrong column count"));
        }
        let label = match &record[3] {
            "?" => None,
            other => Some(other.parse::<Label>().map_err(|_| Error::invalid(location(), "bad label"))?),
        };
        out.push(Question {
            id: record[0].parse().map_err(|_| Error::invalid(location(), "bad id"))?,
            program: record[1].to_string(),
            created_month: record[2].parse().map_err(|_| Error::invalid(location(), "bad month"))?,
            label,
            title_text: record[4].to_string(),
            body_text: record[5].to_string(),
        });
    }
    Ok(out)
}

/// Per-package properties, usage covariates and question counts, stored
/// column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PackageFeatureTable {
    pub packages: Vec<String>,
    /// `features[f][row]`, `f` indexing [`FEATURE_NAMES`].
    pub features: Vec<Vec<f64>>,
    /// `covariates[c][row]`, `c` indexing [`COVARIATE_NAMES`].
    pub covariates: Vec<Vec<f64>>,
    /// `responses[r][row]`, `r` indexing [`RESPONSE_NAMES`].
    pub responses: Vec<Vec<f64>>,
}

impl PackageFeatureTable {
    pub fn len(&self) -> usize {
        self.packages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
    }

    /// Number of value columns (features, covariates, responses).
    pub fn value_columns(&self) -> usize {
        self.features.len() + self.covariates.len() + self.responses.len()
    }

    pub fn response(&self, label: Label) -> &[f64] {
        match label {
            Label::ProblemReport => &self.responses[0],
            Label::SupportRequest => &self.responses[1],
        }
    }
}

pub fn load_package_features(path: &Path) -> Result<PackageFeatureTable> {
    read_package_features(open(path)?, &path.display().to_string())
}

/// Reads the comma-separated feature table. Every one of the 29 features, 3
/// covariates and 2 responses must be present by exact name; unknown extra
/// columns are ignored. Empty or non-numeric cells and negative counts are
/// errors carrying their line and column.
pub fn read_package_features<R: Read>(reader: R, source: &str) -> Result<PackageFeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let package_col = find(PACKAGE_COLUMN)?;
    let feature_cols = FEATURE_NAMES.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let covariate_cols = COVARIATE_NAMES.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let response_cols = RESPONSE_NAMES.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut table = PackageFeatureTable {
        packages: Vec::new(),
        features: vec![Vec::new(); FEATURE_NAMES.len()],
        covariates: vec![Vec::new(); COVARIATE_NAMES.len()],
        responses: vec![Vec::new(); RESPONSE_NAMES.len()],
    };
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = i + 2;
        let cell = |col: usize, nonnegative: bool| -> Result<f64> {
            let name = &headers[col];
            let raw = record[col].trim();
            let location = format!("{source}:{line} column {name}");
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::invalid(location.clone(), format!("non-numeric cell `{raw}`")))?;
            if nonnegative && value < 0.0 {
                return Err(Error::invalid(location, format!("negative count {value}")));
            }
            Ok(value)
        };
        table.packages.push(record[package_col].trim().to_string());
        for (dst, &col) in table.features.iter_mut().zip(&feature_cols) {
            dst.push(cell(col, false)?);
        }
        for (dst, &col) in table.covariates.iter_mut().zip(&covariate_cols) {
            dst.push(cell(col, true)?);
        }
        for (dst, &col) in table.responses.iter_mut().zip(&response_cols) {
            dst.push(cell(col, true)?);
        }
    }
    Ok(table)
}
