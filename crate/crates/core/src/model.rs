//! Participant records, cohorts and their JSONL / CSV representations.
//!
//! Response times are stored as integer milliseconds; every analysis routine
//! converts to seconds. A `None` entry in `rt_ms` or `item_scores` is a
//! missing value: `null` inside the JSONL arrays, an empty cell in CSV.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Number of items in one administration of the scale.
pub const N_ITEMS: usize = 7;

/// Highest score a single item can take.
pub const MAX_ITEM_SCORE: i64 = 4;

pub const CSV_COLUMNS: [&str; 22] = [
    "participant_id",
    "age",
    "gender",
    "rt1_ms",
    "rt2_ms",
    "rt3_ms",
    "rt4_ms",
    "rt5_ms",
    "rt6_ms",
    "rt7_ms",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "q7",
    "history_psych",
    "history_phys",
    "smoke",
    "drink",
    "collected_at",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Other,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Habit {
    Never,
    Occasional,
    Frequent,
    Former,
}

impl Gender {
    fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Other => "other",
            Gender::Unknown => "unknown",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "male" => Some(Gender::Male),
            "female" => Some(Gender::Female),
            "other" => Some(Gender::Other),
            "unknown" => Some(Gender::Unknown),
            _ => None,
        }
    }
}

impl Habit {
    fn as_str(self) -> &'static str {
        match self {
            Habit::Never => "never",
            Habit::Occasional => "occasional",
            Habit::Frequent => "frequent",
            Habit::Former => "former",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "never" => Some(Habit::Never),
            "occasional" => Some(Habit::Occasional),
            "frequent" => Some(Habit::Frequent),
            "former" => Some(Habit::Former),
            _ => None,
        }
    }
}

/// One respondent: seven response-time intervals, seven item scores and
/// optional demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<i64>,
    #[serde(default)]
    pub gender: Gender,
    pub rt_ms: Vec<Option<i64>>,
    pub item_scores: Vec<Option<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_psych: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_phys: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoke: Option<Habit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drink: Option<Habit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected_at: Option<String>,
}

impl ParticipantRecord {
    /// A record with only the analysis-relevant fields populated.
    pub fn new(id: impl Into<String>, rt_ms: [i64; N_ITEMS], scores: [i64; N_ITEMS]) -> Self {
        ParticipantRecord {
            participant_id: id.into(),
            age: None,
            gender: Gender::Unknown,
            rt_ms: rt_ms.iter().map(|&v| Some(v)).collect(),
            item_scores: scores.iter().map(|&v| Some(v)).collect(),
            history_psych: None,
            history_phys: None,
            smoke: None,
            drink: None,
            collected_at: None,
        }
    }

    /// Response times in seconds, or `None` if any interval is missing.
    pub fn rt_seconds(&self) -> Option<[f64; N_ITEMS]> {
        if self.rt_ms.len() != N_ITEMS {
            return None;
        }
        let mut out = [0.0; N_ITEMS];
        for (o, v) in out.iter_mut().zip(&self.rt_ms) {
            *o = (*v)? as f64 / 1000.0;
        }
        Some(out)
    }

    /// Item scores, or `None` if any score is missing.
    pub fn scores(&self) -> Option<[i64; N_ITEMS]> {
        if self.item_scores.len() != N_ITEMS {
            return None;
        }
        let mut out = [0; N_ITEMS];
        for (o, v) in out.iter_mut().zip(&self.item_scores) {
            *o = (*v)?;
        }
        Some(out)
    }

    pub fn has_missing(&self) -> bool {
        self.rt_ms.iter().any(Option::is_none) || self.item_scores.iter().any(Option::is_none)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Missing,
    OutOfRange,
    WrongLength,
    BadType,
    DuplicateId,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IssueKind::Missing => "missing",
            IssueKind::OutOfRange => "out_of_range",
            IssueKind::WrongLength => "wrong_length",
            IssueKind::BadType => "bad_type",
            IssueKind::DuplicateId => "duplicate_id",
        };
        f.write_str(s)
    }
}

/// One violated constraint on one field (or `"record"` for the whole row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    /// 1-based input line (JSONL line or CSV row including the header).
    pub line: Option<usize>,
    /// Position of the record in the cohort, when one was produced.
    pub index: Option<usize>,
    pub participant_id: Option<String>,
    pub field: String,
    pub kind: IssueKind,
    pub message: String,
}

impl ValidationIssue {
    fn new(field: impl Into<String>, kind: IssueKind, message: impl Into<String>) -> Self {
        ValidationIssue {
            line: None,
            index: None,
            participant_id: None,
            field: field.into(),
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub records: Vec<ParticipantRecord>,
    pub source: String,
    pub ingest_warnings: Vec<ValidationIssue>,
}

impl Cohort {
    pub fn new(records: Vec<ParticipantRecord>, source: impl Into<String>) -> Self {
        Cohort { records, source: source.into(), ingest_warnings: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Check every record invariant, reporting all violations.
pub fn validate_record(record: &ParticipantRecord) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if record.participant_id.is_empty() {
        issues.push(ValidationIssue::new("participant_id", IssueKind::Missing, "empty participant_id"));
    }
    if record.rt_ms.len() != N_ITEMS {
        issues.push(ValidationIssue::new(
            "rt_ms",
            IssueKind::WrongLength,
            format!("expected {N_ITEMS} entries, got {}", record.rt_ms.len()),
        ));
    }
    if record.item_scores.len() != N_ITEMS {
        issues.push(ValidationIssue::new(
            "item_scores",
            IssueKind::WrongLength,
            format!("expected {N_ITEMS} entries, got {}", record.item_scores.len()),
        ));
    }
    let bad_rt: Vec<usize> = record
        .rt_ms
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Some(x) if *x < 0))
        .map(|(i, _)| i)
        .collect();
    if !bad_rt.is_empty() {
        issues.push(ValidationIssue::new(
            "rt_ms",
            IssueKind::OutOfRange,
            format!("negative interval at positions {bad_rt:?}"),
        ));
    }
    let bad_scores: Vec<usize> = record
        .item_scores
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Some(x) if !(0..=MAX_ITEM_SCORE).contains(x)))
        .map(|(i, _)| i)
        .collect();
    if !bad_scores.is_empty() {
        issues.push(ValidationIssue::new(
            "item_scores",
            IssueKind::OutOfRange,
            format!("scores outside 0..={MAX_ITEM_SCORE} at positions {bad_scores:?}"),
        ));
    }
    if matches!(record.age, Some(a) if a < 0) {
        issues.push(ValidationIssue::new("age", IssueKind::OutOfRange, "negative age"));
    }
    issues
}

/// Accumulates per-record warnings with locators while parsing.
struct RowContext<'a> {
    line: usize,
    index: usize,
    id: Option<String>,
    warnings: &'a mut Vec<ValidationIssue>,
}

impl RowContext<'_> {
    fn warn(&mut self, field: impl Into<String>, kind: IssueKind, message: impl Into<String>) {
        self.warnings.push(ValidationIssue {
            line: Some(self.line),
            index: Some(self.index),
            participant_id: self.id.clone(),
            field: field.into(),
            kind,
            message: message.into(),
        });
    }
}

/// Normalize a raw sequence: enforce length, convert invalid entries to missing.
fn sanitize_sequence(
    ctx: &mut RowContext<'_>,
    field: &str,
    mut values: Vec<Option<i64>>,
    valid: impl Fn(i64) -> bool,
) -> Vec<Option<i64>> {
    if values.len() != N_ITEMS {
        ctx.warn(
            field,
            IssueKind::WrongLength,
            format!("expected {N_ITEMS} entries, got {}; padded/truncated with missing", values.len()),
        );
        values.resize(N_ITEMS, None);
    }
    for (i, v) in values.iter_mut().enumerate() {
        match *v {
            None => ctx.warn(format!("{field}[{i}]"), IssueKind::Missing, "missing value"),
            Some(x) if !valid(x) => {
                ctx.warn(format!("{field}[{i}]"), IssueKind::OutOfRange, format!("value {x} out of range; treated as missing"));
                *v = None;
            }
            Some(_) => {}
        }
    }
    values
}

fn valid_rt(x: i64) -> bool {
    x >= 0
}

fn valid_score(x: i64) -> bool {
    (0..=MAX_ITEM_SCORE).contains(&x)
}

/// Parse a cohort from JSONL or CSV.
///
/// Malformed fields become missing values plus a warning; a line that does not
/// yield a participant id is skipped with a warning. Duplicate ids are fatal.
pub fn parse_dataset<R: BufRead>(reader: R, format: Format, source: impl Into<String>) -> Result<Cohort> {
    let mut cohort = Cohort::new(Vec::new(), source);
    let mut rows = Vec::new();
    match format {
        Format::Jsonl => parse_jsonl(reader, &mut rows, &mut cohort.ingest_warnings)?,
        Format::Csv => parse_csv(reader, &mut rows, &mut cohort.ingest_warnings)?,
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, record) in rows {
        if let Some(&first) = seen.get(&record.participant_id) {
            return Err(Error::DuplicateId { id: record.participant_id, first, second: line });
        }
        seen.insert(record.participant_id.clone(), line);
        cohort.records.push(record);
    }
    Ok(cohort)
}

fn parse_jsonl<R: BufRead>(
    reader: R,
    rows: &mut Vec<(usize, ParticipantRecord)>,
    warnings: &mut Vec<ValidationIssue>,
) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(map)) => map,
            Ok(_) => {
                warnings.push(line_issue(line_no, "record", IssueKind::BadType, "line is not a JSON object; skipped"));
                continue;
            }
            Err(e) => {
                warnings.push(line_issue(line_no, "record", IssueKind::BadType, format!("invalid JSON ({e}); skipped")));
                continue;
            }
        };
        let index = rows.len();
        if let Some(record) = record_from_json(&obj, line_no, index, warnings) {
            rows.push((line_no, record));
        }
    }
    Ok(())
}

fn line_issue(line: usize, field: &str, kind: IssueKind, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        line: Some(line),
        index: None,
        participant_id: None,
        field: field.into(),
        kind,
        message: message.into(),
    }
}

fn record_from_json(
    obj: &Map<String, Value>,
    line: usize,
    index: usize,
    warnings: &mut Vec<ValidationIssue>,
) -> Option<ParticipantRecord> {
    let id = match obj.get("participant_id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => {
            warnings.push(line_issue(line, "participant_id", IssueKind::Missing, "no participant_id; skipped"));
            return None;
        }
    };
    let mut ctx = RowContext { line, index, id: Some(id.clone()), warnings };

    let rt_raw = json_int_array(&mut ctx, obj, "rt_ms");
    let rt_ms = sanitize_sequence(&mut ctx, "rt_ms", rt_raw, valid_rt);
    let sc_raw = json_int_array(&mut ctx, obj, "item_scores");
    let item_scores = sanitize_sequence(&mut ctx, "item_scores", sc_raw, valid_score);

    let age = match obj.get("age") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_i64() {
            Some(a) if a >= 0 => Some(a),
            _ => {
                ctx.warn("age", IssueKind::BadType, format!("invalid age {v}"));
                None
            }
        },
    };
    let gender = match obj.get("gender") {
        None | Some(Value::Null) => Gender::Unknown,
        Some(Value::String(s)) => Gender::parse(s).unwrap_or_else(|| {
            ctx.warn("gender", IssueKind::BadType, format!("unknown gender {s:?}"));
            Gender::Unknown
        }),
        Some(v) => {
            ctx.warn("gender", IssueKind::BadType, format!("invalid gender {v}"));
            Gender::Unknown
        }
    };
    let history_psych = json_bool(&mut ctx, obj, "history_psych");
    let history_phys = json_bool(&mut ctx, obj, "history_phys");
    let smoke = json_habit(&mut ctx, obj, "smoke");
    let drink = json_habit(&mut ctx, obj, "drink");
    let collected_at = match obj.get("collected_at") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => {
            ctx.warn("collected_at", IssueKind::BadType, format!("invalid timestamp {v}"));
            None
        }
    };

    Some(ParticipantRecord {
        participant_id: id,
        age,
        gender,
        rt_ms,
        item_scores,
        history_psych,
        history_phys,
        smoke,
        drink,
        collected_at,
    })
}

fn json_int_array(ctx: &mut RowContext<'_>, obj: &Map<String, Value>, field: &str) -> Vec<Option<i64>> {
    match obj.get(field) {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Null => None,
                v => match v.as_i64() {
                    Some(x) => Some(x),
                    None => {
                        ctx.warn(format!("{field}[{i}]"), IssueKind::BadType, format!("not an integer: {v}"));
                        None
                    }
                },
            })
            .collect(),
        None | Some(Value::Null) => vec![None; N_ITEMS],
        Some(v) => {
            ctx.warn(field, IssueKind::BadType, format!("expected an array, got {v}"));
            vec![None; N_ITEMS]
        }
    }
}

fn json_bool(ctx: &mut RowContext<'_>, obj: &Map<String, Value>, field: &str) -> Option<bool> {
    match obj.get(field) {
        None | Some(Value::Null) => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(v) => {
            ctx.warn(field, IssueKind::BadType, format!("expected boolean, got {v}"));
            None
        }
    }
}

fn json_habit(ctx: &mut RowContext<'_>, obj: &Map<String, Value>, field: &str) -> Option<Habit> {
    match obj.get(field) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Habit::parse(s).or_else(|| {
            ctx.warn(field, IssueKind::BadType, format!("unknown value {s:?}"));
            None
        }),
        Some(v) => {
            ctx.warn(field, IssueKind::BadType, format!("expected string, got {v}"));
            None
        }
    }
}

fn parse_csv<R: BufRead>(
    reader: R,
    rows: &mut Vec<(usize, ParticipantRecord)>,
    warnings: &mut Vec<ValidationIssue>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for required in CSV_COLUMNS.iter().filter(|c| c.starts_with("rt") || c.starts_with('q') || **c == "participant_id") {
        if !col.contains_key(required) {
            return Err(Error::Parse { line: 1, message: format!("missing column {required}") });
        }
    }
    for (i, row) in rdr.records().enumerate() {
        let line_no = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(Error::Io(std::io::Error::other(e.to_string())));
                }
                warnings.push(line_issue(line_no, "record", IssueKind::BadType, format!("unreadable row ({e}); skipped")));
                continue;
            }
        };
        let cell = |name: &str| col.get(name).and_then(|&c| row.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let Some(id) = cell("participant_id") else {
            warnings.push(line_issue(line_no, "participant_id", IssueKind::Missing, "no participant_id; skipped"));
            continue;
        };
        let index = rows.len();
        let mut ctx = RowContext { line: line_no, index, id: Some(id.to_string()), warnings };

        let int_cells = |ctx: &mut RowContext<'_>, prefix: &str, suffix: &str| -> Vec<Option<i64>> {
            (1..=N_ITEMS)
                .map(|k| {
                    let name = format!("{prefix}{k}{suffix}");
                    cell(&name).and_then(|s| match s.parse::<i64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            ctx.warn(name.clone(), IssueKind::BadType, format!("not an integer: {s:?}"));
                            None
                        }
                    })
                })
                .collect()
        };
        let rt_raw = int_cells(&mut ctx, "rt", "_ms");
        let sc_raw = int_cells(&mut ctx, "q", "");
        let rt_ms = sanitize_sequence(&mut ctx, "rt_ms", rt_raw, valid_rt);
        let item_scores = sanitize_sequence(&mut ctx, "item_scores", sc_raw, valid_score);

        let age = cell("age").and_then(|s| match s.parse::<i64>() {
            Ok(a) if a >= 0 => Some(a),
            _ => {
                ctx.warn("age", IssueKind::BadType, format!("invalid age {s:?}"));
                None
            }
        });
        let gender = match cell("gender") {
            None => Gender::Unknown,
            Some(s) => Gender::parse(s).unwrap_or_else(|| {
                ctx.warn("gender", IssueKind::BadType, format!("unknown gender {s:?}"));
                Gender::Unknown
            }),
        };
        let boolean = |ctx: &mut RowContext<'_>, name: &str| {
            cell(name).and_then(|s| match s {
                "true" => Some(true),
                "false" => Some(false),
                _ => {
                    ctx.warn(name, IssueKind::BadType, format!("expected true/false, got {s:?}"));
                    None
                }
            })
        };
        let history_psych = boolean(&mut ctx, "history_psych");
        let history_phys = boolean(&mut ctx, "history_phys");
        let habit = |ctx: &mut RowContext<'_>, name: &str| {
            cell(name).and_then(|s| {
                Habit::parse(s).or_else(|| {
                    ctx.warn(name, IssueKind::BadType, format!("unknown value {s:?}"));
                    None
                })
            })
        };
        let smoke = habit(&mut ctx, "smoke");
        let drink = habit(&mut ctx, "drink");
        let collected_at = cell("collected_at").map(str::to_string);

        rows.push((
            line_no,
            ParticipantRecord {
                participant_id: id.to_string(),
                age,
                gender,
                rt_ms,
                item_scores,
                history_psych,
                history_phys,
                smoke,
                drink,
                collected_at,
            },
        ));
    }
    Ok(())
}

/// Serialize a cohort. JSONL emits one object per line; CSV always emits the
/// fixed header, even for an empty cohort.
pub fn export_dataset<W: Write>(cohort: &Cohort, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Jsonl => {
            for r in &cohort.records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
            w.write_record(CSV_COLUMNS).map_err(csv_err)?;
            for r in &cohort.records {
                let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
                let mut row: Vec<String> = Vec::with_capacity(CSV_COLUMNS.len());
                row.push(r.participant_id.clone());
                row.push(opt(r.age));
                row.push(r.gender.as_str().to_string());
                for k in 0..N_ITEMS {
                    row.push(opt(r.rt_ms.get(k).copied().flatten()));
                }
                for k in 0..N_ITEMS {
                    row.push(opt(r.item_scores.get(k).copied().flatten()));
                }
                row.push(r.history_psych.map(|b| b.to_string()).unwrap_or_default());
                row.push(r.history_phys.map(|b| b.to_string()).unwrap_or_default());
                row.push(r.smoke.map(|h| h.as_str().to_string()).unwrap_or_default());
                row.push(r.drink.map(|h| h.as_str().to_string()).unwrap_or_default());
                row.push(r.collected_at.clone().unwrap_or_default());
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str, f: Format) -> Result<Cohort> {
        parse_dataset(s.as_bytes(), f, "test")
    }

    #[test]
    fn well_formed_jsonl_line() {
        let line = r#"{"participant_id":"P001","age":30,"gender":"female","rt_ms":[2100,1800,3000,2500,4100,2200,1900],"item_scores":[1,2,1,0,2,1,1]}"#;
        let c = parse_str(line, Format::Jsonl).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.ingest_warnings.is_empty());
        assert_eq!(c.records[0].rt_ms[4], Some(4100));
        assert_eq!(c.records[0].gender, Gender::Female);
    }

    #[test]
    fn csv_missing_rt_cell_warns() {
        let csv = "participant_id,age,gender,rt1_ms,rt2_ms,rt3_ms,rt4_ms,rt5_ms,rt6_ms,rt7_ms,q1,q2,q3,q4,q5,q6,q7,history_psych,history_phys,smoke,drink,collected_at\n\
                   P1,22,male,2100,1800,3000,,4100,2200,1900,1,2,1,0,2,1,1,,,,,\n";
        let c = parse_str(csv, Format::Csv).unwrap();
        assert_eq!(c.records[0].rt_ms[3], None);
        assert_eq!(c.ingest_warnings.len(), 1);
        assert_eq!(c.ingest_warnings[0].kind, IssueKind::Missing);
        assert_eq!(c.ingest_warnings[0].field, "rt_ms[3]");
    }

    #[test]
    fn duplicate_id_is_fatal_and_names_both_lines() {
        let a = r#"{"participant_id":"P001","rt_ms":[1,1,1,1,1,1,1],"item_scores":[0,0,0,0,0,0,0]}"#;
        let s = format!("{a}\n{a}\n");
        match parse_str(&s, Format::Jsonl) {
            Err(Error::DuplicateId { id, first, second }) => {
                assert_eq!(id, "P001");
                assert_eq!((first, second), (1, 2));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_line_is_a_warning_not_a_drop() {
        let good = r#"{"participant_id":"A","rt_ms":[1,1,1,1,1,1,1],"item_scores":[0,0,0,0,0,0,0]}"#;
        let c = parse_str(&format!("not json\n{good}\n"), Format::Jsonl).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.ingest_warnings.len(), 1);
        assert_eq!(c.ingest_warnings[0].line, Some(1));
    }

    #[test]
    fn out_of_range_score_becomes_missing_with_warning() {
        let line = r#"{"participant_id":"A","rt_ms":[1,1,1,1,1,1,1],"item_scores":[0,5,0,0,0,0,0]}"#;
        let c = parse_str(line, Format::Jsonl).unwrap();
        assert_eq!(c.records[0].item_scores[1], None);
        assert_eq!(c.ingest_warnings[0].kind, IssueKind::OutOfRange);
        assert!(validate_record(&c.records[0]).is_empty());
    }

    #[test]
    fn validate_record_cases() {
        let ok = ParticipantRecord::new("A", [1000; 7], [1; 7]);
        assert!(validate_record(&ok).is_empty());

        let mut five = ok.clone();
        five.item_scores[2] = Some(5);
        let issues = validate_record(&five);
        assert_eq!(issues.len(), 1);
        assert_eq!((issues[0].field.as_str(), issues[0].kind), ("item_scores", IssueKind::OutOfRange));

        let mut short = ok.clone();
        short.rt_ms.pop();
        let issues = validate_record(&short);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::WrongLength);

        let mut many = ok;
        many.rt_ms[0] = Some(-5);
        many.item_scores.push(Some(1));
        assert_eq!(validate_record(&many).len(), 2);
    }

    #[test]
    fn empty_cohort_exports_header_only_csv() {
        let mut buf = Vec::new();
        export_dataset(&Cohort::default(), Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn missing_rt_round_trips_through_empty_cell() {
        let mut r = ParticipantRecord::new("A", [1500; 7], [2; 7]);
        r.rt_ms[3] = None;
        r.smoke = Some(Habit::Former);
        let c = Cohort::new(vec![r], "t");
        let mut buf = Vec::new();
        export_dataset(&c, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("1500,,1500"));
        let back = parse_dataset(&buf[..], Format::Csv, "t").unwrap();
        assert_eq!(back.records, c.records);
    }

    #[test]
    fn three_record_jsonl_round_trip() {
        let recs: Vec<_> = (0..3)
            .map(|i| ParticipantRecord::new(format!("P{i}"), [1000 + i; 7], [i % 5; 7]))
            .collect();
        let c = Cohort::new(recs, "t");
        let mut buf = Vec::new();
        export_dataset(&c, Format::Jsonl, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = parse_dataset(&buf[..], Format::Jsonl, "t").unwrap();
        assert_eq!(back.records, c.records);
    }
}
