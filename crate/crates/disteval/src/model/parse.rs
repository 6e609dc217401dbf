//! Parsers and serializers for the input file formats.
//!
//! Run files are whitespace-separated lines `request_id item_id rank score
//! system_id`; truth files are `request_id item_id gain`. `#` starts a
//! comment line in both. Attribute tables are CSV with a header row whose
//! first column is the subject id; multi-valued cells use `|` separators.
//! All formats accept UTF-8 with LF or CRLF line endings.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::model::{AttributeTable, Run, SubjectKind, TruthSet};

/// Parses a run file into a validated [`Run`].
///
/// Lines may arrive in any order; per request the ranks must form a
/// contiguous `1..=k` sequence with no duplicate items, and every line must
/// name the same system.
pub fn parse_run<R: Read>(reader: R) -> Result<Run> {
    let mut system_id: Option<String> = None;
    // request -> rank -> item
    let mut ranked: BTreeMap<String, BTreeMap<u32, String>> = BTreeMap::new();

    for (line_no, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                line_no,
                format!("expected 5 fields `request item rank score system`, got {}", fields.len()),
            ));
        }
        let (request_id, item_id, rank_str, score_str, system) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        let rank: u32 = rank_str
            .parse()
            .map_err(|_| Error::parse(line_no, format!("non-numeric rank `{rank_str}`")))?;
        if rank == 0 {
            return Err(Error::parse(line_no, "ranks are 1-based; got 0"));
        }
        let _score: f64 = score_str
            .parse()
            .map_err(|_| Error::parse(line_no, format!("non-numeric score `{score_str}`")))?;
        match &system_id {
            None => system_id = Some(system.to_string()),
            Some(existing) if existing != system => {
                return Err(Error::parse(
                    line_no,
                    format!("mixed system ids in one file: `{existing}` and `{system}`"),
                ));
            }
            Some(_) => {}
        }
        let entry = ranked.entry(request_id.to_string()).or_default();
        if entry.values().any(|existing| existing == item_id) {
            return Err(Error::parse(
                line_no,
                format!("duplicate item {item_id} for request {request_id}"),
            ));
        }
        if entry.insert(rank, item_id.to_string()).is_some() {
            return Err(Error::parse(
                line_no,
                format!("duplicate rank {rank} for request {request_id}"),
            ));
        }
    }

    let system_id = system_id.ok_or_else(|| Error::invalid("run file contains no records"))?;
    let mut requests = BTreeMap::new();
    for (request_id, by_rank) in ranked {
        let k = by_rank.len() as u32;
        for (expected, (&rank, _)) in (1..=k).zip(by_rank.iter()) {
            if rank != expected {
                return Err(Error::invalid(format!(
                    "request {request_id}: ranks are not contiguous from 1 (missing rank {expected})"
                )));
            }
        }
        requests.insert(request_id, by_rank.into_values().collect());
    }
    Ok(Run {
        system_id,
        requests,
    })
}

/// Writes a run in the run-file format, ordered by request then rank.
///
/// `parse_run(serialize_run(run))` reproduces `run` exactly; scores are
/// written as `0` since they are informational only.
pub fn serialize_run<W: Write>(run: &Run, mut writer: W) -> Result<()> {
    for (request_id, items) in &run.requests {
        for (idx, item_id) in items.iter().enumerate() {
            writeln!(
                writer,
                "{request_id} {item_id} {} 0 {}",
                idx + 1,
                run.system_id
            )?;
        }
    }
    Ok(())
}

/// Parses a truth file into a [`TruthSet`].
pub fn parse_truth<R: Read>(reader: R) -> Result<TruthSet> {
    let mut truth = TruthSet::new();
    for (line_no, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!("expected 3 fields `request item gain`, got {}", fields.len()),
            ));
        }
        let gain: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("non-numeric gain `{}`", fields[2])))?;
        truth
            .insert(fields[0], fields[1], gain)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    Ok(truth)
}

/// Writes a truth set in the truth-file format, sorted by request then item.
pub fn serialize_truth<W: Write>(truth: &TruthSet, mut writer: W) -> Result<()> {
    for (request_id, item_id, gain) in truth.iter() {
        writeln!(writer, "{request_id} {item_id} {gain}")?;
    }
    Ok(())
}

/// Parses an attribute CSV into an [`AttributeTable`].
///
/// The header names the columns; the first column holds subject ids. Empty
/// cells map to the `unknown` value.
pub fn parse_attributes<R: Read>(reader: R, kind: SubjectKind) -> Result<AttributeTable> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    if headers.is_empty()
        || headers.iter().any(|h| h.trim().is_empty())
        || headers.len() < 2
    {
        return Err(Error::invalid(
            "attribute CSV needs a header naming the subject column and at least one attribute",
        ));
    }
    let attribute_columns: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    if attribute_columns.is_empty() || attribute_columns.iter().any(|c| c.trim().is_empty()) {
        return Err(Error::invalid(
            "attribute CSV header must name a subject column and at least one attribute",
        ));
    }

    let mut table = AttributeTable::new(kind);
    for name in &attribute_columns {
        table.declare_attribute(name.clone())?;
    }
    for (row_no, record) in csv_reader.records().enumerate() {
        let record = record?;
        let subject_id = record
            .get(0)
            .ok_or_else(|| Error::parse(row_no + 2, "missing subject id"))?
            .to_string();
        if table.contains_subject(&subject_id) {
            return Err(Error::parse(
                row_no + 2,
                format!("duplicate subject id {subject_id}"),
            ));
        }
        for (col, attribute) in attribute_columns.iter().enumerate() {
            let cell = record.get(col + 1).unwrap_or("");
            let values: Vec<String> = if cell.trim().is_empty() {
                Vec::new()
            } else {
                cell.split('|').map(|v| v.trim().to_string()).collect()
            };
            table.set_values(subject_id.clone(), attribute.clone(), values)?;
        }
    }
    Ok(table)
}

/// Writes an attribute table as CSV with `|`-joined multi-valued cells.
pub fn serialize_attributes<W: Write>(table: &AttributeTable, writer: W) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let attributes: Vec<&str> = table.attribute_names().collect();
    let mut header = vec![match table.kind() {
        SubjectKind::User => "user",
        SubjectKind::Item => "item",
    }];
    header.extend(attributes.iter());
    csv_writer.write_record(&header)?;
    let subjects: Vec<String> = table.subject_ids().map(String::from).collect();
    for subject in &subjects {
        let mut row = vec![subject.clone()];
        for attribute in &attributes {
            let values = table.values(subject, attribute)?;
            row.push(values.join("|"));
        }
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush().map_err(Error::Io)?;
    Ok(())
}
