//! Reading and writing cloud collections as CSV or JSON.
//!
//! CSV: header `cloud_id,label,x0,...,x{D-1}[,weight]`, one row per point;
//! rows of a cloud need not be contiguous, clouds keep the order of their
//! first row. JSON: `{"labels": [...], "clouds": [{"id", "label", "points",
//! "weights"?}]}` where `label` is a name from `labels` or an index into it.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CloudCollection, LabelDictionary, PointCloud};
use crate::error::{CderError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` means JSON; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn read_collection(path: &Path) -> Result<CloudCollection> {
    let text = fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Csv => parse_csv(text.as_bytes()),
        Format::Json => parse_json(&text),
    }
}

pub fn write_collection(path: &Path, collection: &CloudCollection) -> Result<()> {
    let mut file = fs::File::create(path)?;
    match Format::from_path(path) {
        Format::Csv => write_csv(&mut file, collection),
        Format::Json => {
            serde_json::to_writer_pretty(&mut file, &JsonCollection::from(collection))?;
            writeln!(file)?;
            Ok(())
        }
    }
}

type PendingCloud = (String, usize, Vec<Vec<f64>>, Vec<f64>);

fn parse_err(line: u64, message: impl Into<String>) -> CderError {
    CderError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses the CSV point format. Line numbers in errors count the header as
/// line 1.
pub fn parse_csv<R: Read>(reader: R) -> Result<CloudCollection> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "cloud_id" || cols[1] != "label" {
        return Err(parse_err(1, "header must start with `cloud_id,label,x0`"));
    }
    let has_weight = cols.last() == Some(&"weight");
    let dim = cols.len() - 2 - usize::from(has_weight);
    if dim == 0 {
        return Err(parse_err(1, "no coordinate columns"));
    }
    for (k, c) in cols[2..2 + dim].iter().enumerate() {
        if *c != format!("x{k}") {
            return Err(parse_err(1, format!("expected column `x{k}`, found `{c}`")));
        }
    }

    let mut dict = LabelDictionary::default();
    // (id, label, points, weights) in order of first appearance
    let mut clouds: Vec<PendingCloud> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (row_no, record) in rdr.records().enumerate() {
        let line = row_no as u64 + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_err(
                line,
                format!("row has {len} fields, expected {expected_len} (dimension {dim})"),
            ),
            _ => parse_err(line, e.to_string()),
        })?;
        let id = record[0].to_string();
        let label_name = &record[1];
        if id.is_empty() || label_name.is_empty() {
            return Err(parse_err(line, "empty cloud id or label"));
        }
        let label = dict.intern(label_name);
        let mut point = Vec::with_capacity(dim);
        for k in 0..dim {
            let v: f64 = record[2 + k]
                .parse()
                .map_err(|_| parse_err(line, format!("x{k} is not a number: `{}`", &record[2 + k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("x{k} is not finite")));
            }
            point.push(v);
        }
        let weight = if has_weight {
            let w: f64 = record[2 + dim]
                .parse()
                .map_err(|_| parse_err(line, format!("weight is not a number: `{}`", &record[2 + dim])))?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(parse_err(line, "weight must be positive and finite"));
            }
            Some(w)
        } else {
            None
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            clouds.push((id.clone(), label, Vec::new(), Vec::new()));
            clouds.len() - 1
        });
        let cloud = &mut clouds[slot];
        if cloud.1 != label {
            return Err(parse_err(line, format!("cloud `{id}` already has a different label")));
        }
        cloud.2.push(point);
        if let Some(w) = weight {
            cloud.3.push(w);
        }
    }
    if clouds.is_empty() {
        return Err(CderError::NoClouds);
    }
    let clouds = clouds
        .into_iter()
        .map(|(id, label, points, weights)| {
            let c = PointCloud::new(id, label, points);
            if has_weight {
                c.with_weights(weights)
            } else {
                c
            }
        })
        .collect();
    CloudCollection::new(dict.into_labels(), clouds)
}

pub fn write_csv<W: Write>(writer: W, collection: &CloudCollection) -> Result<()> {
    let weighted = collection.is_weighted();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cloud_id".to_string(), "label".to_string()];
    header.extend((0..collection.dim()).map(|k| format!("x{k}")));
    if weighted {
        header.push("weight".into());
    }
    let csv_err = |e: csv::Error| CderError::Malformed(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for cloud in collection.clouds() {
        let label = &collection.labels()[cloud.label];
        for (j, p) in cloud.points.iter().enumerate() {
            let mut row = vec![cloud.id.clone(), label.clone()];
            row.extend(p.iter().map(|v| v.to_string()));
            if let Some(ws) = &cloud.weights {
                row.push(ws[j].to_string());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonLabel {
    Index(usize),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonCloud {
    id: serde_json::Value,
    label: JsonLabel,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonCollection {
    #[serde(default)]
    labels: Vec<String>,
    clouds: Vec<JsonCloud>,
}

impl From<&CloudCollection> for JsonCollection {
    fn from(c: &CloudCollection) -> Self {
        Self {
            labels: c.labels().to_vec(),
            clouds: c
                .clouds()
                .iter()
                .map(|x| JsonCloud {
                    id: serde_json::Value::String(x.id.clone()),
                    label: JsonLabel::Name(c.labels()[x.label].clone()),
                    points: x.points.clone(),
                    weights: x.weights.clone(),
                })
                .collect(),
        }
    }
}

/// Parses the JSON collection format. Labels not listed in `labels` are
/// appended in order of first appearance.
pub fn parse_json(text: &str) -> Result<CloudCollection> {
    let doc: JsonCollection = serde_json::from_str(text)?;
    let mut dict = LabelDictionary::from_names(&doc.labels)?;
    let n_declared = doc.labels.len();
    let mut clouds = Vec::with_capacity(doc.clouds.len());
    for (i, c) in doc.clouds.into_iter().enumerate() {
        let id = match c.id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        let label = match c.label {
            JsonLabel::Index(k) if k < n_declared => k,
            JsonLabel::Index(k) => {
                return Err(CderError::Malformed(format!(
                    "cloud {i} (`{id}`): label index {k} outside 0..{n_declared}"
                )))
            }
            JsonLabel::Name(name) => dict.intern(&name),
        };
        let cloud = PointCloud::new(id, label, c.points);
        clouds.push(match c.weights {
            Some(w) => cloud.with_weights(w),
            None => cloud,
        });
    }
    CloudCollection::new(dict.into_labels(), clouds)
}
