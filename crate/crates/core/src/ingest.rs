//! Schema-driven CSV ingestion and one-hot encoding, with a default schema
//! for the Seoul bike sharing demand file.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Matrix, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    NumericFeature,
    CategoricalFeature,
    Target,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn new(name: &str, role: ColumnRole) -> Self {
        ColumnSchema {
            name: name.to_string(),
            role,
        }
    }
}

/// Ordered column declarations; the order fixes the feature order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        let s = Schema { columns };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.role == ColumnRole::Target).count();
        if targets != 1 {
            return Err(Error::usage(format!("schema needs exactly one target column, found {targets}")));
        }
        let features = self
            .columns
            .iter()
            .filter(|c| matches!(c.role, ColumnRole::NumericFeature | ColumnRole::CategoricalFeature))
            .count();
        if features == 0 {
            return Err(Error::usage("schema needs at least one feature column"));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::usage(format!("column \"{}\" declared twice", c.name)));
            }
        }
        Ok(())
    }

    /// Reads a JSON sidecar: an array of `{"name", "role"}` objects.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Schema = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    /// Every column numeric, the last one the target.
    pub fn all_numeric(names: &[&str]) -> Result<Self> {
        let n = names.len();
        Schema::new(
            names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let role = if i + 1 == n {
                        ColumnRole::Target
                    } else {
                        ColumnRole::NumericFeature
                    };
                    ColumnSchema::new(name, role)
                })
                .collect(),
        )
    }

    /// Date dropped; hour and weather numeric; season, holiday and
    /// functioning-day flags one-hot encoded; rented bike count as target.
    pub fn seoul_bike() -> Self {
        use ColumnRole::*;
        let cols = [
            ("Date", Dropped),
            ("Rented Bike Count", Target),
            ("Hour", NumericFeature),
            ("Temperature", NumericFeature),
            ("Humidity", NumericFeature),
            ("Wind speed", NumericFeature),
            ("Visibility", NumericFeature),
            ("Dew point temperature", NumericFeature),
            ("Solar Radiation", NumericFeature),
            ("Rainfall", NumericFeature),
            ("Snowfall", NumericFeature),
            ("Seasons", CategoricalFeature),
            ("Holiday", CategoricalFeature),
            ("Functioning Day", CategoricalFeature),
        ];
        Schema {
            columns: cols.iter().map(|&(n, r)| ColumnSchema::new(n, r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub schema: ColumnSchema,
    pub data: ColumnData,
}

/// Parsed table, columns in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: usize,
    pub source: String,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.schema.name == name)
    }
}

/// Header cell with any trailing parenthesised unit removed, e.g.
/// `Temperature(°C)` → `Temperature`.
pub fn normalize_header(raw: &str) -> String {
    let s = raw.trim().trim_start_matches('\u{feff}').trim();
    match (s.rfind('('), s.ends_with(')')) {
        (Some(open), true) if open > 0 => s[..open].trim_end().to_string(),
        _ => s.to_string(),
    }
}

/// UTF-8 if valid, otherwise Latin-1 (every byte one code point).
fn decode(bytes: Vec<u8>) -> String {
    match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| char::from(b)).collect(),
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Table> {
    let bytes = std::fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_csv(&decode(bytes), schema, &path.display().to_string()).map_err(|e| match e {
        Error::Usage(message) => Error::Ingest {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses CSV text against `schema`. Header names are matched after
/// [`normalize_header`], in any order; every file column must be declared.
/// Row numbers in errors count data rows from 1.
pub fn parse_csv(text: &str, schema: &Schema, source: &str) -> Result<Table> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(normalize_header).collect();

    let mut position = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if position.insert(h.as_str(), i).is_some() {
            return Err(Error::usage(format!("duplicate header \"{h}\"")));
        }
    }
    let declared: BTreeSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let missing: Vec<&str> = declared.iter().copied().filter(|n| !position.contains_key(n)).collect();
    let extra: Vec<&str> = header.iter().map(String::as_str).filter(|h| !declared.contains(h)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::usage(format!(
            "header does not match schema (missing: {missing:?}, undeclared: {extra:?})"
        )));
    }

    let mut data: Vec<ColumnData> = schema
        .columns
        .iter()
        .map(|c| match c.role {
            ColumnRole::NumericFeature | ColumnRole::Target => ColumnData::Numeric(Vec::new()),
            _ => ColumnData::Text(Vec::new()),
        })
        .collect();

    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        rows += 1;
        if rec.len() != header.len() {
            return Err(Error::usage(format!(
                "row {rows} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        for (col, out) in schema.columns.iter().zip(data.iter_mut()) {
            let cell = &rec[position[col.name.as_str()]];
            match out {
                ColumnData::Numeric(v) => {
                    let x: f64 = cell.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| Error::BadCell {
                        row: rows,
                        column: col.name.clone(),
                        message: format!("cannot parse \"{cell}\" as a number"),
                    })?;
                    v.push(x);
                }
                ColumnData::Text(v) => v.push(cell.to_string()),
            }
        }
    }

    Ok(Table {
        columns: schema
            .columns
            .iter()
            .cloned()
            .zip(data)
            .map(|(schema, data)| Column { schema, data })
            .collect(),
        rows,
        source: source.to_string(),
    })
}

/// Frozen feature layout: numeric columns verbatim, categorical columns
/// expanded into one indicator per category in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub schema: Schema,
    /// Categories per categorical column, keyed by column name.
    pub categories: Vec<(String, Vec<String>)>,
}

impl Encoder {
    pub fn fit(table: &Table) -> Result<Self> {
        let mut categories = Vec::new();
        for col in &table.columns {
            if col.schema.role == ColumnRole::CategoricalFeature {
                let ColumnData::Text(values) = &col.data else {
                    return Err(Error::usage(format!("column \"{}\" is not categorical", col.schema.name)));
                };
                let set: BTreeSet<&String> = values.iter().collect();
                categories.push((col.schema.name.clone(), set.into_iter().cloned().collect()));
            }
        }
        Ok(Encoder {
            schema: Schema {
                columns: table.columns.iter().map(|c| c.schema.clone()).collect(),
            },
            categories,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in &self.schema.columns {
            match c.role {
                ColumnRole::NumericFeature => names.push(c.name.clone()),
                ColumnRole::CategoricalFeature => {
                    for cat in self.categories_of(&c.name) {
                        names.push(format!("{}={}", c.name, cat));
                    }
                }
                _ => {}
            }
        }
        names
    }

    fn categories_of(&self, column: &str) -> &[String] {
        self.categories
            .iter()
            .find(|(n, _)| n == column)
            .map_or(&[], |(_, c)| c.as_slice())
    }

    pub fn transform(&self, table: &Table) -> Result<Dataset<f64>> {
        let names = self.feature_names();
        let mut x = Vec::with_capacity(table.rows * names.len());
        let mut y = Vec::with_capacity(table.rows);
        let mut target_name = String::new();
        let mut columns = Vec::new();
        for c in &self.schema.columns {
            let col = table
                .column(&c.name)
                .ok_or_else(|| Error::usage(format!("table lacks column \"{}\"", c.name)))?;
            columns.push((c, col));
        }
        for i in 0..table.rows {
            for (c, col) in &columns {
                match (c.role, &col.data) {
                    (ColumnRole::NumericFeature, ColumnData::Numeric(v)) => x.push(v[i]),
                    (ColumnRole::CategoricalFeature, ColumnData::Text(v)) => {
                        let cats = self.categories_of(&c.name);
                        let hit = cats.binary_search(&v[i]).map_err(|_| Error::UnseenCategory {
                            column: c.name.clone(),
                            value: v[i].clone(),
                        })?;
                        x.extend((0..cats.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                    }
                    (ColumnRole::Target, ColumnData::Numeric(v)) => {
                        target_name.clone_from(&c.name);
                        y.push(v[i]);
                    }
                    (ColumnRole::Dropped, _) => {}
                    _ => return Err(Error::usage(format!("column \"{}\" has the wrong type", c.name))),
                }
            }
        }
        let x = Matrix::from_vec(table.rows, names.len(), x)?;
        Ok(Dataset::new(x, y, names, target_name)?.with_meta(Provenance {
            source: table.source.clone(),
            ..Provenance::default()
        }))
    }
}

/// Fits an encoder on `table` and applies it.
pub fn encode(table: &Table) -> Result<Dataset<f64>> {
    Encoder::fit(table)?.transform(table)
}

/// Loads and encodes a Seoul bike sharing CSV with the default schema.
pub fn load_seoul_bike(path: &Path) -> Result<Dataset<f64>> {
    encode(&load_csv(path, &Schema::seoul_bike())?)
}
