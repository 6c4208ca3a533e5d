//! CSV ingestion.
//!
//! Files are comma separated with a header row. A cell that is empty or the
//! literal `NA` is missing. Labels must be `0` or `1`. Columns without an
//! explicit [`ColumnSpec`] are numeric when every present cell parses as a
//! number and categorical otherwise.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use figrf_core::{ColumnKind, ColumnSpec, Dataset, Imputer, Label, MissingPolicy};

/// Category reserved for missing cells under the placeholder policy.
pub const MISSING_CATEGORY: &str = "<missing>";

pub fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell == "NA"
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: file not found", .path.display())]
    MissingFile { path: PathBuf },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: label column '{column}' is not in the header", .path.display())]
    UnknownLabelColumn { path: PathBuf, column: String },
    #[error("{}: column spec '{column}' does not name a feature column", .path.display())]
    UnknownColumn { path: PathBuf, column: String },
    #[error("{}: column '{column}': {reason}", .path.display())]
    BadSpec {
        path: PathBuf,
        column: String,
        reason: String,
    },
    #[error("{}:{line}: row has {found} cells, header has {expected}", .path.display())]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{}:{line}: label '{value}' is not 0 or 1", .path.display())]
    NonBinaryLabel {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{}:{line}: column '{column}': '{value}' is not a number", .path.display())]
    BadNumber {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{}:{line}: column '{column}': unknown category '{value}'", .path.display())]
    UnknownCategory {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{}: columns do not match the model (missing: [{}], unexpected: [{}])",
        .path.display(), .missing.join(", "), .extra.join(", "))]
    SchemaMismatch {
        path: PathBuf,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("{}: {source}", .path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: figrf_core::Error,
    },
}

/// Header and data rows of a CSV file, each row tagged with its line number.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, LoadError> {
        let path = path.to_path_buf();
        let file = File::open(&path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                LoadError::MissingFile { path: path.clone() }
            } else {
                LoadError::Io {
                    path: path.clone(),
                    source,
                }
            }
        })?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let csv_err = |source| LoadError::Csv {
            path: path.clone(),
            source,
        };
        let header: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|h| h.trim().to_owned())
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(LoadError::RaggedRow {
                    path,
                    line,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            rows.push((line, record));
        }
        Ok(Self { path, header, rows })
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn labels(&self, label_index: usize) -> Result<Vec<Label>, LoadError> {
        self.rows
            .iter()
            .map(|(line, record)| {
                let cell = record[label_index].trim();
                match cell.parse::<f64>() {
                    Ok(0.0) => Ok(0),
                    Ok(1.0) => Ok(1),
                    _ => Err(LoadError::NonBinaryLabel {
                        path: self.path.clone(),
                        line: *line,
                        value: cell.to_owned(),
                    }),
                }
            })
            .collect()
    }

    /// Encodes one column under a resolved spec.
    fn encode(&self, index: usize, spec: &ColumnSpec) -> Result<Vec<f64>, LoadError> {
        self.rows
            .iter()
            .map(|(line, record)| {
                encode_cell(spec, &record[index]).map_err(|e| e.at(&self.path, *line, spec))
            })
            .collect()
    }
}

enum CellError {
    BadNumber(String),
    UnknownCategory(String),
}

impl CellError {
    fn at(self, path: &Path, line: u64, spec: &ColumnSpec) -> LoadError {
        let (path, column) = (path.to_path_buf(), spec.name.clone());
        match self {
            CellError::BadNumber(value) => LoadError::BadNumber {
                path,
                line,
                column,
                value,
            },
            CellError::UnknownCategory(value) => LoadError::UnknownCategory {
                path,
                line,
                column,
                value,
            },
        }
    }
}

/// Numeric value of one cell; `NaN` marks a cell left for the imputer.
fn encode_cell(spec: &ColumnSpec, cell: &str) -> Result<f64, CellError> {
    let missing = is_missing(cell);
    match spec.kind {
        ColumnKind::Numeric if missing => Ok(f64::NAN),
        ColumnKind::Numeric => cell
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CellError::BadNumber(cell.to_owned())),
        ColumnKind::Categorical if missing => Ok(match spec.missing_policy {
            MissingPolicy::Median => f64::NAN,
            MissingPolicy::PlaceholderCategory => spec
                .code_of(MISSING_CATEGORY)
                .map_or(f64::NAN, |c| c as f64),
        }),
        ColumnKind::Categorical => spec
            .code_of(cell.trim())
            .map(|c| c as f64)
            .ok_or_else(|| CellError::UnknownCategory(cell.to_owned())),
    }
}

/// Completes a categorical spec's map from the observed cells: sorted
/// distinct values, then the placeholder under the placeholder policy.
fn resolve_categories(spec: &mut ColumnSpec, cells: impl Iterator<Item = String>) {
    if spec.category_map.is_empty() {
        let seen: BTreeSet<String> = cells
            .filter(|c| !is_missing(c))
            .map(|c| c.trim().to_owned())
            .collect();
        spec.category_map = seen.into_iter().collect();
    }
    if spec.missing_policy == MissingPolicy::PlaceholderCategory
        && spec.code_of(MISSING_CATEGORY).is_none()
    {
        spec.category_map.push(MISSING_CATEGORY.to_owned());
    }
}

/// A file decoded into features with `NaN` for cells awaiting imputation,
/// together with the fully resolved column specs.
#[derive(Debug, Clone)]
pub struct RawData {
    pub data: Dataset,
    pub columns: Vec<ColumnSpec>,
    pub label_column: String,
}

/// Decodes a labelled CSV. Missing numeric cells stay `NaN`.
pub fn load_raw(
    path: impl AsRef<Path>,
    label_column: &str,
    specs: &[ColumnSpec],
) -> Result<RawData, LoadError> {
    let table = Table::read(path.as_ref())?;
    let path = table.path.clone();
    let label_index =
        table
            .column_index(label_column)
            .ok_or_else(|| LoadError::UnknownLabelColumn {
                path: path.clone(),
                column: label_column.to_owned(),
            })?;
    for spec in specs {
        if spec.name == label_column || table.column_index(&spec.name).is_none() {
            return Err(LoadError::UnknownColumn {
                path,
                column: spec.name.clone(),
            });
        }
    }
    let labels = table.labels(label_index)?;

    let mut columns = Vec::new();
    let mut values = Vec::new();
    for (index, name) in table.header.iter().enumerate() {
        if index == label_index {
            continue;
        }
        let cells = || table.rows.iter().map(move |(_, r)| r[index].to_owned());
        let mut spec = match specs.iter().find(|s| &s.name == name) {
            Some(s) => s.clone(),
            None if cells().all(|c| is_missing(&c) || c.trim().parse::<f64>().is_ok()) => {
                ColumnSpec::numeric(name.clone())
            }
            None => ColumnSpec::categorical(name.clone()),
        };
        if spec.kind == ColumnKind::Numeric
            && spec.missing_policy == MissingPolicy::PlaceholderCategory
        {
            return Err(LoadError::BadSpec {
                path,
                column: name.clone(),
                reason: "placeholder categories apply to categorical columns only".into(),
            });
        }
        if spec.kind == ColumnKind::Categorical {
            resolve_categories(&mut spec, cells());
        }
        spec.validate().map_err(|source| LoadError::Data {
            path: path.clone(),
            source,
        })?;
        values.push(table.encode(index, &spec)?);
        columns.push(spec);
    }
    let names = columns.iter().map(|c| c.name.clone()).collect();
    let kinds = columns.iter().map(|c| c.kind).collect();
    let data = Dataset::new(values, labels, names, kinds).map_err(|source| LoadError::Data {
        path: path.clone(),
        source,
    })?;
    Ok(RawData {
        data,
        columns,
        label_column: label_column.to_owned(),
    })
}

/// Loads a labelled CSV with missing cells imputed by column medians.
///
/// The medians come from the whole file. Pipelines that hold out test rows
/// should use [`load_raw`] and fit an [`Imputer`] on the training rows.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    specs: &[ColumnSpec],
) -> Result<Dataset, LoadError> {
    let raw = load_raw(path.as_ref(), label_column, specs)?;
    let data = Imputer::fit(&raw.data).apply(&raw.data);
    data.ensure_trainable().map_err(|source| LoadError::Data {
        path: path.as_ref().to_path_buf(),
        source,
    })?;
    Ok(data)
}

/// Rows decoded against a fixed schema, e.g. a saved model's.
#[derive(Debug, Clone)]
pub struct SchemaRows {
    /// Raw row-major features in schema order; missing cells are `NaN`.
    pub rows: Vec<Vec<f64>>,
    /// Present when the file carries the label column.
    pub labels: Option<Vec<Label>>,
}

/// Decodes a CSV whose columns must be exactly the schema's features, plus
/// optionally the label column, in any order.
pub fn load_with_schema(
    path: impl AsRef<Path>,
    columns: &[ColumnSpec],
    label_column: &str,
) -> Result<SchemaRows, LoadError> {
    let table = Table::read(path.as_ref())?;
    let indices: Vec<Option<usize>> = columns
        .iter()
        .map(|c| table.column_index(&c.name))
        .collect();
    let missing: Vec<String> = columns
        .iter()
        .zip(&indices)
        .filter(|(_, i)| i.is_none())
        .map(|(c, _)| c.name.clone())
        .collect();
    let extra: Vec<String> = table
        .header
        .iter()
        .filter(|h| *h != label_column && !columns.iter().any(|c| &c.name == *h))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(LoadError::SchemaMismatch {
            path: table.path,
            missing,
            extra,
        });
    }
    let encoded = columns
        .iter()
        .zip(indices.into_iter().flatten())
        .map(|(spec, index)| table.encode(index, spec))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = (0..table.rows.len())
        .map(|i| encoded.iter().map(|c| c[i]).collect())
        .collect();
    let labels = table
        .column_index(label_column)
        .map(|i| table.labels(i))
        .transpose()?;
    Ok(SchemaRows { rows, labels })
}
