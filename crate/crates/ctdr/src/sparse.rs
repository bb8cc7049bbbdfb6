//! Line-oriented sparse vectors: a header `width=<d> classes=<K>` followed by
//! `label idx:val idx:val ...` lines with 0-based indices.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ctdr_core::data::Dataset;
use ctdr_core::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct SparseError {
    pub line: usize,
    pub kind: SparseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparseErrorKind {
    #[error("expected header `width=<d> classes=<K>`")]
    Header,
    #[error("malformed entry `{0}`")]
    Malformed(String),
    #[error("bad label `{0}`")]
    Label(String),
    #[error("index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("duplicate index {0}")]
    DuplicateIndex(usize),
}

fn err(line: usize, kind: SparseErrorKind) -> SparseError {
    SparseError { line, kind }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut width = None;
    let mut classes = None;
    for field in line.split_whitespace() {
        let (k, v) = field.split_once('=')?;
        let v: usize = v.parse().ok()?;
        match k {
            "width" if width.is_none() => width = Some(v),
            "classes" if classes.is_none() => classes = Some(v),
            _ => return None,
        }
    }
    Some((width?, classes?))
}

/// Parses the whole text into a dense dataset. An empty text yields an empty
/// dataset of width 0 and 2 classes.
pub fn parse_sparse(text: &str, name: &str) -> Result<Dataset, SparseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let Some((_, header)) = lines.by_ref().find(|(_, l)| !l.is_empty()) else {
        return Ok(Dataset::new(name, Matrix::zeros(0, 0), Some(Vec::new()), 2).expect("empty dataset"));
    };
    let (width, classes) = parse_header(header).ok_or_else(|| err(1, SparseErrorKind::Header))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let mut fields = line.split_whitespace();
        let label_text = fields.next().unwrap_or_default();
        let label: usize = label_text
            .parse()
            .ok()
            .filter(|&y| y < classes)
            .ok_or_else(|| err(n, SparseErrorKind::Label(label_text.to_string())))?;
        let mut row = vec![0.0; width];
        let mut seen = BTreeSet::new();
        for field in fields {
            let malformed = || err(n, SparseErrorKind::Malformed(field.to_string()));
            let (i, v) = field.split_once(':').ok_or_else(malformed)?;
            let index: usize = i.parse().map_err(|_| malformed())?;
            let value: f64 = v.parse().map_err(|_| malformed())?;
            if !value.is_finite() {
                return Err(malformed());
            }
            if index >= width {
                return Err(err(n, SparseErrorKind::IndexOutOfRange { index, width }));
            }
            if !seen.insert(index) {
                return Err(err(n, SparseErrorKind::DuplicateIndex(index)));
            }
            row[index] = value;
        }
        data.extend(row);
        labels.push(label);
    }
    let features = Matrix::from_vec(labels.len(), width, data).expect("rows have the declared width");
    Ok(Dataset::new(name, features, Some(labels), classes).expect("labels checked per line"))
}

pub fn load_sparse(path: &Path) -> crate::CliResult<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| crate::CliError::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    parse_sparse(&text, &name).map_err(|e| crate::CliError::format(path, e))
}

/// Writes nonzero entries only. Values use the shortest round-tripping form.
pub fn write_sparse(labels: &[usize], features: &Matrix, num_classes: usize) -> String {
    let mut out = format!("width={} classes={}\n", features.cols(), num_classes);
    for (row, &y) in features.row_iter().zip(labels) {
        write!(out, "{y}").unwrap();
        for (i, &v) in row.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            write!(out, " {i}:{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}
