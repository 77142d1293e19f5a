//! View ingestion, standardization and cross-covariance blocks.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SccaError};

/// An `n × p` observation matrix for one view (rows are samples).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    data: DMatrix<f64>,
    names: Vec<String>,
    centered: bool,
    scaled: bool,
}

impl ViewMatrix {
    /// Builds an unstandardized view. Names default to `V1..Vp` when `None`.
    pub fn new(data: DMatrix<f64>, names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = data.shape();
        if n < 2 {
            return Err(SccaError::Dimension(format!(
                "a view needs at least 2 samples, got {n}"
            )));
        }
        if p < 1 {
            return Err(SccaError::Dimension("a view needs at least 1 column".into()));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(SccaError::Parse {
                line: pos % n + 1,
                message: format!("non-finite value in column {}", pos / n + 1),
            });
        }
        let names = match names {
            Some(names) if names.len() != p => {
                return Err(SccaError::Dimension(format!("{} names for {p} columns", names.len())))
            }
            Some(names) => names,
            None => default_names(p),
        };
        Ok(ViewMatrix {
            data,
            names,
            centered: false,
            scaled: false,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    /// Rows selected by `rows`, in the given order. Standardization flags are
    /// dropped since the subset is no longer centered.
    pub fn select_rows(&self, rows: &[usize]) -> ViewMatrix {
        let data = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.data[(rows[i], j)]);
        ViewMatrix {
            data,
            names: self.names.clone(),
            centered: false,
            scaled: false,
        }
    }

    /// Columns selected by `cols`; standardization flags carry over.
    pub fn select_columns(&self, cols: &[usize]) -> ViewMatrix {
        let data = self.data.select_columns(cols);
        ViewMatrix {
            data,
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            centered: self.centered,
            scaled: self.scaled,
        }
    }

    /// Row permutation: row `i` of the result is row `perm[i]` of `self`.
    /// Centering survives a permutation.
    pub fn permute_rows(&self, perm: &[usize]) -> ViewMatrix {
        let mut out = self.select_rows(perm);
        out.centered = self.centered;
        out.scaled = self.scaled;
        out
    }
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

/// Whether the first input row holds column names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// A first row with any non-numeric cell is a header.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Field delimiter; `None` picks tab for `.tsv`/`.tab` files and comma
    /// otherwise.
    pub delimiter: Option<u8>,
    pub header: HeaderMode,
}

/// Reads a delimited numeric table into an unstandardized view.
pub fn load_view(path: impl AsRef<Path>, options: &LoadOptions) -> Result<ViewMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let delimiter = options.delimiter.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "tsv" || ext == "tab" => b'\t',
            _ => b',',
        }
    });
    parse_view(&text, delimiter, options.header)
}

/// Parses delimited text; line numbers in errors are 1-based file lines.
pub fn parse_view(text: &str, delimiter: u8, header: HeaderMode) -> Result<ViewMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut names: Option<Vec<String>> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SccaError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(idx + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        let first = idx == 0;
        let parsed: Vec<std::result::Result<f64, &str>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().map_err(|_| cell))
            .collect();
        let is_header = first
            && match header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => parsed.iter().any(|c| c.is_err()),
            };
        if is_header {
            names = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(SccaError::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (j, cell) in parsed.into_iter().enumerate() {
            match cell {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(v) => {
                    return Err(SccaError::Parse {
                        line,
                        message: format!("non-finite value {v} in column {}", j + 1),
                    })
                }
                Err(raw) => {
                    return Err(SccaError::Parse {
                        line,
                        message: format!("non-numeric cell {raw:?} in column {}", j + 1),
                    })
                }
            }
        }
        rows += 1;
    }

    let p = width.unwrap_or(0);
    if rows < 2 {
        return Err(SccaError::Dimension(format!(
            "a view needs at least 2 samples, got {rows}"
        )));
    }
    let data = DMatrix::from_row_slice(rows, p, &values);
    ViewMatrix::new(data, names)
}

/// Writes a view as comma-separated text with a header row. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_view(view: &ViewMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, view_to_csv(view))?;
    Ok(())
}

pub fn view_to_csv(view: &ViewMatrix) -> String {
    let mut out = view.names.join(",");
    out.push('\n');
    for i in 0..view.n() {
        let row: Vec<String> = (0..view.p()).map(|j| format!("{}", view.data[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Result of [`center_scale`]: the transformed view plus the indices of
/// constant columns, which are left all-zero.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub view: ViewMatrix,
    pub constant_columns: Vec<usize>,
}

/// Removes column means and, when `scale` is set, divides by the sample
/// standard deviation (`n − 1` divisor).
pub fn center_scale(v: &ViewMatrix, scale: bool) -> Standardized {
    let n = v.n();
    let mut data = v.data.clone();
    let mut constant_columns = Vec::new();
    for j in 0..v.p() {
        let mut col = data.column_mut(j);
        let amax = col.amax();
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let ss: f64 = col.iter().map(|x| x * x).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd <= 1e-12 * (amax + 1.0) {
            col.fill(0.0);
            constant_columns.push(j);
        } else if scale {
            col /= sd;
        }
    }
    Standardized {
        view: ViewMatrix {
            data,
            names: v.names.clone(),
            centered: true,
            scaled: scale || v.scaled,
        },
        constant_columns,
    }
}

/// Active coordinates of a canonical direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<bool>", into = "Vec<bool>")]
pub struct SparsityPattern {
    bits: Vec<bool>,
    active_count: usize,
}

impl SparsityPattern {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let active_count = bits.iter().filter(|&&b| b).count();
        SparsityPattern { bits, active_count }
    }

    pub fn all(p: usize) -> Self {
        Self::from_bits(vec![true; p])
    }

    pub fn from_indices(p: usize, active: &[usize]) -> Self {
        let mut bits = vec![false; p];
        for &i in active {
            bits[i] = true;
        }
        Self::from_bits(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Coordinate-wise AND.
    pub fn intersect(&self, other: &SparsityPattern) -> SparsityPattern {
        SparsityPattern::from_bits(self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect())
    }
}

impl From<Vec<bool>> for SparsityPattern {
    fn from(bits: Vec<bool>) -> Self {
        Self::from_bits(bits)
    }
}

impl From<SparsityPattern> for Vec<bool> {
    fn from(p: SparsityPattern) -> Self {
        p.bits
    }
}

/// Divisor used when forming covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    #[default]
    N,
    NMinusOne,
}

impl Divisor {
    fn value(self, n: usize) -> f64 {
        match self {
            Divisor::N => n as f64,
            Divisor::NMinusOne => n as f64 - 1.0,
        }
    }
}

/// A `p_r × p_s` cross-covariance block between views `r` and `s`.
///
/// After [`shrink`], `row_support`/`col_support` hold the original (global)
/// indices of the retained rows/columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    pub block: DMatrix<f64>,
    pub view_ids: (usize, usize),
    pub row_support: Option<Vec<usize>>,
    pub col_support: Option<Vec<usize>>,
}

impl CrossCovariance {
    /// Wraps a raw block with no shrinkage recorded.
    pub fn from_block(block: DMatrix<f64>) -> Self {
        CrossCovariance {
            block,
            view_ids: (0, 1),
            row_support: None,
            col_support: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.block.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.block.ncols()
    }

    /// Global row indices (identity when the rows were never shrunk).
    pub fn row_indices(&self) -> Vec<usize> {
        self.row_support.clone().unwrap_or_else(|| (0..self.nrows()).collect())
    }

    pub fn col_indices(&self) -> Vec<usize> {
        self.col_support.clone().unwrap_or_else(|| (0..self.ncols()).collect())
    }

    /// Block transpose, with view ids and supports swapped.
    pub fn transposed(&self) -> CrossCovariance {
        CrossCovariance {
            block: self.block.transpose(),
            view_ids: (self.view_ids.1, self.view_ids.0),
            row_support: self.col_support.clone(),
            col_support: self.row_support.clone(),
        }
    }
}

/// `(1/n)·aᵀb` for centered views, tagged as views `(0, 1)`.
pub fn cross_covariance(a: &ViewMatrix, b: &ViewMatrix) -> Result<CrossCovariance> {
    cross_covariance_with(a, b, (0, 1), Divisor::N)
}

pub fn cross_covariance_with(
    a: &ViewMatrix,
    b: &ViewMatrix,
    view_ids: (usize, usize),
    divisor: Divisor,
) -> Result<CrossCovariance> {
    if a.n() != b.n() {
        return Err(SccaError::Dimension(format!(
            "sample counts differ: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    if !a.centered || !b.centered {
        return Err(SccaError::State(
            "views must be centered before forming covariances".into(),
        ));
    }
    let block = a.data.transpose() * &b.data / divisor.value(a.n());
    Ok(CrossCovariance {
        block,
        view_ids,
        row_support: None,
        col_support: None,
    })
}

/// Restricts a block to the active rows and columns, keeping index order
/// and composing with any earlier shrinkage.
pub fn shrink(c: &CrossCovariance, rows: &SparsityPattern, cols: &SparsityPattern) -> Result<CrossCovariance> {
    if rows.len() != c.nrows() || cols.len() != c.ncols() {
        return Err(SccaError::Dimension(format!(
            "patterns of length ({}, {}) for a {}×{} block",
            rows.len(),
            cols.len(),
            c.nrows(),
            c.ncols()
        )));
    }
    if rows.active_count() == 0 {
        return Err(SccaError::empty_support("row pattern has no active entries"));
    }
    if cols.active_count() == 0 {
        return Err(SccaError::empty_support("column pattern has no active entries"));
    }
    let ri = rows.active_indices();
    let ci = cols.active_indices();
    let block = c.block.select_rows(&ri).select_columns(&ci);
    let grow = c.row_indices();
    let gcol = c.col_indices();
    Ok(CrossCovariance {
        block,
        view_ids: c.view_ids,
        row_support: Some(ri.iter().map(|&i| grow[i]).collect()),
        col_support: Some(ci.iter().map(|&j| gcol[j]).collect()),
    })
}

/// All cross-covariance blocks `C_rs` (`r < s`) and within-view blocks
/// `C_ii` for a set of views, with the global column indices each view
/// currently retains.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    dims: Vec<usize>,
    cross: Vec<DMatrix<f64>>,
    within: Vec<DMatrix<f64>>,
    supports: Vec<Vec<usize>>,
}

fn pair_index(m: usize, r: usize, s: usize) -> usize {
    debug_assert!(r < s && s < m);
    r * (2 * m - r - 1) / 2 + (s - r - 1)
}

impl CovarianceSet {
    pub fn from_views(views: &[ViewMatrix], divisor: Divisor) -> Result<Self> {
        if views.len() < 2 {
            return Err(SccaError::Dimension(format!(
                "need at least 2 views, got {}",
                views.len()
            )));
        }
        let m = views.len();
        let mut cross = Vec::with_capacity(m * (m - 1) / 2);
        for r in 0..m {
            for s in (r + 1)..m {
                cross.push(cross_covariance_with(&views[r], &views[s], (r, s), divisor)?.block);
            }
        }
        let within = views
            .iter()
            .enumerate()
            .map(|(i, v)| cross_covariance_with(v, v, (i, i), divisor).map(|c| c.block))
            .collect::<Result<Vec<_>>>()?;
        Ok(CovarianceSet {
            dims: views.iter().map(ViewMatrix::p).collect(),
            cross,
            within,
            supports: views.iter().map(|v| (0..v.p()).collect()).collect(),
        })
    }

    /// Builds a set from explicit blocks. `cross` lists `C_rs` for `r < s`
    /// in lexicographic order.
    pub fn from_blocks(within: Vec<DMatrix<f64>>, cross: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = within.len();
        if m < 2 || cross.len() != m * (m - 1) / 2 {
            return Err(SccaError::Dimension(format!(
                "{} within blocks need {} cross blocks, got {}",
                m,
                m * m.saturating_sub(1) / 2,
                cross.len()
            )));
        }
        let dims: Vec<usize> = within.iter().map(|w| w.nrows()).collect();
        for (i, w) in within.iter().enumerate() {
            if w.ncols() != dims[i] {
                return Err(SccaError::Dimension(format!("within block {i} is not square")));
            }
        }
        for r in 0..m {
            for s in (r + 1)..m {
                let b = &cross[pair_index(m, r, s)];
                if b.shape() != (dims[r], dims[s]) {
                    return Err(SccaError::Dimension(format!(
                        "block ({r},{s}) is {}×{}, expected {}×{}",
                        b.nrows(),
                        b.ncols(),
                        dims[r],
                        dims[s]
                    )));
                }
            }
        }
        Ok(CovarianceSet {
            supports: dims.iter().map(|&p| (0..p).collect()).collect(),
            dims,
            cross,
            within,
        })
    }

    pub fn view_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `C_rs` for `r < s`.
    pub fn cross(&self, r: usize, s: usize) -> &DMatrix<f64> {
        assert!(r < s, "cross blocks are stored for r < s only");
        &self.cross[pair_index(self.view_count(), r, s)]
    }

    pub fn cross_mut(&mut self, r: usize, s: usize) -> &mut DMatrix<f64> {
        assert!(r < s, "cross blocks are stored for r < s only");
        let m = self.view_count();
        &mut self.cross[pair_index(m, r, s)]
    }

    /// `C_rs` in either orientation (`p_r × p_s`).
    pub fn oriented(&self, r: usize, s: usize) -> DMatrix<f64> {
        if r < s {
            self.cross(r, s).clone()
        } else {
            self.cross(s, r).transpose()
        }
    }

    pub fn within(&self, i: usize) -> &DMatrix<f64> {
        &self.within[i]
    }

    /// Global column indices retained for view `i`.
    pub fn support(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    /// Restricts view `s` to the active entries of `pattern` in every block.
    pub fn shrink_view(&self, s: usize, pattern: &SparsityPattern) -> Result<Self> {
        if pattern.len() != self.dims[s] {
            return Err(SccaError::Dimension(format!(
                "pattern of length {} for view {s} with {} variables",
                pattern.len(),
                self.dims[s]
            )));
        }
        if pattern.active_count() == 0 {
            return Err(SccaError::empty_support(format!("view {}", s + 1)));
        }
        let keep = pattern.active_indices();
        let m = self.view_count();
        let mut out = self.clone();
        for r in 0..m {
            if r < s {
                *out.cross_mut(r, s) = self.cross(r, s).select_columns(&keep);
            } else if r > s {
                *out.cross_mut(s, r) = self.cross(s, r).select_rows(&keep);
            }
        }
        out.within[s] = self.within[s].select_rows(&keep).select_columns(&keep);
        out.dims[s] = keep.len();
        out.supports[s] = keep.iter().map(|&i| self.supports[s][i]).collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn centered_col(vals: &[f64]) -> ViewMatrix {
        let v = ViewMatrix::new(DMatrix::from_column_slice(vals.len(), 1, vals), None).unwrap();
        center_scale(&v, false).view
    }

    #[test]
    fn parses_header_and_body() {
        let v = parse_view("a,b\n1,2\n3,4\n5,6", b',', HeaderMode::Auto).unwrap();
        assert_eq!((v.n(), v.p()), (3, 2));
        assert_eq!(v.names(), ["a", "b"]);
        assert_eq!(v.data()[(2, 1)], 6.0);
        assert!(!v.is_centered() && !v.is_scaled());
    }

    #[test]
    fn default_names_without_header() {
        let v = parse_view("1\t2\n3\t4\n", b'\t', HeaderMode::Auto).unwrap();
        assert_eq!(v.names(), ["V1", "V2"]);
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let err = parse_view("a,b\n1,2\n1,x\n", b',', HeaderMode::Auto).unwrap_err();
        assert!(matches!(err, SccaError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_view("1,2\n3,4,5\n6,7\n", b',', HeaderMode::Absent).unwrap_err();
        assert!(matches!(err, SccaError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn single_sample_is_dimension_error() {
        let err = parse_view("a,b\n1,2\n", b',', HeaderMode::Auto).unwrap_err();
        assert!(matches!(err, SccaError::Dimension(_)));
    }

    #[test]
    fn load_view_picks_tab_for_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        std::fs::write(&path, "x\ty\n1\t2\n3\t4\n").unwrap();
        let v = load_view(&path, &LoadOptions::default()).unwrap();
        assert_eq!(v.names(), ["x", "y"]);
    }

    #[test]
    fn centering_removes_mean() {
        let v = centered_col(&[1.0, 2.0, 3.0]);
        assert_eq!(v.data().as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_zeroed_and_flagged() {
        let v = ViewMatrix::new(DMatrix::from_column_slice(3, 1, &[5.0, 5.0, 5.0]), None).unwrap();
        let s = center_scale(&v, true);
        assert_eq!(s.view.data().as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.constant_columns, vec![0]);
    }

    #[test]
    fn variance_of_centered_column() {
        let a = centered_col(&[-1.0, 0.0, 1.0]);
        let c = cross_covariance(&a, &a).unwrap();
        assert!((c.block[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        let b = centered_col(&[1.0, 0.0, -1.0]);
        let c = cross_covariance(&a, &b).unwrap();
        assert!((c.block[(0, 0)] + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_requires_centering_and_matching_n() {
        let raw = ViewMatrix::new(DMatrix::from_element(3, 2, 1.0), None).unwrap();
        assert!(matches!(cross_covariance(&raw, &raw), Err(SccaError::State(_))));
        let a = centered_col(&[1.0, 2.0, 3.0]);
        let b = centered_col(&[1.0, 2.0]);
        assert!(matches!(cross_covariance(&a, &b), Err(SccaError::Dimension(_))));
    }

    #[test]
    fn shrink_selects_submatrix() {
        let c = CrossCovariance::from_block(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        ));
        let rows = SparsityPattern::from_bits(vec![true, false, true]);
        let cols = SparsityPattern::from_bits(vec![false, true, false]);
        let s = shrink(&c, &rows, &cols).unwrap();
        assert_eq!(s.block, DMatrix::from_row_slice(2, 1, &[2.0, 8.0]));
        assert_eq!(s.row_support, Some(vec![0, 2]));
        assert_eq!(s.col_support, Some(vec![1]));

        let all = shrink(&c, &SparsityPattern::all(3), &SparsityPattern::all(3)).unwrap();
        assert_eq!(all.block, c.block);

        let none = SparsityPattern::from_bits(vec![false; 3]);
        assert!(shrink(&c, &none, &cols).unwrap_err().is_empty_support());
        assert!(matches!(
            shrink(&c, &SparsityPattern::all(2), &cols),
            Err(SccaError::Dimension(_))
        ));
    }

    #[test]
    fn nested_shrink_tracks_global_indices() {
        let c = CrossCovariance::from_block(DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64));
        let s1 = shrink(
            &c,
            &SparsityPattern::from_bits(vec![false, true, true, true]),
            &SparsityPattern::all(4),
        )
        .unwrap();
        let s2 = shrink(
            &s1,
            &SparsityPattern::from_bits(vec![true, false, true]),
            &SparsityPattern::from_bits(vec![true, true, false, true]),
        )
        .unwrap();
        assert_eq!(s2.row_support, Some(vec![1, 3]));
        assert_eq!(s2.col_support, Some(vec![0, 1, 3]));
        assert_eq!(s2.block[(1, 2)], c.block[(3, 3)]);
    }

    fn random_view(n: usize, p: usize, seed: u64) -> ViewMatrix {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        ViewMatrix::new(data, None).unwrap()
    }

    #[test]
    fn standardized_moments() {
        let s = center_scale(&random_view(10, 4, 7), true).view;
        for j in 0..4 {
            let col: Vec<f64> = s.data().column(j).iter().copied().collect();
            let mean = col.iter().sum::<f64>() / 10.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9.0;
            assert!(mean.abs() < 1e-12);
            assert!((var.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_matches_outer_product_loop() {
        let a = center_scale(&random_view(10, 3, 1), false).view;
        let b = center_scale(&random_view(10, 2, 2), false).view;
        let c = cross_covariance(&a, &b).unwrap();
        for r in 0..3 {
            for s in 0..2 {
                let mut acc = 0.0;
                for i in 0..10 {
                    acc += a.data()[(i, r)] * b.data()[(i, s)];
                }
                assert!((c.block[(r, s)] - acc / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let v = random_view(50, 500, 3);
        let back = parse_view(&view_to_csv(&v), b',', HeaderMode::Auto).unwrap();
        assert_eq!(back.names(), v.names());
        assert!((back.data() - v.data()).amax() <= 1e-12);
    }

    #[test]
    fn covariance_set_blocks_and_shrink() {
        let views: Vec<ViewMatrix> = (0..3)
            .map(|i| center_scale(&random_view(7, 3 + i, 40 + i as u64), false).view)
            .collect();
        let set = CovarianceSet::from_views(&views, Divisor::N).unwrap();
        assert_eq!(set.dims(), &[3, 4, 5]);
        let c13 = cross_covariance(&views[0], &views[2]).unwrap().block;
        assert_eq!(set.cross(0, 2), &c13);
        assert_eq!(set.oriented(2, 0), c13.transpose());
        let tau = SparsityPattern::from_bits(vec![true, false, true, false]);
        let shrunk = set.shrink_view(1, &tau).unwrap();
        assert_eq!(shrunk.cross(0, 1), &set.cross(0, 1).select_columns(&[0, 2]));
        assert_eq!(shrunk.cross(1, 2), &set.cross(1, 2).select_rows(&[0, 2]));
        assert_eq!(shrunk.within(1).shape(), (2, 2));
        assert_eq!(shrunk.support(1), &[0, 2]);
        let again = shrunk
            .shrink_view(1, &SparsityPattern::from_bits(vec![false, true]))
            .unwrap();
        assert_eq!(again.support(1), &[2]);
        assert!(set
            .shrink_view(0, &SparsityPattern::from_bits(vec![false; 3]))
            .unwrap_err()
            .is_empty_support());
    }

    proptest! {
        #[test]
        fn covariance_transpose_symmetry(seed in 0u64..500, p in 1usize..6, q in 1usize..6) {
            let a = center_scale(&random_view(8, p, seed), false).view;
            let b = center_scale(&random_view(8, q, seed + 1000), false).view;
            let ab = cross_covariance(&a, &b).unwrap().block;
            let ba = cross_covariance(&b, &a).unwrap().block;
            let scale = ab.amax().max(1.0);
            prop_assert!((ab.transpose() - ba).amax() <= 1e-14 * scale);
        }

        #[test]
        fn center_scale_idempotent(seed in 0u64..500, scale in any::<bool>()) {
            let once = center_scale(&random_view(9, 3, seed), scale).view;
            let twice = center_scale(&once, scale).view;
            prop_assert!((once.data() - twice.data()).amax() <= 1e-12);
        }

        #[test]
        fn shrink_with_full_patterns_is_idempotent(seed in 0u64..200) {
            let a = center_scale(&random_view(6, 4, seed), false).view;
            let b = center_scale(&random_view(6, 5, seed + 7), false).view;
            let c = cross_covariance(&a, &b).unwrap();
            let rows = SparsityPattern::from_bits((0..4).map(|i| (i + seed as usize) % 3 != 0).collect());
            let cols = SparsityPattern::from_bits((0..5).map(|i| (i + seed as usize) % 2 == 0).collect());
            prop_assume!(rows.active_count() > 0 && cols.active_count() > 0);
            let s = shrink(&c, &rows, &cols).unwrap();
            let again = shrink(&s, &SparsityPattern::all(s.nrows()), &SparsityPattern::all(s.ncols())).unwrap();
            prop_assert_eq!(s, again);
        }
    }
}
