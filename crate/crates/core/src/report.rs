//! Coordinates for biplots and interpolative plots built from the first
//! two factors of a solution, plus CSV, JSON and SVG emission.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cca::CcaSolution;
use crate::covariance::ViewMatrix;
use crate::error::{Result, SccaError};
use crate::linalg::{mat_vec, pearson};

pub const DEFAULT_MARKERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotView {
    pub variable_names: Vec<String>,
    /// Per variable, correlation with the two canonical covariates of its
    /// view; zero for variables inactive in both factors.
    pub loadings: Vec<[f64; 2]>,
    pub active: Vec<bool>,
    /// Constant variables (correlation undefined, reported as 0).
    pub constant: Vec<usize>,
    /// Per sample, its two canonical covariates.
    pub samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPair {
    pub view: usize,
    pub other: usize,
    /// Correlations of the first and second covariates across the pair.
    pub rho: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotData {
    pub views: Vec<BiplotView>,
    pub rho_pairs: Vec<RhoPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationLine {
    pub view: usize,
    pub variable: usize,
    pub name: String,
    /// Ascending values spanning the observed range.
    pub markers: Vec<f64>,
    /// `marker · (w₁, w₂)` with `w` the variable's weights in the two
    /// leading directions.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationData {
    pub lines: Vec<InterpolationLine>,
}

fn check_inputs(solution: &CcaSolution, views: &[ViewMatrix]) -> Result<()> {
    if solution.factor_count() < 2 {
        return Err(SccaError::InsufficientFactors {
            found: solution.factor_count(),
            required: 2,
        });
    }
    if solution.view_count() != views.len() {
        return Err(SccaError::Dimension(format!(
            "solution has {} views, {} supplied",
            solution.view_count(),
            views.len()
        )));
    }
    for (i, v) in views.iter().enumerate() {
        if solution.directions[i][0].len() != v.p() {
            return Err(SccaError::Dimension(format!(
                "view {} has {} variables, solution expects {}",
                i + 1,
                v.p(),
                solution.directions[i][0].len()
            )));
        }
        if v.n() != views[0].n() {
            return Err(SccaError::Dimension("views differ in sample count".into()));
        }
    }
    Ok(())
}

pub fn biplot_coords(solution: &CcaSolution, views: &[ViewMatrix]) -> Result<BiplotData> {
    check_inputs(solution, views)?;
    let covariates: Vec<[DVector<f64>; 2]> = views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            [
                mat_vec(v.data(), &solution.directions[i][0]),
                mat_vec(v.data(), &solution.directions[i][1]),
            ]
        })
        .collect();
    let out_views = views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let cc = &covariates[i];
            let mut constant = Vec::new();
            let mut loadings = Vec::with_capacity(v.p());
            let mut active = Vec::with_capacity(v.p());
            for j in 0..v.p() {
                let on = solution.directions[i][0][j] != 0.0 || solution.directions[i][1][j] != 0.0;
                let col: Vec<f64> = v.data().column(j).iter().copied().collect();
                let r1 = pearson(&col, cc[0].as_slice());
                let r2 = pearson(&col, cc[1].as_slice());
                if col.iter().all(|&x| x == col[0]) {
                    constant.push(j);
                }
                active.push(on);
                loadings.push(if on {
                    [r1.unwrap_or(0.0), r2.unwrap_or(0.0)]
                } else {
                    [0.0, 0.0]
                });
            }
            BiplotView {
                variable_names: v.names().to_vec(),
                loadings,
                active,
                constant,
                samples: (0..v.n()).map(|r| [cc[0][r], cc[1][r]]).collect(),
            }
        })
        .collect();
    let mut rho_pairs = Vec::new();
    for a in 0..views.len() {
        for b in 0..views.len() {
            if a == b {
                continue;
            }
            let r = |k: usize| pearson(covariates[a][k].as_slice(), covariates[b][k].as_slice()).unwrap_or(0.0);
            rho_pairs.push(RhoPair {
                view: a,
                other: b,
                rho: [r(0), r(1)],
            });
        }
    }
    Ok(BiplotData {
        views: out_views,
        rho_pairs,
    })
}

pub fn interp_coords(solution: &CcaSolution, views: &[ViewMatrix], markers: usize) -> Result<InterpolationData> {
    check_inputs(solution, views)?;
    if markers < 2 {
        return Err(SccaError::InvalidParameter(
            "need at least two markers per variable".into(),
        ));
    }
    let mut lines = Vec::new();
    for (i, v) in views.iter().enumerate() {
        for j in 0..v.p() {
            let col = v.data().column(j);
            let (lo, hi) = (col.min(), col.max());
            let w = [solution.directions[i][0][j], solution.directions[i][1][j]];
            let values: Vec<f64> = (0..markers)
                .map(|k| {
                    if k == markers - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * k as f64 / (markers - 1) as f64
                    }
                })
                .collect();
            lines.push(InterpolationLine {
                view: i,
                variable: j,
                name: v.names()[j].clone(),
                points: values.iter().map(|&m| [m * w[0], m * w[1]]).collect(),
                markers: values,
            });
        }
    }
    Ok(InterpolationData { lines })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Variable,
    Sample,
    Marker,
}

impl RowKind {
    fn as_str(self) -> &'static str {
        match self {
            RowKind::Variable => "variable",
            RowKind::Sample => "sample",
            RowKind::Marker => "marker",
        }
    }
}

impl FromStr for RowKind {
    type Err = SccaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variable" => Ok(RowKind::Variable),
            "sample" => Ok(RowKind::Sample),
            "marker" => Ok(RowKind::Marker),
            other => Err(SccaError::InvalidParameter(format!("unknown row kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub entity_id: String,
    /// 1-based view number.
    pub view: usize,
    pub axis1: f64,
    pub axis2: f64,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho_pairs: Vec<RhoPair>,
}

impl From<&BiplotData> for ReportTable {
    /// Active variables, then samples, per view.
    fn from(data: &BiplotData) -> Self {
        let mut rows = Vec::new();
        for (i, v) in data.views.iter().enumerate() {
            for (j, l) in v.loadings.iter().enumerate() {
                if v.active[j] {
                    rows.push(ReportRow {
                        entity_id: v.variable_names[j].clone(),
                        view: i + 1,
                        axis1: l[0],
                        axis2: l[1],
                        kind: RowKind::Variable,
                    });
                }
            }
            for (r, s) in v.samples.iter().enumerate() {
                rows.push(ReportRow {
                    entity_id: format!("s{}", r + 1),
                    view: i + 1,
                    axis1: s[0],
                    axis2: s[1],
                    kind: RowKind::Sample,
                });
            }
        }
        ReportTable {
            rows,
            rho_pairs: data.rho_pairs.clone(),
        }
    }
}

impl From<&InterpolationData> for ReportTable {
    /// One marker row per marker, named `variable@k`; lines of variables
    /// inactive in both factors are skipped.
    fn from(data: &InterpolationData) -> Self {
        let rows = data
            .lines
            .iter()
            .filter(|l| l.points.iter().any(|p| p[0] != 0.0 || p[1] != 0.0))
            .flat_map(|l| {
                l.points.iter().enumerate().map(move |(k, p)| ReportRow {
                    entity_id: format!("{}@{}", l.name, k + 1),
                    view: l.view + 1,
                    axis1: p[0],
                    axis2: p[1],
                    kind: RowKind::Marker,
                })
            })
            .collect();
        ReportTable {
            rows,
            rho_pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub fn from_path(path: impl AsRef<Path>) -> Option<Self> {
        let ext = path.as_ref().extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Svg => "svg",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = SccaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(SccaError::InvalidParameter(format!("unknown report format '{other}'"))),
        }
    }
}

pub fn table_to_csv(table: &ReportTable) -> String {
    let mut out = String::from("entity_id,view,axis1,axis2,kind\n");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in &table.rows {
        w.write_record([
            r.entity_id.as_str(),
            &r.view.to_string(),
            &r.axis1.to_string(),
            &r.axis2.to_string(),
            r.kind.as_str(),
        ])
        .expect("writing to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8"));
    out
}

pub fn table_from_csv(text: &str) -> Result<ReportTable> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| SccaError::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 5 {
            return Err(SccaError::Parse {
                line,
                message: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| SccaError::Parse {
                line,
                message: format!("bad number '{}'", &rec[i]),
            })
        };
        rows.push(ReportRow {
            entity_id: rec[0].to_string(),
            view: rec[1].parse().map_err(|_| SccaError::Parse {
                line,
                message: format!("bad view '{}'", &rec[1]),
            })?,
            axis1: num(2)?,
            axis2: num(3)?,
            kind: rec[4].parse().map_err(|e: SccaError| SccaError::Parse {
                line,
                message: e.to_string(),
            })?,
        });
    }
    Ok(ReportTable {
        rows,
        rho_pairs: Vec::new(),
    })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed 640×640 layout: variables as arrows from the origin, samples as
/// dots, markers as small squares; one color per view.
pub fn table_to_svg(table: &ReportTable) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 40.0;
    let extent = table
        .rows
        .iter()
        .map(|r| r.axis1.abs().max(r.axis2.abs()))
        .fold(0.0_f64, f64::max);
    let scale = if extent > 0.0 {
        (SIZE / 2.0 - MARGIN) / extent
    } else {
        1.0
    };
    let c = SIZE / 2.0;
    let px = |x: f64| c + x * scale;
    let py = |y: f64| c - y * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{c}" x2="{}" y2="{c}" stroke="#999999"/>"##,
        SIZE - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<line x1="{c}" y1="{MARGIN}" x2="{c}" y2="{}" stroke="#999999"/>"##,
        SIZE - MARGIN
    );
    for r in &table.rows {
        let color = PALETTE[(r.view.max(1) - 1) % PALETTE.len()];
        let (x, y) = (px(r.axis1), py(r.axis2));
        let id = xml_escape(&r.entity_id);
        match r.kind {
            RowKind::Variable => {
                let _ = writeln!(
                    s,
                    r#"<line x1="{c}" y1="{c}" x2="{x:.3}" y2="{y:.3}" stroke="{color}"/><text x="{x:.3}" y="{y:.3}" font-size="9" fill="{color}">{id}</text>"#
                );
            }
            RowKind::Sample => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.5" fill="{color}" fill-opacity="0.6"><title>{id}</title></circle>"#
                );
            }
            RowKind::Marker => {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.3}" y="{:.3}" width="4" height="4" fill="{color}"><title>{id}</title></rect>"#,
                    x - 2.0,
                    y - 2.0
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_report(table: &ReportTable, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Csv => table_to_csv(table),
        ReportFormat::Json => serde_json::to_string_pretty(table)? + "\n",
        ReportFormat::Svg => table_to_svg(table),
    })
}

pub fn write_report(table: &ReportTable, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    std::fs::write(path, render_report(table, format)?)?;
    Ok(())
}
