//! Self-describing JSON solution documents.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaSolution, Normalization};
use crate::covariance::SparsityPattern;
use crate::error::{Result, SccaError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration with defaults resolved.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub variable_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub correlation: f64,
    pub iterations: usize,
    pub deflation_step: usize,
    /// Per view.
    pub effective_gammas: Vec<f64>,
    /// Per view, full-length direction.
    pub directions: Vec<Vec<f64>>,
    /// Per view, 0-based active variable indices.
    pub active: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub metadata: Metadata,
    pub normalization: Normalization,
    pub views: Vec<ViewInfo>,
    pub factors: Vec<FactorRecord>,
    pub warnings: Vec<String>,
}

impl SolutionFile {
    pub fn from_solution(
        solution: &CcaSolution,
        variable_names: Vec<Vec<String>>,
        command: &str,
        seed: u64,
        config: &impl Serialize,
    ) -> Result<Self> {
        if variable_names.len() != solution.view_count() {
            return Err(SccaError::Dimension(format!(
                "{} name lists for {} views",
                variable_names.len(),
                solution.view_count()
            )));
        }
        let factors = (0..solution.factor_count())
            .map(|f| FactorRecord {
                correlation: solution.correlations[f],
                iterations: solution.iterations.get(f).copied().unwrap_or(0),
                deflation_step: solution.deflation_order.get(f).copied().unwrap_or(f),
                effective_gammas: solution.effective_gammas.get(f).cloned().unwrap_or_default(),
                directions: solution.directions.iter().map(|d| d[f].as_slice().to_vec()).collect(),
                active: solution.patterns.iter().map(|p| p[f].active_indices()).collect(),
            })
            .collect();
        Ok(SolutionFile {
            metadata: Metadata {
                format_version: FORMAT_VERSION,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                seed,
                config: serde_json::to_value(config)?,
            },
            normalization: solution.normalization,
            views: variable_names
                .into_iter()
                .map(|variable_names| ViewInfo { variable_names })
                .collect(),
            factors,
            warnings: solution.warnings.clone(),
        })
    }

    /// Rebuilds the solution (without covariates), checking that every
    /// nonzero direction entry is active.
    pub fn to_solution(&self) -> Result<CcaSolution> {
        let m = self.views.len();
        let mut directions = vec![Vec::new(); m];
        let mut patterns = vec![Vec::new(); m];
        for (f, rec) in self.factors.iter().enumerate() {
            if rec.directions.len() != m || rec.active.len() != m {
                return Err(SccaError::Dimension(format!(
                    "factor {} does not cover {m} views",
                    f + 1
                )));
            }
            for i in 0..m {
                let p = self.views[i].variable_names.len();
                let d = &rec.directions[i];
                if d.len() != p || rec.active[i].iter().any(|&j| j >= p) {
                    return Err(SccaError::Dimension(format!(
                        "factor {} view {} does not match {p} variables",
                        f + 1,
                        i + 1
                    )));
                }
                let pattern = SparsityPattern::from_indices(p, &rec.active[i]);
                if d.iter().enumerate().any(|(j, &w)| w != 0.0 && !pattern.is_active(j)) {
                    return Err(SccaError::State(format!(
                        "factor {} view {} has weight outside its pattern",
                        f + 1,
                        i + 1
                    )));
                }
                directions[i].push(DVector::from_column_slice(d));
                patterns[i].push(pattern);
            }
        }
        Ok(CcaSolution {
            directions,
            patterns,
            correlations: self.factors.iter().map(|r| r.correlation).collect(),
            covariates: None,
            normalization: self.normalization,
            deflation_order: self.factors.iter().map(|r| r.deflation_step).collect(),
            iterations: self.factors.iter().map(|r| r.iterations).collect(),
            effective_gammas: self.factors.iter().map(|r| r.effective_gammas.clone()).collect(),
            warnings: self.warnings.clone(),
            objective_traces: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
