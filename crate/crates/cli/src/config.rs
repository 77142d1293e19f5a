//! Configuration file parsing and flag merging. Precedence: command-line
//! flag, then config file, then built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scca_core::cca::{FitConfig, StageTwo};
use scca_core::covariance::HeaderMode;
use scca_core::pattern::{ConvergenceSpec, GammaScale, Penalty, SideOrder};

use crate::args::{Common, HeaderArg, MethodArg, OrderArg, PenaltyArg, PipelineArg, StageTwoArg, TuneArgs};
use crate::error::CliError;

/// Keys accepted in a `--config` file. Names match the long flags with `_`
/// in place of `-`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub penalty: Option<Penalty>,
    pub gamma1: Option<Vec<f64>>,
    pub gamma2: Option<Vec<f64>>,
    pub gamma_matrix: Option<Vec<Vec<f64>>>,
    pub gammas: Option<Vec<f64>>,
    pub relative: Option<bool>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub factors: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub order: Option<SideOrder>,
    pub scale: Option<bool>,
    pub stage2: Option<StageTwo>,
    pub ridge: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub pipeline: Option<PipelineArg>,
    pub method: Option<MethodArg>,
    pub permutations: Option<usize>,
    pub folds: Option<usize>,
    pub grid1: Option<Vec<f64>>,
    pub grid2: Option<Vec<f64>>,
    pub grid: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Effective settings with every default resolved. Serialized into outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub penalty: Penalty,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub gamma_matrix: Option<Vec<Vec<f64>>>,
    pub gammas: Option<Vec<f64>>,
    pub gamma_scale: GammaScale,
    pub eps1: f64,
    pub eps2: f64,
    pub factors: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
    pub order: SideOrder,
    pub scale: bool,
    pub stage2: StageTwo,
    pub ridge: f64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub header: HeaderMode,
}

pub fn parse_gamma_matrix(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad sparsity matrix entry {v:?}")))
                })
                .collect()
        })
        .collect()
}

fn penalty(p: PenaltyArg) -> Penalty {
    match p {
        PenaltyArg::L1 => Penalty::L1,
        PenaltyArg::L0 => Penalty::L0,
    }
}

fn stage2(s: StageTwoArg) -> StageTwo {
    match s {
        StageTwoArg::Svd => StageTwo::Svd,
        StageTwoArg::Gep => StageTwo::Gep,
        StageTwoArg::Power => StageTwo::Power,
    }
}

fn order(o: OrderArg) -> SideOrder {
    match o {
        OrderArg::Larger => SideOrder::LargerFirst,
        OrderArg::First => SideOrder::FirstViewFirst,
        OrderArg::Second => SideOrder::SecondViewFirst,
    }
}

fn header(h: HeaderArg) -> HeaderMode {
    match h {
        HeaderArg::Auto => HeaderMode::Auto,
        HeaderArg::Present => HeaderMode::Present,
        HeaderArg::Absent => HeaderMode::Absent,
    }
}

/// Loads the config file named by `--config`, if any.
pub fn file_for(common: &Common) -> Result<FileConfig, CliError> {
    match &common.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

impl Settings {
    pub fn resolve(c: &Common, f: &FileConfig) -> Result<Self, CliError> {
        let gamma_matrix = match &c.gamma_matrix {
            Some(t) => Some(parse_gamma_matrix(t)?),
            None => f.gamma_matrix.clone(),
        };
        let scale = if c.scale {
            true
        } else if c.no_scale {
            false
        } else {
            f.scale.unwrap_or(true)
        };
        let relative = c.relative || f.relative.unwrap_or(false);
        let s = Settings {
            penalty: c.penalty.map(penalty).or(f.penalty).unwrap_or_default(),
            gamma1: c.gamma1.clone().or(f.gamma1.clone()).unwrap_or_else(|| vec![0.0]),
            gamma2: c.gamma2.clone().or(f.gamma2.clone()).unwrap_or_else(|| vec![0.0]),
            gamma_matrix,
            gammas: c.gammas.clone().or(f.gammas.clone()),
            gamma_scale: if relative {
                GammaScale::Relative
            } else {
                GammaScale::Absolute
            },
            eps1: c.eps1.or(f.eps1).unwrap_or(1.0),
            eps2: c.eps2.or(f.eps2).unwrap_or(1.0),
            factors: c.factors.or(f.factors).unwrap_or(1),
            tol: c.tol.or(f.tol).unwrap_or(ConvergenceSpec::default().tol),
            max_iter: c.max_iter.or(f.max_iter).unwrap_or(ConvergenceSpec::default().max_iter),
            seed: c.seed.or(f.seed).unwrap_or(0),
            restarts: c.restarts.or(f.restarts).unwrap_or(0),
            order: c.order.map(order).or(f.order).unwrap_or_default(),
            scale,
            stage2: c.stage2.map(stage2).or(f.stage2).unwrap_or_default(),
            ridge: c.ridge.or(f.ridge).unwrap_or(0.0),
            out: c.out.clone().or(f.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
            jobs: c.jobs.or(f.jobs),
            header: c.header.map(header).unwrap_or_default(),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), CliError> {
        let all = self
            .gamma1
            .iter()
            .chain(&self.gamma2)
            .chain(self.gammas.iter().flatten())
            .chain(self.gamma_matrix.iter().flatten().flatten());
        for &g in all {
            if !(g.is_finite() && g >= 0.0) {
                return Err(CliError::Usage(format!(
                    "sparsity values must be finite and nonnegative, got {g}"
                )));
            }
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("ridge", self.ridge)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Usage(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Usage(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CliError::Usage("max-iter must be at least 1".into()));
        }
        if self.factors == 0 {
            return Err(CliError::Usage("factors must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn conv(&self) -> ConvergenceSpec {
        ConvergenceSpec {
            tol: self.tol,
            max_iter: self.max_iter,
            track_objective: false,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let mut cfg = FitConfig::default();
        cfg.pair.penalty = self.penalty;
        cfg.pair.gamma1 = self.gamma1[0];
        cfg.pair.gamma2 = self.gamma2[0];
        cfg.pair.gamma_scale = self.gamma_scale;
        cfg.pair.order = self.order;
        cfg.pair.conv = self.conv();
        cfg.pair.restarts = self.restarts;
        cfg.pair.seed = self.seed;
        cfg.stage2 = self.stage2;
        cfg.ridge = self.ridge;
        cfg
    }

    /// Per-factor thresholds, broadcasting a single value.
    pub fn factor_gammas(&self) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let k = self.factors;
        let expand = |v: &[f64], name: &str| match v.len() {
            1 => Ok(vec![v[0]; k]),
            n if n == k => Ok(v.to_vec()),
            n => Err(CliError::Usage(format!("{name} has {n} values for {k} factors"))),
        };
        Ok((expand(&self.gamma1, "gamma1")?, expand(&self.gamma2, "gamma2")?))
    }
}

/// Tuning settings with defaults resolved.
#[derive(Debug, Clone, Serialize)]
pub struct TuneSettings {
    pub pipeline: &'static str,
    pub method: &'static str,
    pub permutations: usize,
    pub folds: usize,
    pub grid1: Vec<f64>,
    pub grid2: Vec<f64>,
    pub grid: Vec<f64>,
}

const DEFAULT_GRID: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

impl TuneSettings {
    pub fn resolve(a: &TuneArgs, f: &FileConfig) -> (Self, PipelineArg, MethodArg) {
        let pipeline = a.pipeline.or(f.pipeline).unwrap_or(PipelineArg::Scca);
        let method = a.method.or(f.method).unwrap_or(MethodArg::Perm);
        let pick = |flag: &Option<Vec<f64>>, file: &Option<Vec<f64>>| {
            flag.clone().or(file.clone()).unwrap_or_else(|| DEFAULT_GRID.to_vec())
        };
        let s = TuneSettings {
            pipeline: match pipeline {
                PipelineArg::Scca => "scca",
                PipelineArg::Mscca => "mscca",
                PipelineArg::Dscca => "dscca",
            },
            method: match method {
                MethodArg::Perm => "perm",
                MethodArg::Cv => "cv",
            },
            permutations: a.permutations.or(f.permutations).unwrap_or(100),
            folds: a.folds.or(f.folds).unwrap_or(5),
            grid1: pick(&a.grid1, &f.grid1),
            grid2: pick(&a.grid2, &f.grid2),
            grid: pick(&a.grid, &f.grid),
        };
        (s, pipeline, method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: FileConfig = toml::from_str("gamma1 = [0.3]\ntol = 1e-6\nscale = false\nseed = 9").unwrap();
        let flags = Common {
            gamma1: Some(vec![0.1]),
            scale: true,
            ..Common::default()
        };
        let s = Settings::resolve(&flags, &file).unwrap();
        assert_eq!(s.gamma1, vec![0.1]);
        assert_eq!(s.tol, 1e-6);
        assert!(s.scale);
        assert_eq!(s.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("gama1 = [1.0]").is_err());
    }

    #[test]
    fn gamma_matrix_text() {
        assert_eq!(
            parse_gamma_matrix("0,0.1; 0.2,0").unwrap(),
            vec![vec![0.0, 0.1], vec![0.2, 0.0]]
        );
        assert!(parse_gamma_matrix("0,x").is_err());
    }

    #[test]
    fn factor_gammas_broadcast() {
        let flags = Common {
            gamma1: Some(vec![0.2]),
            gamma2: Some(vec![0.1, 0.3]),
            factors: Some(2),
            ..Common::default()
        };
        let s = Settings::resolve(&flags, &FileConfig::default()).unwrap();
        assert_eq!(s.factor_gammas().unwrap(), (vec![0.2, 0.2], vec![0.1, 0.3]));
    }
}
