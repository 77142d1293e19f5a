//! Hyperparameter selection by permutation test or k-fold cross-validation.
//!
//! A grid is a list of cells; each cell holds one threshold per tuned view
//! (two for the pair and directed pipelines, one per view for multiview).
//! Permutations and folds are drawn once from the grid seed and shared by
//! every cell, so cells are compared on the same resamples.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaSolution, FitConfig};
use crate::covariance::{center_scale, ViewMatrix};
use crate::directed::{directed_fit, AccessoryVector, DirectedConfig};
use crate::error::{Result, SccaError};
use crate::linalg::{mat_vec, pearson};
use crate::multiview::{mule_multiview, GammaMatrix, MultiViewConfig};
use crate::parallel::map_indexed;
use crate::simulate::derive_seed;

/// Callback invoked with every successful fit made during tuning.
pub type Observer<'a> = Option<&'a (dyn Fn(&CcaSolution) + Sync)>;

const PERMUTATION_STREAM: u64 = 0x7065_726d;
const FOLD_STREAM: u64 = 0x666f_6c64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMethod {
    Permutation { permutations: usize },
    CrossValidation { folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub cells: Vec<Vec<f64>>,
    pub method: TuneMethod,
    pub seed: u64,
}

impl TuneGrid {
    /// Every `(γ₁, γ₂)` pair, `γ₁` varying slowest.
    pub fn cartesian(gamma1_values: &[f64], gamma2_values: &[f64], method: TuneMethod, seed: u64) -> Self {
        let cells = gamma1_values
            .iter()
            .flat_map(|&g1| gamma2_values.iter().map(move |&g2| vec![g1, g2]))
            .collect();
        TuneGrid { cells, method, seed }
    }

    /// One cell per value, with the value repeated for all `arity` views.
    pub fn uniform(values: &[f64], arity: usize, method: TuneMethod, seed: u64) -> Self {
        let cells = values.iter().map(|&g| vec![g; arity]).collect();
        TuneGrid { cells, method, seed }
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        if self.cells.is_empty() {
            return Err(SccaError::InvalidParameter("tuning grid is empty".into()));
        }
        for cell in &self.cells {
            if cell.len() != arity {
                return Err(SccaError::InvalidParameter(format!(
                    "grid cell has {} values, pipeline needs {arity}",
                    cell.len()
                )));
            }
            if cell.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(SccaError::InvalidParameter(
                    "grid values must be finite and nonnegative".into(),
                ));
            }
        }
        match self.method {
            TuneMethod::Permutation { permutations } if permutations < 1 => {
                Err(SccaError::InvalidParameter("need at least one permutation".into()))
            }
            TuneMethod::CrossValidation { folds } if folds < 2 => {
                Err(SccaError::InvalidParameter("need at least two folds".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The fit being tuned; a cell's values replace its sparsity parameters.
#[derive(Debug, Clone)]
pub enum Pipeline {
    Pair(FitConfig),
    /// Cell values are per-view thresholds (row sums of Γ).
    MultiView(MultiViewConfig),
    Directed {
        cfg: DirectedConfig,
        y: AccessoryVector,
    },
}

impl Pipeline {
    pub fn arity(&self, views: usize) -> usize {
        match self {
            Pipeline::MultiView(_) => views,
            _ => 2,
        }
    }

    fn check_views(&self, views: &[ViewMatrix]) -> Result<()> {
        let ok = match self {
            Pipeline::MultiView(_) => views.len() >= 2,
            _ => views.len() == 2,
        };
        if !ok {
            return Err(SccaError::InvalidParameter(format!(
                "pipeline cannot take {} views",
                views.len()
            )));
        }
        Ok(())
    }

    /// Fits on `views`; `rows` selects the matching accessory entries.
    fn fit(&self, views: &[ViewMatrix], rows: Option<&[usize]>, cell: &[f64], seed: u64) -> Result<CcaSolution> {
        match self {
            Pipeline::Pair(cfg) => {
                let mut cfg = *cfg;
                cfg.pair.gamma1 = cell[0];
                cfg.pair.gamma2 = cell[1];
                cfg.pair.seed = seed;
                crate::cca::fit_pair(&views[0], &views[1], &cfg)
            }
            Pipeline::MultiView(cfg) => {
                let mut cfg = cfg.clone();
                cfg.gamma = GammaMatrix::from_thresholds(cell)?;
                Ok(mule_multiview(views, &cfg)?.solution)
            }
            Pipeline::Directed { cfg, y } => {
                let mut cfg = *cfg;
                cfg.params.gamma1 = cell[0];
                cfg.params.gamma2 = cell[1];
                let y = match rows {
                    Some(r) => {
                        let sub =
                            AccessoryVector::new(DVector::from_iterator(r.len(), r.iter().map(|&i| y.values()[i])))?;
                        if y.is_centered() {
                            sub.centered()
                        } else {
                            sub
                        }
                    }
                    None => y.clone(),
                };
                directed_fit(&views[0], &views[1], &y, &cfg)
            }
        }
    }
}

impl Pipeline {
    /// Fits the full matched data at one grid cell, with the same per-cell
    /// seed the tuners use.
    pub fn fit_cell(&self, views: &[ViewMatrix], grid: &TuneGrid, cell: usize) -> Result<CcaSolution> {
        grid.validate(self.arity(views.len()))?;
        self.check_views(views)?;
        let params = grid
            .cells
            .get(cell)
            .ok_or_else(|| SccaError::InvalidParameter(format!("grid has no cell {cell}")))?;
        self.fit(views, None, params, derive_seed(grid.seed, cell as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub params: Vec<f64>,
    /// p-value (permutation) or mean held-out correlation (cross-validation);
    /// `None` when the cell is unusable.
    pub score: Option<f64>,
    /// Correlation of the fit on the matched data (permutation only).
    pub rho: Option<f64>,
    /// Active counts per view of the matched fit (permutation only).
    pub cardinalities: Vec<usize>,
    /// Per-permutation or per-fold correlations.
    pub trace: Vec<f64>,
    /// Permutations whose fit failed, or folds that were degenerate.
    pub flagged: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub method: TuneMethod,
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub chosen: Option<usize>,
}

impl TuneReport {
    pub fn chosen_cell(&self) -> Result<&CellReport> {
        self.chosen
            .map(|i| &self.cells[i])
            .ok_or_else(|| SccaError::DegenerateInput("no usable grid cell".into()))
    }
}

/// Picks the best usable score; ties go to the larger parameter sum, then
/// the earlier cell.
fn choose(cells: &[CellReport], lower_is_better: bool) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for c in cells {
        let Some(score) = c.score else { continue };
        let key = if lower_is_better { -score } else { score };
        let sum: f64 = c.params.iter().sum();
        let better = match best {
            None => true,
            Some((_, bk, bs)) => key > bk || (key == bk && sum > bs),
        };
        if better {
            best = Some((c.index, key, sum));
        }
    }
    best.map(|b| b.0)
}

/// Seeded row permutations of length `n`, one per resample.
pub fn draw_permutations(n: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let stream = derive_seed(seed, PERMUTATION_STREAM);
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, k as u64));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect()
}

/// Seeded shuffle cut into contiguous folds; the first `n mod k` folds get
/// one extra sample.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < 2 * folds {
        return Err(SccaError::InvalidParameter(format!(
            "{folds} folds need at least {} samples, have {n}",
            2 * folds.max(2)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

fn check_rows(views: &[ViewMatrix]) -> Result<usize> {
    let n = views[0].n();
    if views.iter().any(|v| v.n() != n) {
        return Err(SccaError::Dimension("views differ in sample count".into()));
    }
    Ok(n)
}

/// Permutation test over the grid with resamples drawn from `grid.seed`.
pub fn perm_tune(
    views: &[ViewMatrix],
    grid: &TuneGrid,
    pipeline: &Pipeline,
    jobs: Option<usize>,
) -> Result<TuneReport> {
    let TuneMethod::Permutation { permutations } = grid.method else {
        return Err(SccaError::InvalidParameter(
            "grid is not set up for permutations".into(),
        ));
    };
    grid.validate(pipeline.arity(views.len()))?;
    pipeline.check_views(views)?;
    let n = check_rows(views)?;
    let perms = draw_permutations(n, permutations, grid.seed);
    perm_tune_with(views, grid, pipeline, &perms, jobs, None)
}

/// Permutation test with caller-supplied permutations of view 1's rows.
pub fn perm_tune_with(
    views: &[ViewMatrix],
    grid: &TuneGrid,
    pipeline: &Pipeline,
    perms: &[Vec<usize>],
    jobs: Option<usize>,
    observer: Observer,
) -> Result<TuneReport> {
    grid.validate(pipeline.arity(views.len()))?;
    pipeline.check_views(views)?;
    let n = check_rows(views)?;
    if perms.is_empty() {
        return Err(SccaError::InvalidParameter("need at least one permutation".into()));
    }
    for p in perms {
        let mut seen = vec![false; n];
        if p.len() != n || p.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(SccaError::InvalidParameter("invalid row permutation".into()));
        }
    }
    let stride = perms.len() + 1;
    let outcomes: Vec<Result<CcaSolution>> = map_indexed(grid.cells.len() * stride, jobs, |task| {
        let (cell, k) = (task / stride, task % stride);
        let seed = derive_seed(grid.seed, cell as u64);
        let out = if k == 0 {
            pipeline.fit(views, None, &grid.cells[cell], seed)
        } else {
            let mut shuffled = views.to_vec();
            shuffled[0] = views[0].permute_rows(&perms[k - 1]);
            pipeline.fit(&shuffled, None, &grid.cells[cell], seed)
        };
        if let (Some(f), Ok(sol)) = (observer, &out) {
            f(sol);
        }
        out
    });
    let cells = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, params)| {
            let chunk = &outcomes[i * stride..(i + 1) * stride];
            let mut report = CellReport {
                index: i,
                params: params.clone(),
                score: None,
                rho: None,
                cardinalities: Vec::new(),
                trace: Vec::with_capacity(perms.len()),
                flagged: Vec::new(),
                error: None,
            };
            for (k, out) in chunk[1..].iter().enumerate() {
                match out {
                    Ok(sol) => report.trace.push(sol.correlations[0]),
                    Err(_) => {
                        report.trace.push(0.0);
                        report.flagged.push(k);
                    }
                }
            }
            match &chunk[0] {
                Ok(sol) => {
                    let rho = sol.correlations[0];
                    let exceed = report.trace.iter().filter(|&&r| r > rho).count();
                    report.rho = Some(rho);
                    report.score = Some(exceed as f64 / perms.len() as f64);
                    report.cardinalities = sol.patterns.iter().map(|p| p[0].active_count()).collect();
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            report
        })
        .collect::<Vec<_>>();
    Ok(TuneReport {
        method: TuneMethod::Permutation {
            permutations: perms.len(),
        },
        seed: grid.seed,
        chosen: choose(&cells, true),
        cells,
    })
}

/// Mean pairwise Pearson correlation of held-out covariates; `None` if any
/// covariate has zero variance.
fn held_out_correlation(views: &[ViewMatrix], sol: &CcaSolution) -> Option<f64> {
    let covariates: Vec<DVector<f64>> = views
        .iter()
        .zip(&sol.directions)
        .map(|(v, d)| mat_vec(v.data(), &d[0]))
        .collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..covariates.len() {
        for j in i + 1..covariates.len() {
            total += pearson(covariates[i].as_slice(), covariates[j].as_slice())?;
            pairs += 1;
        }
    }
    Some(total / pairs as f64)
}

/// k-fold cross-validation over the grid. Training splits are re-centered
/// (and re-scaled if the input was scaled); a fold whose training fit fails
/// or whose held-out covariate is constant scores 0 and is flagged.
pub fn cv_tune(views: &[ViewMatrix], grid: &TuneGrid, pipeline: &Pipeline, jobs: Option<usize>) -> Result<TuneReport> {
    cv_tune_observed(views, grid, pipeline, jobs, None)
}

pub fn cv_tune_observed(
    views: &[ViewMatrix],
    grid: &TuneGrid,
    pipeline: &Pipeline,
    jobs: Option<usize>,
    observer: Observer,
) -> Result<TuneReport> {
    let TuneMethod::CrossValidation { folds } = grid.method else {
        return Err(SccaError::InvalidParameter(
            "grid is not set up for cross-validation".into(),
        ));
    };
    grid.validate(pipeline.arity(views.len()))?;
    pipeline.check_views(views)?;
    let n = check_rows(views)?;
    let assignment = fold_assignment(n, folds, grid.seed)?;
    let splits: Vec<(Vec<usize>, Vec<ViewMatrix>, Vec<ViewMatrix>)> = assignment
        .iter()
        .map(|held| {
            let mut is_held = vec![false; n];
            held.iter().for_each(|&i| is_held[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
            let train_views = views
                .iter()
                .map(|v| center_scale(&v.select_rows(&train), v.is_scaled()).view)
                .collect();
            let test_views = views.iter().map(|v| v.select_rows(held)).collect();
            (train, train_views, test_views)
        })
        .collect();
    let scores: Vec<Option<f64>> = map_indexed(grid.cells.len() * folds, jobs, |task| {
        let (cell, k) = (task / folds, task % folds);
        let (train, train_views, test_views) = &splits[k];
        let seed = derive_seed(grid.seed, cell as u64);
        let sol = pipeline.fit(train_views, Some(train), &grid.cells[cell], seed).ok()?;
        if let Some(f) = observer {
            f(&sol);
        }
        held_out_correlation(test_views, &sol)
    });
    let cells = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, params)| {
            let chunk = &scores[i * folds..(i + 1) * folds];
            let trace: Vec<f64> = chunk.iter().map(|s| s.unwrap_or(0.0)).collect();
            let flagged: Vec<usize> = (0..folds).filter(|&k| chunk[k].is_none()).collect();
            let usable = flagged.len() < folds;
            CellReport {
                index: i,
                params: params.clone(),
                score: usable.then(|| trace.iter().sum::<f64>() / folds as f64),
                rho: None,
                cardinalities: Vec::new(),
                trace,
                error: (!usable).then(|| "every fold failed".to_string()),
                flagged,
            }
        })
        .collect::<Vec<_>>();
    Ok(TuneReport {
        method: grid.method,
        seed: grid.seed,
        chosen: choose(&cells, false),
        cells,
    })
}

/// Dispatches on the grid's method.
pub fn grid_orchestrate(
    views: &[ViewMatrix],
    grid: &TuneGrid,
    pipeline: &Pipeline,
    jobs: Option<usize>,
) -> Result<TuneReport> {
    match grid.method {
        TuneMethod::Permutation { .. } => perm_tune(views, grid, pipeline, jobs),
        TuneMethod::CrossValidation { .. } => cv_tune(views, grid, pipeline, jobs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::GammaScale;
    use crate::simulate::{gen_null, gen_rank_one, RankOneSpec};

    fn centered(v: &ViewMatrix) -> ViewMatrix {
        center_scale(v, false).view
    }

    fn planted(seed: u64) -> Vec<ViewMatrix> {
        gen_rank_one(&RankOneSpec::two_view(0.2, seed)).unwrap().centered()
    }

    fn relative_pair() -> Pipeline {
        let mut cfg = FitConfig::default();
        cfg.pair.gamma_scale = GammaScale::Relative;
        Pipeline::Pair(cfg)
    }

    #[test]
    fn folds_partition_with_remainder_first() {
        let f = fold_assignment(23, 5, 4).unwrap();
        let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(fold_assignment(9, 5, 0).is_err());
    }

    #[test]
    fn single_cell_grid() {
        let views = planted(1);
        let grid = TuneGrid::cartesian(&[0.3], &[0.3], TuneMethod::Permutation { permutations: 5 }, 2);
        let r = perm_tune(&views, &grid, &relative_pair(), Some(1)).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.chosen, Some(0));
        assert_eq!(r.cells[0].params, vec![0.3, 0.3]);
    }

    #[test]
    fn identity_permutation_gives_zero_p() {
        let views = planted(2);
        let grid = TuneGrid::cartesian(&[0.2, 0.4], &[0.3], TuneMethod::Permutation { permutations: 1 }, 0);
        let id: Vec<usize> = (0..50).collect();
        let r = perm_tune_with(&views, &grid, &relative_pair(), &[id], None, None).unwrap();
        for c in &r.cells {
            assert_eq!(c.trace[0], c.rho.unwrap());
            assert_eq!(c.score, Some(0.0));
        }
        assert_eq!(r.chosen, Some(1));
    }

    #[test]
    fn refit_matches_reported_rho() {
        let views = planted(6);
        let grid = TuneGrid::cartesian(&[0.1, 0.4], &[0.2], TuneMethod::Permutation { permutations: 3 }, 9);
        let r = perm_tune(&views, &grid, &relative_pair(), Some(1)).unwrap();
        for c in &r.cells {
            let sol = relative_pair().fit_cell(&views, &grid, c.index).unwrap();
            assert_eq!(Some(sol.correlations[0]), c.rho);
        }
        assert!(relative_pair().fit_cell(&views, &grid, 2).is_err());
    }

    #[test]
    fn strong_signal_has_zero_p() {
        let views = planted(3);
        let grid = TuneGrid::cartesian(&[0.4], &[0.4], TuneMethod::Permutation { permutations: 30 }, 5);
        let r = perm_tune(&views, &grid, &relative_pair(), None).unwrap();
        assert_eq!(r.cells[0].score, Some(0.0));
    }

    #[test]
    fn p_values_on_lattice_and_report_independent_of_jobs() {
        let (a, b) = gen_null(30, 12, 10, 8).unwrap();
        let views = vec![centered(&a), centered(&b)];
        let grid = TuneGrid::cartesian(
            &[0.1, 0.3],
            &[0.1, 0.3],
            TuneMethod::Permutation { permutations: 20 },
            11,
        );
        let r1 = perm_tune(&views, &grid, &relative_pair(), Some(1)).unwrap();
        let r4 = perm_tune(&views, &grid, &relative_pair(), Some(4)).unwrap();
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r4).unwrap());
        for c in &r1.cells {
            let p = c.score.unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert_eq!((p * 20.0).round() / 20.0, p);
        }
    }

    #[test]
    fn cv_score_is_mean_of_folds_and_null_is_small() {
        let (a, b) = gen_null(50, 40, 30, 9).unwrap();
        let views = vec![centered(&a), centered(&b)];
        let grid = TuneGrid::cartesian(&[0.2, 0.5], &[0.2, 0.5], TuneMethod::CrossValidation { folds: 5 }, 1);
        let r = cv_tune(&views, &grid, &relative_pair(), None).unwrap();
        for c in &r.cells {
            let mean = c.trace.iter().sum::<f64>() / 5.0;
            assert_eq!(c.score.unwrap(), mean);
            assert!(mean.abs() < 0.5);
        }
        assert!(r.chosen.is_some());
    }

    #[test]
    fn tie_goes_to_sparser_cell() {
        let mk = |index, params: Vec<f64>, score| CellReport {
            index,
            params,
            score: Some(score),
            rho: None,
            cardinalities: vec![],
            trace: vec![],
            flagged: vec![],
            error: None,
        };
        let cells = vec![
            mk(0, vec![0.1, 0.1], 0.0),
            mk(1, vec![0.3, 0.1], 0.0),
            mk(2, vec![0.5, 0.5], 0.1),
        ];
        assert_eq!(choose(&cells, true), Some(1));
        assert_eq!(choose(&cells, false), Some(2));
    }

    #[test]
    fn unusable_cells_are_reported_not_fatal() {
        let views = planted(4);
        let grid = TuneGrid::cartesian(&[0.3, 2.0], &[0.3], TuneMethod::Permutation { permutations: 3 }, 0);
        let r = perm_tune(&views, &grid, &relative_pair(), None).unwrap();
        assert!(r.cells[1].score.is_none() && r.cells[1].error.is_some());
        assert_eq!(r.chosen, Some(0));
    }
}
