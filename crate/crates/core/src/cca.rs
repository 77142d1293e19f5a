//! Stage two: canonical directions on pattern-shrunken problems, and
//! multi-factor deflation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    cross_covariance_with, shrink, CovarianceSet, CrossCovariance, Divisor, SparsityPattern, ViewMatrix,
};
use crate::error::{Result, SccaError};
use crate::linalg::{
    canonical_sign, cholesky_lower, is_symmetric, mat_t_vec, mat_vec, normalized, pearson, solve_lower, solve_lower_t,
    sym_eigen_sorted,
};
use crate::pattern::{init_direction, scca_pair_cov, ConvergenceSpec, PairConfig};

/// How stored directions are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `‖z‖₂ = 1`.
    UnitNorm,
    /// `zᵀ(Cᵢᵢ + ridge·I)z = 1` on the active entries.
    CovarianceNorm,
}

/// Stage-two back-end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageTwo {
    /// Leading singular pair of the doubly-shrunken cross-covariance.
    #[default]
    Svd,
    /// Generalized eigenproblem with within-view covariances.
    Gep,
    /// Inversion-free multi-view power iteration (same as `Svd` for two views).
    Power,
}

impl std::str::FromStr for StageTwo {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(StageTwo::Svd),
            "gep" => Ok(StageTwo::Gep),
            "power" => Ok(StageTwo::Power),
            other => Err(format!("unknown stage-two back-end {other:?}")),
        }
    }
}

/// Per-factor canonical directions, correlations and covariates.
#[derive(Debug, Clone)]
pub struct CcaSolution {
    /// `directions[view][factor]`, full length, zero off-support.
    pub directions: Vec<Vec<DVector<f64>>>,
    /// `patterns[view][factor]`.
    pub patterns: Vec<Vec<SparsityPattern>>,
    /// Sample correlation of the paired covariates, per factor.
    pub correlations: Vec<f64>,
    /// Per view, the `n × factors` covariate matrix `Xᵢ Zᵢ`.
    pub covariates: Option<Vec<DMatrix<f64>>>,
    pub normalization: Normalization,
    /// `deflation_order[k]` is the extraction step that produced factor `k`.
    pub deflation_order: Vec<usize>,
    /// Stage-one iterations per factor.
    pub iterations: Vec<usize>,
    /// `effective_gammas[factor][view]`.
    pub effective_gammas: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
    /// Stage-one objective sequences in execution order; filled only when
    /// objective tracking is on.
    pub objective_traces: Vec<Vec<f64>>,
}

impl CcaSolution {
    pub fn factor_count(&self) -> usize {
        self.correlations.len()
    }

    pub fn view_count(&self) -> usize {
        self.directions.len()
    }

    fn empty(m: usize, normalization: Normalization) -> Self {
        CcaSolution {
            directions: vec![Vec::new(); m],
            patterns: vec![Vec::new(); m],
            correlations: Vec::new(),
            covariates: None,
            normalization,
            deflation_order: Vec::new(),
            iterations: Vec::new(),
            effective_gammas: Vec::new(),
            warnings: Vec::new(),
            objective_traces: Vec::new(),
        }
    }

    /// Fills `covariates` and `correlations` from the views, then orders
    /// factors by decreasing correlation.
    pub(crate) fn finish(mut self, views: &[&ViewMatrix]) -> Self {
        let k = self.factor_count();
        let covs: Vec<DMatrix<f64>> = views
            .iter()
            .zip(&self.directions)
            .map(|(v, dirs)| {
                let mut out = DMatrix::zeros(v.n(), k);
                for (f, z) in dirs.iter().enumerate() {
                    out.set_column(f, &(v.data() * z));
                }
                out
            })
            .collect();
        for f in 0..k {
            let mut sum = 0.0;
            let mut pairs = 0;
            for r in 0..covs.len() {
                for s in (r + 1)..covs.len() {
                    let a = covs[r].column(f);
                    let b = covs[s].column(f);
                    match pearson(a.as_slice(), b.as_slice()) {
                        Some(rho) => sum += rho,
                        None => self.warnings.push(format!(
                            "factor {}: covariate of view {} or {} has zero variance",
                            f + 1,
                            r + 1,
                            s + 1
                        )),
                    }
                    pairs += 1;
                }
            }
            self.correlations[f] = sum / pairs as f64;
        }
        self.covariates = Some(covs);
        self.sort_by_correlation();
        self
    }

    fn sort_by_correlation(&mut self) {
        let k = self.factor_count();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| self.correlations[b].total_cmp(&self.correlations[a]));
        if order.iter().enumerate().all(|(i, &j)| i == j) {
            return;
        }
        self.correlations = reorder(&self.correlations, &order);
        self.deflation_order = reorder(&self.deflation_order, &order);
        self.iterations = reorder(&self.iterations, &order);
        self.effective_gammas = reorder(&self.effective_gammas, &order);
        for dirs in &mut self.directions {
            *dirs = reorder(dirs, &order);
        }
        for pats in &mut self.patterns {
            *pats = reorder(pats, &order);
        }
        if let Some(covs) = self.covariates.as_mut() {
            for c in covs {
                *c = c.select_columns(&order);
            }
        }
    }
}

fn reorder<T: Clone>(v: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| v[i].clone()).collect()
}

/// Leading singular triple from power iteration.
#[derive(Debug, Clone)]
pub struct PowerSvd {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub sigma: f64,
    pub iterations: usize,
    /// `uᵀCv` after each half-step pair.
    pub sigma_trace: Vec<f64>,
}

/// Alternating power iteration `v ← Cᵀu/‖·‖`, `u ← Cv/‖·‖` from the
/// largest column of `C`.
pub fn power_svd(block: &DMatrix<f64>, conv: &ConvergenceSpec) -> Result<PowerSvd> {
    conv.validate()?;
    let mut u = init_direction(block)?;
    let mut v =
        normalized(&mat_t_vec(block, &u)).ok_or_else(|| SccaError::DegenerateInput("block is all zero".into()))?;
    let mut sigma_trace = vec![u.dot(&mat_vec(block, &v))];
    let mut iterations = 0;
    while iterations < conv.max_iter {
        iterations += 1;
        let u_new = normalized(&mat_vec(block, &v))
            .ok_or_else(|| SccaError::DegenerateInput("zero update in power iteration".into()))?;
        let v_new = normalized(&mat_t_vec(block, &u_new))
            .ok_or_else(|| SccaError::DegenerateInput("zero update in power iteration".into()))?;
        let du = (&u_new - &u).norm();
        let dv = (&v_new - &v).norm();
        u = u_new;
        v = v_new;
        sigma_trace.push(u.dot(&mat_vec(block, &v)));
        if du < conv.tol && dv < conv.tol {
            break;
        }
    }
    let sign = canonical_sign(&u);
    u *= sign;
    v *= sign;
    let sigma = u.dot(&mat_vec(block, &v));
    Ok(PowerSvd {
        u,
        v,
        sigma,
        iterations,
        sigma_trace,
    })
}

/// All positive-eigenvalue solutions of the two-view generalized
/// eigenproblem, ordered by decreasing canonical correlation.
#[derive(Debug, Clone)]
pub struct GepSolution {
    pub z1: Vec<DVector<f64>>,
    pub z2: Vec<DVector<f64>>,
    pub rho: Vec<f64>,
}

/// Solves `[[0, C₁₂],[C₂₁, 0]] w = λ [[C₁₁+rI, 0],[0, C₂₂+rI]] w`.
///
/// Directions satisfy `zᵢᵀ(Cᵢᵢ + rI)zᵢ = 1`; the first nonzero entry of each
/// `z₁` is positive.
pub fn cca_gep(c11: &DMatrix<f64>, c12: &DMatrix<f64>, c22: &DMatrix<f64>, ridge: f64) -> Result<GepSolution> {
    let (p1, p2) = c12.shape();
    if c11.shape() != (p1, p1) || c22.shape() != (p2, p2) {
        return Err(SccaError::Dimension(format!(
            "within blocks {:?} and {:?} do not fit a {p1}×{p2} cross block",
            c11.shape(),
            c22.shape()
        )));
    }
    if !is_symmetric(c11, 1e-10) || !is_symmetric(c22, 1e-10) {
        return Err(SccaError::Dimension("within-view blocks must be symmetric".into()));
    }
    let dims = [p1, p2];
    let within = [c11.clone(), c22.clone()];
    let (vals, vecs) = block_gep(
        &dims,
        &within,
        |r, s| match (r, s) {
            (0, 1) => c12.clone(),
            _ => c12.transpose(),
        },
        ridge,
    )?;
    let mut out = GepSolution {
        z1: Vec::new(),
        z2: Vec::new(),
        rho: Vec::new(),
    };
    for (k, &lambda) in vals.iter().enumerate().take(p1.min(p2)) {
        if lambda <= 1e-12 * vals[0].abs().max(1.0) {
            break;
        }
        let w = vecs.column(k);
        let mut z1 = w.rows(0, p1).into_owned();
        let mut z2 = w.rows(p1, p2).into_owned();
        rescale(&mut z1, c11, ridge);
        rescale(&mut z2, c22, ridge);
        let sign = canonical_sign(&z1);
        out.z1.push(z1 * sign);
        out.z2.push(z2 * sign);
        out.rho.push(lambda);
    }
    Ok(out)
}

/// Scales `z` so that `zᵀ(C + rI)z = 1`.
fn rescale(z: &mut DVector<f64>, c: &DMatrix<f64>, ridge: f64) {
    let q = z.dot(&(c * &*z)) + ridge * z.norm_squared();
    if q > 0.0 {
        *z /= q.sqrt();
    }
}

/// Generalized eigenproblem with off-diagonal blocks from `cross(r, s)` on
/// the left and `blockdiag(Cᵢᵢ + ridge·I)` on the right. Returns eigenvalues
/// (decreasing) and `B`-orthonormal eigenvectors.
fn block_gep(
    dims: &[usize],
    within: &[DMatrix<f64>],
    cross: impl Fn(usize, usize) -> DMatrix<f64>,
    ridge: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let total: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut a = DMatrix::zeros(total, total);
    let mut b = DMatrix::zeros(total, total);
    for r in 0..dims.len() {
        let mut w = within[r].clone();
        for i in 0..dims[r] {
            w[(i, i)] += ridge;
        }
        b.view_mut((offsets[r], offsets[r]), (dims[r], dims[r])).copy_from(&w);
        for s in 0..dims.len() {
            if r != s {
                a.view_mut((offsets[r], offsets[s]), (dims[r], dims[s]))
                    .copy_from(&cross(r, s));
            }
        }
    }
    let l = cholesky_lower(&b, 1e-12)?;
    let left = solve_lower(&l, &a);
    let m = solve_lower(&l, &left.transpose());
    let (vals, ys) = sym_eigen_sorted(&m);
    Ok((vals, solve_lower_t(&l, &ys)))
}

/// `C₁₂` minus fitted rank-one terms, with the terms that were removed.
#[derive(Debug, Clone)]
pub struct ResidualState {
    pub base: DMatrix<f64>,
    /// `(left, right, scale)` with unit-norm `left`/`right`.
    pub history: Vec<(DVector<f64>, DVector<f64>, f64)>,
    pub current: DMatrix<f64>,
}

impl ResidualState {
    pub fn new(base: DMatrix<f64>) -> Self {
        ResidualState {
            current: base.clone(),
            base,
            history: Vec::new(),
        }
    }

    /// Removes `(z₁ᵀ·current·z₂)·z₁z₂ᵀ`.
    pub fn deflate(self, z1: &DVector<f64>, z2: &DVector<f64>) -> Result<Self> {
        if z1.len() != self.base.nrows() || z2.len() != self.base.ncols() {
            return Err(SccaError::Dimension(format!(
                "directions of length ({}, {}) for a {}×{} block",
                z1.len(),
                z2.len(),
                self.base.nrows(),
                self.base.ncols()
            )));
        }
        let scale = z1.dot(&mat_vec(&self.current, z2));
        Ok(self.subtract(z1.clone(), z2.clone(), scale))
    }

    /// Removes `scale·left·rightᵀ`, storing the term with unit-norm factors.
    pub(crate) fn subtract(mut self, left: DVector<f64>, right: DVector<f64>, scale: f64) -> Self {
        self.current -= (&left * right.transpose()) * scale;
        let (nl, nr) = (left.norm(), right.norm());
        if nl > 0.0 && nr > 0.0 {
            self.history.push((left / nl, right / nr, scale * nl * nr));
        } else {
            self.history.push((left, right, 0.0));
        }
        self
    }

    /// `‖current − (base − Σ scale·left·rightᵀ)‖_max`.
    pub fn reconstruction_error(&self) -> f64 {
        let mut rebuilt = self.base.clone();
        for (l, r, s) in &self.history {
            rebuilt -= (l * r.transpose()) * *s;
        }
        (rebuilt - &self.current).amax()
    }
}

pub fn deflate(state: ResidualState, z1: &DVector<f64>, z2: &DVector<f64>) -> Result<ResidualState> {
    state.deflate(z1, z2)
}

/// Two-view pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub pair: PairConfig,
    pub stage2: StageTwo,
    pub ridge: f64,
    pub divisor: Divisor,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            pair: PairConfig::default(),
            stage2: StageTwo::Svd,
            ridge: 0.0,
            divisor: Divisor::N,
        }
    }
}

/// Result of one stage-two solve on a doubly-shrunken problem, expanded to
/// full length.
struct FactorFit {
    z1: DVector<f64>,
    z2: DVector<f64>,
}

fn expand(p: usize, support: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    for (k, &i) in support.iter().enumerate() {
        out[i] = values[k];
    }
    out
}

/// Solves a GEP and, if the within-view blocks are singular, retries once
/// with ridge `1e-8·trace/dim`.
pub(crate) fn gep_with_fallback(
    c11: &DMatrix<f64>,
    c12: &DMatrix<f64>,
    c22: &DMatrix<f64>,
    ridge: f64,
    warnings: &mut Vec<String>,
) -> Result<(GepSolution, f64)> {
    match cca_gep(c11, c12, c22, ridge) {
        Err(SccaError::Singularity(msg)) if ridge == 0.0 => {
            let dim = (c11.nrows() + c22.nrows()) as f64;
            let fallback = 1e-8 * (c11.trace() + c22.trace()) / dim;
            warnings.push(format!("{msg}; retried with ridge {fallback:.3e}"));
            cca_gep(c11, c12, c22, fallback).map(|g| (g, fallback))
        }
        other => other.map(|g| (g, ridge)),
    }
}

/// Runs stage one then stage two for `gammas1.len()` factors, deflating the
/// cross-covariance after each.
///
/// If a later factor collapses to an empty support, the completed factors
/// are returned with a warning; a collapse on the first factor is an error.
pub fn multi_factor(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    gammas1: &[f64],
    gammas2: &[f64],
    cfg: &FitConfig,
) -> Result<CcaSolution> {
    if gammas1.len() != gammas2.len() || gammas1.is_empty() {
        return Err(SccaError::InvalidParameter(format!(
            "need equal, nonempty per-factor sparsity vectors, got {} and {}",
            gammas1.len(),
            gammas2.len()
        )));
    }
    let c12 = cross_covariance_with(x1, x2, (0, 1), cfg.divisor)?.block;
    let within = if cfg.stage2 == StageTwo::Gep {
        Some((
            cross_covariance_with(x1, x1, (0, 0), cfg.divisor)?.block,
            cross_covariance_with(x2, x2, (1, 1), cfg.divisor)?.block,
        ))
    } else {
        None
    };
    let normalization = match cfg.stage2 {
        StageTwo::Gep => Normalization::CovarianceNorm,
        _ => Normalization::UnitNorm,
    };
    let mut sol = CcaSolution::empty(2, normalization);
    let mut state = ResidualState::new(c12);
    for (f, (&g1, &g2)) in gammas1.iter().zip(gammas2).enumerate() {
        let mut pair_cfg = cfg.pair;
        pair_cfg.gamma1 = g1;
        pair_cfg.gamma2 = g2;
        pair_cfg.seed = cfg.pair.seed.wrapping_add(f as u64);
        let step = factor_step(&state, &pair_cfg, within.as_ref(), cfg, x1, x2, &mut sol);
        let (fit, pats, iters, gammas) = match step {
            Ok(v) => v,
            Err(e) if f > 0 && (e.is_empty_support() || matches!(e, SccaError::DegenerateInput(_))) => {
                sol.warnings
                    .push(format!("stopped after {f} factor(s): factor {}: {e}", f + 1));
                break;
            }
            Err(e) => return Err(e),
        };
        state = match &within {
            Some((c11, c22)) => {
                let scale = fit.z1.dot(&mat_vec(&state.current, &fit.z2));
                state.subtract(c11 * &fit.z1, c22 * &fit.z2, scale)
            }
            None => state.deflate(&fit.z1, &fit.z2)?,
        };
        sol.directions[0].push(fit.z1);
        sol.directions[1].push(fit.z2);
        sol.patterns[0].push(pats.0);
        sol.patterns[1].push(pats.1);
        sol.correlations.push(0.0);
        sol.deflation_order.push(f);
        sol.iterations.push(iters);
        sol.effective_gammas.push(vec![gammas.0, gammas.1]);
    }
    Ok(sol.finish(&[x1, x2]))
}

type StepOutput = (FactorFit, (SparsityPattern, SparsityPattern), usize, (f64, f64));

fn factor_step(
    state: &ResidualState,
    pair_cfg: &PairConfig,
    within: Option<&(DMatrix<f64>, DMatrix<f64>)>,
    cfg: &FitConfig,
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    sol: &mut CcaSolution,
) -> Result<StepOutput> {
    let pats = scca_pair_cov(&state.current, pair_cfg)?;
    for pass in [&pats.first_pass, &pats.second_pass] {
        if let Some(t) = &pass.objective_trace {
            sol.objective_traces.push(t.clone());
        }
    }
    let cov = CrossCovariance::from_block(state.current.clone());
    let shrunk = shrink(&cov, &pats.tau1, &pats.tau2)?;
    let rows = shrunk.row_indices();
    let cols = shrunk.col_indices();
    let (z1, z2) = match within {
        None => {
            let svd = power_svd(&shrunk.block, &cfg.pair.conv)?;
            (svd.u, svd.v)
        }
        Some((c11, c22)) => {
            let s11 = c11.select_rows(&rows).select_columns(&rows);
            let s22 = c22.select_rows(&cols).select_columns(&cols);
            let (g, _) = gep_with_fallback(&s11, &shrunk.block, &s22, cfg.ridge, &mut sol.warnings)?;
            if g.rho.is_empty() {
                return Err(SccaError::DegenerateInput(
                    "no positive canonical correlation on the shrunken problem".into(),
                ));
            }
            (g.z1[0].clone(), g.z2[0].clone())
        }
    };
    let fit = FactorFit {
        z1: expand(x1.p(), &rows, &z1),
        z2: expand(x2.p(), &cols, &z2),
    };
    let iters = pats.iterations();
    let gammas = pats.effective_gammas;
    Ok((fit, (pats.tau1, pats.tau2), iters, gammas))
}

/// Single-factor convenience wrapper around [`multi_factor`].
pub fn fit_pair(x1: &ViewMatrix, x2: &ViewMatrix, cfg: &FitConfig) -> Result<CcaSolution> {
    multi_factor(x1, x2, &[cfg.pair.gamma1], &[cfg.pair.gamma2], cfg)
}

/// Multi-view generalized eigenproblem; returns per-view directions with
/// `zᵢᵀ(Cᵢᵢ + ridge·I)zᵢ = 1` and the leading eigenvalue.
#[derive(Debug, Clone)]
pub struct MultiViewStageTwo {
    pub directions: Vec<DVector<f64>>,
    pub eigenvalue: f64,
    /// Set when every cross block is zero, so the eigenvector is arbitrary.
    pub uninformative: bool,
}

pub fn multiview_gep(set: &CovarianceSet, ridge: f64) -> Result<MultiViewStageTwo> {
    let m = set.view_count();
    let within: Vec<DMatrix<f64>> = (0..m).map(|i| set.within(i).clone()).collect();
    for (i, w) in within.iter().enumerate() {
        if !is_symmetric(w, 1e-10) {
            return Err(SccaError::Dimension(format!("within block {i} is not symmetric")));
        }
    }
    let (vals, vecs) = block_gep(set.dims(), &within, |r, s| set.oriented(r, s), ridge)?;
    let uninformative = (0..m).all(|r| ((r + 1)..m).all(|s| set.cross(r, s).amax() == 0.0));
    let w = vecs.column(0);
    let mut offset = 0;
    let mut directions = Vec::with_capacity(m);
    for (i, &d) in set.dims().iter().enumerate() {
        let mut z = w.rows(offset, d).into_owned();
        rescale(&mut z, set.within(i), ridge);
        directions.push(z);
        offset += d;
    }
    let sign = canonical_sign(&directions[0]);
    for z in &mut directions {
        *z *= sign;
    }
    Ok(MultiViewStageTwo {
        directions,
        eigenvalue: if uninformative { 0.0 } else { vals[0] },
        uninformative,
    })
}

/// Inversion-free multi-view power iteration. Views are solved from last to
/// first; view `r` iterates
/// `z_r ← normalize(Σ_{s<r} C_srᵀ(C_sr z_r) + Σ_{s>r} C_rs z_s)`
/// until its step falls below `tol`.
pub fn multiview_power(
    set: &CovarianceSet,
    inits: &[DVector<f64>],
    conv: &ConvergenceSpec,
) -> Result<Vec<DVector<f64>>> {
    conv.validate()?;
    let m = set.view_count();
    if inits.len() != m {
        return Err(SccaError::Dimension(format!(
            "{} initial directions for {m} views",
            inits.len()
        )));
    }
    for (i, z) in inits.iter().enumerate() {
        if z.len() != set.dims()[i] {
            return Err(SccaError::Dimension(format!(
                "initial direction {i} has length {}, view has {}",
                z.len(),
                set.dims()[i]
            )));
        }
    }
    let mut z: Vec<DVector<f64>> = inits.to_vec();
    for r in (0..m).rev() {
        for _ in 0..conv.max_iter {
            let mut update = DVector::zeros(set.dims()[r]);
            for s in 0..r {
                let c = set.cross(s, r);
                update += mat_t_vec(c, &mat_vec(c, &z[r]));
            }
            for (s, zs) in z.iter().enumerate().skip(r + 1) {
                update += mat_vec(set.cross(r, s), zs);
            }
            let next = normalized(&update)
                .ok_or_else(|| SccaError::DegenerateInput(format!("zero update for view {}", r + 1)))?;
            let step = (&next - &z[r]).norm();
            z[r] = next;
            if step < conv.tol {
                break;
            }
        }
    }
    let sign = canonical_sign(&z[0]);
    for zi in &mut z {
        *zi *= sign;
    }
    Ok(z)
}
