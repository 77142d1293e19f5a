//! Directed sparse CCA: canonical directions steered toward an accessory
//! vector `y`.
//!
//! The single-stage variants add alignment terms `εᵢ·bᵢ` to the stage-one
//! ascent, where `bᵢ` is either `Xᵢᵀy/n` (dot variant) or a regression
//! coefficient vector (regression variant). With projections
//! `q = Cᵀz₁ + ε₂b₂` the lead update is `z₁ ← normalize(C·soft_γ₂(q) + ε₁b₁)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cca::{fit_pair, gep_with_fallback, power_svd, CcaSolution, FitConfig, Normalization, StageTwo};
use crate::covariance::{cross_covariance_with, shrink, CrossCovariance, Divisor, SparsityPattern, ViewMatrix};
use crate::error::{Result, SccaError};
use crate::linalg::{cholesky_lower, column_norms, normalized, pearson, solve_lower, solve_lower_t, sym_sqrt};
use crate::pattern::{
    init_direction, run_pattern, Ascent, ConvergenceSpec, GammaScale, PatternResult, Penalty, SideOrder,
};

/// Observed length-`n` vector toward which covariates are steered.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessoryVector {
    values: DVector<f64>,
    centered: bool,
}

impl AccessoryVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SccaError::InvalidParameter(
                "accessory vector has non-finite entries".into(),
            ));
        }
        Ok(AccessoryVector {
            values,
            centered: false,
        })
    }

    pub fn centered(&self) -> Self {
        let mean = self.values.mean();
        AccessoryVector {
            values: self.values.add_scalar(-mean),
            centered: true,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The accessory vector as a single-column view named `y`.
    pub fn as_view(&self) -> Result<ViewMatrix> {
        let v = ViewMatrix::new(
            DMatrix::from_column_slice(self.len(), 1, self.values.as_slice()),
            Some(vec!["y".into()]),
        )?;
        Ok(crate::covariance::center_scale(&v, false).view)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for DirectedParams {
    fn default() -> Self {
        DirectedParams {
            gamma1: 0.0,
            gamma2: 0.0,
            eps1: 1.0,
            eps2: 1.0,
        }
    }
}

impl DirectedParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SccaError::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn check_accessory(x: &ViewMatrix, y: &AccessoryVector) -> Result<()> {
    if x.n() != y.len() {
        return Err(SccaError::Dimension(format!(
            "accessory vector has length {}, views have {} samples",
            y.len(),
            x.n()
        )));
    }
    if !x.is_centered() || !y.is_centered() {
        return Err(SccaError::State("views and accessory vector must be centered".into()));
    }
    Ok(())
}

/// `Xᵀy / divisor`, on the same scale as the cross-covariance.
pub fn accessory_products(x: &ViewMatrix, y: &AccessoryVector, divisor: Divisor) -> Result<DVector<f64>> {
    check_accessory(x, y)?;
    let d = match divisor {
        Divisor::N => x.n() as f64,
        Divisor::NMinusOne => x.n() as f64 - 1.0,
    };
    Ok(x.data().transpose() * y.values() / d)
}

/// Joint ridge regression or per-column marginal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    #[default]
    Joint,
    Univariate,
}

/// Coefficients from regressing `y` on the columns of `x`:
/// `(XᵀX + ridge·I)β = Xᵀy` (joint) or `xⱼᵀy / (xⱼᵀxⱼ + ridge)` (univariate).
pub fn compute_beta(x: &ViewMatrix, y: &AccessoryVector, ridge: f64, mode: BetaMode) -> Result<DVector<f64>> {
    if x.n() != y.len() {
        return Err(SccaError::Dimension(format!(
            "accessory vector has length {}, view has {} samples",
            y.len(),
            x.n()
        )));
    }
    if !(ridge >= 0.0) {
        return Err(SccaError::InvalidParameter(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let xty = x.data().transpose() * y.values();
    match mode {
        BetaMode::Univariate => Ok(DVector::from_fn(x.p(), |j, _| {
            let d = x.data().column(j).norm_squared() + ridge;
            if d > 0.0 {
                xty[j] / d
            } else {
                0.0
            }
        })),
        BetaMode::Joint => {
            let mut gram = x.data().transpose() * x.data();
            for i in 0..x.p() {
                gram[(i, i)] += ridge;
            }
            let l = cholesky_lower(&gram, 1e-12)?;
            let rhs = DMatrix::from_column_slice(x.p(), 1, xty.as_slice());
            let sol = solve_lower_t(&l, &solve_lower(&l, &rhs));
            Ok(sol.column(0).into_owned())
        }
    }
}

fn directed_ascent<'a>(
    block: &'a DMatrix<f64>,
    lead: &'a DVector<f64>,
    offset: &'a DVector<f64>,
    gamma: f64,
) -> Ascent<'a> {
    let mut a = Ascent::new(block, gamma, Penalty::L1);
    a.lead = Some(lead);
    a.offset = Some(offset);
    a
}

/// Stage one with alignment: pattern over the columns of `c` (view 2).
/// `a1`, `a2` are the alignment vectors of views 1 and 2 (`Xᵢᵀy/n` here).
pub fn directed_pattern_dot(
    c: &DMatrix<f64>,
    a1: &DVector<f64>,
    a2: &DVector<f64>,
    params: &DirectedParams,
    z0: &DVector<f64>,
    conv: &ConvergenceSpec,
) -> Result<PatternResult> {
    params.validate()?;
    if a1.len() != c.nrows() || a2.len() != c.ncols() {
        return Err(SccaError::Dimension(format!(
            "alignment vectors of length ({}, {}) for a {}×{} block",
            a1.len(),
            a2.len(),
            c.nrows(),
            c.ncols()
        )));
    }
    let lead = a1 * params.eps1;
    let offset = a2 * params.eps2;
    run_pattern(&directed_ascent(c, &lead, &offset, params.gamma2), z0, conv)
}

/// As [`directed_pattern_dot`] with regression coefficients in place of
/// `Xᵢᵀy/n`.
pub fn directed_pattern_reg(
    c: &DMatrix<f64>,
    beta1: &DVector<f64>,
    beta2: &DVector<f64>,
    params: &DirectedParams,
    z0: &DVector<f64>,
    conv: &ConvergenceSpec,
) -> Result<PatternResult> {
    directed_pattern_dot(c, beta1, beta2, params, z0, conv)
}

/// Variables with `‖cᵢ‖₂ + ε₂|a₂ᵢ| ≤ γ₂` are inactive for every `z₁`.
pub fn directed_screen(c: &DMatrix<f64>, a2: &DVector<f64>, eps2: f64, gamma2: f64) -> SparsityPattern {
    SparsityPattern::from_bits(
        column_norms(c)
            .into_iter()
            .zip(a2.iter())
            .map(|(n, a)| n + eps2 * a.abs() > gamma2)
            .collect(),
    )
}

/// Alignment source for the single-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectedMode {
    #[default]
    Dot,
    Reg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedConfig {
    pub params: DirectedParams,
    pub mode: DirectedMode,
    pub beta_mode: BetaMode,
    pub beta_ridge: f64,
    pub gamma_scale: GammaScale,
    pub order: SideOrder,
    pub conv: ConvergenceSpec,
    pub stage2: StageTwo,
    pub ridge: f64,
    pub divisor: Divisor,
}

impl Default for DirectedConfig {
    fn default() -> Self {
        DirectedConfig {
            params: DirectedParams::default(),
            mode: DirectedMode::Dot,
            beta_mode: BetaMode::Joint,
            beta_ridge: 0.0,
            gamma_scale: GammaScale::Absolute,
            order: SideOrder::LargerFirst,
            conv: ConvergenceSpec::default(),
            stage2: StageTwo::Svd,
            ridge: 0.0,
            divisor: Divisor::N,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectedPatterns {
    pub tau1: SparsityPattern,
    pub tau2: SparsityPattern,
    pub effective_gammas: (f64, f64),
    pub first_pass: PatternResult,
    pub second_pass: PatternResult,
}

fn screening_max(c: &DMatrix<f64>, a: &DVector<f64>, eps: f64) -> f64 {
    column_norms(c)
        .into_iter()
        .zip(a.iter())
        .map(|(n, x)| n + eps * x.abs())
        .fold(0.0, f64::max)
}

/// Two-pass directed stage one on `C₁₂` with alignment vectors `a1`, `a2`.
/// Under relative scaling, γ is a fraction of the largest screening bound
/// `‖cᵢ‖₂ + ε|aᵢ|` of the block being patterned.
pub fn directed_pair_patterns(
    c12: &DMatrix<f64>,
    a1: &DVector<f64>,
    a2: &DVector<f64>,
    cfg: &DirectedConfig,
) -> Result<DirectedPatterns> {
    let p = cfg.params;
    p.validate()?;
    let (p1, p2) = c12.shape();
    let second_first = match cfg.order {
        SideOrder::LargerFirst => p2 >= p1,
        SideOrder::SecondViewFirst => true,
        SideOrder::FirstViewFirst => false,
    };
    let resolve = |block: &DMatrix<f64>, a: &DVector<f64>, eps: f64, g: f64| match cfg.gamma_scale {
        GammaScale::Absolute => g,
        GammaScale::Relative => g * screening_max(block, a, eps),
    };
    let cov = CrossCovariance::from_block(c12.clone());
    if second_first {
        let g2 = resolve(c12, a2, p.eps2, p.gamma2);
        let params = DirectedParams { gamma2: g2, ..p };
        let z0 = init_direction(c12)?;
        let first = directed_pattern_dot(c12, a1, a2, &params, &z0, &cfg.conv).map_err(|e| e.with_side("view 2"))?;
        let shrunk = shrink(&cov, &SparsityPattern::all(p1), &first.pattern)?;
        let block = shrunk.block.transpose();
        let a2s = a2.select_rows(&first.pattern.active_indices());
        let g1 = resolve(&block, a1, p.eps1, p.gamma1);
        let swapped = DirectedParams {
            gamma1: p.gamma2,
            gamma2: g1,
            eps1: p.eps2,
            eps2: p.eps1,
        };
        let z0 = init_direction(&block)?;
        let second =
            directed_pattern_dot(&block, &a2s, a1, &swapped, &z0, &cfg.conv).map_err(|e| e.with_side("view 1"))?;
        Ok(DirectedPatterns {
            tau1: second.pattern.clone(),
            tau2: first.pattern.clone(),
            effective_gammas: (g1, g2),
            first_pass: first,
            second_pass: second,
        })
    } else {
        let ct = c12.transpose();
        let g1 = resolve(&ct, a1, p.eps1, p.gamma1);
        let swapped = DirectedParams {
            gamma1: p.gamma2,
            gamma2: g1,
            eps1: p.eps2,
            eps2: p.eps1,
        };
        let z0 = init_direction(&ct)?;
        let first = directed_pattern_dot(&ct, a2, a1, &swapped, &z0, &cfg.conv).map_err(|e| e.with_side("view 1"))?;
        let shrunk = shrink(&cov, &first.pattern, &SparsityPattern::all(p2))?;
        let a1s = a1.select_rows(&first.pattern.active_indices());
        let g2 = resolve(&shrunk.block, a2, p.eps2, p.gamma2);
        let params = DirectedParams { gamma2: g2, ..p };
        let z0 = init_direction(&shrunk.block)?;
        let second = directed_pattern_dot(&shrunk.block, &a1s, a2, &params, &z0, &cfg.conv)
            .map_err(|e| e.with_side("view 2"))?;
        Ok(DirectedPatterns {
            tau1: first.pattern.clone(),
            tau2: second.pattern.clone(),
            effective_gammas: (g1, g2),
            first_pass: first,
            second_pass: second,
        })
    }
}

/// Single-stage directed pipeline: directed stage one, then the usual stage
/// two on the doubly-shrunken problem.
pub fn directed_fit(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    y: &AccessoryVector,
    cfg: &DirectedConfig,
) -> Result<CcaSolution> {
    check_accessory(x1, y)?;
    check_accessory(x2, y)?;
    let (a1, a2) = match cfg.mode {
        DirectedMode::Dot => (
            accessory_products(x1, y, cfg.divisor)?,
            accessory_products(x2, y, cfg.divisor)?,
        ),
        DirectedMode::Reg => (
            compute_beta(x1, y, cfg.beta_ridge, cfg.beta_mode)?,
            compute_beta(x2, y, cfg.beta_ridge, cfg.beta_mode)?,
        ),
    };
    let c12 = cross_covariance_with(x1, x2, (0, 1), cfg.divisor)?.block;
    let pats = directed_pair_patterns(&c12, &a1, &a2, cfg)?;
    let shrunk = shrink(&CrossCovariance::from_block(c12), &pats.tau1, &pats.tau2)?;
    let rows = shrunk.row_indices();
    let cols = shrunk.col_indices();
    let mut warnings = Vec::new();
    let (z1, z2, normalization) = match cfg.stage2 {
        StageTwo::Gep => {
            let s1 = x1.select_columns(&rows);
            let s2 = x2.select_columns(&cols);
            let c11 = cross_covariance_with(&s1, &s1, (0, 0), cfg.divisor)?.block;
            let c22 = cross_covariance_with(&s2, &s2, (1, 1), cfg.divisor)?.block;
            let (g, _) = gep_with_fallback(&c11, &shrunk.block, &c22, cfg.ridge, &mut warnings)?;
            if g.rho.is_empty() {
                return Err(SccaError::DegenerateInput(
                    "no positive canonical correlation on the shrunken problem".into(),
                ));
            }
            (g.z1[0].clone(), g.z2[0].clone(), Normalization::CovarianceNorm)
        }
        _ => {
            let svd = power_svd(&shrunk.block, &cfg.conv)?;
            (svd.u, svd.v, Normalization::UnitNorm)
        }
    };
    let sol = CcaSolution {
        directions: vec![vec![expand(x1.p(), &rows, &z1)], vec![expand(x2.p(), &cols, &z2)]],
        patterns: vec![vec![pats.tau1.clone()], vec![pats.tau2.clone()]],
        correlations: vec![0.0],
        covariates: None,
        normalization,
        deflation_order: vec![0],
        iterations: vec![pats.first_pass.iterations + pats.second_pass.iterations],
        effective_gammas: vec![vec![pats.effective_gammas.0, pats.effective_gammas.1]],
        warnings,
        objective_traces: [&pats.first_pass, &pats.second_pass]
            .iter()
            .filter_map(|p| p.objective_trace.clone())
            .collect(),
    };
    Ok(sol.finish(&[x1, x2]))
}

fn expand(p: usize, support: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(p);
    for (k, &i) in support.iter().enumerate() {
        out[i] = values[k];
    }
    out
}

/// Stacked single-view formulation over `p₁ + p₂` coordinates.
#[derive(Debug, Clone)]
pub struct StackedProblem {
    /// `[[ε₁C₁₁, C₁₂], [C₂₁, ε₂C₂₂]]`.
    pub tilde_c: DMatrix<f64>,
    /// `[ε₁X₁, ε₂X₂]`.
    pub tilde_x: DMatrix<f64>,
    pub split: usize,
    pub divisor: Divisor,
}

impl StackedProblem {
    pub fn new(x1: &ViewMatrix, x2: &ViewMatrix, eps1: f64, eps2: f64, divisor: Divisor) -> Result<Self> {
        let c11 = cross_covariance_with(x1, x1, (0, 0), divisor)?.block;
        let c22 = cross_covariance_with(x2, x2, (1, 1), divisor)?.block;
        let c12 = cross_covariance_with(x1, x2, (0, 1), divisor)?.block;
        let (p1, p2) = (x1.p(), x2.p());
        let mut tilde_c = DMatrix::zeros(p1 + p2, p1 + p2);
        tilde_c.view_mut((0, 0), (p1, p1)).copy_from(&(c11 * eps1));
        tilde_c.view_mut((p1, p1), (p2, p2)).copy_from(&(c22 * eps2));
        tilde_c.view_mut((0, p1), (p1, p2)).copy_from(&c12);
        tilde_c.view_mut((p1, 0), (p2, p1)).copy_from(&c12.transpose());
        let mut tilde_x = DMatrix::zeros(x1.n(), p1 + p2);
        tilde_x.view_mut((0, 0), (x1.n(), p1)).copy_from(&(x1.data() * eps1));
        tilde_x.view_mut((0, p1), (x1.n(), p2)).copy_from(&(x2.data() * eps2));
        Ok(StackedProblem {
            tilde_c,
            tilde_x,
            split: p1,
            divisor,
        })
    }

    fn products(&self, y: &AccessoryVector) -> Result<DVector<f64>> {
        if y.len() != self.tilde_x.nrows() {
            return Err(SccaError::Dimension(format!(
                "accessory vector has length {}, views have {} samples",
                y.len(),
                self.tilde_x.nrows()
            )));
        }
        let d = match self.divisor {
            Divisor::N => y.len() as f64,
            Divisor::NMinusOne => y.len() as f64 - 1.0,
        };
        Ok(self.tilde_x.transpose() * y.values() / d)
    }

    fn thresholds(&self, gamma1: f64, gamma2: f64) -> Vec<f64> {
        (0..self.tilde_c.nrows())
            .map(|i| if i < self.split { gamma1 } else { gamma2 })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StackedResult {
    pub tau1: SparsityPattern,
    pub tau2: SparsityPattern,
    /// Stage-one maximizer over the stacked coordinates.
    pub v: DVector<f64>,
    /// Closed-form stacked direction `soft(R v + 2b̃)/‖·‖`.
    pub z: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub objective_trace: Option<Vec<f64>>,
    /// Slightly negative eigenvalues of `C̃` clipped to zero.
    pub clipped_eigenvalues: usize,
}

/// Screening for the stacked problem: coordinate `i` is inactive when
/// `‖rᵢ‖₂ + 2|b̃ᵢ|` does not exceed its threshold, where `rᵢ` are the columns
/// of the symmetric root of `C̃`.
pub fn stacked_screen(sp: &StackedProblem, y: &AccessoryVector, gamma1: f64, gamma2: f64) -> Result<SparsityPattern> {
    let root = sym_sqrt(&sp.tilde_c, 1e-8)?.root;
    let b = sp.products(y)?;
    let t = sp.thresholds(gamma1, gamma2);
    Ok(SparsityPattern::from_bits(
        column_norms(&root)
            .into_iter()
            .enumerate()
            .map(|(i, n)| n + 2.0 * b[i].abs() > t[i])
            .collect(),
    ))
}

/// Maximizes `Σᵢ [|rᵢᵀv + 2b̃ᵢ| − γ(i)]₊²` over the unit sphere, with `rᵢ`
/// the columns of `C̃^{1/2}` and `γ(i)` equal to γ₁ on view-1 coordinates and
/// γ₂ on view-2 coordinates.
pub fn directed_stacked(
    sp: &StackedProblem,
    y: &AccessoryVector,
    gamma1: f64,
    gamma2: f64,
    v0: Option<&DVector<f64>>,
    conv: &ConvergenceSpec,
) -> Result<StackedResult> {
    let sqrt = sym_sqrt(&sp.tilde_c, 1e-8)?;
    let root = sqrt.root;
    let offset = sp.products(y)? * 2.0;
    let mut ascent = Ascent::new(&root, 0.0, Penalty::L1);
    ascent.thresholds = sp.thresholds(gamma1, gamma2);
    ascent.offset = Some(&offset);
    let start = match v0 {
        Some(v) => v.clone(),
        None => init_direction(&root)?,
    };
    let out = ascent.run(&start, conv)?;
    let pattern = crate::pattern::pattern_from(&out.projections, &ascent.thresholds, Penalty::L1);
    let bits = pattern.bits();
    let tau1 = SparsityPattern::from_bits(bits[..sp.split].to_vec());
    let tau2 = SparsityPattern::from_bits(bits[sp.split..].to_vec());
    if tau1.active_count() == 0 {
        return Err(SccaError::empty_support("view 1: every coordinate was thresholded out"));
    }
    if tau2.active_count() == 0 {
        return Err(SccaError::empty_support("view 2: every coordinate was thresholded out"));
    }
    let z = normalized(&ascent.weights(&out.projections)).unwrap_or_else(|| DVector::zeros(bits.len()));
    Ok(StackedResult {
        tau1,
        tau2,
        v: out.z,
        z,
        iterations: out.iterations,
        objective: out.objective,
        objective_trace: out.trace,
        clipped_eigenvalues: sqrt.clipped,
    })
}

/// Univariate prefilter applied before the undirected pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// Keep the `⌈f·p⌉` columns with the largest |corr(xⱼ, y)| (lowest index
    /// on ties).
    KeepFraction(f64),
    /// Keep columns with |corr(xⱼ, y)| above the value.
    Threshold(f64),
}

impl Default for Selector {
    fn default() -> Self {
        Selector::KeepFraction(0.5)
    }
}

/// Columns of `x` passing the selector against `y`.
pub fn select_columns(x: &ViewMatrix, y: &AccessoryVector, selector: Selector) -> SparsityPattern {
    let scores: Vec<f64> = (0..x.p())
        .map(|j| {
            pearson(x.data().column(j).as_slice(), y.values().as_slice())
                .map(f64::abs)
                .unwrap_or(0.0)
        })
        .collect();
    match selector {
        Selector::Threshold(t) => SparsityPattern::from_bits(scores.iter().map(|&s| s > t).collect()),
        Selector::KeepFraction(f) => {
            let keep = ((f.clamp(0.0, 1.0) * x.p() as f64).ceil() as usize).min(x.p());
            let mut order: Vec<usize> = (0..x.p()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            SparsityPattern::from_indices(x.p(), &order[..keep])
        }
    }
}

/// Select-then-fit baseline: restrict each view to the columns associated
/// with `y`, run the undirected pipeline on the subsets, and re-expand.
pub fn directed_two_stage(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    y: &AccessoryVector,
    selector: Selector,
    cfg: &FitConfig,
) -> Result<CcaSolution> {
    check_accessory(x1, y)?;
    check_accessory(x2, y)?;
    let q1 = select_columns(x1, y, selector);
    let q2 = select_columns(x2, y, selector);
    if q1.active_count() == 0 {
        return Err(SccaError::empty_support("view 1: selector kept no columns"));
    }
    if q2.active_count() == 0 {
        return Err(SccaError::empty_support("view 2: selector kept no columns"));
    }
    fit_on_columns(x1, x2, &q1, &q2, cfg)
}

/// Fits the pair pipeline on the selected columns and re-expands the result
/// to full length.
fn fit_on_columns(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    q1: &SparsityPattern,
    q2: &SparsityPattern,
    cfg: &FitConfig,
) -> Result<CcaSolution> {
    let i1 = q1.active_indices();
    let i2 = q2.active_indices();
    let mut sol = fit_pair(&x1.select_columns(&i1), &x2.select_columns(&i2), cfg)?;
    for (view, (idx, p)) in [(&i1, x1.p()), (&i2, x2.p())].into_iter().enumerate() {
        for f in 0..sol.factor_count() {
            let d = &sol.directions[view][f];
            let mut full = DVector::zeros(p);
            let mut bits = vec![false; p];
            for (k, &i) in idx.iter().enumerate() {
                full[i] = d[k];
                bits[i] = sol.patterns[view][f].is_active(k);
            }
            sol.directions[view][f] = full;
            sol.patterns[view][f] = SparsityPattern::from_bits(bits);
        }
    }
    Ok(sol)
}

/// Stacked stage one followed by dense stage two on the selected columns.
pub fn directed_stacked_fit(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    y: &AccessoryVector,
    params: &DirectedParams,
    cfg: &FitConfig,
) -> Result<CcaSolution> {
    params.validate()?;
    check_accessory(x1, y)?;
    check_accessory(x2, y)?;
    let sp = StackedProblem::new(x1, x2, params.eps1, params.eps2, cfg.divisor)?;
    let st = directed_stacked(&sp, y, params.gamma1, params.gamma2, None, &cfg.pair.conv)?;
    let mut dense = *cfg;
    dense.pair.gamma1 = 0.0;
    dense.pair.gamma2 = 0.0;
    let mut sol = fit_on_columns(x1, x2, &st.tau1, &st.tau2, &dense)?;
    sol.iterations = vec![st.iterations];
    sol.effective_gammas = vec![vec![params.gamma1, params.gamma2]];
    sol.objective_traces = st.objective_trace.into_iter().collect();
    if st.clipped_eigenvalues > 0 {
        sol.warnings.push(format!(
            "{} slightly negative eigenvalue(s) of the stacked covariance clipped to zero",
            st.clipped_eigenvalues
        ));
    }
    Ok(sol)
}
