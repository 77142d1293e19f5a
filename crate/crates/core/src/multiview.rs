//! Multi-view stage one with successive shrinkage, followed by multi-view
//! stage two.
//!
//! While patterning view `s`, the other views' directions `z_r` are updated
//! cyclically by
//!
//! `z_r ← normalize(C̃_rs·soft_g(q) + Σ_{l≠r,s} C̃_rl z_l)`,  `q = Σ_{r≠s} C̃_rsᵀ z_r`,
//!
//! where `C̃_rs` is `C_rs` oriented as `p_r × p_s` and `g` is the threshold
//! for view `s`. Each block step maximizes the linearization of
//! `½Σᵢ[|qᵢ|−g]₊² + Σ_{i<j; i,j≠s} z_iᵀC_ij z_j`, which is tracked.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cca::{gep_with_fallback, multiview_gep, multiview_power, power_svd, CcaSolution, Normalization, StageTwo};
use crate::covariance::{CovarianceSet, Divisor, SparsityPattern, ViewMatrix};
use crate::error::{Result, SccaError};
use crate::linalg::{canonical_sign, column_norms, mat_t_vec, mat_vec, normalized};
use crate::pattern::{clipped, init_direction, pattern_from, ConvergenceSpec, GammaScale, Penalty};

/// Nonnegative `m × m` sparsity matrix with zero diagonal. Row `s` sums to
/// the threshold applied to view `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMatrix {
    values: Vec<Vec<f64>>,
}

impl GammaMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(SccaError::Dimension(format!(
                "sparsity matrix must be at least 2×2, got {m} rows"
            )));
        }
        for (s, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(SccaError::Dimension(format!(
                    "sparsity matrix row {} has {} entries, expected {m}",
                    s + 1,
                    row.len()
                )));
            }
            for (r, &g) in row.iter().enumerate() {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(SccaError::InvalidParameter(format!(
                        "sparsity matrix entry ({}, {}) = {g} must be finite and nonnegative",
                        s + 1,
                        r + 1
                    )));
                }
                if r == s && g != 0.0 {
                    return Err(SccaError::InvalidParameter(format!(
                        "sparsity matrix diagonal entry {} must be zero",
                        s + 1
                    )));
                }
            }
        }
        Ok(GammaMatrix { values })
    }

    /// Matrix whose row `s` sums to `thresholds[s]` (split evenly).
    pub fn from_thresholds(thresholds: &[f64]) -> Result<Self> {
        let m = thresholds.len();
        let values = (0..m)
            .map(|s| {
                (0..m)
                    .map(|r| if r == s { 0.0 } else { thresholds[s] / (m - 1) as f64 })
                    .collect()
            })
            .collect();
        Self::new(values)
    }

    /// Two-view matrix `[[0, γ₁], [γ₂, 0]]`: view 1 is thresholded by γ₁ and
    /// view 2 by γ₂.
    pub fn pair(gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::new(vec![vec![0.0, gamma1], vec![gamma2, 0.0]])
    }

    pub fn views(&self) -> usize {
        self.values.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `Σ_{r≠s} Γ_sr`.
    pub fn threshold(&self, s: usize) -> f64 {
        self.values[s].iter().sum()
    }
}

/// Screening bound `Σ_{r≠s}‖c̃_rsi‖₂` for each variable `i` of view `s`.
pub fn screening_bound(set: &CovarianceSet, s: usize) -> Vec<f64> {
    let mut bound = vec![0.0; set.dims()[s]];
    for r in 0..set.view_count() {
        if r == s {
            continue;
        }
        let norms = column_norms(&set.oriented(r, s));
        for (b, n) in bound.iter_mut().zip(norms) {
            *b += n;
        }
    }
    bound
}

/// Variables of view `s` whose screening bound does not exceed the threshold
/// can never be active.
pub fn multiview_screen(set: &CovarianceSet, threshold: f64, s: usize) -> SparsityPattern {
    SparsityPattern::from_bits(screening_bound(set, s).into_iter().map(|b| b > threshold).collect())
}

#[derive(Debug, Clone)]
pub struct MultiViewPattern {
    pub pattern: SparsityPattern,
    /// `iterates[r]` for every view; the entry for `s` is the closed-form
    /// reconstruction `soft_g(q)/‖·‖`.
    pub iterates: Vec<DVector<f64>>,
    pub projections: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub objective_trace: Option<Vec<f64>>,
    pub converged: bool,
}

/// Default starting direction for view `r` while patterning view `s`.
pub fn default_init(set: &CovarianceSet, r: usize, s: usize) -> Result<DVector<f64>> {
    init_direction(&set.oriented(r, s))
}

struct Sweep<'a> {
    set: &'a CovarianceSet,
    s: usize,
    thresholds: Vec<f64>,
    oriented: Vec<Option<DMatrix<f64>>>,
}

impl Sweep<'_> {
    fn projections(&self, z: &[DVector<f64>]) -> DVector<f64> {
        let mut q = DVector::zeros(self.set.dims()[self.s]);
        for (r, c) in self.oriented.iter().enumerate() {
            if let Some(c) = c {
                q += mat_t_vec(c, &z[r]);
            }
        }
        q
    }

    fn objective(&self, q: &DVector<f64>, z: &[DVector<f64>]) -> f64 {
        let mut f = 0.0;
        for (qi, &t) in q.iter().zip(&self.thresholds) {
            f += (qi.abs() - t).max(0.0).powi(2);
        }
        f *= 0.5;
        let m = self.set.view_count();
        for i in 0..m {
            for j in (i + 1)..m {
                if i != self.s && j != self.s {
                    f += z[i].dot(&mat_vec(self.set.cross(i, j), &z[j]));
                }
            }
        }
        f
    }
}

/// Patterns view `s` by cyclic block ascent over the other views.
///
/// `inits[r]` is used for `r ≠ s` (the entry at `s` is ignored); `None`
/// selects [`default_init`] for each view.
pub fn multiview_pattern(
    set: &CovarianceSet,
    threshold: f64,
    s: usize,
    inits: Option<&[DVector<f64>]>,
    conv: &ConvergenceSpec,
) -> Result<MultiViewPattern> {
    conv.validate()?;
    let m = set.view_count();
    if s >= m {
        return Err(SccaError::Dimension(format!(
            "view index {s} out of range for {m} views"
        )));
    }
    if !(threshold >= 0.0) {
        return Err(SccaError::InvalidParameter(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let mut z: Vec<DVector<f64>> = Vec::with_capacity(m);
    for r in 0..m {
        if r == s {
            z.push(DVector::zeros(set.dims()[s]));
            continue;
        }
        let init = match inits {
            Some(v) => v[r].clone(),
            None => default_init(set, r, s)?,
        };
        if init.len() != set.dims()[r] || (init.norm() - 1.0).abs() > 1e-8 {
            return Err(SccaError::Dimension(format!(
                "initial direction for view {} must be a unit vector of length {}",
                r + 1,
                set.dims()[r]
            )));
        }
        z.push(init);
    }
    let sweep = Sweep {
        set,
        s,
        thresholds: vec![threshold; set.dims()[s]],
        oriented: (0..m).map(|r| (r != s).then(|| set.oriented(r, s))).collect(),
    };
    let thresholds = &sweep.thresholds;

    let mut q = sweep.projections(&z);
    let mut f = sweep.objective(&q, &z);
    let mut trace = conv.track_objective.then(|| vec![f]);
    let mut iterations = 0;
    let mut converged = false;
    let mut stall = 0;
    let mut last_step = f64::INFINITY;
    while iterations < conv.max_iter {
        iterations += 1;
        let mut step: f64 = 0.0;
        for r in 0..m {
            if r == s {
                continue;
            }
            let w = clipped(&q, thresholds, Penalty::L1);
            let c_rs = sweep.oriented[r].as_ref().expect("r ≠ s");
            let mut update = mat_vec(c_rs, &w);
            for (l, zl) in z.iter().enumerate() {
                if l != r && l != s {
                    update += if r < l {
                        mat_vec(set.cross(r, l), zl)
                    } else {
                        mat_t_vec(set.cross(l, r), zl)
                    };
                }
            }
            let next = match normalized(&update) {
                Some(v) => v,
                None if w.iter().all(|&x| x == 0.0) => {
                    return Err(SccaError::EmptySupport {
                        context: format!("view {}: every coordinate was thresholded out", s + 1),
                        last_iterate: Some(z[r].as_slice().to_vec()),
                    })
                }
                None => {
                    return Err(SccaError::DegenerateInput(format!(
                        "zero update for view {} while patterning view {}",
                        r + 1,
                        s + 1
                    )))
                }
            };
            step = step.max((&next - &z[r]).norm());
            z[r] = next;
            q = sweep.projections(&z);
        }
        let f_new = sweep.objective(&q, &z);
        if let Some(t) = trace.as_mut() {
            t.push(f_new);
        }
        let df = (f_new - f).abs();
        if df <= conv.tol * f.abs().max(f64::MIN_POSITIVE) && step < conv.tol {
            converged = true;
            break;
        }
        if df <= 4.0 * f64::EPSILON * f_new.abs() && step >= 0.999 * last_step {
            stall += 1;
            if stall >= 50 {
                break;
            }
        } else {
            stall = 0;
        }
        last_step = step;
        f = f_new;
    }
    let objective = sweep.objective(&q, &z);
    let pattern = pattern_from(&q, thresholds, Penalty::L1);
    if pattern.active_count() == 0 {
        return Err(SccaError::EmptySupport {
            context: format!("view {}: every coordinate was thresholded out", s + 1),
            last_iterate: None,
        });
    }
    z[s] = normalized(&clipped(&q, thresholds, Penalty::L1)).unwrap_or_else(|| DVector::zeros(q.len()));
    Ok(MultiViewPattern {
        pattern,
        iterates: z,
        projections: q,
        iterations,
        objective,
        objective_trace: trace,
        converged,
    })
}

/// Order in which views are patterned and shrunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkOrder {
    /// Last view first, down to view 1.
    #[default]
    LastFirst,
    FirstFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewConfig {
    pub gamma: GammaMatrix,
    pub gamma_scale: GammaScale,
    pub conv: ConvergenceSpec,
    pub stage2: StageTwo,
    pub ridge: f64,
    pub divisor: Divisor,
    pub order: ShrinkOrder,
    /// Full-length unit starting directions per view; restricted to the
    /// current supports at each pass.
    #[serde(skip)]
    pub inits: Option<Vec<DVector<f64>>>,
}

impl MultiViewConfig {
    pub fn new(gamma: GammaMatrix) -> Self {
        MultiViewConfig {
            gamma,
            gamma_scale: GammaScale::Absolute,
            conv: ConvergenceSpec::default(),
            stage2: StageTwo::Power,
            ridge: 0.0,
            divisor: Divisor::N,
            order: ShrinkOrder::LastFirst,
            inits: None,
        }
    }
}

/// Per-view diagnostics from the successive-shrinkage passes.
#[derive(Debug, Clone)]
pub struct MultiViewFit {
    pub solution: CcaSolution,
    pub passes: Vec<MultiViewPattern>,
    /// Stage-two eigenvalue (GEP back-end only).
    pub eigenvalue: Option<f64>,
}

fn restrict(full: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    DVector::from_iterator(support.len(), support.iter().map(|&i| full[i]))
}

/// Full pipeline: pattern every view with successive shrinkage, then solve
/// stage two on the shrunken blocks and re-expand to full length.
pub fn mule_multiview(views: &[ViewMatrix], cfg: &MultiViewConfig) -> Result<MultiViewFit> {
    let m = views.len();
    if cfg.gamma.views() != m {
        return Err(SccaError::Dimension(format!(
            "sparsity matrix is {}×{} for {m} views",
            cfg.gamma.views(),
            cfg.gamma.views()
        )));
    }
    let mut set = CovarianceSet::from_views(views, cfg.divisor)?;
    let order: Vec<usize> = match cfg.order {
        ShrinkOrder::LastFirst => (0..m).rev().collect(),
        ShrinkOrder::FirstFirst => (0..m).collect(),
    };
    let mut passes: Vec<MultiViewPattern> = Vec::with_capacity(m);
    let mut patterns: Vec<Option<SparsityPattern>> = vec![None; m];
    let mut gammas = vec![0.0; m];
    for &s in &order {
        let threshold = match cfg.gamma_scale {
            GammaScale::Absolute => cfg.gamma.threshold(s),
            GammaScale::Relative => cfg.gamma.threshold(s) * screening_bound(&set, s).into_iter().fold(0.0, f64::max),
        };
        gammas[s] = threshold;
        let inits: Option<Vec<DVector<f64>>> = match &cfg.inits {
            Some(full) => {
                let mut v = Vec::with_capacity(m);
                for (r, z) in full.iter().enumerate() {
                    let restricted = restrict(z, set.support(r));
                    v.push(if r == s {
                        restricted
                    } else {
                        match normalized(&restricted) {
                            Some(u) => u,
                            None => default_init(&set, r, s)?,
                        }
                    });
                }
                Some(v)
            }
            None => None,
        };
        let pass = multiview_pattern(&set, threshold, s, inits.as_deref(), &cfg.conv)
            .map_err(|e| e.with_side(&format!("pass for view {}", s + 1)))?;
        set = set.shrink_view(s, &pass.pattern)?;
        patterns[s] = Some(pass.pattern.clone());
        passes.push(pass);
    }

    let mut warnings = Vec::new();
    let (mut dirs, normalization, eigenvalue) = match (cfg.stage2, m) {
        (StageTwo::Gep, 2) => {
            let (g, _) = gep_with_fallback(set.within(0), set.cross(0, 1), set.within(1), cfg.ridge, &mut warnings)?;
            if g.rho.is_empty() {
                return Err(SccaError::DegenerateInput(
                    "no positive canonical correlation on the shrunken problem".into(),
                ));
            }
            (
                vec![g.z1[0].clone(), g.z2[0].clone()],
                Normalization::CovarianceNorm,
                Some(g.rho[0]),
            )
        }
        (StageTwo::Gep, _) => {
            let r = match multiview_gep(&set, cfg.ridge) {
                Err(SccaError::Singularity(msg)) if cfg.ridge == 0.0 => {
                    let dim: usize = set.dims().iter().sum();
                    let tr: f64 = (0..m).map(|i| set.within(i).trace()).sum();
                    let ridge = 1e-8 * tr / dim as f64;
                    warnings.push(format!("{msg}; retried with ridge {ridge:.3e}"));
                    multiview_gep(&set, ridge)?
                }
                other => other?,
            };
            if r.uninformative {
                warnings.push("all cross blocks are zero; stage-two directions are arbitrary".into());
            }
            (r.directions, Normalization::CovarianceNorm, Some(r.eigenvalue))
        }
        (_, 2) => {
            let svd = power_svd(set.cross(0, 1), &cfg.conv)?;
            (vec![svd.u, svd.v], Normalization::UnitNorm, None)
        }
        _ => {
            let inits = stage_two_inits(&set, &passes)?;
            (multiview_power(&set, &inits, &cfg.conv)?, Normalization::UnitNorm, None)
        }
    };
    let sign = canonical_sign(&dirs[0]);
    for d in &mut dirs {
        *d *= sign;
    }

    let mut sol = CcaSolution {
        directions: Vec::with_capacity(m),
        patterns: Vec::with_capacity(m),
        correlations: vec![0.0],
        covariates: None,
        normalization,
        deflation_order: vec![0],
        iterations: vec![passes.iter().map(|p| p.iterations).sum()],
        effective_gammas: vec![gammas],
        warnings,
        objective_traces: passes.iter().filter_map(|p| p.objective_trace.clone()).collect(),
    };
    for (i, d) in dirs.iter().enumerate() {
        let mut full = DVector::zeros(views[i].p());
        for (k, &g) in set.support(i).iter().enumerate() {
            full[g] = d[k];
        }
        sol.directions.push(vec![full]);
        sol.patterns
            .push(vec![patterns[i].clone().expect("every view patterned")]);
    }
    let refs: Vec<&ViewMatrix> = views.iter().collect();
    Ok(MultiViewFit {
        solution: sol.finish(&refs),
        passes,
        eigenvalue,
    })
}

/// Starting points for multi-view power iteration: the latest stage-one
/// iterate of each view, restricted to its final support.
fn stage_two_inits(set: &CovarianceSet, passes: &[MultiViewPattern]) -> Result<Vec<DVector<f64>>> {
    let m = set.view_count();
    let mut out = Vec::with_capacity(m);
    for r in 0..m {
        let d = set.dims()[r];
        let candidate = passes
            .iter()
            .rev()
            .map(|p| &p.iterates[r])
            .find(|z| z.len() == d)
            .and_then(normalized);
        out.push(match candidate {
            Some(z) => z,
            None => {
                let other = if r + 1 < m { r + 1 } else { r - 1 };
                default_init(set, r, other)?
            }
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{fit_pair, FitConfig};
    use crate::covariance::center_scale;
    use crate::pattern::{pattern_l1, scca_pair_cov, PairConfig, SideOrder};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn view(n: usize, p: usize, seed: u64) -> ViewMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        center_scale(&ViewMatrix::new(data, None).unwrap(), false).view
    }

    fn set_of(views: &[ViewMatrix]) -> CovarianceSet {
        CovarianceSet::from_views(views, Divisor::N).unwrap()
    }

    #[test]
    fn gamma_matrix_validation() {
        assert!(GammaMatrix::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_ok());
        assert!(GammaMatrix::new(vec![vec![1.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(GammaMatrix::new(vec![vec![0.0, -1.0], vec![2.0, 0.0]]).is_err());
        assert!(GammaMatrix::new(vec![vec![0.0, 1.0, 0.0], vec![2.0, 0.0]]).is_err());
        let g = GammaMatrix::from_thresholds(&[0.2, 0.4, 0.6]).unwrap();
        assert!((g.threshold(2) - 0.6).abs() < 1e-15);
        assert_eq!(GammaMatrix::pair(0.1, 0.3).unwrap().threshold(1), 0.3);
    }

    #[test]
    fn two_views_match_pattern_l1_bitwise() {
        let views = [view(15, 6, 1), view(15, 5, 2)];
        let set = set_of(&views);
        for s in 0..2 {
            let block = if s == 1 {
                set.cross(0, 1).clone()
            } else {
                set.cross(0, 1).transpose()
            };
            let g = 0.3 * column_norms(&block).into_iter().fold(0.0, f64::max);
            let mv = multiview_pattern(&set, g, s, None, &ConvergenceSpec::default()).unwrap();
            let z0 = init_direction(&block).unwrap();
            let pr = pattern_l1(&block, g, &z0, &ConvergenceSpec::default()).unwrap();
            assert_eq!(mv.pattern, pr.pattern);
            assert_eq!(mv.iterates[1 - s], pr.z_lead);
            assert_eq!(mv.iterates[s], pr.z_partner);
            assert_eq!(mv.iterations, pr.iterations);
        }
    }

    #[test]
    fn large_threshold_is_empty_support() {
        let views = [view(10, 3, 4), view(10, 4, 5), view(10, 2, 6)];
        let set = set_of(&views);
        let bound = screening_bound(&set, 1).into_iter().fold(0.0, f64::max);
        let err = multiview_pattern(&set, bound * (1.0 + 1e-12), 1, None, &ConvergenceSpec::default()).unwrap_err();
        assert!(err.is_empty_support(), "{err:?}");
    }

    #[test]
    fn screen_examples() {
        let mut a = view(10, 3, 7);
        let mut data = a.data().clone();
        data.column_mut(1).fill(0.0);
        a = center_scale(&ViewMatrix::new(data, None).unwrap(), false).view;
        let views = [a, view(10, 4, 8), view(10, 2, 9)];
        let set = set_of(&views);
        assert_eq!(multiview_screen(&set, 0.0, 0).bits(), &[true, false, true]);
        let bound = screening_bound(&set, 2);
        let mut manual = vec![0.0; 2];
        for r in 0..2 {
            let c = set.cross(r, 2);
            for i in 0..2 {
                manual[i] += (0..c.nrows()).map(|k| c[(k, i)].powi(2)).sum::<f64>().sqrt();
            }
        }
        for i in 0..2 {
            assert!((bound[i] - manual[i]).abs() < 1e-14);
        }
        let t = 0.5 * (manual[0] + manual[1]);
        let s = multiview_screen(&set, t, 2);
        assert_eq!(s.bits(), &[manual[0] > t, manual[1] > t]);
    }

    #[test]
    fn two_view_pipeline_matches_pair_path() {
        let views = [view(20, 7, 11), view(20, 6, 12)];
        let (g1, g2) = (0.2, 0.3);
        let mut cfg = MultiViewConfig::new(GammaMatrix::pair(g1, g2).unwrap());
        cfg.gamma_scale = GammaScale::Relative;
        let mv = mule_multiview(&views, &cfg).unwrap();

        let fit_cfg = FitConfig {
            pair: PairConfig {
                gamma1: g1,
                gamma2: g2,
                gamma_scale: GammaScale::Relative,
                order: SideOrder::SecondViewFirst,
                ..Default::default()
            },
            ..Default::default()
        };
        let pair = fit_pair(&views[0], &views[1], &fit_cfg).unwrap();
        for v in 0..2 {
            assert_eq!(mv.solution.patterns[v][0], pair.patterns[v][0]);
            assert!((&mv.solution.directions[v][0] - &pair.directions[v][0]).amax() < 1e-10);
        }
        let c12 = set_of(&views).cross(0, 1).clone();
        let pats = scca_pair_cov(&c12, &fit_cfg.pair).unwrap();
        assert_eq!(mv.solution.patterns[0][0], pats.tau1);
    }

    #[test]
    fn zero_gamma_is_dense_and_matches_unshrunk_stage_two() {
        let views = [view(12, 3, 21), view(12, 4, 22), view(12, 3, 23)];
        let cfg = MultiViewConfig::new(GammaMatrix::new(vec![vec![0.0; 3]; 3]).unwrap());
        let fit = mule_multiview(&views, &cfg).unwrap();
        for v in 0..3 {
            assert_eq!(fit.solution.patterns[v][0].active_count(), views[v].p());
        }
        let set = set_of(&views);
        let inits = stage_two_inits(&set, &fit.passes).unwrap();
        let dense = multiview_power(&set, &inits, &cfg.conv).unwrap();
        for v in 0..3 {
            assert!((&fit.solution.directions[v][0] - &dense[v]).amax() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sweep_objective_monotone(seed in 0u64..5000, frac in 0.0f64..0.6, s in 0usize..3) {
            let views = [view(12, 4, seed), view(12, 3, seed + 1), view(12, 5, seed + 2)];
            let set = set_of(&views);
            let g = frac * screening_bound(&set, s).into_iter().fold(0.0, f64::max);
            let conv = ConvergenceSpec::default().tracked();
            if let Ok(r) = multiview_pattern(&set, g, s, None, &conv) {
                for w in r.objective_trace.unwrap().windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
                }
                let expect = pattern_from(&r.projections, &vec![g; set.dims()[s]], Penalty::L1);
                prop_assert_eq!(&r.pattern, &expect);
                for i in 0..set.dims()[s] {
                    prop_assert_eq!(r.pattern.is_active(i), r.iterates[s][i] != 0.0);
                }
            }
        }
    }
}
