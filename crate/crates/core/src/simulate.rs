//! Synthetic planted models, recovery metrics and experiment sweeps.
//!
//! The rank-one generator draws one shared factor `u ∈ ℝⁿ` and, per view,
//! one noise vector `εᵢ ∈ ℝ^{pᵢ}`, and returns `Xᵢ = u(zᵢ + εᵢ)ᵀ` with
//! samples as rows.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cca::{fit_pair, power_svd, CcaSolution, FitConfig};
use crate::covariance::{center_scale, cross_covariance_with, ViewMatrix};
use crate::error::{Result, SccaError};
use crate::linalg::pearson;
use crate::parallel::map_indexed;

/// SplitMix64 step: decorrelated child seeds from `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Concatenates runs of `(count, value)`.
pub fn block_pattern(runs: &[(usize, f64)]) -> DVector<f64> {
    let values: Vec<f64> = runs
        .iter()
        .flat_map(|&(count, v)| std::iter::repeat_n(v, count))
        .collect();
    DVector::from_vec(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneSpec {
    pub n: usize,
    /// Planted direction per view.
    pub planted: Vec<Vec<f64>>,
    /// Noise standard deviation per view.
    pub noise_sd: Vec<f64>,
    pub seed: u64,
}

impl RankOneSpec {
    /// Two views of 500 and 400 variables with 25 (+1) and 25 (−1) planted
    /// entries each, `n = 50`.
    pub fn two_view(sigma: f64, seed: u64) -> Self {
        RankOneSpec {
            n: 50,
            planted: vec![
                block_pattern(&[(25, 1.0), (25, -1.0), (450, 0.0)]).as_slice().to_vec(),
                block_pattern(&[(25, 1.0), (25, -1.0), (350, 0.0)]).as_slice().to_vec(),
            ],
            noise_sd: vec![sigma, sigma],
            seed,
        }
    }

    /// [`two_view`](Self::two_view) plus a 600-variable third view with
    /// 25 (+1) leading and 25 (−1) trailing entries and noise sd 0.1.
    pub fn three_view(sigma: f64, seed: u64) -> Self {
        let mut spec = Self::two_view(sigma, seed);
        spec.planted
            .push(block_pattern(&[(25, 1.0), (550, 0.0), (25, -1.0)]).as_slice().to_vec());
        spec.noise_sd.push(0.1);
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(SccaError::InvalidParameter("n must be at least 1".into()));
        }
        if self.planted.len() != self.noise_sd.len() || self.planted.is_empty() {
            return Err(SccaError::InvalidParameter(
                "need one noise level per planted direction".into(),
            ));
        }
        if self.noise_sd.iter().any(|&s| !(s >= 0.0)) {
            return Err(SccaError::InvalidParameter("noise sd must be nonnegative".into()));
        }
        if self.planted.iter().any(|z| z.is_empty()) {
            return Err(SccaError::InvalidParameter(
                "planted directions must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    /// Raw (uncentered) views, samples as rows.
    pub views: Vec<ViewMatrix>,
    pub truths: Vec<DVector<f64>>,
    pub factor: DVector<f64>,
}

impl SimData {
    /// Views centered (not scaled), ready for covariance construction.
    pub fn centered(&self) -> Vec<ViewMatrix> {
        self.views.iter().map(|v| center_scale(v, false).view).collect()
    }
}

fn normal_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draws `u`, then each view's noise vector in view order.
pub fn gen_rank_one(spec: &RankOneSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = normal_vector(spec.n, &mut rng);
    let mut views = Vec::with_capacity(spec.planted.len());
    let mut truths = Vec::with_capacity(spec.planted.len());
    for (z, &sd) in spec.planted.iter().zip(&spec.noise_sd) {
        let z = DVector::from_column_slice(z);
        let noise = normal_vector(z.len(), &mut rng) * sd;
        let loading = &z + noise;
        let data: DMatrix<f64> = &u * loading.transpose();
        views.push(ViewMatrix::new(data, None)?);
        truths.push(z);
    }
    Ok(SimData {
        views,
        truths,
        factor: u,
    })
}

/// Three-view planted model with the default patterns.
pub fn gen_rank_one_threeview(sigma: f64, seed: u64) -> Result<SimData> {
    gen_rank_one(&RankOneSpec::three_view(sigma, seed))
}

/// Two independent standard normal views.
pub fn gen_null(n: usize, p1: usize, p2: usize, seed: u64) -> Result<(ViewMatrix, ViewMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, p1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(n, p2, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((ViewMatrix::new(a, None)?, ViewMatrix::new(b, None)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMetrics {
    /// `|⟨ẑ, z⟩|` after normalizing both; 0 for an all-zero estimate.
    pub cos_theta: f64,
    /// Fraction of the true support that is active in the estimate.
    pub eta: f64,
    /// Active estimated coordinates outside the true support.
    pub false_active: usize,
    pub cardinality: usize,
    pub zero_direction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub views: Vec<ViewMetrics>,
    /// Estimated correlation of the first factor.
    pub rho: f64,
}

pub fn view_metrics(estimate: &DVector<f64>, truth: &DVector<f64>) -> Result<ViewMetrics> {
    if estimate.len() != truth.len() {
        return Err(SccaError::Dimension(format!(
            "estimate of length {} for truth of length {}",
            estimate.len(),
            truth.len()
        )));
    }
    let (ne, nt) = (estimate.norm(), truth.norm());
    let zero_direction = ne == 0.0;
    let cos_theta = if zero_direction || nt == 0.0 {
        0.0
    } else {
        (estimate.dot(truth) / (ne * nt)).abs().min(1.0)
    };
    let support = truth.iter().filter(|&&t| t != 0.0).count();
    let mut hits = 0;
    let mut false_active = 0;
    for (e, t) in estimate.iter().zip(truth.iter()) {
        match (*e != 0.0, *t != 0.0) {
            (true, true) => hits += 1,
            (true, false) => false_active += 1,
            _ => {}
        }
    }
    Ok(ViewMetrics {
        cos_theta,
        eta: if support == 0 {
            1.0
        } else {
            hits as f64 / support as f64
        },
        false_active,
        cardinality: hits + false_active,
        zero_direction,
    })
}

/// Recovery metrics for the first factor of `estimated`.
pub fn evaluate(estimated: &CcaSolution, truths: &[DVector<f64>]) -> Result<MetricReport> {
    if estimated.factor_count() == 0 {
        return Err(SccaError::InsufficientFactors { found: 0, required: 1 });
    }
    if estimated.view_count() != truths.len() {
        return Err(SccaError::Dimension(format!(
            "{} estimated views for {} truths",
            estimated.view_count(),
            truths.len()
        )));
    }
    let views = estimated
        .directions
        .iter()
        .zip(truths)
        .map(|(d, t)| view_metrics(&d[0], t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        views,
        rho: estimated.correlations[0],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub replicate: usize,
    pub seed: u64,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sigma: f64,
    pub successes: usize,
    pub failures: usize,
    /// Per view.
    pub mean_cos_theta: Vec<f64>,
    pub se_cos_theta: Vec<f64>,
    pub mean_eta: Vec<f64>,
    pub mean_false_active: Vec<f64>,
    pub mean_rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Fits one replicate of the two-view model at noise level `sigma`.
pub fn run_replicate(base: &RankOneSpec, sigma: f64, seed: u64, fit: &FitConfig) -> Result<MetricReport> {
    let mut spec = base.clone();
    spec.noise_sd = vec![sigma; spec.planted.len()];
    spec.seed = seed;
    let data = gen_rank_one(&spec)?;
    let views = data.centered();
    let sol = fit_pair(&views[0], &views[1], fit)?;
    evaluate(&sol, &data.truths)
}

/// Seeded replicates at every noise level; replicate `r` at level `k` uses
/// seed `derive_seed(master, k·replicates + r)`.
pub fn noise_sweep(
    base: &RankOneSpec,
    sigmas: &[f64],
    replicates: usize,
    master_seed: u64,
    fit: &FitConfig,
    jobs: Option<usize>,
) -> NoiseSweep {
    let total = sigmas.len() * replicates;
    let rows: Vec<SweepRow> = map_indexed(total, jobs, |idx| {
        let sigma = sigmas[idx / replicates];
        let seed = derive_seed(master_seed, idx as u64);
        match run_replicate(base, sigma, seed, fit) {
            Ok(r) => SweepRow {
                sigma,
                replicate: idx % replicates,
                seed,
                report: Some(r),
                error: None,
            },
            Err(e) => SweepRow {
                sigma,
                replicate: idx % replicates,
                seed,
                report: None,
                error: Some(e.to_string()),
            },
        }
    });
    let m = base.planted.len();
    let summary = sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let chunk = &rows[k * replicates..(k + 1) * replicates];
            let ok: Vec<&MetricReport> = chunk.iter().filter_map(|r| r.report.as_ref()).collect();
            let per_view = |f: &dyn Fn(&ViewMetrics) -> f64| -> Vec<(f64, f64)> {
                (0..m)
                    .map(|v| mean_se(&ok.iter().map(|r| f(&r.views[v])).collect::<Vec<_>>()))
                    .collect()
            };
            let cos = per_view(&|v| v.cos_theta);
            SweepSummary {
                sigma,
                successes: ok.len(),
                failures: chunk.len() - ok.len(),
                mean_cos_theta: cos.iter().map(|c| c.0).collect(),
                se_cos_theta: cos.iter().map(|c| c.1).collect(),
                mean_eta: per_view(&|v| v.eta).iter().map(|c| c.0).collect(),
                mean_false_active: per_view(&|v| v.false_active as f64).iter().map(|c| c.0).collect(),
                mean_rho: mean_se(&ok.iter().map(|r| r.rho).collect::<Vec<_>>()).0,
            }
        })
        .collect();
    NoiseSweep { rows, summary }
}

impl NoiseSweep {
    /// One row per (noise level, replicate), then one `mean` row per level.
    pub fn to_csv(&self) -> Result<String> {
        let m = self.summary.first().map(|s| s.mean_cos_theta.len()).unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["sigma".to_string(), "replicate".into(), "seed".into()];
        for metric in ["cos_theta", "eta", "false_active", "cardinality"] {
            for v in 1..=m {
                header.push(format!("{metric}_{v}"));
            }
        }
        header.extend(["rho".into(), "status".into()]);
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.sigma.to_string(), row.replicate.to_string(), row.seed.to_string()];
            match &row.report {
                Some(r) => {
                    rec.extend(r.views.iter().map(|v| v.cos_theta.to_string()));
                    rec.extend(r.views.iter().map(|v| v.eta.to_string()));
                    rec.extend(r.views.iter().map(|v| v.false_active.to_string()));
                    rec.extend(r.views.iter().map(|v| v.cardinality.to_string()));
                    rec.push(r.rho.to_string());
                    rec.push("ok".into());
                }
                None => {
                    rec.extend(std::iter::repeat_n(String::new(), 4 * m + 1));
                    rec.push(row.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        for s in &self.summary {
            let mut rec = vec![s.sigma.to_string(), "mean".into(), String::new()];
            rec.extend(s.mean_cos_theta.iter().map(f64::to_string));
            rec.extend(s.mean_eta.iter().map(f64::to_string));
            rec.extend(s.mean_false_active.iter().map(f64::to_string));
            rec.extend(std::iter::repeat_n(String::new(), m));
            rec.push(s.mean_rho.to_string());
            rec.push(format!("{} ok, {} failed", s.successes, s.failures));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| SccaError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> SccaError {
    SccaError::Io(std::io::Error::other(e))
}

/// One point of a solution path over the view-2 sparsity parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub gamma2: f64,
    pub cardinality1: usize,
    pub cardinality2: usize,
    pub rho: f64,
    /// Pearson correlation between the sparse and dense view-2 directions.
    pub dense_corr: f64,
    pub error: Option<String>,
}

/// Solution path with view 1 unpenalized, compared against the dense
/// leading singular pair of the full cross-covariance.
pub fn stability_path(
    x1: &ViewMatrix,
    x2: &ViewMatrix,
    gammas2: &[f64],
    fit: &FitConfig,
    jobs: Option<usize>,
) -> Result<Vec<StabilityPoint>> {
    let c12 = cross_covariance_with(x1, x2, (0, 1), fit.divisor)?.block;
    let dense = power_svd(&c12, &fit.pair.conv)?;
    Ok(map_indexed(gammas2.len(), jobs, |k| {
        let mut cfg = *fit;
        cfg.pair.gamma1 = 0.0;
        cfg.pair.gamma2 = gammas2[k];
        match fit_pair(x1, x2, &cfg) {
            Ok(sol) => StabilityPoint {
                gamma2: gammas2[k],
                cardinality1: sol.patterns[0][0].active_count(),
                cardinality2: sol.patterns[1][0].active_count(),
                rho: sol.correlations[0],
                dense_corr: pearson(sol.directions[1][0].as_slice(), dense.v.as_slice()).unwrap_or(0.0),
                error: None,
            },
            Err(e) => StabilityPoint {
                gamma2: gammas2[k],
                cardinality1: 0,
                cardinality2: 0,
                rho: 0.0,
                dense_corr: 0.0,
                error: Some(e.to_string()),
            },
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::GammaScale;

    #[test]
    fn noiseless_views_are_rank_one_along_truth() {
        let d = gen_rank_one(&RankOneSpec::two_view(0.0, 3)).unwrap();
        for (v, z) in d.views.iter().zip(&d.truths) {
            let s = v.data().clone().svd(false, false).singular_values;
            let mut sv: Vec<f64> = s.iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            assert!(sv[1] < 1e-10 * sv[0]);
            let row = v.data().row(0).transpose();
            assert!((row.dot(z).abs() / (row.norm() * z.norm()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_shapes_and_determinism() {
        let d = gen_rank_one(&RankOneSpec::two_view(0.2, 1)).unwrap();
        assert_eq!((d.views[0].n(), d.views[0].p()), (50, 500));
        assert_eq!((d.views[1].n(), d.views[1].p()), (50, 400));
        let again = gen_rank_one(&RankOneSpec::two_view(0.2, 1)).unwrap();
        assert_eq!(d.views[0].data(), again.views[0].data());
        let t = gen_rank_one_threeview(0.2, 1).unwrap();
        let dims: Vec<(usize, usize)> = t.views.iter().map(|v| (v.n(), v.p())).collect();
        assert_eq!(dims, vec![(50, 500), (50, 400), (50, 600)]);
        assert_eq!(t.truths[2][599], -1.0);
        assert_eq!(t.truths[2][25], 0.0);
        let t0 = gen_rank_one(&RankOneSpec {
            noise_sd: vec![0.2, 0.2, 0.0],
            ..RankOneSpec::three_view(0.2, 2)
        })
        .unwrap();
        let s = t0.views[2].data().clone().svd(false, false).singular_values;
        assert_eq!(s.iter().filter(|&&x| x > 1e-10 * s.max()).count(), 1);
    }

    #[test]
    fn null_moments_and_shape() {
        let (a, b) = gen_null(400, 3, 2, 5).unwrap();
        assert_eq!((a.p(), b.p(), a.n()), (3, 2, 400));
        for j in 0..3 {
            assert!(a.data().column(j).mean().abs() < 4.0 / 20.0);
        }
        let (a2, _) = gen_null(400, 3, 2, 5).unwrap();
        assert_eq!(a.data(), a2.data());
    }

    #[test]
    fn metric_examples() {
        let z = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let m = view_metrics(&z, &z).unwrap();
        assert!((m.cos_theta - 1.0).abs() < 1e-15);
        assert_eq!((m.eta, m.false_active, m.cardinality), (1.0, 0, 2));
        let m = view_metrics(&(-&z), &z).unwrap();
        assert!((m.cos_theta - 1.0).abs() < 1e-15 && m.eta == 1.0);
        let half = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(view_metrics(&half, &z).unwrap().eta, 0.5);
        let zero = view_metrics(&DVector::zeros(4), &z).unwrap();
        assert!(zero.zero_direction && zero.cos_theta == 0.0);
    }

    #[test]
    fn noiseless_dense_pipeline_recovers_truth() {
        let d = gen_rank_one(&RankOneSpec::two_view(0.0, 7)).unwrap();
        let v = d.centered();
        let sol = fit_pair(&v[0], &v[1], &FitConfig::default()).unwrap();
        let r = evaluate(&sol, &d.truths).unwrap();
        for vm in &r.views {
            assert!(vm.cos_theta > 1.0 - 1e-6);
        }
    }

    #[test]
    fn single_point_sweep_matches_direct_run() {
        let mut fit = FitConfig::default();
        fit.pair.gamma_scale = GammaScale::Relative;
        fit.pair.gamma1 = 0.4;
        fit.pair.gamma2 = 0.4;
        let base = RankOneSpec::two_view(0.2, 0);
        let sweep = noise_sweep(&base, &[0.2], 1, 9, &fit, Some(1));
        let direct = run_replicate(&base, 0.2, derive_seed(9, 0), &fit).unwrap();
        assert_eq!(sweep.rows[0].report.as_ref().unwrap(), &direct);
        let csv = sweep.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 1 + 1);
        let again = noise_sweep(&base, &[0.2], 1, 9, &fit, Some(2));
        assert_eq!(again.to_csv().unwrap(), csv);
    }

    #[test]
    fn sweep_csv_row_count() {
        let fit = FitConfig::default();
        let mut base = RankOneSpec::two_view(0.0, 0);
        base.n = 10;
        base.planted = vec![vec![1.0, 0.0, -1.0], vec![0.0, 1.0]];
        let sweep = noise_sweep(&base, &[0.0, 0.1, 0.3], 4, 1, &fit, None);
        assert_eq!(sweep.to_csv().unwrap().lines().count(), 1 + 3 * 4 + 3);
    }

    #[test]
    fn stability_path_at_zero_is_dense_solution() {
        let (a, b) = gen_null(30, 8, 9, 3).unwrap();
        let a = center_scale(&a, false).view;
        let b = center_scale(&b, false).view;
        let pts = stability_path(&a, &b, &[0.0, 0.05, 0.1], &FitConfig::default(), Some(1)).unwrap();
        assert!(pts[0].dense_corr.abs() > 1.0 - 1e-9);
        assert_eq!(pts[0].cardinality2, 9);
        assert!(pts.iter().all(|p| p.error.is_none() || p.cardinality2 == 0));
    }
}
