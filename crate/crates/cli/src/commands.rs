use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use scca_core::cca::{multi_factor, CcaSolution};
use scca_core::covariance::{center_scale, load_view, view_to_csv, LoadOptions, ViewMatrix};
use scca_core::directed::{
    directed_fit, directed_stacked_fit, directed_two_stage, AccessoryVector, BetaMode, DirectedConfig, DirectedMode,
    DirectedParams, Selector,
};
use scca_core::io::{Metadata, SolutionFile, FORMAT_VERSION};
use scca_core::multiview::{mule_multiview, GammaMatrix, MultiViewConfig};
use scca_core::pattern::GammaScale;
use scca_core::report::{biplot_coords, interp_coords, write_report, ReportFormat, ReportTable};
use scca_core::simulate::{gen_rank_one, noise_sweep, RankOneSpec};
use scca_core::tuning::{grid_orchestrate, Pipeline, TuneGrid, TuneMethod, TuneReport};

use crate::args::{
    BetaArg, DirectedModeArg, DsccaArgs, FormatArg, MethodArg, ModelArg, MsccaArgs, PipelineArg, ReportArgs,
    ReportKind, SccaArgs, SimulateArgs, TuneArgs,
};
use crate::config::{file_for, Settings, TuneSettings};
use crate::error::CliError;

/// Views after centering (and scaling when enabled), plus notes about
/// constant columns.
struct Inputs {
    views: Vec<ViewMatrix>,
    paths: Vec<String>,
    warnings: Vec<String>,
}

fn load_inputs(paths: &[PathBuf], s: &Settings) -> Result<Inputs, CliError> {
    let opts = LoadOptions {
        delimiter: None,
        header: s.header,
    };
    let mut views = Vec::new();
    let mut warnings = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let raw = load_view(p, &opts).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let st = center_scale(&raw, s.scale);
        if !st.constant_columns.is_empty() {
            warnings.push(format!(
                "view {}: {} constant column(s) set to zero",
                i + 1,
                st.constant_columns.len()
            ));
        }
        views.push(st.view);
    }
    if let Some(n) = views.first().map(ViewMatrix::n) {
        if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.n() != n) {
            return Err(CliError::Usage(format!(
                "view {} has {} samples, view 1 has {n}",
                i + 1,
                v.n()
            )));
        }
    }
    Ok(Inputs {
        views,
        paths: paths.iter().map(|p| p.display().to_string()).collect(),
        warnings,
    })
}

fn load_accessory(path: &Path, s: &Settings) -> Result<AccessoryVector, CliError> {
    let opts = LoadOptions {
        delimiter: None,
        header: s.header,
    };
    let y = load_view(path, &opts).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if y.p() != 1 {
        return Err(CliError::Usage(format!(
            "{}: accessory table must have one column, found {}",
            path.display(),
            y.p()
        )));
    }
    Ok(AccessoryVector::new(y.data().column(0).into_owned())?.centered())
}

fn out_dir(s: &Settings) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&s.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", s.out.display())))?;
    Ok(&s.out)
}

fn write_solution(
    mut sol: CcaSolution,
    inputs: &Inputs,
    command: &str,
    s: &Settings,
    config: serde_json::Value,
) -> Result<PathBuf, CliError> {
    sol.warnings.extend(inputs.warnings.iter().cloned());
    let names = inputs.views.iter().map(|v| v.names().to_vec()).collect();
    let file = SolutionFile::from_solution(&sol, names, command, s.seed, &config)?;
    let path = out_dir(s)?.join("solution.json");
    file.write(&path)?;
    print_summary(&sol);
    println!("wrote {}", path.display());
    Ok(path)
}

fn print_summary(sol: &CcaSolution) {
    for f in 0..sol.factor_count() {
        let cards: Vec<String> = sol.patterns.iter().map(|p| p[f].active_count().to_string()).collect();
        println!(
            "factor {}: rho {:.6}, active {}",
            f + 1,
            sol.correlations[f],
            cards.join("/")
        );
    }
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
}

fn echo(command: &str, inputs: &Inputs, s: &Settings, extra: impl Serialize) -> serde_json::Value {
    json!({
        "command": command,
        "inputs": inputs.paths,
        "settings": s,
        "options": extra,
    })
}

fn format(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Svg => ReportFormat::Svg,
    }
}

fn extension(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
        ReportFormat::Svg => "svg",
    }
}

pub fn scca(a: &SccaArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &file_for(&a.common)?)?;
    let inputs = load_inputs(&[a.x1.clone(), a.x2.clone()], &s)?;
    let (g1, g2) = s.factor_gammas()?;
    let sol = multi_factor(&inputs.views[0], &inputs.views[1], &g1, &g2, &s.fit_config())?;
    let report = a.report.map(format);
    let table = match report {
        Some(_) => Some(ReportTable::from(&biplot_coords(&sol, &inputs.views)?)),
        None => None,
    };
    write_solution(
        sol,
        &inputs,
        "scca",
        &s,
        echo("scca", &inputs, &s, json!({ "report": report })),
    )?;
    if let (Some(fmt), Some(table)) = (report, table) {
        let path = s.out.join(format!("biplot.{}", extension(fmt)));
        write_report(&table, &path, fmt)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn gamma_matrix(s: &Settings, m: usize) -> Result<GammaMatrix, CliError> {
    let g = match (&s.gamma_matrix, &s.gammas) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --gamma-matrix or --gammas, not both".into(),
            ));
        }
        (Some(rows), None) => GammaMatrix::new(rows.clone()),
        (None, Some(t)) if t.len() == m => GammaMatrix::from_thresholds(t),
        (None, Some(t)) => {
            return Err(CliError::Usage(format!(
                "--gammas has {} values for {m} views",
                t.len()
            )));
        }
        (None, None) => GammaMatrix::from_thresholds(&vec![0.0; m]),
    };
    let g = g.map_err(|e| CliError::Usage(e.to_string()))?;
    if g.views() != m {
        return Err(CliError::Usage(format!(
            "sparsity matrix is {}×{} for {m} views",
            g.views(),
            g.views()
        )));
    }
    Ok(g)
}

fn multiview_config(s: &Settings, gamma: GammaMatrix) -> MultiViewConfig {
    let mut cfg = MultiViewConfig::new(gamma);
    cfg.gamma_scale = s.gamma_scale;
    cfg.conv = s.conv();
    cfg.stage2 = s.stage2;
    cfg.ridge = s.ridge;
    cfg
}

fn single_factor(s: &Settings, command: &str) -> Result<(), CliError> {
    if s.factors != 1 {
        return Err(CliError::Usage(format!(
            "{command} extracts one factor; got --factors {}",
            s.factors
        )));
    }
    Ok(())
}

pub fn mscca(a: &MsccaArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &file_for(&a.common)?)?;
    single_factor(&s, "mscca")?;
    let inputs = load_inputs(&a.views, &s)?;
    let gamma = gamma_matrix(&s, inputs.views.len())?;
    let cfg = multiview_config(&s, gamma);
    let fit = mule_multiview(&inputs.views, &cfg)?;
    write_solution(fit.solution, &inputs, "mscca", &s, echo("mscca", &inputs, &s, &cfg))?;
    Ok(())
}

fn directed_config(s: &Settings, mode: DirectedMode, beta: BetaMode, beta_ridge: f64) -> DirectedConfig {
    DirectedConfig {
        params: DirectedParams {
            gamma1: s.gamma1[0],
            gamma2: s.gamma2[0],
            eps1: s.eps1,
            eps2: s.eps2,
        },
        mode,
        beta_mode: beta,
        beta_ridge,
        gamma_scale: s.gamma_scale,
        order: s.order,
        conv: s.conv(),
        stage2: s.stage2,
        ridge: s.ridge,
        ..DirectedConfig::default()
    }
}

pub fn dscca(a: &DsccaArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &file_for(&a.common)?)?;
    single_factor(&s, "dscca")?;
    let inputs = load_inputs(&[a.x1.clone(), a.x2.clone()], &s)?;
    let y = load_accessory(&a.y, &s)?;
    let (x1, x2) = (&inputs.views[0], &inputs.views[1]);
    if y.len() != x1.n() {
        return Err(CliError::Usage(format!(
            "accessory vector has {} entries, views have {} samples",
            y.len(),
            x1.n()
        )));
    }
    let beta = match a.beta {
        BetaArg::Joint => BetaMode::Joint,
        BetaArg::Univariate => BetaMode::Univariate,
    };
    let (sol, options) = match a.mode {
        DirectedModeArg::Dot | DirectedModeArg::Reg => {
            let mode = if a.mode == DirectedModeArg::Dot {
                DirectedMode::Dot
            } else {
                DirectedMode::Reg
            };
            let cfg = directed_config(&s, mode, beta, a.beta_ridge);
            (
                directed_fit(x1, x2, &y, &cfg)?,
                serde_json::to_value(cfg).map_err(scca_core::error::SccaError::from)?,
            )
        }
        DirectedModeArg::Stacked => {
            if s.gamma_scale == GammaScale::Relative {
                return Err(CliError::Usage("stacked mode takes absolute thresholds only".into()));
            }
            let params = DirectedParams {
                gamma1: s.gamma1[0],
                gamma2: s.gamma2[0],
                eps1: s.eps1,
                eps2: s.eps2,
            };
            (
                directed_stacked_fit(x1, x2, &y, &params, &s.fit_config())?,
                json!({ "mode": "stacked" }),
            )
        }
        DirectedModeArg::TwoStage => {
            let selector = match (a.keep_fraction, a.select_threshold) {
                (_, Some(t)) => Selector::Threshold(t),
                (Some(f), None) => Selector::KeepFraction(f),
                (None, None) => Selector::default(),
            };
            (
                directed_two_stage(x1, x2, &y, selector, &s.fit_config())?,
                json!({ "mode": "two_stage", "selector": selector }),
            )
        }
    };
    let mut config = echo("dscca", &inputs, &s, options);
    config["accessory"] = json!(a.y.display().to_string());
    write_solution(sol, &inputs, "dscca", &s, config)?;
    Ok(())
}

#[derive(Serialize)]
struct TuneFile<'a> {
    metadata: Metadata,
    report: &'a TuneReport,
}

pub fn tune(a: &TuneArgs) -> Result<(), CliError> {
    let file = file_for(&a.common)?;
    let s = Settings::resolve(&a.common, &file)?;
    let (ts, pipeline_arg, method_arg) = TuneSettings::resolve(a, &file);
    let inputs = load_inputs(&a.views, &s)?;
    let m = inputs.views.len();
    if pipeline_arg != PipelineArg::Mscca && m != 2 {
        return Err(CliError::Usage(format!(
            "the {} pipeline takes two views, got {m}",
            ts.pipeline
        )));
    }
    let method = match method_arg {
        MethodArg::Perm => TuneMethod::Permutation {
            permutations: ts.permutations,
        },
        MethodArg::Cv => TuneMethod::CrossValidation { folds: ts.folds },
    };
    let (pipeline, grid) = match pipeline_arg {
        PipelineArg::Scca => (
            Pipeline::Pair(s.fit_config()),
            TuneGrid::cartesian(&ts.grid1, &ts.grid2, method, s.seed),
        ),
        PipelineArg::Mscca => (
            Pipeline::MultiView(multiview_config(&s, GammaMatrix::from_thresholds(&vec![0.0; m])?)),
            TuneGrid::uniform(&ts.grid, m, method, s.seed),
        ),
        PipelineArg::Dscca => {
            let path =
                a.y.as_ref()
                    .ok_or_else(|| CliError::Usage("the dscca pipeline needs --y".into()))?;
            let y = load_accessory(path, &s)?;
            let cfg = directed_config(&s, DirectedMode::Dot, BetaMode::Joint, 0.0);
            (
                Pipeline::Directed { cfg, y },
                TuneGrid::cartesian(&ts.grid1, &ts.grid2, method, s.seed),
            )
        }
    };
    let report = grid_orchestrate(&inputs.views, &grid, &pipeline, s.jobs)?;
    let config = echo("tune", &inputs, &s, &ts);
    let out = TuneFile {
        metadata: Metadata {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: "tune".into(),
            seed: s.seed,
            config: config.clone(),
        },
        report: &report,
    };
    let path = out_dir(&s)?.join("tune.json");
    let text = serde_json::to_string_pretty(&out).map_err(scca_core::error::SccaError::from)? + "\n";
    std::fs::write(&path, text)?;
    for c in &report.cells {
        if let Some(e) = &c.error {
            eprintln!("warning: cell {:?}: {e}", c.params);
        }
    }
    let chosen = report.chosen_cell()?;
    println!(
        "chosen cell {:?}: score {}, rho {}",
        chosen.params,
        chosen.score.map_or("-".into(), |v| format!("{v:.4}")),
        chosen.rho.map_or("-".into(), |v| format!("{v:.6}"))
    );
    println!("wrote {}", path.display());
    if a.fit {
        let sol = pipeline.fit_cell(&inputs.views, &grid, chosen.index)?;
        let mut config = config;
        config["chosen"] = json!(chosen.params);
        write_solution(sol, &inputs, "tune", &s, config)?;
    }
    Ok(())
}

fn write_column(path: &Path, name: &str, values: &DVector<f64>) -> Result<(), CliError> {
    let view = ViewMatrix::new(
        DMatrix::from_column_slice(values.len(), 1, values.as_slice()),
        Some(vec![name.to_string()]),
    )?;
    std::fs::write(path, view_to_csv(&view))?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &file_for(&a.common)?)?;
    let mut spec = match a.model {
        ModelArg::TwoView => RankOneSpec::two_view(a.sigma, s.seed),
        ModelArg::ThreeView => RankOneSpec::three_view(a.sigma, s.seed),
    };
    spec.n = a.samples;
    let data = gen_rank_one(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = out_dir(&s)?;
    for (i, v) in data.views.iter().enumerate() {
        let path = dir.join(format!("view{}.csv", i + 1));
        std::fs::write(&path, view_to_csv(v))?;
        write_column(&dir.join(format!("truth{}.csv", i + 1)), "z", &data.truths[i])?;
        println!("wrote {} ({}×{})", path.display(), v.n(), v.p());
    }
    write_column(&dir.join("factor.csv"), "u", &data.factor)?;
    if let Some(sigmas) = &a.sweep {
        if a.model != ModelArg::TwoView {
            return Err(CliError::Usage("sweeps use the two-view model".into()));
        }
        if a.replicates == 0 {
            return Err(CliError::Usage("replicates must be at least 1".into()));
        }
        let sweep = noise_sweep(&spec, sigmas, a.replicates, s.seed, &s.fit_config(), s.jobs);
        let path = dir.join("sweep.csv");
        std::fs::write(&path, sweep.to_csv()?)?;
        for row in &sweep.summary {
            let cos: Vec<String> = row.mean_cos_theta.iter().map(|c| format!("{c:.4}")).collect();
            println!("sigma {}: mean cos θ {}", row.sigma, cos.join("/"));
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let file =
        SolutionFile::read(&a.solution).map_err(|e| CliError::Usage(format!("{}: {e}", a.solution.display())))?;
    let mut common = a.common.clone();
    if !common.scale && !common.no_scale {
        let stored = file.metadata.config["settings"]["scale"].as_bool().unwrap_or(true);
        common.scale = stored;
        common.no_scale = !stored;
    }
    let s = Settings::resolve(&common, &file_for(&common)?)?;
    let sol = file.to_solution()?;
    let inputs = load_inputs(&a.views, &s)?;
    if inputs.views.len() != sol.view_count() {
        return Err(CliError::Usage(format!(
            "solution has {} views, {} tables given",
            sol.view_count(),
            inputs.views.len()
        )));
    }
    for (i, v) in inputs.views.iter().enumerate() {
        if v.p() != file.views[i].variable_names.len() {
            return Err(CliError::Usage(format!(
                "view {} has {} columns, solution has {}",
                i + 1,
                v.p(),
                file.views[i].variable_names.len()
            )));
        }
    }
    let (table, stem) = match a.kind {
        ReportKind::Biplot => (ReportTable::from(&biplot_coords(&sol, &inputs.views)?), "biplot"),
        ReportKind::Interp => (
            ReportTable::from(&interp_coords(&sol, &inputs.views, a.markers)?),
            "interp",
        ),
    };
    let fmt = format(a.format);
    let path = out_dir(&s)?.join(format!("{stem}.{}", extension(fmt)));
    write_report(&table, &path, fmt)?;
    println!("wrote {}", path.display());
    Ok(())
}
