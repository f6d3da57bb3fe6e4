//! Implementations of the subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use sqdistill_core::analytics::{self, ProtocolParams};
use sqdistill_core::covariance::SqueezedModeParams;
use sqdistill_core::montecarlo::{
    run_qcp, simulate_series, DistillationEstimate, PhaseModel, SimulationConfig, TriggerMode,
};
use sqdistill_core::phase_noise::PhaseProcessConfig;
use sqdistill_core::timeseries::{
    calibrate, condition_series, load_series_from_path, save_series_to_path, QuadratureRecord,
    SeriesMetadata,
};

use crate::error::CliError;
use crate::output::{fmt, Table};
use crate::settings::{Engine, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PhaseModelArg {
    /// independent phases on every sample
    Iid,
    /// band-limited correlated phase processes (reference band)
    Bandlimited,
    /// phases held constant across each trigger window
    Held,
}

impl PhaseModelArg {
    fn build(self, settings: &Settings, seed: u64) -> PhaseModel {
        match self {
            PhaseModelArg::Iid => PhaseModel::Iid,
            PhaseModelArg::Bandlimited => {
                PhaseModel::Bandlimited(PhaseProcessConfig::reference(settings.sigma, seed))
            }
            PhaseModelArg::Held => PhaseModel::HeldIid,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PhaseModelArg::Iid => "iid",
            PhaseModelArg::Bandlimited => "bandlimited",
            PhaseModelArg::Held => "held",
        }
    }
}

fn protocol_params(
    settings: &Settings,
    sigma: f64,
    theta: f64,
    q: f64,
    nqcp: u32,
) -> Result<ProtocolParams, CliError> {
    let state = SqueezedModeParams::new(settings.vx, settings.vp)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(ProtocolParams::new(
        state,
        sigma,
        theta,
        q,
        settings.eta,
        nqcp,
    )?)
}

struct GridPoint {
    label: String,
    params: ProtocolParams,
}

struct Row {
    label: String,
    v_in: f64,
    analytic: Option<(f64, f64)>, // (v_out, p_success)
    mc: Option<DistillationEstimate>,
    analytic_conj: Option<(f64, f64)>, // (v_out_conj, u_product)
    mc_conj: Option<(DistillationEstimate, f64)>, // (conj estimate, u_hat)
}

struct SweepPlan {
    engine: Engine,
    uproduct: bool,
    phase_model: PhaseModelArg,
    check: bool,
}

fn mc_estimate(
    settings: &Settings,
    params: &ProtocolParams,
    plan: &SweepPlan,
    seed: u64,
    verify_angle: f64,
) -> Result<DistillationEstimate, CliError> {
    let config = SimulationConfig {
        params: *params,
        n_trials: settings.trials,
        phase_model: plan.phase_model.build(settings, seed),
        trigger_mode: TriggerMode::FixedAngle,
        verify_angle,
        seed,
        shards: settings.shards,
    };
    Ok(run_qcp(&config)?)
}

fn compute_row(
    settings: &Settings,
    plan: &SweepPlan,
    index: usize,
    point: &GridPoint,
) -> Result<Row, CliError> {
    let params = &point.params;
    let v_in = analytics::v_in(params)?;
    let wants_analytic = matches!(plan.engine, Engine::Analytic | Engine::Both);
    let wants_mc = matches!(plan.engine, Engine::Montecarlo | Engine::Both);
    let seed = settings.seed.wrapping_add(index as u64);

    let analytic = if wants_analytic {
        let r = analytics::v_out_qcp(params)?;
        Some((r.v_out, r.p_success))
    } else {
        None
    };
    let analytic_conj = if wants_analytic && plan.uproduct {
        let conj = analytics::v_out_general(params, std::f64::consts::FRAC_PI_2)?;
        let u = (analytic.unwrap().0 * conj).sqrt();
        Some((conj, u))
    } else {
        None
    };

    let mc = if wants_mc {
        Some(mc_estimate(settings, params, plan, seed, 0.0)?)
    } else {
        None
    };
    let mc_conj = if wants_mc && plan.uproduct {
        let conj = mc_estimate(settings, params, plan, seed, std::f64::consts::FRAC_PI_2)?;
        let u_hat = (mc.as_ref().unwrap().v_out_hat * conj.v_out_hat).sqrt();
        Some((conj, u_hat))
    } else {
        None
    };

    if plan.check {
        if let (Some((v, p)), Some(est)) = (&analytic, &mc) {
            if (est.v_out_hat - v).abs() > 3.0 * est.se_v || (est.p_hat - p).abs() > 3.0 * est.se_p
            {
                return Err(CliError::Numerical(format!(
                    "self-check failed at grid point {}: v_out {} vs {} (se {}), \
                     p {} vs {} (se {})",
                    point.label, est.v_out_hat, v, est.se_v, est.p_hat, p, est.se_p
                )));
            }
        }
    }

    Ok(Row {
        label: point.label.clone(),
        v_in,
        analytic,
        mc,
        analytic_conj,
        mc_conj,
    })
}

fn sweep_columns(swept: &'static str, plan: &SweepPlan) -> Vec<&'static str> {
    let mut cols = vec![swept, "v_in"];
    if matches!(plan.engine, Engine::Analytic | Engine::Both) {
        cols.extend(["v_out", "p_success"]);
    }
    if matches!(plan.engine, Engine::Montecarlo | Engine::Both) {
        cols.extend(["v_out_hat", "se_v", "p_hat", "se_p"]);
    }
    if plan.uproduct {
        if matches!(plan.engine, Engine::Analytic | Engine::Both) {
            cols.extend(["v_out_conj", "u_product"]);
        }
        if matches!(plan.engine, Engine::Montecarlo | Engine::Both) {
            cols.extend(["v_out_conj_hat", "se_v_conj", "u_product_hat"]);
        }
    }
    cols
}

fn row_cells(row: &Row, plan: &SweepPlan) -> Vec<String> {
    let mut cells = vec![row.label.clone(), fmt(row.v_in)];
    if let Some((v, p)) = row.analytic {
        cells.push(fmt(v));
        cells.push(fmt(p));
    }
    if let Some(est) = &row.mc {
        cells.extend([
            fmt(est.v_out_hat),
            fmt(est.se_v),
            fmt(est.p_hat),
            fmt(est.se_p),
        ]);
    }
    if plan.uproduct {
        if let Some((conj, u)) = row.analytic_conj {
            cells.push(fmt(conj));
            cells.push(fmt(u));
        }
        if let Some((conj, u_hat)) = &row.mc_conj {
            cells.extend([fmt(conj.v_out_hat), fmt(conj.se_v), fmt(*u_hat)]);
        }
    }
    cells
}

fn run_sweep(
    command: &str,
    swept: &'static str,
    settings: &Settings,
    plan: &SweepPlan,
    points: Vec<GridPoint>,
    extra_notes: &[String],
    out: Option<&Path>,
) -> Result<(), CliError> {
    if matches!(plan.engine, Engine::Montecarlo | Engine::Both) && settings.trials == 0 {
        return Err(CliError::Usage(
            "Monte Carlo engine selected with zero trials".into(),
        ));
    }
    // Grid points evaluate independently and in parallel; row order stays
    // grid order because the collection preserves indices.
    let rows: Vec<Row> = points
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            compute_row(settings, plan, i, point)
                .map_err(|e| e.with_context(&format!("{swept}={}", point.label)))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(command, &settings.echo(), sweep_columns(swept, plan));
    for note in extra_notes {
        table.note(note.clone());
    }
    if plan.phase_model != PhaseModelArg::Iid
        && matches!(plan.engine, Engine::Montecarlo | Engine::Both)
    {
        table.note(format!("phase_model={}", plan.phase_model.name()));
    }
    for row in &rows {
        table.push_row(row_cells(row, plan));
    }
    table.write(out)
}

pub fn sweep_sigma(
    settings: &Settings,
    grid: Vec<f64>,
    conjugate: bool,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if conjugate {
        return sweep_sigma_both_triggers(settings, grid, check, out);
    }
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct: false,
        phase_model: PhaseModelArg::Iid,
        check,
    };
    let points = grid
        .iter()
        .map(|&sigma| {
            Ok(GridPoint {
                label: fmt(sigma),
                params: protocol_params(
                    settings,
                    sigma,
                    settings.theta,
                    settings.q,
                    settings.nqcp,
                )?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let notes = vec![format!(
        "grid={}",
        grid.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
    )];
    run_sweep("sweep-sigma", "sigma", settings, &plan, points, &notes, out)
}

// Side-by-side comparison of the squeezed-quadrature trigger (theta = 0)
// and the anti-squeezed trigger (theta = pi/2) across noise strengths.
fn sweep_sigma_both_triggers(
    settings: &Settings,
    grid: Vec<f64>,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct: false,
        phase_model: PhaseModelArg::Iid,
        check,
    };
    let pair = |sigma: f64| -> Result<(GridPoint, GridPoint), CliError> {
        let squeezed = GridPoint {
            label: fmt(sigma),
            params: protocol_params(settings, sigma, 0.0, settings.q, settings.nqcp)?,
        };
        let conj = GridPoint {
            label: fmt(sigma),
            params: protocol_params(
                settings,
                sigma,
                std::f64::consts::FRAC_PI_2,
                settings.q,
                settings.nqcp,
            )?,
        };
        Ok((squeezed, conj))
    };
    let pairs = grid
        .iter()
        .map(|&s| pair(s))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<(Row, Row)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (squeezed, conj))| {
            let ctx = |e: CliError| e.with_context(&format!("sigma={}", squeezed.label));
            Ok((
                compute_row(settings, &plan, 2 * i, squeezed).map_err(ctx)?,
                compute_row(settings, &plan, 2 * i + 1, conj)
                    .map_err(|e| e.with_context(&format!("sigma={} (conjugate)", conj.label)))?,
            ))
        })
        .collect::<Result<_, CliError>>()?;

    let mut columns = vec!["sigma", "v_in"];
    let wants_analytic = matches!(plan.engine, Engine::Analytic | Engine::Both);
    let wants_mc = matches!(plan.engine, Engine::Montecarlo | Engine::Both);
    if wants_analytic {
        columns.extend(["v_out", "p_success", "v_out_conj", "p_success_conj"]);
    }
    if wants_mc {
        columns.extend([
            "v_out_hat",
            "se_v",
            "p_hat",
            "se_p",
            "v_out_conj_hat",
            "se_v_conj",
            "p_hat_conj",
            "se_p_conj",
        ]);
    }
    let mut table = Table::new("sweep-sigma", &settings.echo(), columns);
    table.note(format!(
        "grid={} (conjugate columns: trigger theta = pi/2)",
        grid.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
    ));
    for (squeezed, conj) in &rows {
        let mut cells = vec![squeezed.label.clone(), fmt(squeezed.v_in)];
        if let (Some((v0, p0)), Some((v90, p90))) = (squeezed.analytic, conj.analytic) {
            cells.extend([fmt(v0), fmt(p0), fmt(v90), fmt(p90)]);
        }
        if let (Some(e0), Some(e90)) = (&squeezed.mc, &conj.mc) {
            cells.extend([
                fmt(e0.v_out_hat),
                fmt(e0.se_v),
                fmt(e0.p_hat),
                fmt(e0.se_p),
                fmt(e90.v_out_hat),
                fmt(e90.se_v),
                fmt(e90.p_hat),
                fmt(e90.se_p),
            ]);
        }
        table.push_row(cells);
    }
    table.write(out)
}

pub fn sweep_threshold(
    settings: &Settings,
    grid: Vec<f64>,
    uproduct: bool,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct,
        phase_model: PhaseModelArg::Iid,
        check,
    };
    let points = grid
        .iter()
        .map(|&q| {
            Ok(GridPoint {
                label: fmt(q),
                params: protocol_params(
                    settings,
                    settings.sigma,
                    settings.theta,
                    q,
                    settings.nqcp,
                )?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let notes = vec![format!(
        "grid={}",
        grid.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
    )];
    run_sweep("sweep-threshold", "q", settings, &plan, points, &notes, out)
}

pub fn sweep_theta(
    settings: &Settings,
    points_count: usize,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if points_count == 0 {
        return Err(CliError::Usage(
            "theta sweep needs at least one grid point".into(),
        ));
    }
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct: false,
        phase_model: PhaseModelArg::Iid,
        check,
    };
    let points = (0..points_count)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / points_count as f64;
            Ok(GridPoint {
                label: fmt(theta),
                params: protocol_params(
                    settings,
                    settings.sigma,
                    theta,
                    settings.q,
                    settings.nqcp,
                )?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let notes = vec![format!(
        "points={points_count} (theta = k*pi/{points_count})"
    )];
    run_sweep("sweep-theta", "theta", settings, &plan, points, &notes, out)
}

/// Output variance against success probability over a threshold grid.
pub fn tradeoff(
    settings: &Settings,
    grid: Vec<f64>,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct: false,
        phase_model: PhaseModelArg::Iid,
        check,
    };
    if matches!(plan.engine, Engine::Montecarlo | Engine::Both) && settings.trials == 0 {
        return Err(CliError::Usage(
            "Monte Carlo engine selected with zero trials".into(),
        ));
    }
    let points = grid
        .iter()
        .map(|&q| {
            Ok(GridPoint {
                label: fmt(q),
                params: protocol_params(
                    settings,
                    settings.sigma,
                    settings.theta,
                    q,
                    settings.nqcp,
                )?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows: Vec<Row> = points
        .par_iter()
        .enumerate()
        .map(|(i, point)| compute_row(settings, &plan, i, point))
        .collect::<Result<_, _>>()?;

    let mut cols = vec!["q"];
    if matches!(plan.engine, Engine::Analytic | Engine::Both) {
        cols.extend(["p_success", "v_out"]);
    }
    if matches!(plan.engine, Engine::Montecarlo | Engine::Both) {
        cols.extend(["p_hat", "se_p", "v_out_hat", "se_v"]);
    }
    let mut table = Table::new("tradeoff", &settings.echo(), cols);
    for row in rows {
        let mut cells = vec![row.label.clone()];
        if let Some((v, p)) = row.analytic {
            cells.push(fmt(p));
            cells.push(fmt(v));
        }
        if let Some(est) = &row.mc {
            cells.extend([
                fmt(est.p_hat),
                fmt(est.se_p),
                fmt(est.v_out_hat),
                fmt(est.se_v),
            ]);
        }
        table.push_row(cells);
    }
    table.write(out)
}

pub fn qcp(
    settings: &Settings,
    grid: Vec<u32>,
    phase_model: PhaseModelArg,
    check: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    // The closed forms assume perfectly correlated phases across the
    // trigger window; a finite-correlation stream differs systematically,
    // so the 3-se self-check is only meaningful against the held model.
    if check
        && phase_model != PhaseModelArg::Held
        && matches!(settings.engine, Engine::Both)
        && grid.iter().any(|&n| n > 1)
    {
        return Err(CliError::Usage(
            "--check with depth > 1 requires --phase-model held; the analytic \
             predictions hold in the perfectly-correlated limit"
                .into(),
        ));
    }
    let plan = SweepPlan {
        engine: settings.engine,
        uproduct: false,
        phase_model,
        check,
    };
    let points = grid
        .iter()
        .map(|&n| {
            Ok(GridPoint {
                label: n.to_string(),
                params: protocol_params(settings, settings.sigma, settings.theta, settings.q, n)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let notes = vec![format!(
        "grid={}",
        grid.iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    )];
    run_sweep("qcp", "n_qcp", settings, &plan, points, &notes, out)
}

pub fn povm(settings: &Settings, n_max: usize, out: Option<&Path>) -> Result<(), CliError> {
    let coeffs = analytics::povm_coefficients(settings.q, n_max)?;
    let mut table = Table::new(
        "povm",
        &format!("q={} nmax={n_max}", settings.q),
        vec!["n", "p_n"],
    );
    table.note(
        "threshold in natural quadrature units (vacuum variance 1/2), \
         a factor sqrt(2) from the shot-noise units used elsewhere",
    );
    for (n, p) in coeffs.iter().enumerate() {
        table.push_row(vec![n.to_string(), fmt(*p)]);
    }
    table.write(out)
}

pub fn postprocess(
    settings: &Settings,
    file: &PathBuf,
    no_threshold: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (records, metadata) = load_series_from_path(file)
        .map_err(|e| CliError::from(e).with_context(&format!("{}", file.display())))?;
    let calibrated = calibrate(&records, &metadata)
        .map_err(|e| CliError::from(e).with_context(&format!("{}", file.display())))?;
    let threshold = if no_threshold { None } else { Some(settings.q) };
    let (accepted, est) = condition_series(&calibrated, threshold, settings.nqcp, settings.seed)
        .map_err(|e| CliError::from(e).with_context(&format!("{}", file.display())))?;

    let threshold_echo = match threshold {
        Some(q) => format!("q={q}"),
        None => "q=none (no threshold)".to_string(),
    };
    let mut table = Table::new(
        "postprocess",
        &format!(
            "file={} {threshold_echo} nqcp={} seed={}",
            file.display(),
            settings.nqcp,
            settings.seed
        ),
        vec![
            "n_records",
            "n_candidates",
            "n_accepted",
            "p_hat",
            "se_p",
            "v_out_hat",
            "se_v",
        ],
    );
    let candidates = records.len() as u64 - u64::from(settings.nqcp) + 1;
    debug_assert_eq!(accepted.len() as u64, est.n_accepted);
    table.push_row(vec![
        records.len().to_string(),
        candidates.to_string(),
        est.n_accepted.to_string(),
        fmt(est.p_hat),
        fmt(est.se_p),
        fmt(est.v_out_hat),
        fmt(est.se_v),
    ]);
    table.write(out)
}

#[allow(clippy::too_many_arguments)]
pub fn gen_series(
    settings: &Settings,
    phase_model: PhaseModelArg,
    sample_rate: f64,
    band_low: f64,
    band_high: f64,
    raw_variance: f64,
    randomized_trigger: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    // written so NaN fails too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(raw_variance > 0.0) {
        return Err(CliError::Usage(format!(
            "raw-variance must be positive, got {raw_variance}"
        )));
    }
    let params = protocol_params(
        settings,
        settings.sigma,
        settings.theta,
        settings.q,
        settings.nqcp,
    )?;
    let model = match phase_model {
        PhaseModelArg::Iid => PhaseModel::Iid,
        PhaseModelArg::Bandlimited => PhaseModel::Bandlimited(PhaseProcessConfig {
            sample_rate,
            band_low,
            band_high,
            sigma: settings.sigma,
            seed: settings.seed,
        }),
        PhaseModelArg::Held => {
            return Err(CliError::Usage(
                "gen-series exports sliding-window streams; the held model's disjoint \
                 blocks do not postprocess with the sliding rule"
                    .into(),
            ))
        }
    };
    let config = SimulationConfig {
        params,
        n_trials: settings.trials,
        phase_model: model,
        trigger_mode: if randomized_trigger {
            TriggerMode::RandomizedAngle
        } else {
            TriggerMode::FixedAngle
        },
        verify_angle: 0.0,
        seed: settings.seed,
        shards: settings.shards,
    };
    let stream = simulate_series(&config)?;
    let scale = raw_variance.sqrt();
    let records: Vec<QuadratureRecord> = stream
        .iter()
        .enumerate()
        .map(|(i, &(q1, q2))| QuadratureRecord {
            index: i as u64,
            q1: q1 * scale,
            q2: q2 * scale,
        })
        .collect();
    let metadata = SeriesMetadata {
        sample_rate_hz: sample_rate,
        trigger_angle_rad: settings.theta,
        verify_angle_rad: 0.0,
        shot_noise_variance_raw: raw_variance,
        description: format!(
            "sqdistill gen-series {} phase_model={} randomized_trigger={}",
            settings.echo(),
            phase_model.name(),
            randomized_trigger
        ),
    };
    match out {
        Some(path) => save_series_to_path(&records, &metadata, path)?,
        None => {
            let stdout = std::io::stdout();
            sqdistill_core::timeseries::save_series(&records, &metadata, stdout.lock())?;
        }
    }
    Ok(())
}

impl CliError {
    fn with_context(self, context: &str) -> CliError {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{context}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{context}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
        }
    }
}
