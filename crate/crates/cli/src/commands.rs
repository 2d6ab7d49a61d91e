//! Subcommand implementations: evaluate, optimize, simulate, compare.

use relaxcrb_core::{
    equivalent_snr, evaluate_crb, gamma_per_sqrt_s, optimize_protocol, pcrb, run_trials,
    DesignSpec, Error as CoreError, FitSettings, NoiseModel, OptimError, Range64,
    SequenceProtocol, TissueParams, TrialConfig, TrialPoint,
};
use thiserror::Error;

use crate::config::RunConfig;
use crate::report::{Cell, ReportTable};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Usage(String),
}

/// Tables plus the per-protocol failures that did not abort the run.
#[derive(Debug)]
pub struct CmdOutput {
    pub tables: Vec<ReportTable>,
    pub failures: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub attempted: usize,
}

impl CmdOutput {
    fn new(attempted: usize) -> Self {
        Self {
            tables: Vec::new(),
            failures: Vec::new(),
            warnings: Vec::new(),
            attempted,
        }
    }
}

fn opt_num(v: Option<f64>) -> Cell {
    v.map_or(Cell::Blank, Cell::Num)
}

/// Per-protocol range summary used by evaluate and compare.
struct Summary {
    t_seq: f64,
    snr_eq: f64,
    gamma1_avg: f64,
    gamma2_avg: Option<f64>,
    gamma1_mid: f64,
    gamma2_mid: Option<f64>,
    pcrb1_avg: f64,
    pcrb2_avg: Option<f64>,
    sens1_avg: f64,
    orth1_avg: f64,
}

/// CRB scales as 1/snr^2, so the equivalent-SNR bound is a rescale of the
/// input-SNR bound.
fn crb_at_eq(crb_in: f64, snr: f64, snr_eq: f64) -> f64 {
    crb_in * (snr / snr_eq).powi(2)
}

/// Range-average PCRB consistent with the efficiency average: pointwise
/// PCRB at equivalent SNR is 100/(gamma * sqrt(t_scan)), so the tabulated
/// average is the transform of the mean efficiency (a harmonic mean of the
/// pointwise percentages).
fn pcrb_of_gamma_avg(gamma_avg_per_sqrt_s: f64, t_scan_ms: f64) -> f64 {
    100.0 / (gamma_avg_per_sqrt_s * (t_scan_ms / 1000.0).sqrt())
}

fn summarize(
    protocol: &SequenceProtocol<f64>,
    range: &Range64,
    snr: f64,
    t_scan: f64,
) -> Result<Summary, CoreError> {
    let noise = NoiseModel::from_snr(range.m0, snr);
    let t_seq = protocol.sequence_time();
    let snr_eq = equivalent_snr(snr, t_scan, t_seq);
    let grid = range.grid();
    let joint = protocol.estimates_t2();
    let (mut g1, mut g2, mut s1, mut o1) = (0.0, 0.0, 0.0, 0.0);
    for tissue in &grid {
        let r = evaluate_crb(protocol, tissue, &noise)?;
        g1 += r.gamma_t1;
        s1 += r.sens_t1;
        o1 += r.orth_t1;
        if let Some(gt2) = r.gamma_t2 {
            g2 += gt2;
        }
    }
    let n = grid.len() as f64;
    let mid = evaluate_crb(protocol, &range.midpoint(), &noise)?;
    let gamma1_avg = gamma_per_sqrt_s(g1 / n);
    let gamma2_avg = joint.then(|| gamma_per_sqrt_s(g2 / n));
    Ok(Summary {
        t_seq,
        snr_eq,
        gamma1_avg,
        gamma2_avg,
        gamma1_mid: gamma_per_sqrt_s(mid.gamma_t1),
        gamma2_mid: mid.gamma_t2.map(gamma_per_sqrt_s),
        pcrb1_avg: pcrb_of_gamma_avg(gamma1_avg, t_scan),
        pcrb2_avg: gamma2_avg.map(|g| pcrb_of_gamma_avg(g, t_scan)),
        sens1_avg: s1 / n,
        orth1_avg: o1 / n,
    })
}

/// Aggregates pointwise MEE percentages the same way the bound is averaged:
/// through the mean of the implied efficiencies (harmonic mean). Degenerate
/// zero-error points (noiseless runs) fall back to the arithmetic mean.
fn aggregate_mee(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// T1-axis evaluation path: the tissue diagonal for joint families, the T1
/// axis at mid T2 otherwise.
fn t1_curve_points(protocol: &SequenceProtocol<f64>, range: &Range64) -> Vec<TissueParams<f64>> {
    if protocol.estimates_t2() {
        range.diagonal(range.grid_t1)
    } else {
        let t2 = range.midpoint().t2;
        range
            .t1_axis()
            .into_iter()
            .map(|t1| TissueParams {
                m0: range.m0,
                t1,
                t2,
            })
            .collect()
    }
}

/// T2-axis evaluation path (joint families): T2 axis at mid T1.
fn t2_curve_points(range: &Range64) -> Vec<TissueParams<f64>> {
    let t1 = range.midpoint().t1;
    range
        .t2_axis()
        .into_iter()
        .map(|t2| TissueParams {
            m0: range.m0,
            t1,
            t2,
        })
        .collect()
}

const SUMMARY_COLS: &[&str] = &[
    "protocol",
    "family",
    "n_acq",
    "t_seq_ms",
    "snr_eq",
    "gamma1_avg_per_sqrt_s",
    "gamma1_mid_per_sqrt_s",
    "gamma2_avg_per_sqrt_s",
    "gamma2_mid_per_sqrt_s",
    "pcrb_t1_avg_pct",
    "pcrb_t2_avg_pct",
    "sens_t1_avg_per_ms",
    "orth_t1_avg",
];

fn summary_row(name: &str, protocol: &SequenceProtocol<f64>, s: &Summary) -> Vec<Cell> {
    vec![
        Cell::Text(name.to_string()),
        Cell::Text(protocol.family_name().to_string()),
        Cell::Int(protocol.n_acquisitions() as i64),
        Cell::Num(s.t_seq),
        Cell::Num(s.snr_eq),
        Cell::Num(s.gamma1_avg),
        Cell::Num(s.gamma1_mid),
        opt_num(s.gamma2_avg),
        opt_num(s.gamma2_mid),
        Cell::Num(s.pcrb1_avg),
        opt_num(s.pcrb2_avg),
        Cell::Num(s.sens1_avg),
        Cell::Num(s.orth1_avg),
    ]
}

const CURVE_COLS: &[&str] = &[
    "protocol",
    "axis",
    "t1_ms",
    "t2_ms",
    "sens_t1_per_ms",
    "sens_t2_per_ms",
    "orth_t1",
    "orth_t2",
    "crb_t1_ms2",
    "crb_t2_ms2",
    "pcrb_t1_pct",
    "pcrb_t2_pct",
    "gamma1_per_sqrt_s",
    "gamma2_per_sqrt_s",
];

fn curve_rows(
    name: &str,
    protocol: &SequenceProtocol<f64>,
    range: &Range64,
    snr: f64,
    t_scan: f64,
    table: &mut ReportTable,
) -> Result<(), CoreError> {
    let noise = NoiseModel::from_snr(range.m0, snr);
    let t_seq = protocol.sequence_time();
    let snr_eq = equivalent_snr(snr, t_scan, t_seq);
    let mut paths = vec![("t1", t1_curve_points(protocol, range))];
    if protocol.estimates_t2() {
        paths.push(("t2", t2_curve_points(range)));
    }
    for (axis, points) in paths {
        for tissue in points {
            let r = evaluate_crb(protocol, &tissue, &noise)?;
            table.push(vec![
                Cell::Text(name.to_string()),
                Cell::Text(axis.to_string()),
                Cell::Num(tissue.t1),
                Cell::Num(tissue.t2),
                Cell::Num(r.sens_t1),
                opt_num(r.sens_t2),
                Cell::Num(r.orth_t1),
                opt_num(r.orth_t2),
                Cell::Num(r.crb_t1),
                opt_num(r.crb_t2),
                Cell::Num(pcrb(crb_at_eq(r.crb_t1, snr, snr_eq), tissue.t1)),
                opt_num(
                    r.crb_t2
                        .map(|c2| pcrb(crb_at_eq(c2, snr, snr_eq), tissue.t2)),
                ),
                Cell::Num(gamma_per_sqrt_s(r.gamma_t1)),
                opt_num(r.gamma_t2.map(gamma_per_sqrt_s)),
            ]);
        }
    }
    Ok(())
}

fn plausibility_warnings(config: &RunConfig) -> Vec<String> {
    let mut w = Vec::new();
    if config.range.t2_max > config.range.t1_min {
        w.push(format!(
            "tissue range allows T2 ({} ms) above T1 ({} ms); physically implausible corner points are evaluated as requested",
            config.range.t2_max, config.range.t1_min
        ));
    }
    w
}

/// Per-protocol CRB decomposition over the tissue range.
pub fn cmd_evaluate(config: &RunConfig) -> Result<CmdOutput, CmdError> {
    if config.protocols.is_empty() {
        return Err(CmdError::Usage(
            "evaluate needs at least one [protocol.*] section".into(),
        ));
    }
    let mut out = CmdOutput::new(config.protocols.len());
    out.warnings = plausibility_warnings(config);
    let mut summary = ReportTable::new("evaluate_summary", SUMMARY_COLS);
    let mut curves = ReportTable::new("evaluate_curves", CURVE_COLS);
    for (name, protocol) in &config.protocols {
        match summarize(protocol, &config.range, config.snr, config.t_scan_ms).and_then(|s| {
            curve_rows(
                name,
                protocol,
                &config.range,
                config.snr,
                config.t_scan_ms,
                &mut curves,
            )?;
            Ok(s)
        }) {
            Ok(s) => summary.push(summary_row(name, protocol, &s)),
            Err(e) => out.failures.push((name.clone(), e.to_string())),
        }
    }
    out.tables = vec![summary, curves];
    Ok(out)
}

/// Ranking by range-average T1 efficiency, decomposition side by side.
pub fn cmd_compare(config: &RunConfig) -> Result<CmdOutput, CmdError> {
    if config.protocols.len() < 2 {
        return Err(CmdError::Usage(
            "compare needs at least two protocols (ranking is undefined otherwise)".into(),
        ));
    }
    let mut out = CmdOutput::new(config.protocols.len());
    out.warnings = plausibility_warnings(config);
    let mut evaluated: Vec<(String, &SequenceProtocol<f64>, Summary)> = Vec::new();
    for (name, protocol) in &config.protocols {
        match summarize(protocol, &config.range, config.snr, config.t_scan_ms) {
            Ok(s) => evaluated.push((name.clone(), protocol, s)),
            Err(e) => out.failures.push((name.clone(), e.to_string())),
        }
    }
    // Stable sort: ties keep input order.
    evaluated.sort_by(|a, b| b.2.gamma1_avg.total_cmp(&a.2.gamma1_avg));
    let mut table = ReportTable::new(
        "compare_ranking",
        &[
            "rank",
            "protocol",
            "family",
            "gamma1_avg_per_sqrt_s",
            "gamma2_avg_per_sqrt_s",
            "t_seq_ms",
            "snr_eq",
            "sens_t1_avg_per_ms",
            "orth_t1_avg",
            "pcrb_t1_avg_pct",
        ],
    );
    for (rank, (name, protocol, s)) in evaluated.iter().enumerate() {
        table.push(vec![
            Cell::Int(rank as i64 + 1),
            Cell::Text(name.clone()),
            Cell::Text(protocol.family_name().to_string()),
            Cell::Num(s.gamma1_avg),
            opt_num(s.gamma2_avg),
            Cell::Num(s.t_seq),
            Cell::Num(s.snr_eq),
            Cell::Num(s.sens1_avg),
            Cell::Num(s.orth1_avg),
            Cell::Num(s.pcrb1_avg),
        ]);
    }
    out.tables = vec![table];
    Ok(out)
}

fn trial_stats_cells(point: &TrialPoint<f64>) -> (Cell, Cell, Cell, Cell) {
    let t1c = match &point.t1 {
        Some(s) => (Cell::Num(s.mee_pct), Cell::Num(s.rbias_pct)),
        None => (Cell::Blank, Cell::Blank),
    };
    let t2c = match &point.t2 {
        Some(s) => (Cell::Num(s.mee_pct), Cell::Num(s.rbias_pct)),
        None => (Cell::Blank, Cell::Blank),
    };
    (t1c.0, t1c.1, t2c.0, t2c.1)
}

/// Monte Carlo validation at the equivalent SNR implied by the scan budget.
pub fn cmd_simulate(config: &RunConfig) -> Result<CmdOutput, CmdError> {
    if config.protocols.is_empty() {
        return Err(CmdError::Usage(
            "simulate needs at least one [protocol.*] section".into(),
        ));
    }
    let mut out = CmdOutput::new(config.protocols.len());
    out.warnings = plausibility_warnings(config);
    let mut summary = ReportTable::new(
        "simulate_summary",
        &[
            "protocol",
            "family",
            "t_seq_ms",
            "snr_eq",
            "sigma_eq",
            "n_trials",
            "points",
            "failed_fits",
            "mee_t1_avg_pct",
            "pcrb_t1_avg_pct",
            "rbias_t1_avg_pct",
            "mee_t2_avg_pct",
            "pcrb_t2_avg_pct",
            "rbias_t2_avg_pct",
        ],
    );
    let mut curves = ReportTable::new(
        "simulate_curves",
        &[
            "protocol",
            "axis",
            "t1_ms",
            "t2_ms",
            "n_trials",
            "failures",
            "mee_t1_pct",
            "rbias_t1_pct",
            "pcrb_t1_pct",
            "mee_t2_pct",
            "rbias_t2_pct",
            "pcrb_t2_pct",
        ],
    );

    for (name, protocol) in &config.protocols {
        match simulate_one(name, protocol, config, &mut summary, &mut curves) {
            Ok(()) => {}
            Err(e) => out.failures.push((name.clone(), e)),
        }
    }
    out.tables = vec![summary, curves];
    Ok(out)
}

fn simulate_one(
    name: &str,
    protocol: &SequenceProtocol<f64>,
    config: &RunConfig,
    summary: &mut ReportTable,
    curves: &mut ReportTable,
) -> Result<(), String> {
    let range = &config.range;
    let joint = protocol.estimates_t2();
    let t_seq = protocol.sequence_time();
    let snr_eq = equivalent_snr(config.snr, config.t_scan_ms, t_seq);
    let sigma = range.m0 / snr_eq;
    let noise_eq = NoiseModel::from_snr(range.m0, snr_eq);
    let fit = FitSettings::default();

    // Averaging grid per the range-average convention; for T1-only families
    // the model ignores T2, so the T1 axis is the whole grid.
    let avg_points = if joint {
        range.grid()
    } else {
        t1_curve_points(protocol, range)
    };
    let run = |points: Vec<TissueParams<f64>>| -> Result<Vec<TrialPoint<f64>>, String> {
        let trial_config = TrialConfig {
            protocol: protocol.clone(),
            points,
            sigma,
            n_trials: config.n_trials,
            rng_seed: config.rng_seed,
            fit,
        };
        run_trials(&trial_config)
            .map(|r| r.rows)
            .map_err(|e| e.to_string())
    };

    let avg_rows = run(avg_points)?;
    let (mut mee1, mut mee2) = (Vec::new(), Vec::new());
    let (mut rb1, mut rb2) = (0.0, 0.0);
    let mut failed = 0usize;
    for row in &avg_rows {
        failed += row.failures;
        if let Some(s) = &row.t1 {
            mee1.push(s.mee_pct);
            rb1 += s.rbias_pct;
        }
        if let Some(s) = &row.t2 {
            mee2.push(s.mee_pct);
            rb2 += s.rbias_pct;
        }
    }
    if mee1.is_empty() {
        return Err("all trials failed on every grid point".into());
    }
    let s = summarize(protocol, range, config.snr, config.t_scan_ms).map_err(|e| e.to_string())?;
    summary.push(vec![
        Cell::Text(name.to_string()),
        Cell::Text(protocol.family_name().to_string()),
        Cell::Num(t_seq),
        Cell::Num(snr_eq),
        Cell::Num(sigma),
        Cell::Int(config.n_trials as i64),
        Cell::Int(avg_rows.len() as i64),
        Cell::Int(failed as i64),
        Cell::Num(aggregate_mee(&mee1)),
        Cell::Num(s.pcrb1_avg),
        Cell::Num(rb1 / mee1.len() as f64),
        if mee2.is_empty() {
            Cell::Blank
        } else {
            Cell::Num(aggregate_mee(&mee2))
        },
        opt_num(s.pcrb2_avg),
        if mee2.is_empty() {
            Cell::Blank
        } else {
            Cell::Num(rb2 / mee2.len() as f64)
        },
    ]);

    // Curve emission along the figure paths, PCRB reference alongside.
    let mut paths = vec![("t1", t1_curve_points(protocol, range))];
    if joint {
        paths.push(("t2", t2_curve_points(range)));
    }
    for (axis, points) in paths {
        let rows = if !joint && axis == "t1" {
            avg_rows.clone() // identical points, reuse the trials
        } else {
            run(points)?
        };
        for row in &rows {
            let r = evaluate_crb(protocol, &row.tissue, &noise_eq).map_err(|e| e.to_string())?;
            let (mee_t1, rb_t1, mee_t2, rb_t2) = trial_stats_cells(row);
            curves.push(vec![
                Cell::Text(name.to_string()),
                Cell::Text(axis.to_string()),
                Cell::Num(row.tissue.t1),
                Cell::Num(row.tissue.t2),
                Cell::Int(row.n_trials as i64),
                Cell::Int(row.failures as i64),
                mee_t1,
                rb_t1,
                Cell::Num(pcrb(r.crb_t1, row.tissue.t1)),
                mee_t2,
                rb_t2,
                opt_num(r.crb_t2.map(|c2| pcrb(c2, row.tissue.t2))),
            ]);
        }
    }
    Ok(())
}

/// Max-min design searches followed by evaluation of the winners.
pub fn cmd_optimize(config: &RunConfig) -> Result<CmdOutput, CmdError> {
    if config.designs.is_empty() {
        return Err(CmdError::Usage(
            "optimize needs at least one [design.*] section".into(),
        ));
    }
    let mut out = CmdOutput::new(config.designs.len());
    out.warnings = plausibility_warnings(config);
    let noise = NoiseModel::from_snr(config.range.m0, config.snr);
    let mut table = ReportTable::new(
        "optimize_summary",
        &[
            "design",
            "family",
            "protocol",
            "n_acq",
            "lambda_min_per_sqrt_s",
            "gamma1_avg_per_sqrt_s",
            "gamma2_avg_per_sqrt_s",
            "t_seq_ms",
            "converged",
            "restarts",
            "notes",
        ],
    );
    let mut eval_summary = ReportTable::new("optimize_evaluate", SUMMARY_COLS);

    for (name, spec) in &config.designs {
        match optimize_protocol(spec, &config.range, &noise) {
            Ok(result) => {
                let notes = optimization_notes(spec, &result.protocol);
                if !notes.is_empty() {
                    out.warnings.push(format!("{name}: {notes}"));
                }
                table.push(vec![
                    Cell::Text(name.clone()),
                    Cell::Text(spec.family.name().to_string()),
                    Cell::Text(result.protocol.describe()),
                    Cell::Int(result.protocol.n_acquisitions() as i64),
                    Cell::Num(gamma_per_sqrt_s(result.lambda_min)),
                    Cell::Num(gamma_per_sqrt_s(result.gamma_avg_t1)),
                    opt_num(result.gamma_avg_t2.map(gamma_per_sqrt_s)),
                    Cell::Num(result.protocol.sequence_time()),
                    Cell::Text(result.converged.to_string()),
                    Cell::Int(result.trace.len() as i64),
                    Cell::Text(notes),
                ]);
                match summarize(&result.protocol, &config.range, config.snr, config.t_scan_ms) {
                    Ok(s) => eval_summary.push(summary_row(name, &result.protocol, &s)),
                    Err(e) => out.failures.push((name.clone(), e.to_string())),
                }
            }
            Err(OptimError::NoFeasiblePoint { reason }) => {
                out.failures.push((name.clone(), format!("no feasible point: {reason}")));
            }
        }
    }
    out.tables = vec![table, eval_summary];
    Ok(out)
}

/// Flags the SPGR flip-angle redundancy: multiple SPGR acquisitions that
/// converge to the same angle carry the information of one at a longer TR.
fn optimization_notes(spec: &DesignSpec<f64>, protocol: &SequenceProtocol<f64>) -> String {
    if let SequenceProtocol::Despot { alpha_spgr, .. } = protocol {
        if spec.constraints.n_spgr >= 2 && alpha_spgr.len() >= 2 {
            let lo = alpha_spgr.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = alpha_spgr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 0.5 {
                return format!(
                    "spgr angles coalesced ({lo:.2} and {hi:.2} deg); one SPGR at doubled TR is equivalent"
                );
            }
        }
    }
    String::new()
}

/// Dispatch by command.
pub fn run_command(config: &RunConfig) -> Result<CmdOutput, CmdError> {
    match config.command {
        crate::config::Command::Evaluate => cmd_evaluate(config),
        crate::config::Command::Optimize => cmd_optimize(config),
        crate::config::Command::Simulate => cmd_simulate(config),
        crate::config::Command::Compare => cmd_compare(config),
    }
}
