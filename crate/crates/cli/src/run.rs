//! Scenario execution.

use std::collections::VecDeque;
use std::fs::File;
use std::time::Instant;

use chtorus::conservation::{lagrangian_momentum, ConservationMonitor, DiagnosticsRecord};
use chtorus::curvature::{
    metric_b_residual, positivity_scan, verify_gl3, GL3Coefficients, ModeField,
};
use chtorus::dynamics::{integrate, TimeStepperConfig};
use chtorus::geodesic::{christoffel_id, compose};
use chtorus::spectral;
use chtorus::{EulerState, Field};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{initial_state, DynamicsConfig, Mode, ScenarioConfig};
use crate::error::{is_blowup, CliError, CliResult, EXIT_BLOWUP, EXIT_OK, EXIT_SELFTEST};
use crate::output::{
    diagnostics_header, diagnostics_values, fmt_num, prepare_outputs, write_json, CsvWriter,
};
use crate::selftest::run_checks;

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const FINAL_STATE_JSON: &str = "final_state.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CURVATURE_CSV: &str = "curvature.csv";
pub const VERIFY_B_CSV: &str = "verify_b.csv";
pub const SELFTEST_CSV: &str = "selftest.csv";

/// Exit status and the summary written to `summary.json`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Value,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let (exit_code, status, report) = match cfg.mode {
        Mode::Simulate | Mode::Geodesic => run_dynamics(cfg)?,
        Mode::Curvature => run_curvature(cfg)?,
        Mode::VerifyB => run_verify_b(cfg)?,
        Mode::Selftest => run_selftest(cfg)?,
    };
    let equation = match (&cfg.dynamics, cfg.mode) {
        (Some(d), _) => d.equation.clone(),
        (None, Mode::Curvature) => "μ-CH".to_string(),
        (None, Mode::VerifyB) => "μ-b".to_string(),
        (None, _) => String::new(),
    };
    let summary = json!({
        "mode": cfg.mode.name(),
        "equation": equation,
        "status": status,
        "exit_code": exit_code,
        "seed": cfg.seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "config": cfg,
        "result": report,
    });
    let (_, file) = prepare_outputs(&cfg.out_dir, &[SUMMARY_JSON])?
        .pop()
        .expect("one file");
    write_json(file, &summary)?;
    Ok(RunOutcome { exit_code, summary })
}

type ModeResult = CliResult<(i32, &'static str, Value)>;

fn open(cfg: &ScenarioConfig, names: &[&str]) -> CliResult<Vec<File>> {
    let mut all: Vec<&str> = names.to_vec();
    all.push(SUMMARY_JSON);
    let mut files: Vec<File> = prepare_outputs(&cfg.out_dir, &all)?
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    files.pop();
    Ok(files)
}

/// Writes every `every`-th offered row plus the last one.
struct RowSink {
    csv: CsvWriter<File>,
    every: usize,
    pending: Option<Vec<f64>>,
}

impl RowSink {
    fn offer(&mut self, index: usize, row: Vec<f64>) -> CliResult<()> {
        if index.is_multiple_of(self.every) {
            self.pending = None;
            self.csv.row(&row)
        } else {
            self.pending = Some(row);
            Ok(())
        }
    }

    fn close(mut self, truncated: Option<(f64, &str)>) -> CliResult<()> {
        if let Some(row) = self.pending.take() {
            self.csv.row(&row)?;
        }
        if let Some((t, why)) = truncated {
            self.csv.truncation_marker(t, why)?;
        }
        self.csv.finish()
    }
}

/// One sample of the geodesic mode awaiting its centered difference.
struct GeoSample {
    t: f64,
    base: Vec<f64>,
    extra: Vec<f64>,
    pt: Field,
    accel: Field,
}

/// Sliding three-sample window producing `‖p_tt − Γ_id(w,w)∘p₁‖∞` with
/// three-point (possibly one-sided) differences in time.
#[derive(Default)]
struct GeoWindow {
    buf: VecDeque<GeoSample>,
    seen: usize,
}

impl GeoWindow {
    fn residual(&self, at: usize) -> f64 {
        let s = &self.buf;
        let (t0, t1, t2) = (s[0].t, s[1].t, s[2].t);
        let x = s[at].t;
        let c0 = (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let c1 = (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let c2 = (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1));
        let mut d = s[0].pt.scaled(c0);
        d.axpy(c1, &s[1].pt);
        d.axpy(c2, &s[2].pt);
        d.max_diff(&s[at].accel)
    }

    fn row(&self, at: usize, residual: f64) -> (usize, Vec<f64>) {
        let s = &self.buf[at];
        let mut row = s.base.clone();
        row.push(residual);
        row.extend(&s.extra);
        (self.seen - self.buf.len() + at, row)
    }

    fn push(&mut self, sample: GeoSample) -> Vec<(usize, Vec<f64>)> {
        self.buf.push_back(sample);
        self.seen += 1;
        match self.seen {
            0..=2 => Vec::new(),
            3 => vec![self.row(0, self.residual(0)), self.row(1, self.residual(1))],
            _ => {
                self.buf.pop_front();
                vec![self.row(1, self.residual(1))]
            }
        }
    }

    fn finish(&mut self) -> Vec<(usize, Vec<f64>)> {
        if self.seen >= 3 {
            vec![self.row(2, self.residual(2))]
        } else {
            (0..self.buf.len()).map(|i| self.row(i, f64::NAN)).collect()
        }
    }
}

#[derive(Serialize)]
struct FinalState {
    t: f64,
    n: usize,
    grid: usize,
    u: Vec<Vec<f64>>,
    rho: Option<Vec<Vec<f64>>>,
}

impl FinalState {
    fn new(t: f64, s: &EulerState) -> Self {
        let comps = |f: &Field| (0..f.ncomp()).map(|c| f.component(c).to_vec()).collect();
        Self {
            t,
            n: s.grid().dim(),
            grid: s.grid().size(),
            u: comps(s.u()),
            rho: s.rho().map(comps),
        }
    }
}

fn relative_change(a: f64, a0: f64) -> f64 {
    let d = (a - a0).abs();
    if a0 == 0.0 {
        d
    } else {
        d / a0.abs()
    }
}

fn run_dynamics(cfg: &ScenarioConfig) -> ModeResult {
    let d: &DynamicsConfig = cfg.dynamics.as_ref().expect("validated");
    let geodesic = cfg.mode == Mode::Geodesic;
    let mut files = open(cfg, &[DIAGNOSTICS_CSV, FINAL_STATE_JSON])?.into_iter();
    let (csv_file, state_file) = (files.next().expect("csv"), files.next().expect("json"));

    let params = d.params;
    let state0 = initial_state(d)?;
    let stepper = TimeStepperConfig::new(d.dt, d.t_max)?
        .with_dealias(cfg.dealias)
        .with_renormalization(d.renormalize_hs);

    let mut header = diagnostics_header(d.n);
    if geodesic {
        header.push("geodesic_residual".into());
        header.push("det_min".into());
        header.extend((1..=d.n).map(|i| format!("lmom_{i}")));
    }
    let mut sink = RowSink {
        csv: CsvWriter::new(csv_file, &header)?,
        every: d.output_every,
        pending: None,
    };

    let mut monitor = ConservationMonitor::new(params, cfg.dealias);
    let mut window = GeoWindow::default();
    let mut first: Option<DiagnosticsRecord> = None;
    let mut last: Option<(DiagnosticsRecord, EulerState)> = None;
    let mut index = 0usize;
    let mut write_err: Option<CliError> = None;

    let outcome = integrate(&state0, &stepper, &params, |t, st| {
        let rec = monitor.record(t, st)?;
        if !rec.is_finite() {
            return Err(chtorus::Error::BlowUp { t });
        }
        let emitted = if geodesic {
            let lagr = monitor.flow().expect("recorded");
            let q = lagrangian_momentum(st, lagr, &params)?;
            let w = st.tangent();
            let accel = compose(&christoffel_id(w, w, &params)?.stacked(), &lagr.p1_disp)?;
            let mut extra = vec![lagr.det_p1().into_iter().fold(f64::INFINITY, f64::min)];
            extra.extend(spectral::mean(&q.u));
            window.push(GeoSample {
                t,
                base: diagnostics_values(&rec),
                extra,
                pt: lagr.pt.stacked(),
                accel,
            })
        } else {
            vec![(index, diagnostics_values(&rec))]
        };
        for (k, row) in emitted {
            if let Err(e) = sink.offer(k, row) {
                write_err = Some(e);
                return Err(chtorus::Error::InvalidStepping("output aborted".into()));
            }
        }
        first.get_or_insert_with(|| rec.clone());
        last = Some((rec, st.clone()));
        index += 1;
        Ok(())
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let truncation = match outcome {
        Ok(report) => report.blowup.map(|t| (t, "non-finite state".to_string())),
        Err(e) if is_blowup(&e) => {
            let t = last.as_ref().map_or(0.0, |(r, _)| r.t);
            Some((t, e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    for (k, row) in window.finish() {
        sink.offer(k, row)?;
    }
    sink.close(truncation.as_ref().map(|(t, why)| (*t, why.as_str())))?;

    let (rec, state) = last.ok_or(CliError::Model(chtorus::Error::BlowUp { t: 0.0 }))?;
    let rec0 = first.expect("first sample recorded");
    write_json(state_file, &FinalState::new(rec.t, &state))?;

    let report = json!({
        "t_final": rec.t,
        "samples": index,
        "blowup": truncation.as_ref().map(|(t, why)| json!({"t": t, "reason": why})),
        "final": {
            "hs_energy_rel_dev": relative_change(rec.hs_energy, rec0.hs_energy),
            "metric_norm_rel_dev": relative_change(rec.metric_norm, rec0.metric_norm),
            "mu_u_dev": rec.mu_u.iter().zip(&rec0.mu_u).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>(),
            "consv1_dev": rec.consv1_dev,
            "rho_mass_dev": rec.rho_mass_dev,
        },
    });
    Ok(match truncation {
        Some(_) => (EXIT_BLOWUP, "blowup", report),
        None => (EXIT_OK, "ok", report),
    })
}

fn run_curvature(cfg: &ScenarioConfig) -> ModeResult {
    let file = open(cfg, &[CURVATURE_CSV])?.pop().expect("csv");
    let rows = positivity_scan(&cfg.k_range)?;
    let header: Vec<String> = [
        "m1",
        "m2",
        "k1",
        "k2",
        "s_e1",
        "s_e2",
        "closed_e1",
        "closed_e2",
        "max_error",
    ]
    .map(String::from)
    .to_vec();
    let mut csv = CsvWriter::new(file, &header)?;
    for r in &rows {
        let mut cells = vec![r.m1.to_string(), r.m2.to_string()];
        cells.extend(
            [
                r.k1(),
                r.k2(),
                r.s_e1,
                r.s_e2,
                r.closed_e1,
                r.closed_e2,
                r.max_error(),
            ]
            .map(fmt_num),
        );
        csv.text_row(&cells)?;
    }
    csv.finish()?;
    let worst = rows.iter().map(|r| r.max_error()).fold(0.0, f64::max);
    let report = json!({
        "rows": rows.len(),
        "max_error": worst,
        "all_positive": rows.iter().all(|r| r.is_positive()),
    });
    Ok((EXIT_OK, "ok", report))
}

/// Residual of the printed generic branch `a_n = |n|²` at `n = 2π(1, 2)`.
fn gl3_generic(b: f64) -> chtorus::Result<f64> {
    let co = GL3Coefficients::new([1, 2], b)?;
    let v = ModeField::ones(co.n_vec).scaled(co.n_squared().into());
    Ok(verify_gl3([1, 2], b, v)?.normalized)
}

/// Residual of the printed diagonal branch `a_n = 2|n|²/b` at `n = 2π(1, 1)`.
fn gl3_diagonal(b: f64) -> chtorus::Result<f64> {
    let co = GL3Coefficients::new([1, 1], b)?;
    let v = ModeField::ones(co.n_vec).scaled((2.0 / b * co.n_squared()).into());
    Ok(verify_gl3([1, 1], b, v)?.normalized)
}

fn run_verify_b(cfg: &ScenarioConfig) -> ModeResult {
    let file = open(cfg, &[VERIFY_B_CSV])?.pop().expect("csv");
    let header: Vec<String> = ["b", "gl1_residual", "gl3_generic", "gl3_diagonal"]
        .map(String::from)
        .to_vec();
    let mut csv = CsvWriter::new(file, &header)?;
    let mut metric_b = Vec::new();
    for &b in &cfg.b_list {
        let gl1 = metric_b_residual(b, cfg.b_index).unwrap_or(f64::NAN);
        let row = [
            b,
            gl1,
            gl3_generic(b).unwrap_or(f64::NAN),
            gl3_diagonal(b).unwrap_or(f64::NAN),
        ];
        if gl1 <= 1e-10 {
            metric_b.push(b);
        }
        csv.row(&row)?;
    }
    csv.finish()?;
    let report = json!({ "b_index": cfg.b_index, "metric_b_values": metric_b });
    Ok((EXIT_OK, "ok", report))
}

fn run_selftest(cfg: &ScenarioConfig) -> ModeResult {
    let file = open(cfg, &[SELFTEST_CSV])?.pop().expect("csv");
    let checks = run_checks(cfg.seed);
    let header: Vec<String> = ["check", "value", "threshold", "bound", "result"]
        .map(String::from)
        .to_vec();
    let mut csv = CsvWriter::new(file, &header)?;
    for c in &checks {
        let bound = match c.bound {
            crate::selftest::Bound::AtMost => "<=",
            crate::selftest::Bound::AtLeast => ">=",
        };
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {} = {:e} ({bound} {:e})",
            c.name, c.value, c.threshold
        );
        csv.text_row(&[
            c.name.to_string(),
            fmt_num(c.value),
            fmt_num(c.threshold),
            bound.to_string(),
            verdict.to_string(),
        ])?;
    }
    csv.finish()?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name)
        .collect();
    let report = json!({ "checks": checks.len(), "failed": failed });
    Ok(if failed.is_empty() {
        (EXIT_OK, "ok", report)
    } else {
        (EXIT_SELFTEST, "selftest_failed", report)
    })
}
