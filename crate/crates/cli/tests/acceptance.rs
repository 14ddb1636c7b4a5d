//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use chtorus::conservation::ConservationMonitor;
use chtorus::curvature::{
    curvature_r_term, metric_b_residual, positivity_scan, unit_field, verify_gl3, GL3Coefficients,
    ModeField,
};
use chtorus::dynamics::{
    bilinear_b, integrate, integrate_trajectory, rhs_b_equation, rhs_system, TimeStepperConfig,
};
use chtorus::geodesic::{
    advection_term, christoffel_id, eulerian_velocity_1d, flow_reconstruct, geodesic_residual,
    integrate_geodesic_1d,
};
use chtorus::inertia::{apply_block, invert_a, invert_block};
use chtorus::spectral::{self, random_trig_field};
use chtorus::{EulerState, Field, Grid, ModelParams, Tangent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

const CELLS: [(u8, u8); 3] = [(0, 0), (0, 1), (1, 0)];

fn all_params(dim: usize) -> Vec<ModelParams> {
    let mut out = Vec::new();
    for (a, b) in CELLS {
        for g in [0, 1] {
            out.push(ModelParams::new(a, b, g, dim).unwrap());
        }
    }
    out
}

fn random_tangent(
    grid: Grid,
    p: &ModelParams,
    band: i64,
    amp: f64,
    rng: &mut ChaCha8Rng,
) -> Tangent {
    let n = p.dim();
    let mut w = Tangent::new(
        random_trig_field(grid, n, band, amp, rng),
        p.has_density()
            .then(|| random_trig_field(grid, n, band, amp, rng)),
    );
    if p.is_hunter_saxton() {
        w.normalize_origin();
    }
    w
}

fn reference_state(p: &ModelParams, size: usize) -> EulerState {
    let g = Grid::new(1, size).unwrap();
    let u = Field::from_fn(g, 1, |x, _| 0.05 * (2.0 * PI * x[0]).sin());
    let rho = p
        .has_density()
        .then(|| Field::from_fn(g, 1, |x, _| 0.05 * (2.0 * PI * x[0]).cos()));
    EulerState::new(u, rho, p).unwrap()
}

fn closed_form(k1: f64, k2: f64) -> f64 {
    (2.0 * k1 * k1 + k2 * k2) / (8.0 * (k1 * k1 + k2 * k2))
}

fn curvature_closed_form() -> Outcome {
    let start = Instant::now();
    let rows = positivity_scan(&[1, 2, 3, 4]).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = rows
        .iter()
        .map(|r| {
            let (k1, k2) = (2.0 * PI * f64::from(r.m1), 2.0 * PI * f64::from(r.m2));
            (r.s_e1 - closed_form(k1, k2))
                .abs()
                .max((r.s_e2 - closed_form(k2, k1)).abs())
        })
        .fold(0.0, f64::max);
    (
        rows.len() == 16 && worst <= 1e-10 && secs < 10.0,
        format!(
            "{} pairs, max |S - closed form| = {worst:.2e} (<= 1e-10), {secs:.2} s (< 10 s)",
            rows.len()
        ),
    )
}

fn r_degeneracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = Grid::new(2, 32).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = random_trig_field(g, 2, 5, 1.0, &mut rng);
        for axis in 0..2 {
            worst = worst.max(curvature_r_term(&unit_field(g, axis), &w).unwrap().abs());
        }
    }
    (
        worst <= 1e-10,
        format!("20 fields, max |R(e_i, w)| = {worst:.2e} (<= 1e-10)"),
    )
}

fn inertia_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        let g = Grid::new(dim, 32).unwrap();
        for p in all_params(dim) {
            for _ in 0..5 {
                let w = random_tangent(g, &p, 10, 1.0, &mut rng);
                let back = invert_block(&apply_block(&w, &p).unwrap(), &p).unwrap();
                worst = worst.max(back.max_diff(&w));
            }
        }
    }
    let g = Grid::new(2, 32).unwrap();
    let p = ModelParams::new(1, 0, 0, 2).unwrap();
    let mut trig: f64 = 0.0;
    for j1 in 1..=4 {
        for j2 in 0..=4 {
            let (a, b) = (2.0 * PI * f64::from(j1), 2.0 * PI * f64::from(j2));
            let f = Field::from_fn(g, 2, |x, _| (a * x[0]).sin() * (b * x[1]).cos());
            let inv = invert_a(&f, &p).unwrap();
            trig = trig.max(inv.max_diff(&f.scaled(1.0 / (a * a + b * b))));
        }
    }
    (
        worst <= 1e-12 && trig <= 1e-12,
        format!("roundtrip {worst:.2e}, trig identity {trig:.2e} (<= 1e-12)"),
    )
}

fn literal_two_component(s: &EulerState, p: &ModelParams) -> Tangent {
    let (u, rho, m) = (s.u(), s.rho().unwrap(), s.m());
    let dx = |f: &Field| spectral::differentiate(f, 0).unwrap();
    let mut mt = dx(m).times_scalar(u).scaled(-1.0);
    mt.axpy(-2.0, &m.times_scalar(&dx(u)));
    mt.axpy(-1.0, &dx(rho).times_scalar(rho));
    let rhot = dx(&rho.times_scalar(u)).scaled(-1.0);
    Tangent::new(invert_a(&mt, p).unwrap(), Some(rhot))
}

fn cross_path() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sys_vs_b: f64 = 0.0;
    for dim in [1, 2] {
        let g = Grid::new(dim, 32).unwrap();
        for p in all_params(dim) {
            for _ in 0..5 {
                let w = random_tangent(g, &p, 4, 0.5, &mut rng);
                let s = EulerState::from_tangent(w.clone(), &p).unwrap();
                let a = rhs_system(&s, &p, false).unwrap();
                sys_vs_b = sys_vs_b.max(a.max_diff(&bilinear_b(&w, &w, &p).unwrap()));
            }
        }
    }
    let g = Grid::new(1, 64).unwrap();
    let mut literal: f64 = 0.0;
    for (a, b) in CELLS {
        let p = ModelParams::new(a, b, 1, 1).unwrap();
        for _ in 0..5 {
            let w = random_tangent(g, &p, 8, 0.5, &mut rng);
            let s = EulerState::from_tangent(w, &p).unwrap();
            let got = rhs_system(&s, &p, false).unwrap();
            literal = literal.max(got.max_diff(&literal_two_component(&s, &p)));
        }
    }
    let mut beq: f64 = 0.0;
    let g = Grid::new(2, 32).unwrap();
    let p = ModelParams::new(1, 0, 0, 2).unwrap();
    for _ in 0..10 {
        let w = random_tangent(g, &p, 4, 0.3, &mut rng);
        let s = EulerState::from_tangent(w, &p).unwrap();
        let sys = rhs_system(&s, &p, false).unwrap();
        beq = beq.max(rhs_b_equation(s.u(), 2.0, false).unwrap().max_diff(&sys.u));
    }
    (
        sys_vs_b <= 1e-10 && literal <= 1e-10 && beq <= 1e-12,
        format!(
            "system vs B {sys_vs_b:.2e} (<= 1e-10), literal two-component {literal:.2e} (<= 1e-10), b = 2 {beq:.2e} (<= 1e-12)"
        ),
    )
}

fn diagonal_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dim in [1, 2] {
        let g = Grid::new(dim, 32).unwrap();
        for p in all_params(dim) {
            for _ in 0..20 {
                let w = random_tangent(g, &p, 4, 0.5, &mut rng);
                let mut rhs = christoffel_id(&w, &w, &p).unwrap();
                rhs.axpy(-1.0, &advection_term(&w));
                worst = worst.max(bilinear_b(&w, &w, &p).unwrap().max_diff(&rhs));
                count += 1;
            }
        }
    }
    (
        worst <= 1e-10,
        format!("{count} states, max defect {worst:.2e} (<= 1e-10)"),
    )
}

/// Largest relative HS-energy drift, consv1 drift and density drift over a
/// reference run, with its wall time.
fn reference_drift(p: &ModelParams, dt: f64) -> (f64, f64, f64, f64) {
    let start = Instant::now();
    let s = reference_state(p, 128);
    let cfg = TimeStepperConfig::new(dt, 1.0).unwrap();
    let mut mon = ConservationMonitor::new(*p, true);
    let (mut e0, mut e, mut c1, mut rho) = (None, 0.0f64, 0.0f64, 0.0f64);
    integrate(&s, &cfg, p, |t, st| {
        let r = mon.record(t, st)?;
        let base = *e0.get_or_insert(r.hs_energy);
        e = e.max(((r.hs_energy - base) / base).abs());
        c1 = c1.max(r.consv1_dev);
        rho = rho.max(r.rho_mass_dev);
        Ok(())
    })
    .unwrap()
    .into_result()
    .unwrap();
    (e, c1, rho, start.elapsed().as_secs_f64())
}

fn conservation() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    let mut ratios = Vec::new();
    for p in all_params(1) {
        let (e, c1, rho, secs) = reference_drift(&p, 1e-3);
        slowest = slowest.max(secs);
        let name = p.equation().name();
        if p.is_hunter_saxton() {
            ok &= e <= 1e-6;
            parts.push(format!("{name} energy {e:.1e}"));
        }
        ok &= c1 <= 1e-6 && rho <= 1e-6;
        parts.push(format!("{name} consv1 {:.1e}", c1.max(rho)));

        let coarse = reference_drift(&p, 0.05);
        let fine = reference_drift(&p, 0.025);
        ratios.push(coarse.1 / fine.1);
        if p.has_density() {
            ratios.push(coarse.2 / fine.2);
        }
        if p.is_hunter_saxton() {
            ratios.push(coarse.0 / fine.0);
        }
    }
    ok &= slowest < 60.0;
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    ok &= lo >= 16.0 * 0.7 && hi <= 16.0 * 1.3;
    (
        ok,
        format!(
            "{} (<= 1e-6); halving dt 0.05 -> 0.025 reduces drift by {lo:.1}..{hi:.1} (16 +/- 30%); slowest run {slowest:.1} s (< 60 s)",
            parts.join(", ")
        ),
    )
}

fn euler_lagrange() -> Outcome {
    let p = ModelParams::new(0, 1, 0, 1).unwrap();
    let s = reference_state(&p, 128);
    let cfg = TimeStepperConfig::new(1e-3, 1.0).unwrap();
    let every = 50;
    let mut euler = Vec::new();
    let mut k = 0;
    integrate(&s, &cfg, &p, |_, st| {
        if k % every == 0 {
            euler.push(st.u().clone());
        }
        k += 1;
        Ok(())
    })
    .unwrap()
    .into_result()
    .unwrap();
    let mut dev: f64 = 0.0;
    let mut k = 0;
    integrate_geodesic_1d(s.tangent(), &cfg, &p, |_, lagr| {
        if k % every == 0 {
            let w = eulerian_velocity_1d(lagr)?;
            dev = dev.max(w.u.max_diff(&euler[k / every]));
        }
        k += 1;
        Ok(())
    })
    .unwrap();

    let mut res = Vec::new();
    for dt in [2e-2, 1e-2, 5e-3] {
        let cfg = TimeStepperConfig::new(dt, 1.0).unwrap();
        let traj = integrate_trajectory(&s, &cfg, &p).unwrap();
        let lagr = flow_reconstruct(&traj, &p, true).unwrap();
        let r = geodesic_residual(&lagr, &traj.states, dt, &p).unwrap();
        res.push(r.into_iter().fold(0.0, f64::max));
    }
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    (
        dev <= 1e-6 && order_ok,
        format!(
            "max |u - p_t o p1^-1| = {dev:.2e} (<= 1e-6); geodesic residual {:.2e}, {:.2e}, {:.2e}, observed orders {:.2}, {:.2} (2 +/- 0.2)",
            res[0], res[1], res[2], orders[0], orders[1]
        ),
    )
}

fn b_rigidity() -> Outcome {
    let mut gl3: f64 = 0.0;
    for index in [[1, 2], [2, -1], [3, 1], [-1, 4]] {
        let co = GL3Coefficients::new(index, 2.0).unwrap();
        let v = ModeField::ones(co.n_vec).scaled(co.n_squared().into());
        gl3 = gl3.max(verify_gl3(index, 2.0, v).unwrap().normalized);
    }
    for b in [2.0, 3.0, 4.0, 5.0] {
        for m in [1, 2, -3] {
            let co = GL3Coefficients::new([m, m], b).unwrap();
            let v = ModeField::ones(co.n_vec).scaled((2.0 / b * co.n_squared()).into());
            gl3 = gl3.max(verify_gl3([m, m], b, v).unwrap().normalized);
        }
    }
    let metric = [1, 2, 5]
        .into_iter()
        .map(|m| metric_b_residual(2.0, [m, m]).unwrap())
        .fold(0.0, f64::max);
    let other = [3.0, 4.0, 5.0]
        .into_iter()
        .flat_map(|b| [1, 2, 5].map(|m| metric_b_residual(b, [m, m]).unwrap()))
        .fold(f64::INFINITY, f64::min);
    (
        gl3 <= 1e-12 && metric <= 1e-10 && other > 0.2,
        format!(
            "gl3 branches {gl3:.2e} (<= 1e-12); gl1 at b = 2 {metric:.2e} (<= 1e-10); gl1 at b = 3, 4, 5 min {other:.3} (> 0.2)"
        ),
    )
}

fn temporal_order() -> Outcome {
    let p = ModelParams::new(0, 1, 0, 1).unwrap();
    let s = reference_state(&p, 128);
    let finals: Vec<Field> = [4e-3, 2e-3, 1e-3]
        .into_iter()
        .map(|dt| {
            let cfg = TimeStepperConfig::new(dt, 1.0).unwrap();
            integrate(&s, &cfg, &p, |_, _| Ok(()))
                .unwrap()
                .into_result()
                .unwrap()
                .u()
                .clone()
        })
        .collect();
    let e1 = finals[0].max_diff(&finals[1]);
    let e2 = finals[1].max_diff(&finals[2]);
    let slope = (e1 / e2).log2();
    (
        (slope - 4.0).abs() <= 0.2,
        format!("differences {e1:.2e}, {e2:.2e}, slope {slope:.3} (4 +/- 0.2)"),
    )
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_chtorus"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap_or(-1)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &str); 4] = [
        (
            "simulate",
            &[
                "simulate", "--alpha", "0", "--beta", "1", "--gamma", "1", "--dim", "1", "--grid",
                "64", "--dt", "1e-2", "--tmax", "0.5",
            ],
            "diagnostics.csv",
        ),
        (
            "geodesic",
            &[
                "geodesic", "--alpha", "1", "--beta", "0", "--gamma", "0", "--dim", "2", "--grid",
                "16", "--dt", "1e-2", "--tmax", "0.1",
            ],
            "diagnostics.csv",
        ),
        ("curvature", &["curvature"], "curvature.csv"),
        ("selftest", &["selftest", "--seed", "7"], "selftest.csv"),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, args, file) in cases {
        let runs: Vec<(i32, Vec<u8>)> = (0..2)
            .map(|i| {
                let out = dir.path().join(format!("{name}{i}"));
                let code = run_cli(args, &out);
                (code, fs::read(out.join(file)).unwrap_or_default())
            })
            .collect();
        let same = runs[0].1 == runs[1].1 && !runs[0].1.is_empty();
        ok &= same && runs[0].0 == 0 && runs[1].0 == 0;
        parts.push(format!(
            "{name} {} ({} bytes)",
            if same { "identical" } else { "differs" },
            runs[0].1.len()
        ));
    }
    (ok, parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("curvature closed form", curvature_closed_form),
        ("R degeneracy", r_degeneracy),
        ("inertia roundtrip", inertia_roundtrip),
        ("cross-path equivalence", cross_path),
        ("diagonal geodesic identity", diagonal_identity),
        ("conservation", conservation),
        ("Euler-Lagrange", euler_lagrange),
        ("b-rigidity", b_rigidity),
        ("temporal order", temporal_order),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
