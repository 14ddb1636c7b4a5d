//! Invariant suite run by the `selftest` mode.

use chtorus::conservation::ConservationMonitor;
use chtorus::curvature::{
    closed_form_s, curvature_r_term, metric_b_residual, positivity_scan, unit_field, verify_gl3,
    GL3Coefficients, ModeField,
};
use chtorus::dynamics::{bilinear_b, integrate, rhs_system, TimeStepperConfig};
use chtorus::geodesic::{advection_term, christoffel_id};
use chtorus::inertia::{apply_block, invert_block};
use chtorus::spectral::random_trig_field;
use chtorus::{EulerState, Field, Grid, ModelParams, Tangent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Direction of the comparison against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            bound: Bound::AtMost,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            bound: Bound::AtLeast,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.threshold,
            Bound::AtLeast => self.value >= self.threshold,
        }
    }
}

fn all_params(dim: usize) -> Vec<ModelParams> {
    let mut out = Vec::new();
    for (a, b) in [(0, 0), (0, 1), (1, 0)] {
        for g in [0, 1] {
            out.push(ModelParams::new(a, b, g, dim).expect("admissible"));
        }
    }
    out
}

fn random_tangent(grid: Grid, p: &ModelParams, rng: &mut ChaCha8Rng) -> Tangent {
    let n = p.dim();
    let mut w = Tangent::new(
        random_trig_field(grid, n, 4, 0.5, rng),
        p.has_density()
            .then(|| random_trig_field(grid, n, 4, 0.5, rng)),
    );
    if p.is_hunter_saxton() {
        w.normalize_origin();
    }
    w
}

fn worst<I: IntoIterator<Item = chtorus::Result<f64>>>(it: I) -> f64 {
    it.into_iter()
        .map(|r| match r {
            Ok(v) if !v.is_nan() => v,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Runs every check with random data drawn from `seed`.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for dim in [1, 2] {
        let g = Grid::new(dim, 32).expect("grid");
        for p in all_params(dim) {
            samples.push((p, random_tangent(g, &p, &mut rng)));
        }
    }

    let roundtrip = worst(samples.iter().map(|(p, w)| {
        let back = invert_block(&apply_block(w, p)?, p)?;
        Ok(back.max_diff(w))
    }));
    let cross = worst(samples.iter().map(|(p, w)| {
        let s = EulerState::from_tangent(w.clone(), p)?;
        Ok(rhs_system(&s, p, false)?.max_diff(&bilinear_b(w, w, p)?))
    }));
    let diagonal = worst(samples.iter().map(|(p, w)| {
        let mut rhs = christoffel_id(w, w, p)?;
        rhs.axpy(-1.0, &advection_term(w));
        Ok(bilinear_b(w, w, p)?.max_diff(&rhs))
    }));
    let symmetry = worst(samples.chunks(2).map(|pair| {
        let (p, a) = &pair[0];
        let b = random_tangent(a.grid(), p, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        Ok(christoffel_id(a, &b, p)?.max_diff(&christoffel_id(&b, a, p)?))
    }));

    let g2 = Grid::new(2, 32).expect("grid");
    let degeneracy = worst((0..4).flat_map(|_| {
        let w: Field = random_trig_field(g2, 2, 3, 1.0, &mut rng);
        (0..2)
            .map(|axis| curvature_r_term(&unit_field(g2, axis), &w).map(f64::abs))
            .collect::<Vec<_>>()
    }));
    let closed = match positivity_scan(&[1, 2]) {
        Ok(rows) => rows.iter().map(|r| r.max_error()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    let closed_sanity = (closed_form_s(2.0, 1.0, 0) - 9.0 / 40.0).abs();

    let gl3 = worst(
        [[1, 2], [2, -1], [3, 1]]
            .into_iter()
            .map(|idx| {
                let co = GL3Coefficients::new(idx, 2.0)?;
                let v = ModeField::ones(co.n_vec).scaled(co.n_squared().into());
                Ok(verify_gl3(idx, 2.0, v)?.normalized)
            })
            .chain([2.0, 3.0, 4.0, 5.0].into_iter().map(|b| {
                let co = GL3Coefficients::new([1, 1], b)?;
                let v = ModeField::ones(co.n_vec).scaled((2.0 / b * co.n_squared()).into());
                Ok(verify_gl3([1, 1], b, v)?.normalized)
            })),
    );
    let gl1_metric = metric_b_residual(2.0, [1, 1]).unwrap_or(f64::INFINITY);
    let gl1_other = [3.0, 4.0, 5.0]
        .into_iter()
        .map(|b| metric_b_residual(b, [1, 1]).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);

    let conservation = short_run_drift().unwrap_or(f64::INFINITY);

    vec![
        Check::at_most("inertia_roundtrip", roundtrip, 1e-12),
        Check::at_most("cross_path", cross, 1e-10),
        Check::at_most("diagonal_identity", diagonal, 1e-10),
        Check::at_most("christoffel_symmetry", symmetry, 1e-10),
        Check::at_most("r_degeneracy", degeneracy, 1e-10),
        Check::at_most("curvature_closed_form", closed.max(closed_sanity), 1e-10),
        Check::at_most("gl3_branches", gl3, 1e-12),
        Check::at_most("gl1_metric_b2", gl1_metric, 1e-10),
        Check::at_least("gl1_non_metric_b345", gl1_other, 0.2),
        Check::at_most("consv1_short_run", conservation, 1e-6),
    ]
}

fn short_run_drift() -> chtorus::Result<f64> {
    let p = ModelParams::new(0, 1, 1, 1)?;
    let g = Grid::new(1, 32)?;
    let u = Field::from_fn(g, 1, |x, _| {
        0.05 * (2.0 * std::f64::consts::PI * x[0]).sin()
    });
    let r = Field::from_fn(g, 1, |x, _| {
        0.05 * (2.0 * std::f64::consts::PI * x[0]).cos()
    });
    let s = EulerState::new(u, Some(r), &p)?;
    let cfg = TimeStepperConfig::new(1e-2, 0.2)?;
    let mut mon = ConservationMonitor::new(p, true);
    let mut drift: f64 = 0.0;
    integrate(&s, &cfg, &p, |t, st| {
        let rec = mon.record(t, st)?;
        drift = drift.max(rec.consv1_dev).max(rec.rho_mass_dev);
        Ok(())
    })?
    .into_result()?;
    Ok(drift)
}
