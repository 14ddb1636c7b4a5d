//! The right-invariant metric at the identity and at a point `p`, the energy
//! of the Hunter–Saxton cells, the Lagrangian momentum, and a per-step
//! monitor of all conserved quantities.

use crate::calculus::{self, inverse_small, transpose_apply};
use crate::error::{Error, Result};
use crate::geodesic::{compose, FlowTracker, LagrangianState};
use crate::inertia::ModelParams;
use crate::spectral::{self, Field};
use crate::state::{EulerState, Tangent};
use std::f64::consts::PI;

/// `⟨u, v⟩` in the expanded form
/// `Σᵢ [αμ(uᵢ)μ(vᵢ) + ∫(βuᵢvᵢ + ∇uᵢ·∇vᵢ)] + γ Σ ∫ρᵢηᵢ`, with every integral
/// evaluated by Parseval and Neumaier summation.
pub fn metric_inner(u: &Tangent, v: &Tangent, params: &ModelParams) -> Result<f64> {
    u.check(params)?;
    v.check(params)?;
    let alpha = f64::from(params.alpha());
    let beta = f64::from(params.beta());
    let mu_u = spectral::mean(&u.u);
    let mu_v = spectral::mean(&v.u);
    let mut total = Neumaier::default();
    for (a, b) in mu_u.iter().zip(&mu_v) {
        total.add(alpha * a * b);
    }
    let su = spectral::analyze(&u.u)?;
    let sv = spectral::analyze(&v.u)?;
    let grid = u.grid();
    for c in 0..su.ncomp() {
        for (f, (a, b)) in su.component(c).iter().zip(sv.component(c)).enumerate() {
            let k2: i64 = grid.mode(f).iter().map(|k| k * k).sum();
            let weight = beta + 4.0 * PI * PI * k2 as f64;
            total.add(weight * (a * b.conj()).re);
        }
    }
    if let (Some(r), Some(e)) = (&u.rho, &v.rho) {
        let sr = spectral::analyze(r)?;
        let se = spectral::analyze(e)?;
        for (a, b) in sr.coeffs().iter().zip(se.coeffs()) {
            total.add((a * b.conj()).re);
        }
    }
    Ok(total.value())
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `⟨u, v⟩_p` through the pullback formula with `|∇p₁|` and a pointwise
/// inverse of `∇p₁`.
pub fn metric_at_p(
    u: &Tangent,
    v: &Tangent,
    p: &LagrangianState,
    params: &ModelParams,
) -> Result<f64> {
    u.check(params)?;
    v.check(params)?;
    let grid = p.grid();
    if u.grid() != grid || v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let dim = grid.dim();
    let npts = grid.len();
    let jac = p.jacobian_p1();
    let mut det = vec![0.0; npts];
    let mut inv = vec![0.0; npts * dim * dim];
    for q in 0..npts {
        let m: Vec<f64> = (0..dim * dim).map(|c| jac.component(c)[q]).collect();
        let d = calculus::det_small(&m, dim);
        let mi = inverse_small(&m, dim).filter(|_| d > 0.0 && d.is_finite());
        match mi {
            Some(mi) => {
                det[q] = d;
                inv[q * dim * dim..(q + 1) * dim * dim].copy_from_slice(&mi);
            }
            None => return Err(Error::SingularJacobian { index: q }),
        }
    }
    let alpha = f64::from(params.alpha());
    let beta = f64::from(params.beta());
    let gu = spectral::gradient(&u.u);
    let gv = spectral::gradient(&v.u);
    let mut total = 0.0;
    for i in 0..dim {
        let (ui, vi) = (u.u.component(i), v.u.component(i));
        let mut mu_u = 0.0;
        let mut mu_v = 0.0;
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for q in 0..npts {
            mu_u += ui[q] * det[q];
            mu_v += vi[q] * det[q];
            l2 += ui[q] * vi[q] * det[q];
            let jinv = &inv[q * dim * dim..(q + 1) * dim * dim];
            let mut s = 0.0;
            for k in 0..dim {
                let a: f64 = (0..dim)
                    .map(|j| gu.component(i * dim + j)[q] * jinv[j * dim + k])
                    .sum();
                let b: f64 = (0..dim)
                    .map(|j| gv.component(i * dim + j)[q] * jinv[j * dim + k])
                    .sum();
                s += a * b;
            }
            h1 += s * det[q];
        }
        let n = npts as f64;
        total += alpha * (mu_u / n) * (mu_v / n) + beta * l2 / n + h1 / n;
    }
    if let (Some(r), Some(e)) = (&u.rho, &v.rho) {
        let mut s = 0.0;
        for c in 0..r.ncomp() {
            for ((a, b), d) in r.component(c).iter().zip(e.component(c)).zip(&det) {
                s += a * b * d;
            }
        }
        total += s / npts as f64;
    }
    Ok(total)
}

/// `∫(|∇u₁|² + ⋯ + |∇uₙ|² + |ρ|²)`, the `ρ` term only when present.
pub fn hs_energy(state: &EulerState) -> f64 {
    let g = spectral::gradient(state.u());
    let mut e = spectral::inner(&g, &g).expect("same shape");
    if let Some(r) = state.rho() {
        e += spectral::inner(r, r).expect("same shape");
    }
    e
}

/// The two transported quantities: `u` holds
/// `(∇p₁)ᵀ(m∘p₁)|∇p₁| + (∇p₂)ᵀ(ρ∘p₁)|∇p₁|`, `rho` holds `(ρ∘p₁)|∇p₁|`.
/// With `γ = 0` the density terms are absent.
pub fn lagrangian_momentum(
    state: &EulerState,
    lagr: &LagrangianState,
    params: &ModelParams,
) -> Result<Tangent> {
    state.tangent().check(params)?;
    let grid = state.grid();
    let det = Field::new(grid, 1, lagr.det_p1())?;
    let jac = lagr.jacobian_p1();
    let m_p = compose(state.m(), &lagr.p1_disp)?;
    let mut first = transpose_apply(&jac, &m_p);
    let second = match (state.rho(), &lagr.p2) {
        (Some(rho), Some(p2)) => {
            let rho_p = compose(rho, &lagr.p1_disp)?;
            first.axpy(1.0, &transpose_apply(&calculus::jacobian(p2), &rho_p));
            Some(rho_p.times_scalar(&det))
        }
        (Some(_), None) => return Err(Error::MissingDensity),
        _ => None,
    };
    Ok(Tangent::new(first.times_scalar(&det), second))
}

/// Conserved quantities and their drift at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub hs_energy: f64,
    pub mu_u: Vec<f64>,
    pub metric_norm: f64,
    pub consv1_dev: f64,
    pub rho_mass_dev: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.hs_energy.is_finite()
            && self.mu_u.iter().all(|x| x.is_finite())
            && self.metric_norm.is_finite()
            && self.consv1_dev.is_finite()
            && self.rho_mass_dev.is_finite()
    }
}

/// `‖a − a₀‖∞ / ‖a₀‖∞`, or the absolute deviation when `a₀ = 0`.
pub fn relative_deviation(a: &Field, a0: &Field) -> f64 {
    let scale = a0.max_abs();
    let d = a.max_diff(a0);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// Tracks the flow alongside an Eulerian run and emits one
/// [`DiagnosticsRecord`] per observed state.
#[derive(Debug, Clone)]
pub struct ConservationMonitor {
    params: ModelParams,
    tracker: FlowTracker,
    initial: Option<Tangent>,
    last_flow: Option<LagrangianState>,
}

impl ConservationMonitor {
    pub fn new(params: ModelParams, dealias: bool) -> Self {
        Self {
            params,
            tracker: FlowTracker::new(params, dealias),
            initial: None,
            last_flow: None,
        }
    }

    pub fn record(&mut self, t: f64, state: &EulerState) -> Result<DiagnosticsRecord> {
        let lagr = self.tracker.observe(t, state)?;
        let q = lagrangian_momentum(state, &lagr, &self.params)?;
        let q0 = self.initial.get_or_insert_with(|| q.clone());
        let consv1_dev = relative_deviation(&q.u, &q0.u);
        let rho_mass_dev = match (&q.rho, &q0.rho) {
            (Some(a), Some(b)) => relative_deviation(a, b),
            _ => 0.0,
        };
        self.last_flow = Some(lagr);
        Ok(DiagnosticsRecord {
            t,
            hs_energy: hs_energy(state),
            mu_u: spectral::mean(state.u()),
            metric_norm: metric_inner(state.tangent(), state.tangent(), &self.params)?,
            consv1_dev,
            rho_mass_dev,
        })
    }

    /// Lagrangian state at the most recent record.
    pub fn flow(&self) -> Option<&LagrangianState> {
        self.last_flow.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, TimeStepperConfig};
    use crate::inertia::pairing;
    use crate::spectral::{random_trig_field, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params_all() -> Vec<ModelParams> {
        let mut out = Vec::new();
        for dim in [1, 2] {
            for (a, b) in [(0, 0), (0, 1), (1, 0)] {
                for g in [0, 1] {
                    out.push(ModelParams::new(a, b, g, dim).unwrap());
                }
            }
        }
        out
    }

    fn random_tangent(g: Grid, p: &ModelParams, rng: &mut ChaCha8Rng) -> Tangent {
        let n = p.dim();
        let mut w = Tangent::new(
            random_trig_field(g, n, 4, 1.0, rng),
            p.has_density()
                .then(|| random_trig_field(g, n, 4, 1.0, rng)),
        );
        if p.is_hunter_saxton() {
            w.normalize_origin();
        }
        w
    }

    #[test]
    fn expanded_metric_matches_operator_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in params_all() {
            let g = Grid::new(p.dim(), 16).unwrap();
            let u = random_tangent(g, &p, &mut rng);
            let v = random_tangent(g, &p, &mut rng);
            let a = metric_inner(&u, &v, &p).unwrap();
            let b = pairing(&u, &v, &p).unwrap();
            assert!((a - b).abs() <= 1e-11, "{p:?}: {a} vs {b}");
            let c = metric_inner(&v, &u, &p).unwrap();
            assert!((a - c).abs() <= 1e-12);
            assert!(metric_inner(&u, &u, &p).unwrap() > 0.0);
            let at_id = metric_at_p(&u, &v, &LagrangianState::identity(&u), &p).unwrap();
            assert!((a - at_id).abs() <= 1e-11);
        }
    }

    #[test]
    fn metric_of_sine_for_ch() {
        let p = ModelParams::new(0, 1, 0, 1).unwrap();
        let g = Grid::new(1, 32).unwrap();
        let u = Tangent::new(Field::from_fn(g, 1, |x, _| (2.0 * PI * x[0]).sin()), None);
        let v = metric_inner(&u, &u, &p).unwrap();
        assert!((v - (1.0 + 4.0 * PI * PI) / 2.0).abs() <= 1e-12);
        let zero = Tangent::new(Field::zeros(g, 1), None);
        assert_eq!(metric_inner(&zero, &zero, &p).unwrap(), 0.0);
    }

    #[test]
    fn pullback_metric_is_right_invariant() {
        let g = Grid::new(1, 128).unwrap();
        let disp = Field::from_fn(g, 1, |x, _| 0.1 * (2.0 * PI * x[0]).sin());
        for (a, b, gm) in [(0, 1, 0), (1, 0, 1), (0, 0, 0)] {
            let p = ModelParams::new(a, b, gm, 1).unwrap();
            let mut u = Tangent::new(
                Field::from_fn(g, 1, |x, _| {
                    (2.0 * PI * x[0]).sin() + 0.3 * (4.0 * PI * x[0]).cos()
                }),
                (gm == 1).then(|| Field::from_fn(g, 1, |x, _| 0.5 + (2.0 * PI * x[0]).cos())),
            );
            let mut v = Tangent::new(
                Field::from_fn(g, 1, |x, _| 0.2 + (6.0 * PI * x[0]).sin()),
                (gm == 1).then(|| Field::from_fn(g, 1, |x, _| (4.0 * PI * x[0]).sin())),
            );
            if p.is_hunter_saxton() {
                u.normalize_origin();
                v.normalize_origin();
            }
            let lagr = LagrangianState {
                p1_disp: disp.clone(),
                p2: (gm == 1).then(|| Field::zeros(g, 1)),
                pt: u.clone(),
            };
            let comp = |w: &Tangent| Tangent {
                u: compose(&w.u, &disp).unwrap(),
                rho: w.rho.as_ref().map(|r| compose(r, &disp).unwrap()),
            };
            let lhs = metric_at_p(&comp(&u), &comp(&v), &lagr, &p).unwrap();
            let rhs = metric_inner(&u, &v, &p).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8, "{p:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn shift_leaves_metric_unchanged() {
        let p = ModelParams::new(1, 0, 0, 2).unwrap();
        let g = Grid::new(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_tangent(g, &p, &mut rng);
        let v = random_tangent(g, &p, &mut rng);
        let lagr = LagrangianState {
            p1_disp: Field::constant(g, &[0.37, -0.11]),
            p2: None,
            pt: u.clone(),
        };
        let a = metric_at_p(&u, &v, &lagr, &p).unwrap();
        let b = metric_inner(&u, &v, &p).unwrap();
        assert!((a - b).abs() <= 1e-13);

        let folded = LagrangianState {
            p1_disp: Field::from_fn(g, 2, |x, c| {
                if c == 0 {
                    -0.2 * (2.0 * PI * x[0]).sin()
                } else {
                    0.0
                }
            }),
            p2: None,
            pt: u.clone(),
        };
        assert!(matches!(
            metric_at_p(&u, &v, &folded, &p),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn energy_of_sine() {
        let p = ModelParams::new(0, 0, 0, 1).unwrap();
        let g = Grid::new(1, 32).unwrap();
        let s = EulerState::new(
            Field::from_fn(g, 1, |x, _| (2.0 * PI * x[0]).sin()),
            None,
            &p,
        )
        .unwrap();
        assert!((hs_energy(&s) - 2.0 * PI * PI).abs() <= 1e-12);
        let z = EulerState::new(Field::zeros(g, 1), None, &p).unwrap();
        assert_eq!(hs_energy(&z), 0.0);
    }

    #[test]
    fn momentum_at_identity_is_m_and_rho() {
        let p = ModelParams::new(1, 0, 1, 2).unwrap();
        let g = Grid::new(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_tangent(g, &p, &mut rng);
        let s = EulerState::from_tangent(w.clone(), &p).unwrap();
        let q = lagrangian_momentum(&s, &LagrangianState::identity(&w), &p).unwrap();
        assert!(q.u.max_diff(s.m()) <= 1e-12 * s.m().max_abs());
        assert!(q.rho.unwrap().max_diff(s.rho().unwrap()) <= 1e-12);
    }

    #[test]
    fn monitor_tracks_small_two_component_run() {
        let p = ModelParams::new(0, 1, 1, 1).unwrap();
        let g = Grid::new(1, 32).unwrap();
        let s = EulerState::new(
            Field::from_fn(g, 1, |x, _| 0.05 * (2.0 * PI * x[0]).sin()),
            Some(Field::from_fn(g, 1, |x, _| 0.05 * (2.0 * PI * x[0]).cos())),
            &p,
        )
        .unwrap();
        let cfg = TimeStepperConfig::new(1e-2, 0.5).unwrap();
        let mut mon = ConservationMonitor::new(p, true);
        let mut worst: f64 = 0.0;
        integrate(&s, &cfg, &p, |t, st| {
            let r = mon.record(t, st)?;
            assert!(r.is_finite());
            worst = worst.max(r.consv1_dev).max(r.rho_mass_dev);
            Ok(())
        })
        .unwrap();
        assert!(worst <= 1e-6, "{worst:e}");
    }
}
