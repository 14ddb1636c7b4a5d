//! Euler-form dynamics: the bilinear operator `B`, the momentum form of the
//! system, the two-dimensional μ-b-equation, and classical RK4 stepping.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::calculus::{directional, divergence, dot, jacobian, transpose_apply};
use crate::error::{Error, Result};
use crate::inertia::{apply_a, invert_a, invert_a_spectrum, ModelParams};
use crate::spectral::{self, Field};
use crate::state::{EulerState, Tangent};

/// `B(u, v)`:
///
/// * `γ = 0`: `−A⁻¹(u·∇(Av) + (∇u)ᵀAv + Av(∇·u))`
/// * `γ = 1`: first block as above plus `(∇u₂)ᵀv₂` inside the bracket,
///   second block `−∇v₂·u₁ − (∇·u₁)v₂`.
pub fn bilinear_b(u: &Tangent, v: &Tangent, params: &ModelParams) -> Result<Tangent> {
    u.check(params)?;
    v.check(params)?;
    let av = apply_a(&v.u, params);
    let ju = jacobian(&u.u);
    let div_u = divergence(&ju);
    let mut bracket = directional(&jacobian(&av), &u.u);
    bracket.axpy(1.0, &transpose_apply(&ju, &av));
    bracket.axpy(1.0, &av.times_scalar(&div_u));
    let rho = match (&u.rho, &v.rho) {
        (Some(u2), Some(v2)) => {
            bracket.axpy(1.0, &transpose_apply(&jacobian(u2), v2));
            let mut second = directional(&jacobian(v2), &u.u);
            second.axpy(1.0, &v2.times_scalar(&div_u));
            Some(second.scaled(-1.0))
        }
        _ => None,
    };
    let first = invert_a(&bracket, params)?.scaled(-1.0);
    Ok(Tangent::new(first, rho))
}

/// `Σ_j ∂_j(a_i u_j)` for every component `i` of `a`.
fn flux_divergence(a: &Field, u: &Field) -> Field {
    let grid = a.grid();
    let dim = grid.dim();
    let mut out = Field::zeros(grid, a.ncomp());
    for j in 0..dim {
        let uj = u.select(j, 1);
        let flux = a.times_scalar(&uj);
        let mut spec = spectral::analyze_unchecked(&flux);
        let size = grid.size() as i64;
        spec.apply_symbol(|k| {
            if 2 * k[j].abs() == size {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * k[j] as f64)
            }
        });
        out.axpy(1.0, &spectral::synthesize(&spec));
    }
    out
}

fn project(f: &Field, dealias: bool) -> spectral::Spectrum {
    let spec = spectral::analyze_unchecked(f);
    if dealias {
        spectral::dealias(&spec)
    } else {
        spec
    }
}

/// Time derivative of `(u, ρ)` from the momentum form
/// `m_t = −u·∇m − (∇u)ᵀm − m(∇·u) − γ(∇ρ)ᵀρ`, `ρ_t = −∇ρ·u − ρ(∇·u)`,
/// `u_t = A⁻¹ m_t`.
///
/// The transport terms are evaluated in flux form, `u·∇m + m(∇·u) = ∇·(m ⊗ u)`
/// and `(∇ρ)ᵀρ = ½∇|ρ|²`, which keeps this path independent of
/// [`bilinear_b`]. Nonlinear products are projected with the 2/3 rule when
/// `dealias` is set.
pub fn rhs_system(state: &EulerState, params: &ModelParams, dealias: bool) -> Result<Tangent> {
    state.tangent().check(params)?;
    let u = state.u();
    let m = state.m();
    let mut mt = flux_divergence(m, u);
    mt.axpy(1.0, &transpose_apply(&jacobian(u), m));
    let rho_t = match state.rho() {
        Some(rho) => {
            let half_sq = dot(rho, rho).scaled(0.5);
            mt.axpy(1.0, &jacobian(&half_sq));
            let rt = flux_divergence(rho, u).scaled(-1.0);
            Some(spectral::synthesize(&project(&rt, dealias)))
        }
        None => None,
    };
    let mt = mt.scaled(-1.0);
    let ut = invert_a_spectrum(project(&mt, dealias), params)?;
    Ok(Tangent::new(ut, rho_t))
}

/// Right-hand side of the two-dimensional μ-b-equation
/// `m_t = −u·∇m − (∇u)ᵀm − (b−1)m(∇·u)`, `m = (μ−Δ)u`, returned as `u_t`.
pub fn rhs_b_equation(u: &Field, b: f64, dealias: bool) -> Result<Field> {
    if u.grid().dim() != 2 || u.ncomp() != 2 {
        return Err(Error::UnsupportedDimension(u.grid().dim()));
    }
    let params = ModelParams::new(1, 0, 0, 2)?;
    let m = apply_a(u, &params);
    let ju = jacobian(u);
    let mut mt = directional(&jacobian(&m), u);
    mt.axpy(1.0, &transpose_apply(&ju, &m));
    mt.axpy(b - 1.0, &m.times_scalar(&divergence(&ju)));
    invert_a_spectrum(project(&mt.scaled(-1.0), dealias), &params)
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepperConfig {
    pub dt: f64,
    pub t_max: f64,
    pub dealias: bool,
    /// Hunter–Saxton cells: reset `u(0) = 0` after every step.
    pub renormalize_hs: bool,
}

impl TimeStepperConfig {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidStepping(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !(t_max.is_finite() && t_max >= 0.0) {
            return Err(Error::InvalidStepping(format!(
                "t_max must be non-negative, got {t_max}"
            )));
        }
        Ok(Self {
            dt,
            t_max,
            dealias: true,
            renormalize_hs: true,
        })
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn with_renormalization(mut self, on: bool) -> Self {
        self.renormalize_hs = on;
        self
    }

    /// Number of steps needed to reach `t_max` (the last one may be shorter).
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Sample time after `k` steps.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 * self.dt).min(self.t_max)
    }
}

fn stage(state: &Tangent, k: &Tangent, h: f64) -> Tangent {
    let mut s = state.clone();
    s.axpy(h, k);
    s
}

/// One classical fourth-order Runge–Kutta step of [`rhs_system`].
pub fn rk4_step(
    state: &EulerState,
    dt: f64,
    params: &ModelParams,
    dealias: bool,
) -> Result<EulerState> {
    let mut next = state.tangent().clone();
    next.axpy(1.0, &rk4_increment(state, dt, params, dealias)?);
    Ok(EulerState::from_tangent_unchecked(next, params))
}

/// The RK4 update `Δw` such that one step maps `w` to `w + Δw`.
pub fn rk4_increment(
    state: &EulerState,
    dt: f64,
    params: &ModelParams,
    dealias: bool,
) -> Result<Tangent> {
    let w = state.tangent();
    let k1 = rhs_system(state, params, dealias)?;
    let s2 = EulerState::from_tangent_unchecked(stage(w, &k1, 0.5 * dt), params);
    let k2 = rhs_system(&s2, params, dealias)?;
    let s3 = EulerState::from_tangent_unchecked(stage(w, &k2, 0.5 * dt), params);
    let k3 = rhs_system(&s3, params, dealias)?;
    let s4 = EulerState::from_tangent_unchecked(stage(w, &k3, dt), params);
    let k4 = rhs_system(&s4, params, dealias)?;
    let mut inc = k1.scaled(dt / 6.0);
    inc.axpy(dt / 3.0, &k2);
    inc.axpy(dt / 3.0, &k3);
    inc.axpy(dt / 6.0, &k4);
    Ok(inc)
}

/// Kahan-compensated `sum += inc`; `carry` holds the low-order bits lost so far.
fn compensated_add(sum: &mut Field, carry: &mut Field, inc: &Field) {
    for ((s, c), d) in sum
        .values_mut()
        .iter_mut()
        .zip(carry.values_mut().iter_mut())
        .zip(inc.values())
    {
        let y = d - *c;
        let t = *s + y;
        *c = (t - *s) - y;
        *s = t;
    }
}

/// Result of [`integrate`]: the last healthy state and whether the run was
/// cut short by non-finite values.
#[derive(Debug, Clone)]
pub struct IntegrationReport {
    pub final_state: EulerState,
    pub t_final: f64,
    pub steps: usize,
    pub blowup: Option<f64>,
}

impl IntegrationReport {
    pub fn into_result(self) -> Result<EulerState> {
        match self.blowup {
            Some(t) => Err(Error::BlowUp { t }),
            None => Ok(self.final_state),
        }
    }
}

fn is_blowup(e: &Error) -> bool {
    matches!(e, Error::NonFinite | Error::NotInRange { .. })
}

/// Integrates from `state0` to `cfg.t_max`, calling `observer(t, state)` at
/// `t = 0` and after every step. Non-finite values stop the run and are
/// reported in [`IntegrationReport::blowup`]; observer errors abort.
pub fn integrate<F>(
    state0: &EulerState,
    cfg: &TimeStepperConfig,
    params: &ModelParams,
    mut observer: F,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &EulerState) -> Result<()>,
{
    observer(0.0, state0)?;
    let mut state = state0.clone();
    let mut carry = Tangent::zeros(state0.grid(), params);
    let steps = cfg.steps();
    for k in 0..steps {
        let (t0, t1) = (cfg.time(k), cfg.time(k + 1));
        let inc = match rk4_increment(&state, t1 - t0, params, cfg.dealias) {
            Ok(inc) if inc.is_finite() => inc,
            Ok(_) => return Ok(blown(state, t0, k)),
            Err(e) if is_blowup(&e) => return Ok(blown(state, t0, k)),
            Err(e) => return Err(e),
        };
        let mut w = state.into_tangent();
        compensated_add(&mut w.u, &mut carry.u, &inc.u);
        if let (Some(r), Some(c), Some(d)) = (w.rho.as_mut(), carry.rho.as_mut(), inc.rho.as_ref())
        {
            compensated_add(r, c, d);
        }
        if !w.is_finite() {
            return Ok(blown(EulerState::from_tangent_unchecked(w, params), t0, k));
        }
        if cfg.renormalize_hs && params.is_hunter_saxton() {
            w.normalize_origin();
        }
        state = EulerState::from_tangent_unchecked(w, params);
        observer(t1, &state)?;
    }
    Ok(IntegrationReport {
        final_state: state,
        t_final: cfg.time(steps),
        steps,
        blowup: None,
    })
}

fn blown(state: EulerState, t: f64, steps: usize) -> IntegrationReport {
    IntegrationReport {
        final_state: state,
        t_final: t,
        steps,
        blowup: Some(t),
    }
}

/// Every sampled state of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EulerState>,
    pub blowup: Option<f64>,
}

pub fn integrate_trajectory(
    state0: &EulerState,
    cfg: &TimeStepperConfig,
    params: &ModelParams,
) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(cfg.steps() + 1);
    let mut states = Vec::with_capacity(cfg.steps() + 1);
    let report = integrate(state0, cfg, params, |t, s| {
        times.push(t);
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times,
        states,
        blowup: report.blowup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_trig_field, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(
        g: Grid,
        p: &ModelParams,
        bandwidth: i64,
        amp: f64,
        rng: &mut ChaCha8Rng,
    ) -> EulerState {
        let n = p.dim();
        let mut w = Tangent::new(
            random_trig_field(g, n, bandwidth, amp, rng),
            p.has_density()
                .then(|| random_trig_field(g, n, bandwidth, amp, rng)),
        );
        if p.is_hunter_saxton() {
            w.normalize_origin();
        }
        EulerState::from_tangent(w, p).unwrap()
    }

    fn all_params(dim: usize) -> Vec<ModelParams> {
        let mut v = Vec::new();
        for g in 0..2 {
            for (a, b) in [(0, 0), (0, 1), (1, 0)] {
                v.push(ModelParams::new(a, b, g, dim).unwrap());
            }
        }
        v
    }

    #[test]
    fn bilinear_vanishes_on_zero_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Grid::new(2, 16).unwrap();
        for p in all_params(2) {
            let s = random_state(g, &p, 3, 0.5, &mut rng);
            let zero = Tangent::zeros(g, &p);
            assert!(bilinear_b(&zero, s.tangent(), &p).unwrap().max_abs() < 1e-14);
            assert!(bilinear_b(s.tangent(), &zero, &p).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn camassa_holm_single_mode() {
        let g = Grid::new(1, 32).unwrap();
        let p = ModelParams::new(0, 1, 0, 1).unwrap();
        let u = Field::from_fn(g, 1, |x, _| (2.0 * PI * x[0]).sin());
        let w = Tangent::new(u, None);
        let b = bilinear_b(&w, &w, &p).unwrap();
        let c = -3.0 * PI * (1.0 + 4.0 * PI * PI) / (1.0 + 16.0 * PI * PI);
        let expected = Field::from_fn(g, 1, |x, _| c * (4.0 * PI * x[0]).sin());
        assert!(b.u.max_diff(&expected) < 1e-12);
    }

    #[test]
    fn momentum_form_matches_bilinear_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [1, 2] {
            let g = Grid::new(dim, 32).unwrap();
            for p in all_params(dim) {
                for _ in 0..3 {
                    let s = random_state(g, &p, 4, 0.5, &mut rng);
                    let a = rhs_system(&s, &p, false).unwrap();
                    let b = bilinear_b(s.tangent(), s.tangent(), &p).unwrap();
                    assert!(a.max_diff(&b) < 1e-10, "{:?}: {}", p, a.max_diff(&b));
                }
            }
        }
    }

    #[test]
    fn two_component_literal_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::new(1, 64).unwrap();
        for (a, b) in [(0, 0), (0, 1), (1, 0)] {
            let p = ModelParams::new(a, b, 1, 1).unwrap();
            let s = random_state(g, &p, 6, 0.5, &mut rng);
            let (u, rho, m) = (s.u(), s.rho().unwrap(), s.m());
            let dx = |f: &Field| spectral::differentiate(f, 0).unwrap();
            let mut mt = dx(m).times_scalar(u).scaled(-1.0);
            mt.axpy(-2.0, &m.times_scalar(&dx(u)));
            mt.axpy(-1.0, &dx(rho).times_scalar(rho));
            let rhot = dx(&rho.times_scalar(u)).scaled(-1.0);
            let sys = rhs_system(&s, &p, false).unwrap();
            assert!(
                sys.u.max_diff(&invert_a(&mt, &p).unwrap()) < 1e-10,
                "({a},{b})"
            );
            assert!(sys.rho.unwrap().max_diff(&rhot) < 1e-10, "({a},{b})");
        }
    }

    #[test]
    fn constant_velocity_is_steady() {
        let g = Grid::new(2, 16).unwrap();
        let p = ModelParams::new(0, 1, 0, 2).unwrap();
        let s = EulerState::new(Field::constant(g, &[0.7, 0.0]), None, &p).unwrap();
        assert!(rhs_system(&s, &p, true).unwrap().max_abs() < 1e-14);
        let mut cur = s.clone();
        for _ in 0..100 {
            cur = rk4_step(&cur, 1e-2, &p, true).unwrap();
        }
        assert!(cur.u().max_diff(s.u()) < 1e-12);
    }

    #[test]
    fn density_only_forcing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::new(2, 16).unwrap();
        let p = ModelParams::new(0, 1, 1, 2).unwrap();
        let rho = random_trig_field(g, 2, 3, 0.5, &mut rng);
        let s = EulerState::new(Field::zeros(g, 2), Some(rho.clone()), &p).unwrap();
        let rhs = rhs_system(&s, &p, false).unwrap();
        assert!(rhs.rho.unwrap().max_abs() < 1e-14);
        let expected = invert_a(&transpose_apply(&jacobian(&rho), &rho), &p)
            .unwrap()
            .scaled(-1.0);
        assert!(rhs.u.max_diff(&expected) < 1e-12);
    }

    #[test]
    fn b_equation_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Grid::new(2, 32).unwrap();
        let p = ModelParams::new(1, 0, 0, 2).unwrap();
        let s = random_state(g, &p, 4, 0.3, &mut rng);
        let b2 = rhs_b_equation(s.u(), 2.0, false).unwrap();
        let sys = rhs_system(&s, &p, false).unwrap();
        assert!(b2.max_diff(&sys.u) < 1e-12, "{}", b2.max_diff(&sys.u));

        let c = Field::constant(g, &[0.3, -0.2]);
        for b in [2.0, 3.0, 4.5] {
            assert!(rhs_b_equation(&c, b, true).unwrap().max_abs() < 1e-14);
        }

        // b = 3 on sin(2π(x+y))𝟏: u_t = −(b+1)π/2 · sin(4π(x+y))𝟏
        let u = Field::from_fn(g, 2, |x, _| (2.0 * PI * (x[0] + x[1])).sin());
        let got = rhs_b_equation(&u, 3.0, false).unwrap();
        let expected = Field::from_fn(g, 2, |x, _| -2.0 * PI * (4.0 * PI * (x[0] + x[1])).sin());
        assert!(got.max_diff(&expected) < 1e-12);
    }

    #[test]
    fn stepping_config_validation() {
        assert!(TimeStepperConfig::new(0.0, 1.0).is_err());
        assert!(TimeStepperConfig::new(0.1, -1.0).is_err());
        let c = TimeStepperConfig::new(0.3, 1.0).unwrap();
        assert_eq!(c.steps(), 4);
        assert_eq!(c.time(4), 1.0);
        assert_eq!(TimeStepperConfig::new(1e-3, 1.0).unwrap().steps(), 1000);
    }

    #[test]
    fn blowup_is_reported() {
        // a huge time step on steep data produces non-finite values
        let g = Grid::new(1, 64).unwrap();
        let p = ModelParams::new(0, 1, 0, 1).unwrap();
        let u = Field::from_fn(g, 1, |x, _| 50.0 * (2.0 * PI * x[0]).sin());
        let s = EulerState::new(u, None, &p).unwrap();
        let cfg = TimeStepperConfig::new(5.0, 2000.0).unwrap();
        let report = integrate(&s, &cfg, &p, |_, _| Ok(())).unwrap();
        assert!(report.blowup.is_some());
        assert!(report.final_state.u().is_finite());
        assert!(matches!(report.into_result(), Err(Error::BlowUp { .. })));
    }

    fn final_u(
        p: &ModelParams,
        u0: &Field,
        rho0: Option<&Field>,
        dt: f64,
        t: f64,
        renorm: bool,
    ) -> Field {
        let s = EulerState::new(u0.clone(), rho0.cloned(), p).unwrap();
        let cfg = TimeStepperConfig::new(dt, t)
            .unwrap()
            .with_renormalization(renorm);
        integrate(&s, &cfg, p, |_, _| Ok(()))
            .unwrap()
            .into_result()
            .unwrap()
            .u()
            .clone()
    }

    #[test]
    fn rk4_self_convergence() {
        let g = Grid::new(1, 64).unwrap();
        let p = ModelParams::new(0, 1, 0, 1).unwrap();
        let u0 = Field::from_fn(g, 1, |x, _| 0.5 * (2.0 * PI * x[0]).sin());
        let a = final_u(&p, &u0, None, 0.04, 0.4, true);
        let b = final_u(&p, &u0, None, 0.02, 0.4, true);
        let c = final_u(&p, &u0, None, 0.01, 0.4, true);
        let ratio = a.max_diff(&b) / b.max_diff(&c);
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "{ratio}");
    }

    #[test]
    fn hunter_saxton_origin_is_preserved_without_renormalization() {
        let g = Grid::new(1, 128).unwrap();
        let p = ModelParams::new(0, 0, 0, 1).unwrap();
        let u0 = Field::from_fn(g, 1, |x, _| 0.05 * (2.0 * PI * x[0]).sin());
        let u = final_u(&p, &u0, None, 1e-3, 1.0, false);
        assert!(u.component(0)[0].abs() <= 1e-8, "{:e}", u.component(0)[0]);
    }

    #[test]
    fn mean_is_conserved_for_mu_ch() {
        let g = Grid::new(1, 64).unwrap();
        let p = ModelParams::new(1, 0, 0, 1).unwrap();
        let u0 = Field::from_fn(g, 1, |x, _| {
            0.3 + 0.2 * (2.0 * PI * x[0]).sin() + 0.1 * (4.0 * PI * x[0]).cos()
        });
        let s = EulerState::new(u0.clone(), None, &p).unwrap();
        let cfg = TimeStepperConfig::new(1e-2, 1.0).unwrap();
        let mu0 = spectral::mean(&u0)[0];
        let mut worst: f64 = 0.0;
        integrate(&s, &cfg, &p, |_, st| {
            worst = worst.max((spectral::mean(st.u())[0] - mu0).abs());
            Ok(())
        })
        .unwrap();
        assert!(worst <= 1e-10, "{worst:e}");
    }
}
