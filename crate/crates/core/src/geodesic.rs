//! Christoffel map at the identity, Lagrangian coordinates `p(t)` with
//! `p_t = w∘p₁`, the geodesic equation `p_tt = Γ_p(p_t, p_t)` and the
//! one-dimensional inverse diffeomorphism.

use rayon::prelude::*;

use crate::calculus::{self, directional, divergence, dot, jacobian, transpose_apply};
use crate::dynamics::{rhs_system, TimeStepperConfig, Trajectory};
use crate::error::{Error, Result};
use crate::inertia::{apply_a, invert_a, ModelParams};
use crate::spectral::{self, Field, Grid};
use crate::state::{EulerState, Tangent};

/// Value of the Christoffel map: `u` holds the first block, `rho` the
/// second block when `γ = 1`.
pub type ChristoffelValue = Tangent;

/// `u·∇(Av) + (∇u)ᵀAv + Av(∇·u) − A(∇u·v)`.
fn half_bracket(u: &Field, v: &Field, params: &ModelParams) -> Field {
    let av = apply_a(v, params);
    let ju = jacobian(u);
    let mut out = directional(&jacobian(&av), u);
    out.axpy(1.0, &transpose_apply(&ju, &av));
    out.axpy(1.0, &av.times_scalar(&divergence(&ju)));
    out.axpy(-1.0, &apply_a(&directional(&ju, v), params));
    out
}

/// `Γ_id(w₁, w₂)`. For `γ = 0` this is `Γ⁰_id(u, v)`; for `γ = 1` the first
/// block gains `−½A⁻¹∇(ρ·η)` and the second block is `−½(ρ(∇·v) + η(∇·u))`.
pub fn christoffel_id(
    w1: &Tangent,
    w2: &Tangent,
    params: &ModelParams,
) -> Result<ChristoffelValue> {
    w1.check(params)?;
    w2.check(params)?;
    let (u, v) = (&w1.u, &w2.u);
    let mut bracket = half_bracket(u, v, params);
    bracket.axpy(1.0, &half_bracket(v, u, params));
    let second = match (&w1.rho, &w2.rho) {
        (Some(rho), Some(eta)) => {
            bracket.axpy(1.0, &spectral::gradient(&dot(rho, eta)));
            let mut s = rho.times_scalar(&divergence(&jacobian(v)));
            s.axpy(1.0, &eta.times_scalar(&divergence(&jacobian(u))));
            Some(s.scaled(-0.5))
        }
        _ => None,
    };
    let first = invert_a(&bracket, params)?.scaled(-0.5);
    Ok(Tangent::new(first, second))
}

/// Transport part of the diagonal identity `B(w,w) = Γ(w,w) − (∇u·u, ∇ρ·u)`.
pub fn advection_term(w: &Tangent) -> Tangent {
    let u = &w.u;
    Tangent::new(
        calculus::advect(u, u),
        w.rho.as_ref().map(|r| calculus::advect(r, u)),
    )
}

/// Positions `x + d(x)` of every grid point, `dim` coordinates each.
fn displaced_points(disp: &Field) -> Vec<f64> {
    let grid = disp.grid();
    let dim = grid.dim();
    let mut pts = grid.points();
    for (p, x) in pts.chunks_mut(dim).enumerate() {
        for (a, xa) in x.iter_mut().enumerate() {
            *xa += disp.component(a)[p];
        }
    }
    pts
}

/// `f∘p₁` on the grid, where `p₁(x) = x + disp(x)`.
pub fn compose(f: &Field, disp: &Field) -> Result<Field> {
    if f.grid() != disp.grid() {
        return Err(Error::GridMismatch);
    }
    let vals = spectral::evaluate_at(f, &displaced_points(disp))?;
    Field::new(f.grid(), f.ncomp(), vals)
}

fn compose_tangent(w: &Tangent, disp: &Field) -> Result<Tangent> {
    let n = w.u.ncomp();
    let all = compose(&w.stacked(), disp)?;
    Ok(Tangent::new(
        all.select(0, n),
        w.rho.as_ref().map(|_| all.select(n, n)),
    ))
}

/// Lagrangian coordinates: `p₁ = id + p1_disp`, `p₂` when `γ = 1`, and the
/// velocity `p_t = (p₁_t, p₂_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub p1_disp: Field,
    pub p2: Option<Field>,
    pub pt: Tangent,
}

impl LagrangianState {
    /// `p = e` with velocity `w`.
    pub fn identity(w: &Tangent) -> Self {
        let grid = w.grid();
        let n = grid.dim();
        Self {
            p1_disp: Field::zeros(grid, n),
            p2: w.rho.as_ref().map(|_| Field::zeros(grid, n)),
            pt: w.clone(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.p1_disp.grid()
    }

    /// `∇p₁ = 𝟙 + ∇(p1_disp)` in Jacobian layout.
    pub fn jacobian_p1(&self) -> Field {
        let dim = self.grid().dim();
        let mut jac = jacobian(&self.p1_disp);
        for i in 0..dim {
            jac.component_mut(i * dim + i)
                .iter_mut()
                .for_each(|x| *x += 1.0);
        }
        jac
    }

    /// `|∇p₁|` at every grid point.
    pub fn det_p1(&self) -> Vec<f64> {
        calculus::determinant(&self.jacobian_p1())
    }

    /// Errors with [`Error::DiffeoBreakdown`] unless `|∇p₁| > 0` everywhere.
    pub fn check_orientation(&self, t: f64) -> Result<()> {
        let det = self.det_p1().into_iter().fold(f64::INFINITY, f64::min);
        if det > 0.0 && det.is_finite() {
            Ok(())
        } else {
            Err(Error::DiffeoBreakdown { t, det })
        }
    }

    /// Positions `p₁(x_j)` unwrapped (not reduced mod 1).
    pub fn positions(&self) -> Vec<f64> {
        displaced_points(&self.p1_disp)
    }

    /// `(p1_disp, p₂)` stacked.
    fn position_block(&self) -> Tangent {
        Tangent::new(self.p1_disp.clone(), self.p2.clone())
    }

    fn from_blocks(pos: Tangent, pt: Tangent) -> Self {
        Self {
            p1_disp: pos.u,
            p2: pos.rho,
            pt,
        }
    }
}

/// Cubic Hermite value at the midpoint of `[t₀, t₀ + h]`.
fn hermite_mid(a: &Tangent, da: &Tangent, b: &Tangent, db: &Tangent, h: f64) -> Tangent {
    let mut out = a.scaled(0.5);
    out.axpy(0.5, b);
    out.axpy(h / 8.0, da);
    out.axpy(-h / 8.0, db);
    out
}

/// Streams Eulerian states and integrates `p₁_t = u∘p₁`, `p₂_t = ρ∘p₁` by
/// RK4, interpolating the velocity between samples with cubic Hermite
/// polynomials built from `w` and `w_t`.
#[derive(Debug, Clone)]
pub struct FlowTracker {
    params: ModelParams,
    dealias: bool,
    last: Option<(f64, Tangent, Tangent)>,
    pos: Option<Tangent>,
}

impl FlowTracker {
    pub fn new(params: ModelParams, dealias: bool) -> Self {
        Self {
            params,
            dealias,
            last: None,
            pos: None,
        }
    }

    /// Advances the flow to `t` and returns `p(t)`. The first call fixes
    /// `p = e` at its time.
    pub fn observe(&mut self, t: f64, state: &EulerState) -> Result<LagrangianState> {
        let w = state.tangent().clone();
        let wt = rhs_system(state, &self.params, self.dealias)?;
        let pos = match (self.last.take(), self.pos.take()) {
            (Some((t0, w0, wt0)), Some(pos0)) => {
                let h = t - t0;
                let mid = hermite_mid(&w0, &wt0, &w, &wt, h);
                let vel = |p: &Tangent, v: &Tangent| compose_tangent(v, &p.u);
                let k1 = vel(&pos0, &w0)?;
                let k2 = vel(&shift(&pos0, &k1, 0.5 * h), &mid)?;
                let k3 = vel(&shift(&pos0, &k2, 0.5 * h), &mid)?;
                let k4 = vel(&shift(&pos0, &k3, h), &w)?;
                let mut next = pos0;
                next.axpy(h / 6.0, &k1);
                next.axpy(h / 3.0, &k2);
                next.axpy(h / 3.0, &k3);
                next.axpy(h / 6.0, &k4);
                next
            }
            _ => Tangent::new(
                Field::zeros(w.grid(), w.u.ncomp()),
                w.rho.as_ref().map(|r| Field::zeros(r.grid(), r.ncomp())),
            ),
        };
        let pt = compose_tangent(&w, &pos.u)?;
        let lagr = LagrangianState::from_blocks(pos.clone(), pt);
        lagr.check_orientation(t)?;
        self.last = Some((t, w, wt));
        self.pos = Some(pos);
        Ok(lagr)
    }
}

fn shift(p: &Tangent, k: &Tangent, h: f64) -> Tangent {
    let mut s = p.clone();
    s.axpy(h, k);
    s
}

/// Lagrangian trajectory `p(t_k)` for every sample of an Eulerian run.
pub fn flow_reconstruct(
    traj: &Trajectory,
    params: &ModelParams,
    dealias: bool,
) -> Result<Vec<LagrangianState>> {
    let mut tracker = FlowTracker::new(*params, dealias);
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| tracker.observe(t, s))
        .collect()
}

/// `max_k ‖p_t − D_t p‖∞` at interior samples, where `D_t` is the fourth-order
/// central difference of the stored positions with uniform spacing `dt`.
pub fn flow_ode_residual(lagr: &[LagrangianState], dt: f64) -> Vec<f64> {
    if lagr.len() < 5 {
        return Vec::new();
    }
    (2..lagr.len() - 2)
        .map(|k| {
            let p = |j: usize| lagr[j].position_block().stacked();
            let mut d = p(k - 2).scaled(1.0);
            d.axpy(-8.0, &p(k - 1));
            d.axpy(8.0, &p(k + 1));
            d.axpy(-1.0, &p(k + 2));
            let d = d.scaled(1.0 / (12.0 * dt));
            d.max_diff(&lagr[k].pt.stacked())
        })
        .collect()
}

/// `‖p_tt − Γ_id(w,w)∘p₁‖∞` at each interior sample `k = 1..len−1`, with
/// `p_tt` the centered second-order difference of the stored `p_t`.
pub fn geodesic_residual(
    lagr: &[LagrangianState],
    states: &[EulerState],
    dt: f64,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if lagr.len() != states.len() {
        return Err(Error::InvalidStepping(format!(
            "{} Lagrangian samples but {} Eulerian samples",
            lagr.len(),
            states.len()
        )));
    }
    if lagr.len() < 3 {
        return Ok(Vec::new());
    }
    (1..lagr.len() - 1)
        .into_par_iter()
        .map(|k| {
            let mut ptt = lagr[k + 1].pt.stacked();
            ptt.axpy(-1.0, &lagr[k - 1].pt.stacked());
            let ptt = ptt.scaled(0.5 / dt);
            let w = states[k].tangent();
            let gamma = christoffel_id(w, w, params)?;
            let rhs = compose(&gamma.stacked(), &lagr[k].p1_disp)?;
            Ok(ptt.max_diff(&rhs))
        })
        .collect()
}

/// Inverse of `p₁(x) = x + d(x)` on the circle, returned as a displacement:
/// `p₁⁻¹(x) = x + result(x)`. Newton iteration on the trigonometric
/// interpolant with a bisection fallback.
pub fn invert_diffeo_1d(p1_disp: &Field) -> Result<Field> {
    let grid = p1_disp.grid();
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if p1_disp.ncomp() != 1 {
        return Err(Error::ComponentMismatch {
            expected: 1,
            found: p1_disp.ncomp(),
        });
    }
    let d = p1_disp.clone();
    let dx = spectral::differentiate(&d, 0)?;
    for (j, &s) in dx.values().iter().enumerate() {
        if 1.0 + s <= 0.0 {
            return Err(Error::NonMonotone {
                x: grid.point(j)[0],
                slope: 1.0 + s,
            });
        }
    }
    let spec = spectral::analyze(&Field::stack(&[&d, &dx])?)?;
    let bound = d.max_abs();
    let xs = grid.points();
    let inv: Vec<f64> = xs
        .par_iter()
        .map(|&x| solve_monotone(&spec, x, bound).map(|y| y - x))
        .collect::<Result<_>>()?;
    Field::new(grid, 1, inv)
}

/// Root of `y + d(y) = x` bracketed by `|d| ≤ bound`.
fn solve_monotone(spec: &spectral::Spectrum, x: f64, bound: f64) -> Result<f64> {
    let f = |y: f64| {
        let v = spec.evaluate_point(&[y]);
        (y + v[0] - x, 1.0 + v[1])
    };
    let mut lo = x - bound - 1e-12;
    let mut hi = x + bound + 1e-12;
    let mut y = x - spec.evaluate_point(&[x])[0];
    for _ in 0..100 {
        let (g, slope) = f(y);
        if g.abs() <= 1e-15 {
            return Ok(y);
        }
        if g > 0.0 {
            hi = hi.min(y);
        } else {
            lo = lo.max(y);
        }
        if slope <= 0.0 {
            return Err(Error::NonMonotone { x: y, slope });
        }
        let step = g / slope;
        let mut next = y - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

/// `Γ_p(v, v) = Γ_id(v∘p₁⁻¹, v∘p₁⁻¹)∘p₁` for a one-dimensional Lagrangian
/// state (position and velocity blocks).
fn geodesic_acceleration_1d(pos: &Tangent, vel: &Tangent, params: &ModelParams) -> Result<Tangent> {
    let inv = invert_diffeo_1d(&pos.u)?;
    let w = compose_tangent(vel, &inv)?;
    let mut w = w;
    if params.is_hunter_saxton() {
        w.normalize_origin();
    }
    let gamma = christoffel_id(&w, &w, params)?;
    compose_tangent(&gamma, &pos.u)
}

/// Eulerian velocity `w = p_t∘p₁⁻¹` of a one-dimensional Lagrangian state.
pub fn eulerian_velocity_1d(lagr: &LagrangianState) -> Result<Tangent> {
    let inv = invert_diffeo_1d(&lagr.p1_disp)?;
    compose_tangent(&lagr.pt, &inv)
}

/// Direct RK4 integration of `p_tt = Γ_p(p_t, p_t)` in one dimension from
/// `p = e`, `p_t = w₀`. Calls `observer(t, p)` at `t = 0` and after every step.
pub fn integrate_geodesic_1d<F>(
    w0: &Tangent,
    cfg: &TimeStepperConfig,
    params: &ModelParams,
    mut observer: F,
) -> Result<LagrangianState>
where
    F: FnMut(f64, &LagrangianState) -> Result<()>,
{
    w0.check(params)?;
    if params.dim() != 1 {
        return Err(Error::UnsupportedDimension(params.dim()));
    }
    let mut p = LagrangianState::identity(w0);
    observer(0.0, &p)?;
    let rhs = |pos: &Tangent, vel: &Tangent| -> Result<(Tangent, Tangent)> {
        Ok((vel.clone(), geodesic_acceleration_1d(pos, vel, params)?))
    };
    for k in 0..cfg.steps() {
        let (t0, t1) = (cfg.time(k), cfg.time(k + 1));
        let h = t1 - t0;
        let x0 = p.position_block();
        let v0 = p.pt.clone();
        let (a1, b1) = rhs(&x0, &v0)?;
        let (a2, b2) = rhs(&shift(&x0, &a1, 0.5 * h), &shift(&v0, &b1, 0.5 * h))?;
        let (a3, b3) = rhs(&shift(&x0, &a2, 0.5 * h), &shift(&v0, &b2, 0.5 * h))?;
        let (a4, b4) = rhs(&shift(&x0, &a3, h), &shift(&v0, &b3, h))?;
        let combine = |base: Tangent, k1: &Tangent, k2: &Tangent, k3: &Tangent, k4: &Tangent| {
            let mut out = base;
            out.axpy(h / 6.0, k1);
            out.axpy(h / 3.0, k2);
            out.axpy(h / 3.0, k3);
            out.axpy(h / 6.0, k4);
            out
        };
        let pos = combine(x0, &a1, &a2, &a3, &a4);
        let vel = combine(v0, &b1, &b2, &b3, &b4);
        if !(pos.is_finite() && vel.is_finite()) {
            return Err(Error::BlowUp { t: t0 });
        }
        p = LagrangianState::from_blocks(pos, vel);
        p.check_orientation(t1)?;
        observer(t1, &p)?;
    }
    Ok(p)
}

/// `∇̄_X Y` at `p` for the right-invariant fields `X = x∘p₁`, `Y = y∘p₁`:
/// `DY·X = (∇y·x₁)∘p₁` blockwise, minus `Γ_p(X, Y) = Γ_id(x, y)∘p₁`.
pub fn connection_right_invariant(
    x: &Tangent,
    y: &Tangent,
    p: &LagrangianState,
    params: &ModelParams,
) -> Result<Tangent> {
    let mut out = Tangent::new(
        calculus::advect(&y.u, &x.u),
        y.rho.as_ref().map(|r| calculus::advect(r, &x.u)),
    );
    out.axpy(-1.0, &christoffel_id(x, y, params)?);
    compose_tangent(&out, &p.p1_disp)
}

/// `|X⟨φY, Z⟩ − ⟨∇̄_X(φY), Z⟩ − ⟨∇̄_X Z, φY⟩|` at `p(k·h)` on the flow of the
/// right-invariant field `X = x∘p₁` from `e`, with `φ(p) = 1 + μ(p1_disp₀)`.
/// The left side is a centered difference with step `h` along the flow.
pub fn metric_compatibility_defect(
    x: &Tangent,
    y: &Tangent,
    z: &Tangent,
    params: &ModelParams,
    h: f64,
    k: usize,
) -> Result<f64> {
    if k == 0 || h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidStepping("need k >= 1 and h > 0".into()));
    }
    let grid = x.grid();
    let vel = |d: &Field| compose(&x.u, d);
    let mut disp = Field::zeros(grid, grid.dim());
    let mut samples = Vec::with_capacity(3);
    for step in 0..=k + 1 {
        if step + 1 >= k {
            samples.push(disp.clone());
        }
        if step == k + 1 {
            break;
        }
        let k1 = vel(&disp)?;
        let k2 = vel(&(&disp + &k1.scaled(0.5 * h)))?;
        let k3 = vel(&(&disp + &k2.scaled(0.5 * h)))?;
        let k4 = vel(&(&disp + &k3.scaled(h)))?;
        disp.axpy(h / 6.0, &k1);
        disp.axpy(h / 3.0, &k2);
        disp.axpy(h / 3.0, &k3);
        disp.axpy(h / 6.0, &k4);
    }
    let at = |d: &Field| LagrangianState {
        p1_disp: d.clone(),
        p2: x.rho.as_ref().map(|_| Field::zeros(grid, grid.dim())),
        pt: compose_tangent(x, d).expect("same grid"),
    };
    let phi = |d: &Field| 1.0 + spectral::mean(d)[0];
    let pair = |d: &Field, a: &Tangent, b: &Tangent| -> Result<f64> {
        let p = at(d);
        crate::conservation::metric_at_p(
            &compose_tangent(a, d)?,
            &compose_tangent(b, d)?,
            &p,
            params,
        )
    };
    let f = |d: &Field| -> Result<f64> { Ok(phi(d) * pair(d, y, z)?) };
    let lhs = (f(&samples[2])? - f(&samples[0])?) / (2.0 * h);

    let d = &samples[1];
    let p = at(d);
    let x_phi = spectral::mean(&compose(&x.u, d)?)[0];
    let yp = compose_tangent(y, d)?;
    let zp = compose_tangent(z, d)?;
    let nxy = connection_right_invariant(x, y, &p, params)?;
    let nxz = connection_right_invariant(x, z, &p, params)?;
    let metric = |a: &Tangent, b: &Tangent| crate::conservation::metric_at_p(a, b, &p, params);
    let rhs = x_phi * metric(&yp, &zp)? + phi(d) * (metric(&nxy, &zp)? + metric(&nxz, &yp)?);
    Ok((lhs - rhs).abs())
}
