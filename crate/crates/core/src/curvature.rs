//! Sectional curvature of the two-dimensional μ-CH group at the identity,
//! the positive-curvature scan on `span{e_i, v}`, and the single-mode
//! identities that single out `b = 2`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::ops::Add;

use crate::calculus::advect;
use crate::conservation::metric_inner;
use crate::error::{Error, Result};
use crate::geodesic::christoffel_id;
use crate::inertia::ModelParams;
use crate::spectral::{Field, Grid};
use crate::state::Tangent;

/// `(α, β, γ) = (1, 0, 0)`, `n = 2`.
pub fn mu_ch_params() -> ModelParams {
    ModelParams::new(1, 0, 0, 2).expect("admissible")
}

fn check_plane(u: &Field, v: &Field) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    if u.grid().dim() != 2 {
        return Err(Error::UnsupportedDimension(u.grid().dim()));
    }
    for f in [u, v] {
        if f.ncomp() != 2 {
            return Err(Error::ComponentMismatch {
                expected: 2,
                found: f.ncomp(),
            });
        }
    }
    Ok(())
}

fn ip(a: &Field, b: &Field) -> f64 {
    let p = mu_ch_params();
    metric_inner(
        &Tangent::new(a.clone(), None),
        &Tangent::new(b.clone(), None),
        &p,
    )
    .expect("shapes checked")
}

/// The twelve-term `R(u, v)` with `D(a, b) = ∇a·b` and every pairing the
/// μ-CH metric.
pub fn curvature_r_term(u: &Field, v: &Field) -> Result<f64> {
    check_plane(u, v)?;
    let d = advect;
    let duu = d(u, u);
    let duv = d(u, v);
    let dvu = d(v, u);
    let dvv = d(v, v);
    Ok(
        ip(&duu, &dvv) - ip(&duv, &duv) + ip(&dvu, &duv) - ip(&dvu, &dvu) + ip(&d(&duu, v), v)
            - ip(&d(&duv, v), u)
            + ip(&d(&dvu, v), u)
            - ip(&d(&dvu, u), v)
            - ip(&d(v, &duu), v)
            - ip(&d(u, &dvv), u)
            + ip(&d(v, &dvu), u)
            + ip(&d(u, &dvu), v),
    )
}

/// `S(u,v) = ⟨Γ(u,v), Γ(u,v)⟩ − ⟨Γ(u,u), Γ(v,v)⟩ + R(u,v)`.
pub fn sectional_s(u: &Field, v: &Field) -> Result<f64> {
    check_plane(u, v)?;
    let p = mu_ch_params();
    let tu = Tangent::new(u.clone(), None);
    let tv = Tangent::new(v.clone(), None);
    let guv = christoffel_id(&tu, &tv, &p)?.u;
    let guu = christoffel_id(&tu, &tu, &p)?.u;
    let gvv = christoffel_id(&tv, &tv, &p)?.u;
    Ok(ip(&guv, &guv) - ip(&guu, &gvv) + curvature_r_term(u, v)?)
}

/// Closed form of `S(e_axis, v)` for `v = sin(k₁x)sin(k₂y)·𝟏`.
pub fn closed_form_s(k1: f64, k2: f64, axis: usize) -> f64 {
    let (a, b) = if axis == 0 { (k1, k2) } else { (k2, k1) };
    (2.0 * a * a + b * b) / (8.0 * (k1 * k1 + k2 * k2))
}

/// Power-of-two grid on which every product of up to four modes bounded by
/// `m_max` is resolved without aliasing, with headroom for roundoff.
pub fn exact_grid_size(m_max: u32) -> usize {
    (16 * m_max as usize).next_power_of_two().max(16)
}

/// `v = sin(2πm₁x) sin(2πm₂y)·𝟏`.
pub fn product_mode(grid: Grid, m1: u32, m2: u32) -> Field {
    Field::from_fn(grid, 2, |x, _| {
        (2.0 * PI * f64::from(m1) * x[0]).sin() * (2.0 * PI * f64::from(m2) * x[1]).sin()
    })
}

/// Unit constant field `e_axis`.
pub fn unit_field(grid: Grid, axis: usize) -> Field {
    let mut e = [0.0; 2];
    e[axis] = 1.0;
    Field::constant(grid, &e)
}

/// One row of [`positivity_scan`]; wavenumbers are `k_i = 2πm_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub m1: u32,
    pub m2: u32,
    pub s_e1: f64,
    pub s_e2: f64,
    pub closed_e1: f64,
    pub closed_e2: f64,
}

impl ScanRow {
    pub fn k1(&self) -> f64 {
        2.0 * PI * f64::from(self.m1)
    }

    pub fn k2(&self) -> f64 {
        2.0 * PI * f64::from(self.m2)
    }

    pub fn max_error(&self) -> f64 {
        (self.s_e1 - self.closed_e1)
            .abs()
            .max((self.s_e2 - self.closed_e2).abs())
    }

    pub fn is_positive(&self) -> bool {
        self.s_e1 > 0.0 && self.s_e2 > 0.0
    }
}

/// `S(e₁, v)` and `S(e₂, v)` for every pair `m₁, m₂ ∈ ms`, row-major in
/// `(m₁, m₂)`, on a grid where all quadratures are exact.
pub fn positivity_scan(ms: &[u32]) -> Result<Vec<ScanRow>> {
    if ms.contains(&0) {
        return Err(Error::InvalidGrid(
            "wavenumber multipliers must be positive".into(),
        ));
    }
    let m_max = ms.iter().copied().max().unwrap_or(1);
    let grid = Grid::new(2, exact_grid_size(m_max))?;
    let pairs: Vec<(u32, u32)> = ms
        .iter()
        .flat_map(|&a| ms.iter().map(move |&b| (a, b)))
        .collect();
    pairs
        .par_iter()
        .map(|&(m1, m2)| {
            let v = product_mode(grid, m1, m2);
            let k1 = 2.0 * PI * f64::from(m1);
            let k2 = 2.0 * PI * f64::from(m2);
            Ok(ScanRow {
                m1,
                m2,
                s_e1: sectional_s(&unit_field(grid, 0), &v)?,
                s_e2: sectional_s(&unit_field(grid, 1), &v)?,
                closed_e1: closed_form_s(k1, k2, 0),
                closed_e2: closed_form_s(k1, k2, 1),
            })
        })
        .collect()
}

/// Vector field `c e^{i k·z}` with a single wave vector `k ∈ (2πℤ)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeField {
    pub k: [f64; 2],
    pub c: [Complex64; 2],
}

const I: Complex64 = Complex64::new(0.0, 1.0);

impl ModeField {
    /// `e^{i n·z}·𝟏`.
    pub fn ones(n: [f64; 2]) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self {
            k: n,
            c: [one, one],
        }
    }

    pub fn scaled(self, s: Complex64) -> Self {
        Self {
            k: self.k,
            c: [self.c[0] * s, self.c[1] * s],
        }
    }

    /// `∇a·b`.
    pub fn advect(a: Self, b: Self) -> Self {
        let c = [0, 1].map(|i| (0..2).map(|j| I * a.k[j] * a.c[i] * b.c[j]).sum());
        Self {
            k: [a.k[0] + b.k[0], a.k[1] + b.k[1]],
            c,
        }
    }

    /// `(∇a)ᵀm`.
    pub fn transpose_apply(a: Self, m: Self) -> Self {
        let c = [0, 1].map(|j| (0..2).map(|i| I * a.k[j] * a.c[i] * m.c[i]).sum());
        Self {
            k: [a.k[0] + m.k[0], a.k[1] + m.k[1]],
            c,
        }
    }

    /// `f(∇·a)`.
    pub fn times_divergence(f: Self, a: Self) -> Self {
        let div: Complex64 = (0..2).map(|j| I * a.k[j] * a.c[j]).sum();
        Self {
            k: [f.k[0] + a.k[0], f.k[1] + a.k[1]],
            c: [f.c[0] * div, f.c[1] * div],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c[0].norm().max(self.c[1].norm())
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        (self.c[0] - other.c[0])
            .norm()
            .max((self.c[1] - other.c[1]).norm())
    }
}

impl Add for ModeField {
    type Output = Self;
    fn add(self, other: Self) -> Self {
        debug_assert_eq!(self.k, other.k);
        Self {
            k: self.k,
            c: [self.c[0] + other.c[0], self.c[1] + other.c[1]],
        }
    }
}

/// `α_n`, `β_n` of the single-mode identity, as diagonals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GL3Coefficients {
    pub n_vec: [f64; 2],
    pub alpha_n: [f64; 2],
    pub beta_n: [f64; 2],
}

impl GL3Coefficients {
    /// Coefficients for `n = 2π·index`.
    pub fn new(index: [i64; 2], b: f64) -> Result<Self> {
        if index == [0, 0] {
            return Err(Error::InadmissibleParameters(
                "mode n must be nonzero".into(),
            ));
        }
        let n = index.map(|i| 2.0 * PI * i as f64);
        let n2 = n[0] * n[0] + n[1] * n[1];
        let s = n[0] + n[1];
        Ok(Self {
            n_vec: n,
            alpha_n: [
                (b + 1.0) * n[0] / n2 + (b - 1.0) * n[1] / n2 + s,
                (b + 1.0) * n[1] / n2 + (b - 1.0) * n[0] / n2 + s,
            ],
            beta_n: [3.0 * n[0] + n[1], 3.0 * n[1] + n[0]],
        })
    }

    pub fn n_squared(&self) -> f64 {
        self.n_vec[0] * self.n_vec[0] + self.n_vec[1] * self.n_vec[1]
    }

    /// Diagonal symbol `a` with `v_n = a e^{inz}·𝟏` solving the identity, per
    /// component; `None` where the component equation is degenerate.
    pub fn solution_symbol(&self) -> [Option<f64>; 2] {
        let s = self.n_vec[0] + self.n_vec[1];
        [0, 1].map(|i| {
            let denom = s - self.alpha_n[i];
            (denom.abs() > 1e-300).then(|| -self.beta_n[i] / denom)
        })
    }
}

/// Residual of `∇v_n·𝟏 − iα_n v_n + iβ_n u_n` with `u_n = e^{inz}·𝟏`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gl3Residual {
    /// Max-norm of the coefficient of `e^{inz}`.
    pub raw: f64,
    /// `raw / max|β_n|`.
    pub normalized: f64,
}

/// Evaluates the single-mode identity for the candidate `v_n` at `n = 2π·index`.
pub fn verify_gl3(index: [i64; 2], b: f64, candidate: ModeField) -> Result<Gl3Residual> {
    let co = GL3Coefficients::new(index, b)?;
    if candidate.k != co.n_vec {
        return Err(Error::InadmissibleParameters(
            "candidate must be a single mode at n".into(),
        ));
    }
    let ones = ModeField {
        k: [0.0, 0.0],
        c: [Complex64::new(1.0, 0.0); 2],
    };
    let grad_dot_one = ModeField::advect(candidate, ones);
    let res =
        [0, 1].map(|i| grad_dot_one.c[i] - I * co.alpha_n[i] * candidate.c[i] + I * co.beta_n[i]);
    let raw = res[0].norm().max(res[1].norm());
    let scale = co.beta_n[0].abs().max(co.beta_n[1].abs());
    Ok(Gl3Residual {
        raw,
        normalized: raw / scale,
    })
}

/// Diagonal inertia symbol on the mode `n`, as determined by the
/// single-mode identity.
fn inertia_symbol(index: [i64; 2], b: f64) -> Result<f64> {
    let co = GL3Coefficients::new(index, b)?;
    match co.solution_symbol() {
        [Some(a), Some(c)] if (a - c).abs() <= 1e-12 * a.abs().max(c.abs()) => Ok(0.5 * (a + c)),
        _ => Err(Error::NoDiagonalInertia { n: index, b }),
    }
}

/// Both sides of the quadratic identity for `u = e^{inz}·𝟏`: the inertia
/// side uses the symbol from [`inertia_symbol`] at `n` and `2n`, the
/// μ-b side uses `𝕃 = μ − Δ` with the `(b − 1)` factor. Returns the
/// max-norm difference relative to the μ-b side.
pub fn metric_b_residual(b: f64, index: [i64; 2]) -> Result<f64> {
    let a_n = inertia_symbol(index, b)?;
    let a_2n = inertia_symbol([2 * index[0], 2 * index[1]], b)?;
    let n = index.map(|i| 2.0 * PI * i as f64);
    let n2 = n[0] * n[0] + n[1] * n[1];
    let u = ModeField::ones(n);

    let au = u.scaled(a_n.into());
    let lhs = ModeField::advect(au, u)
        .add(ModeField::transpose_apply(u, au))
        .add(ModeField::times_divergence(au, u))
        .scaled((1.0 / a_2n).into());

    let lu = u.scaled(n2.into());
    let rhs = ModeField::advect(lu, u)
        .add(ModeField::transpose_apply(u, lu))
        .add(ModeField::times_divergence(lu, u).scaled((b - 1.0).into()))
        .scaled((1.0 / (4.0 * n2)).into());

    Ok(lhs.max_diff(&rhs) / rhs.max_abs())
}
