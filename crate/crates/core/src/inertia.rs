//! Inertia operators `A = αμ + β − Δ` and the block operator
//! `𝔸 = (1−γ) A ⊗ 𝟙ₙ + γ diag(A, 1) ⊗ 𝟙ₙ`, applied and inverted as Fourier
//! multipliers.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{self, Field};
use crate::state::Tangent;

/// Mean tolerance (relative to `max(1, ‖v‖∞)`) for inverting `−Δ`.
pub const HS_MEAN_TOLERANCE: f64 = 1e-10;

/// The six admissible members of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    HunterSaxton,
    CamassaHolm,
    MuCamassaHolm,
    TwoComponentHunterSaxton,
    TwoComponentCamassaHolm,
    MuTwoComponentCamassaHolm,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::HunterSaxton => "HS",
            Equation::CamassaHolm => "CH",
            Equation::MuCamassaHolm => "μ-CH",
            Equation::TwoComponentHunterSaxton => "2HS",
            Equation::TwoComponentCamassaHolm => "2CH",
            Equation::MuTwoComponentCamassaHolm => "μ-2CH",
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(α, β, γ)`, spatial dimension and the b-equation exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: u8,
    beta: u8,
    gamma: u8,
    dim: usize,
    b: f64,
}

impl ModelParams {
    pub fn new(alpha: u8, beta: u8, gamma: u8, dim: usize) -> Result<Self> {
        if alpha > 1 || beta > 1 || gamma > 1 {
            return Err(Error::InadmissibleParameters(format!(
                "alpha, beta, gamma must be 0 or 1, got ({alpha}, {beta}, {gamma})"
            )));
        }
        if alpha + beta == 2 {
            return Err(Error::InadmissibleParameters(
                "alpha + beta = 2 is excluded".into(),
            ));
        }
        if dim == 0 {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            dim,
            b: 2.0,
        })
    }

    /// Sets the exponent of the b-equation (default 2).
    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn alpha(&self) -> u8 {
        self.alpha
    }

    pub fn beta(&self) -> u8 {
        self.beta
    }

    pub fn gamma(&self) -> u8 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn has_density(&self) -> bool {
        self.gamma == 1
    }

    /// `(α, β) = (0, 0)`: `A = −Δ`, phase space `H^s₀`.
    pub fn is_hunter_saxton(&self) -> bool {
        self.alpha == 0 && self.beta == 0
    }

    pub fn equation(&self) -> Equation {
        match (self.alpha, self.beta, self.gamma) {
            (0, 0, 0) => Equation::HunterSaxton,
            (0, 1, 0) => Equation::CamassaHolm,
            (1, 0, 0) => Equation::MuCamassaHolm,
            (0, 0, 1) => Equation::TwoComponentHunterSaxton,
            (0, 1, 1) => Equation::TwoComponentCamassaHolm,
            _ => Equation::MuTwoComponentCamassaHolm,
        }
    }

    /// Fourier symbol of `A` at integer mode `k`.
    pub fn symbol(&self, k: &[i64]) -> f64 {
        let k2: i64 = k.iter().map(|ki| ki * ki).sum();
        if k2 == 0 {
            f64::from(self.alpha + self.beta)
        } else {
            f64::from(self.beta) + 4.0 * PI * PI * k2 as f64
        }
    }
}

/// `A u`, componentwise.
pub fn apply_a(u: &Field, params: &ModelParams) -> Field {
    let mut spec = spectral::analyze_unchecked(u);
    spec.apply_symbol(|k| Complex64::new(params.symbol(k), 0.0));
    spectral::synthesize(&spec)
}

/// `A⁻¹ v`. For `A = −Δ` the mean of `v` must vanish; the result is the
/// representative with `w(0) = 0`.
pub fn invert_a(v: &Field, params: &ModelParams) -> Result<Field> {
    let spec = spectral::analyze(v)?;
    invert_a_spectrum(spec, params)
}

pub(crate) fn invert_a_spectrum(
    mut spec: spectral::Spectrum,
    params: &ModelParams,
) -> Result<Field> {
    if params.is_hunter_saxton() {
        let grid = spec.grid();
        let zero = vec![0i64; grid.dim()];
        let scale = spec
            .coeffs()
            .iter()
            .map(|z| z.norm())
            .fold(1.0f64, f64::max);
        for c in 0..spec.ncomp() {
            let m = spec.coeff(c, &zero).re;
            if m.abs() > HS_MEAN_TOLERANCE * scale {
                return Err(Error::NotInRange {
                    component: c,
                    mean: m,
                });
            }
        }
        spec.apply_symbol(|k| {
            if k.iter().all(|&ki| ki == 0) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / params.symbol(k), 0.0)
            }
        });
        let mut w = spectral::synthesize(&spec);
        for c in 0..w.ncomp() {
            let origin = w.component(c)[0];
            w.component_mut(c).iter_mut().for_each(|x| *x -= origin);
        }
        Ok(w)
    } else {
        spec.apply_symbol(|k| Complex64::new(1.0 / params.symbol(k), 0.0));
        Ok(spectral::synthesize(&spec))
    }
}

/// `𝔸 w`: `A` on the velocity block, identity on the density block.
pub fn apply_block(w: &Tangent, params: &ModelParams) -> Result<Tangent> {
    w.check(params)?;
    Ok(Tangent {
        u: apply_a(&w.u, params),
        rho: w.rho.clone(),
    })
}

pub fn invert_block(w: &Tangent, params: &ModelParams) -> Result<Tangent> {
    w.check(params)?;
    Ok(Tangent {
        u: invert_a(&w.u, params)?,
        rho: w.rho.clone(),
    })
}

/// `∫ u·𝔸v` via the multiplier route.
pub fn pairing(u: &Tangent, v: &Tangent, params: &ModelParams) -> Result<f64> {
    let av = apply_block(v, params)?;
    u.check(params)?;
    let mut total = spectral::inner(&u.u, &av.u)?;
    if let (Some(r), Some(e)) = (&u.rho, &av.rho) {
        total += spectral::inner(r, e)?;
    }
    Ok(total)
}
