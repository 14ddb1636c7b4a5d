//! Eulerian tangent vectors `w = (u, ρ)` and the Euler state with its
//! momentum `m = A u`.

use crate::error::{Error, Result};
use crate::inertia::{apply_a, ModelParams};
use crate::spectral::{Field, Grid};

/// Origin tolerance for the `H^s₀` representative in the Hunter–Saxton cells.
pub const HS_ORIGIN_TOLERANCE: f64 = 1e-9;

/// Element of the Lie algebra: velocity `u` and, when `γ = 1`, density `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub u: Field,
    pub rho: Option<Field>,
}

impl Tangent {
    pub fn new(u: Field, rho: Option<Field>) -> Self {
        Self { u, rho }
    }

    pub fn zeros(grid: Grid, params: &ModelParams) -> Self {
        let n = params.dim();
        Self {
            u: Field::zeros(grid, n),
            rho: params.has_density().then(|| Field::zeros(grid, n)),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    /// Shape check against the model: `n` velocity components on an
    /// `n`-dimensional grid, density present iff `γ = 1`.
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        let n = params.dim();
        let grid = self.u.grid();
        if grid.dim() != n {
            return Err(Error::GridMismatch);
        }
        if self.u.ncomp() != n {
            return Err(Error::ComponentMismatch {
                expected: n,
                found: self.u.ncomp(),
            });
        }
        match (&self.rho, params.has_density()) {
            (Some(r), true) => {
                if r.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                if r.ncomp() != n {
                    return Err(Error::ComponentMismatch {
                        expected: n,
                        found: r.ncomp(),
                    });
                }
                Ok(())
            }
            (None, true) => Err(Error::MissingDensity),
            (Some(_), false) => Err(Error::InadmissibleParameters(
                "density given but gamma = 0".into(),
            )),
            (None, false) => Ok(()),
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Tangent) {
        self.u.axpy(s, &other.u);
        if let (Some(r), Some(o)) = (self.rho.as_mut(), other.rho.as_ref()) {
            r.axpy(s, o);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: self.u.scaled(s),
            rho: self.rho.as_ref().map(|r| r.scaled(s)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.rho.as_ref().is_none_or(Field::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        let r = self.rho.as_ref().map_or(0.0, Field::max_abs);
        self.u.max_abs().max(r)
    }

    pub fn max_diff(&self, other: &Tangent) -> f64 {
        let r = match (&self.rho, &other.rho) {
            (Some(a), Some(b)) => a.max_diff(b),
            _ => 0.0,
        };
        self.u.max_diff(&other.u).max(r)
    }

    /// All `n` (or `2n`) components stacked into one field.
    pub fn stacked(&self) -> Field {
        match &self.rho {
            Some(r) => Field::stack(&[&self.u, r]).expect("same grid"),
            None => self.u.clone(),
        }
    }

    /// Subtracts `u(0)` from every velocity component.
    pub fn normalize_origin(&mut self) {
        for c in 0..self.u.ncomp() {
            let o = self.u.component(c)[0];
            self.u.component_mut(c).iter_mut().for_each(|x| *x -= o);
        }
    }

    /// Largest `|u_i(0)|`.
    pub fn origin_value(&self) -> f64 {
        (0..self.u.ncomp())
            .map(|c| self.u.component(c)[0].abs())
            .fold(0.0, f64::max)
    }
}

/// Eulerian state `(u, ρ)` with `m = A u` kept in sync with `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    w: Tangent,
    m: Field,
}

impl EulerState {
    pub fn new(u: Field, rho: Option<Field>, params: &ModelParams) -> Result<Self> {
        Self::from_tangent(Tangent::new(u, rho), params)
    }

    pub fn from_tangent(w: Tangent, params: &ModelParams) -> Result<Self> {
        w.check(params)?;
        if !w.is_finite() {
            return Err(Error::NonFinite);
        }
        if params.is_hunter_saxton() && w.origin_value() > HS_ORIGIN_TOLERANCE {
            return Err(Error::InadmissibleParameters(format!(
                "Hunter-Saxton state must vanish at the origin, |u(0)| = {:e}",
                w.origin_value()
            )));
        }
        let m = apply_a(&w.u, params);
        Ok(Self { w, m })
    }

    pub(crate) fn from_tangent_unchecked(w: Tangent, params: &ModelParams) -> Self {
        let m = apply_a(&w.u, params);
        Self { w, m }
    }

    pub fn u(&self) -> &Field {
        &self.w.u
    }

    pub fn rho(&self) -> Option<&Field> {
        self.w.rho.as_ref()
    }

    pub fn m(&self) -> &Field {
        &self.m
    }

    pub fn tangent(&self) -> &Tangent {
        &self.w
    }

    pub fn into_tangent(self) -> Tangent {
        self.w
    }

    pub fn grid(&self) -> Grid {
        self.w.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn state_checks_shape_and_origin() {
        let g = Grid::new(1, 16).unwrap();
        let ch2 = ModelParams::new(0, 1, 1, 1).unwrap();
        let u = Field::from_fn(g, 1, |x, _| (2.0 * PI * x[0]).sin());
        assert_eq!(
            EulerState::new(u.clone(), None, &ch2),
            Err(Error::MissingDensity)
        );
        let hs = ModelParams::new(0, 0, 0, 1).unwrap();
        let c = Field::from_fn(g, 1, |x, _| (2.0 * PI * x[0]).cos());
        assert!(EulerState::new(c, None, &hs).is_err());
        let s = EulerState::new(u.clone(), None, &hs).unwrap();
        assert!(s.m().max_diff(&u.scaled(4.0 * PI * PI)) < 1e-11);
    }
}
