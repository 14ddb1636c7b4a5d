//! Pointwise vector calculus on grid fields.
//!
//! Jacobians use the layout of [`spectral::gradient`]: component
//! `i * dim + j` holds `∂_j u_i`. With that convention `(∇u)·v` is the
//! directional derivative `Σ_j ∂_j u_i v_j` and `(∇u)ᵀ m` is `Σ_i ∂_j u_i m_i`.

use crate::spectral::{self, Field};

pub fn jacobian(u: &Field) -> Field {
    spectral::gradient(u)
}

/// `(∇a)·b` from a precomputed Jacobian of `a`.
pub fn directional(jac_a: &Field, b: &Field) -> Field {
    let grid = b.grid();
    let dim = grid.dim();
    let rows = jac_a.ncomp() / dim;
    assert_eq!(b.ncomp(), dim, "direction must have dim components");
    let n = grid.len();
    let mut out = Field::zeros(grid, rows);
    for i in 0..rows {
        let dst = out.component_mut(i);
        for j in 0..dim {
            let d = jac_a.component(i * dim + j);
            let bj = b.component(j);
            for p in 0..n {
                dst[p] += d[p] * bj[p];
            }
        }
    }
    out
}

/// `(∇a)·b` computing the Jacobian of `a` on the fly.
pub fn advect(a: &Field, b: &Field) -> Field {
    directional(&jacobian(a), b)
}

/// `(∇a)ᵀ m` from a precomputed Jacobian of `a`.
pub fn transpose_apply(jac_a: &Field, m: &Field) -> Field {
    let grid = m.grid();
    let dim = grid.dim();
    let rows = m.ncomp();
    assert_eq!(jac_a.ncomp(), rows * dim, "Jacobian/vector shape mismatch");
    let n = grid.len();
    let mut out = Field::zeros(grid, dim);
    for j in 0..dim {
        let dst = out.component_mut(j);
        for i in 0..rows {
            let d = jac_a.component(i * dim + j);
            let mi = m.component(i);
            for p in 0..n {
                dst[p] += d[p] * mi[p];
            }
        }
    }
    out
}

/// Trace of a square Jacobian.
pub fn divergence(jac: &Field) -> Field {
    let grid = jac.grid();
    let dim = grid.dim();
    let mut out = Field::zeros(grid, 1);
    for i in 0..dim {
        out.axpy(1.0, &jac.select(i * dim + i, 1));
    }
    out
}

/// Pointwise Euclidean dot product.
pub fn dot(a: &Field, b: &Field) -> Field {
    assert_eq!(a.ncomp(), b.ncomp());
    let mut out = Field::zeros(a.grid(), 1);
    for c in 0..a.ncomp() {
        let dst = out.component_mut(0);
        for ((d, x), y) in dst.iter_mut().zip(a.component(c)).zip(b.component(c)) {
            *d += x * y;
        }
    }
    out
}

/// Pointwise determinant of a square Jacobian-layout field.
pub fn determinant(jac: &Field) -> Vec<f64> {
    let grid = jac.grid();
    let dim = grid.dim();
    (0..grid.len())
        .map(|p| {
            let m: Vec<f64> = (0..dim * dim).map(|c| jac.component(c)[p]).collect();
            det_small(&m, dim)
        })
        .collect()
}

/// Determinant of a row-major `dim × dim` matrix by Gaussian elimination.
pub(crate) fn det_small(m: &[f64], dim: usize) -> f64 {
    match dim {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            let mut a = m.to_vec();
            let mut det = 1.0;
            for col in 0..dim {
                let pivot = (col..dim)
                    .max_by(|&r, &s| a[r * dim + col].abs().total_cmp(&a[s * dim + col].abs()))
                    .unwrap();
                if a[pivot * dim + col] == 0.0 {
                    return 0.0;
                }
                if pivot != col {
                    for k in 0..dim {
                        a.swap(pivot * dim + k, col * dim + k);
                    }
                    det = -det;
                }
                let d = a[col * dim + col];
                det *= d;
                for r in col + 1..dim {
                    let f = a[r * dim + col] / d;
                    for k in col..dim {
                        a[r * dim + k] -= f * a[col * dim + k];
                    }
                }
            }
            det
        }
    }
}

/// Inverse of a row-major `dim × dim` matrix; `None` when singular.
pub(crate) fn inverse_small(m: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv: Vec<f64> = (0..dim * dim)
        .map(|i| if i / dim == i % dim { 1.0 } else { 0.0 })
        .collect();
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&r, &s| a[r * dim + col].abs().total_cmp(&a[s * dim + col].abs()))?;
        if a[pivot * dim + col] == 0.0 {
            return None;
        }
        for k in 0..dim {
            a.swap(pivot * dim + k, col * dim + k);
            inv.swap(pivot * dim + k, col * dim + k);
        }
        let d = a[col * dim + col];
        for k in 0..dim {
            a[col * dim + k] /= d;
            inv[col * dim + k] /= d;
        }
        for r in 0..dim {
            if r != col {
                let f = a[r * dim + col];
                for k in 0..dim {
                    a[r * dim + k] -= f * a[col * dim + k];
                    inv[r * dim + k] -= f * inv[col * dim + k];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    #[test]
    fn jacobian_layout_and_contractions() {
        let g = Grid::new(2, 16).unwrap();
        // u = (sin 2πx, cos 2πy)
        let u = Field::from_fn(g, 2, |x, c| {
            if c == 0 {
                (2.0 * PI * x[0]).sin()
            } else {
                (2.0 * PI * x[1]).cos()
            }
        });
        let v = Field::constant(g, &[1.0, 2.0]);
        let adv = advect(&u, &v);
        let expected = Field::from_fn(g, 2, |x, c| {
            if c == 0 {
                2.0 * PI * (2.0 * PI * x[0]).cos()
            } else {
                -4.0 * PI * (2.0 * PI * x[1]).sin()
            }
        });
        assert!(adv.max_diff(&expected) < 1e-12);

        let jt = transpose_apply(&jacobian(&u), &v);
        assert!(jt.max_diff(&expected) < 1e-12);

        let div = divergence(&jacobian(&u));
        let exp_div = Field::from_fn(g, 1, |x, _| {
            2.0 * PI * (2.0 * PI * x[0]).cos() - 2.0 * PI * (2.0 * PI * x[1]).sin()
        });
        assert!(div.max_diff(&exp_div) < 1e-12);
    }

    #[test]
    fn small_matrix_helpers() {
        let m = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        assert!((det_small(&m, 3) - 18.0).abs() < 1e-12);
        let inv = inverse_small(&m, 3).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let s: f64 = (0..3).map(|k| m[r * 3 + k] * inv[k * 3 + c]).sum();
                assert!((s - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(inverse_small(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
