//! The Kostant codifferential on `T*`- and `S²T*`-valued forms of degree ≤ 2.
//!
//! A one-form `φ` acts on `T*` by `φ·(σ, μ) = (0, σφ)` and on `S²T*` as a
//! derivation, `φ·(τ, ν, ρ) = (0, τφ, φ_aν_b + ν_aφ_b)`. With form indices
//! first, `∂*(φ⊗s) = φ·s` and `(∂*X)_a = Σ_c e^c·X_ca` in degree two.

use nalgebra::DMatrix;
use serde::Serialize;

use super::slots::{max_abs, S2Form, StdForm};
use crate::error::{Error, Result};

fn check_std(f: &StdForm) -> Result<()> {
    let n = f.dim;
    let k = f.degree as u32;
    if f.degree > 2 || f.top.len() != n.pow(k) || f.bottom.len() != n.pow(k + 1) {
        return Err(Error::shape(format!(
            "T*-valued form of degree {} has wrong slot sizes",
            f.degree
        )));
    }
    Ok(())
}

fn check_s2(f: &S2Form) -> Result<()> {
    let n = f.dim;
    let k = f.degree as u32;
    if f.degree > 2
        || f.top.len() != n.pow(k)
        || f.middle.len() != n.pow(k + 1)
        || f.bottom.len() != n.pow(k + 2)
    {
        return Err(Error::shape(format!(
            "S2T*-valued form of degree {} has wrong slot sizes",
            f.degree
        )));
    }
    Ok(())
}

/// `∂*` lowering the form degree by one.
pub fn kostant_codiff(f: &StdForm) -> Result<StdForm> {
    check_std(f)?;
    let n = f.dim;
    match f.degree {
        0 => Err(Error::invalid("codifferential of a degree-0 form")),
        1 => Ok(StdForm {
            degree: 0,
            dim: n,
            top: vec![0.0],
            bottom: f.top.clone(),
        }),
        _ => {
            let mut bottom = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    bottom[a * n + b] = f.top[b * n + a];
                }
            }
            Ok(StdForm {
                degree: 1,
                dim: n,
                top: vec![0.0; n],
                bottom,
            })
        }
    }
}

/// `∂*` on `S²T*`-valued forms.
pub fn kostant_codiff_s2(f: &S2Form) -> Result<S2Form> {
    check_s2(f)?;
    let n = f.dim;
    match f.degree {
        0 => Err(Error::invalid("codifferential of a degree-0 form")),
        1 => {
            let mut bottom = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    bottom[a * n + b] = f.middle[a * n + b] + f.middle[b * n + a];
                }
            }
            Ok(S2Form {
                degree: 0,
                dim: n,
                top: vec![0.0],
                middle: f.top.clone(),
                bottom,
            })
        }
        _ => {
            let mut middle = vec![0.0; n * n];
            let mut bottom = vec![0.0; n * n * n];
            for a in 0..n {
                for b in 0..n {
                    middle[a * n + b] = f.top[b * n + a];
                    for d in 0..n {
                        bottom[(a * n + b) * n + d] =
                            f.middle[(b * n + a) * n + d] + f.middle[(d * n + a) * n + b];
                    }
                }
            }
            Ok(S2Form {
                degree: 1,
                dim: n,
                top: vec![0.0; n],
                middle,
                bottom,
            })
        }
    }
}

fn skew_defect(n: usize, m: &[f64]) -> f64 {
    let mut w: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            w = w.max((m[a * n + b] + m[b * n + a]).abs());
        }
    }
    w
}

/// Largest entry of the total symmetrization of `C_abc`.
pub fn total_symmetrization_defect(n: usize, c: &[f64]) -> f64 {
    let mut w: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                let i = |x: usize, y: usize, z: usize| c[(x * n + y) * n + z];
                let s = i(a, b, d) + i(a, d, b) + i(b, a, d) + i(b, d, a) + i(d, a, b) + i(d, b, a);
                w = w.max((s / 6.0).abs());
            }
        }
    }
    w
}

/// `T*`-valued one-form in `ker ∂*`: top slot zero.
pub fn std_in_kernel(f: &StdForm, tol: f64) -> bool {
    f.degree == 1 && max_abs(&f.top) <= tol
}

/// `T*`-valued one-form in `im ∂*`: top slot zero, bottom slot skew.
pub fn std_in_image(f: &StdForm, tol: f64) -> bool {
    std_in_kernel(f, tol) && skew_defect(f.dim, &f.bottom) <= tol
}

/// `S²T*`-valued one-form in `ker ∂*`: top zero, middle skew.
pub fn s2_in_kernel(f: &S2Form, tol: f64) -> bool {
    f.degree == 1 && max_abs(&f.top) <= tol && skew_defect(f.dim, &f.middle) <= tol
}

/// `S²T*`-valued one-form in `im ∂*`: in the kernel, and the complete
/// symmetrization of the bottom slot vanishes.
pub fn s2_in_image(f: &S2Form, tol: f64) -> bool {
    s2_in_kernel(f, tol) && total_symmetrization_defect(f.dim, &f.bottom) <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ImageDimension {
    /// Numerical rank of `∂*` on two-forms.
    pub rank: usize,
    /// Dimension of the subspace the membership tests describe.
    pub expected: usize,
}

fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let big = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    sv.iter().filter(|s| **s > 1e-10 * big).count()
}

/// Basis of skew two-forms with values in a space of dimension `fiber`.
fn two_form_basis(n: usize, fiber: usize) -> Vec<(Vec<f64>, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut w = vec![0.0; n * n];
            w[a * n + b] = 1.0;
            w[b * n + a] = -1.0;
            for f in 0..fiber {
                out.push((w.clone(), f));
            }
        }
    }
    out
}

/// Rank of `∂*: Λ²⊗T* → T*N⊗T*` against `dim E_[ab]`.
pub fn std_image_dimension(n: usize) -> ImageDimension {
    let cols: Vec<Vec<f64>> = two_form_basis(n, 1 + n)
        .into_iter()
        .map(|(w, f)| {
            let mut top = vec![0.0; n * n];
            let mut bottom = vec![0.0; n * n * n];
            if f == 0 {
                top = w;
            } else {
                for k in 0..n * n {
                    bottom[k * n + f - 1] = w[k];
                }
            }
            let r = kostant_codiff(&StdForm {
                degree: 2,
                dim: n,
                top,
                bottom,
            })
            .unwrap();
            r.top.into_iter().chain(r.bottom).collect()
        })
        .collect();
    ImageDimension {
        rank: rank(&DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| {
            cols[j][i]
        })),
        expected: n * (n - 1) / 2,
    }
}

/// Rank of `∂*: Λ²⊗S²T* → T*N⊗S²T*` against `dim E_[ab] + dim F`, `F` the
/// kernel of the complete symmetrization on `E_a(bc)`.
pub fn s2_image_dimension(n: usize) -> ImageDimension {
    let sym_pairs: Vec<(usize, usize)> = (0..n).flat_map(|b| (b..n).map(move |c| (b, c))).collect();
    let fiber = 1 + n + sym_pairs.len();
    let cols: Vec<Vec<f64>> = two_form_basis(n, fiber)
        .into_iter()
        .map(|(w, f)| {
            let mut top = vec![0.0; n * n];
            let mut middle = vec![0.0; n * n * n];
            let mut bottom = vec![0.0; n * n * n * n];
            if f == 0 {
                top = w;
            } else if f <= n {
                for k in 0..n * n {
                    middle[k * n + f - 1] = w[k];
                }
            } else {
                let (b, c) = sym_pairs[f - 1 - n];
                for k in 0..n * n {
                    bottom[(k * n + b) * n + c] = w[k];
                    bottom[(k * n + c) * n + b] = w[k];
                }
            }
            let r = kostant_codiff_s2(&S2Form {
                degree: 2,
                dim: n,
                top,
                middle,
                bottom,
            })
            .unwrap();
            r.top.into_iter().chain(r.middle).chain(r.bottom).collect()
        })
        .collect();
    let sym2 = n * (n + 1) / 2;
    let sym3 = n * (n + 1) * (n + 2) / 6;
    ImageDimension {
        rank: rank(&DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| {
            cols[j][i]
        })),
        expected: n * (n - 1) / 2 + (n * sym2 - sym3),
    }
}
