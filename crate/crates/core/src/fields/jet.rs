//! Truncated Taylor jets: a value together with all partial derivatives up to
//! order three, closed under the ring operations and smooth unary maps.
//!
//! Mixed partials are stored in full (not packed) arrays; every operation
//! preserves their symmetry. Combining jets of different order yields a jet of
//! the smaller order, and [`Jet::partial`] lowers the order by one, so derived
//! quantities (Christoffel symbols, curvature) automatically carry exactly as
//! many derivatives as the input data supports.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    dim: usize,
    order: usize,
    value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Jet {
    fn zeros(dim: usize, order: usize, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} > {MAX_ORDER}");
        Jet {
            dim,
            order,
            value,
            d1: if order >= 1 {
                vec![0.0; dim]
            } else {
                Vec::new()
            },
            d2: if order >= 2 {
                vec![0.0; dim * dim]
            } else {
                Vec::new()
            },
            d3: if order >= 3 {
                vec![0.0; dim * dim * dim]
            } else {
                Vec::new()
            },
        }
    }

    pub fn constant(dim: usize, order: usize, value: f64) -> Self {
        Self::zeros(dim, order, value)
    }

    /// The coordinate function `x_index` evaluated at `value`.
    pub fn variable(dim: usize, order: usize, index: usize, value: f64) -> Self {
        let mut j = Self::zeros(dim, order, value);
        if order >= 1 {
            j.d1[index] = 1.0;
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.d1[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.dim + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[(i * self.dim + j) * self.dim + k]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.d1
    }

    pub fn hessian(&self) -> &[f64] {
        &self.d2
    }

    pub fn third(&self) -> &[f64] {
        &self.d3
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        let mut j = self.clone();
        j.order = order;
        if order < 3 {
            j.d3.clear();
        }
        if order < 2 {
            j.d2.clear();
        }
        if order < 1 {
            j.d1.clear();
        }
        j
    }

    /// `∂_a` of the jet; the result has one order less.
    pub fn partial(&self, a: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.dim;
        let mut j = Self::zeros(n, self.order - 1, self.d1[a]);
        if j.order >= 1 {
            j.d1.copy_from_slice(&self.d2[a * n..(a + 1) * n]);
        }
        if j.order >= 2 {
            j.d2.copy_from_slice(&self.d3[a * n * n..(a + 1) * n * n]);
        }
        j
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            dim: self.dim,
            order: self.order,
            value: self.value * c,
            d1: self.d1.iter().map(|x| x * c).collect(),
            d2: self.d2.iter().map(|x| x * c).collect(),
            d3: self.d3.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.value += c;
        j
    }

    fn linear(&self, other: &Jet, sign: f64) -> Jet {
        debug_assert_eq!(self.dim, other.dim);
        let order = self.order.min(other.order);
        let zip = |a: &[f64], b: &[f64], keep: bool| -> Vec<f64> {
            if keep {
                a.iter().zip(b).map(|(x, y)| x + sign * y).collect()
            } else {
                Vec::new()
            }
        };
        Jet {
            dim: self.dim,
            order,
            value: self.value + sign * other.value,
            d1: zip(&self.d1, &other.d1, order >= 1),
            d2: zip(&self.d2, &other.d2, order >= 2),
            d3: zip(&self.d3, &other.d3, order >= 3),
        }
    }

    fn product(&self, v: &Jet) -> Jet {
        let u = self;
        debug_assert_eq!(u.dim, v.dim);
        let n = u.dim;
        let order = u.order.min(v.order);
        let mut r = Self::zeros(n, order, u.value * v.value);
        if order >= 1 {
            for i in 0..n {
                r.d1[i] = u.d1[i] * v.value + u.value * v.d1[i];
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    r.d2[i * n + j] = u.d2[i * n + j] * v.value
                        + u.d1[i] * v.d1[j]
                        + u.d1[j] * v.d1[i]
                        + u.value * v.d2[i * n + j];
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let ijk = (i * n + j) * n + k;
                        r.d3[ijk] = u.d3[ijk] * v.value
                            + u.d2[i * n + j] * v.d1[k]
                            + u.d2[i * n + k] * v.d1[j]
                            + u.d2[j * n + k] * v.d1[i]
                            + u.d1[i] * v.d2[j * n + k]
                            + u.d1[j] * v.d2[i * n + k]
                            + u.d1[k] * v.d2[i * n + j]
                            + u.value * v.d3[ijk];
                    }
                }
            }
        }
        r
    }

    /// `f ∘ self`, given `f` and its first three derivatives at `self.value()`.
    pub fn compose(&self, f: [f64; 4]) -> Jet {
        let u = self;
        let n = u.dim;
        let mut r = Self::zeros(n, u.order, f[0]);
        if u.order >= 1 {
            for i in 0..n {
                r.d1[i] = f[1] * u.d1[i];
            }
        }
        if u.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    r.d2[i * n + j] = f[2] * u.d1[i] * u.d1[j] + f[1] * u.d2[i * n + j];
                }
            }
        }
        if u.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let ijk = (i * n + j) * n + k;
                        r.d3[ijk] = f[3] * u.d1[i] * u.d1[j] * u.d1[k]
                            + f[2]
                                * (u.d2[i * n + j] * u.d1[k]
                                    + u.d2[i * n + k] * u.d1[j]
                                    + u.d2[j * n + k] * u.d1[i])
                            + f[1] * u.d3[ijk];
                    }
                }
            }
        }
        r
    }

    pub fn recip(&self) -> Jet {
        let x = self.value;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Jet {
        let x = self.value;
        let r = 1.0 / x;
        self.compose([x.ln(), r, -r * r, 2.0 * r * r * r])
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    /// `self^p` for real `p`; integer exponents are evaluated with `powi` so
    /// negative bases are allowed there.
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.value;
        let mut f = [0.0; 4];
        let mut coeff = 1.0;
        for (k, slot) in f.iter_mut().enumerate() {
            if coeff == 0.0 {
                break;
            }
            let e = p - k as f64;
            *slot = coeff * pow_real(x, e);
            coeff *= e;
        }
        self.compose(f)
    }

    pub fn powi(&self, p: i32) -> Jet {
        self.powf(p as f64)
    }
}

fn pow_real(x: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() < i32::MAX as f64 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.linear(rhs, 1.0)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.linear(rhs, -1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of an iterator of jets; `None` for an empty iterator.
pub fn sum<'a, I: IntoIterator<Item = &'a Jet>>(iter: I) -> Option<Jet> {
    let mut it = iter.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, j| &acc + j))
}
