//! Complex numbers at 160-bit precision for the closed form.
//!
//! In SI units the hbar lambda part of the characteristic roots sits ~12
//! decades below the classical part, and the spread depends only on it.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::params::Complex;

pub const PREC: u32 = 160;

#[derive(Debug, Clone, PartialEq)]
pub struct Hp(rug::Complex);

impl Hp {
    pub fn new(re: f64, im: f64) -> Self {
        Hp(rug::Complex::with_val(PREC, (re, im)))
    }

    pub fn real(re: f64) -> Self {
        Self::new(re, 0.0)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn one() -> Self {
        Self::new(1.0, 0.0)
    }

    pub fn from_c(c: Complex) -> Self {
        Self::new(c.re, c.im)
    }

    pub fn to_c(&self) -> Complex {
        Complex::new(self.0.real().to_f64(), self.0.imag().to_f64())
    }

    pub fn re(&self) -> f64 {
        self.0.real().to_f64()
    }

    pub fn norm(&self) -> f64 {
        rug::Float::with_val(PREC, self.0.abs_ref()).to_f64()
    }

    pub fn is_finite(&self) -> bool {
        self.0.real().is_finite() && self.0.imag().is_finite()
    }

    pub fn exp(&self) -> Self {
        Hp(self.0.clone().exp())
    }

    /// Principal root (Re >= 0).
    pub fn sqrt(&self) -> Self {
        Hp(self.0.clone().sqrt())
    }

    pub fn cosh(&self) -> Self {
        Hp(self.0.clone().cosh())
    }

    pub fn sinh(&self) -> Self {
        Hp(self.0.clone().sinh())
    }

    pub fn powu(&self, n: u32) -> Self {
        let mut out = Hp::one();
        for _ in 0..n {
            out *= self;
        }
        out
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident) => {
        impl $tr<&Hp> for &Hp {
            type Output = Hp;
            fn $f(self, rhs: &Hp) -> Hp {
                Hp(rug::Complex::with_val(PREC, (&self.0).$f(&rhs.0)))
            }
        }
        impl $tr<Hp> for Hp {
            type Output = Hp;
            fn $f(self, rhs: Hp) -> Hp {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Hp> for Hp {
            type Output = Hp;
            fn $f(self, rhs: &Hp) -> Hp {
                (&self).$f(rhs)
            }
        }
        impl $tr<Hp> for &Hp {
            type Output = Hp;
            fn $f(self, rhs: Hp) -> Hp {
                self.$f(&rhs)
            }
        }
        impl $tr<f64> for &Hp {
            type Output = Hp;
            fn $f(self, rhs: f64) -> Hp {
                Hp(rug::Complex::with_val(PREC, (&self.0).$f(rhs)))
            }
        }
        impl $tr<f64> for Hp {
            type Output = Hp;
            fn $f(self, rhs: f64) -> Hp {
                (&self).$f(rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0)
    }
}

impl Neg for &Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0.clone())
    }
}

impl AddAssign<&Hp> for Hp {
    fn add_assign(&mut self, rhs: &Hp) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Hp> for Hp {
    fn add_assign(&mut self, rhs: Hp) {
        self.0 += rhs.0;
    }
}

impl SubAssign<Hp> for Hp {
    fn sub_assign(&mut self, rhs: Hp) {
        self.0 -= rhs.0;
    }
}

impl MulAssign<&Hp> for Hp {
    fn mul_assign(&mut self, rhs: &Hp) {
        self.0 *= &rhs.0;
    }
}

impl MulAssign<f64> for Hp {
    fn mul_assign(&mut self, rhs: f64) {
        self.0 *= rhs;
    }
}

impl Sum for Hp {
    fn sum<I: Iterator<Item = Hp>>(iter: I) -> Hp {
        iter.fold(Hp::zero(), |acc, z| acc + z)
    }
}

/// Solves the n x n system by Gauss-Jordan with complete pivoting; also
/// returns the 1-norm condition number.
pub fn solve_dense(a: &[Vec<Hp>], b: &[Hp]) -> Option<(Vec<Hp>, f64)> {
    let n = b.len();
    let norm1 = |m: &[Vec<Hp>]| (0..n).map(|j| (0..n).map(|i| m[i][j].norm()).sum::<f64>()).fold(0.0, f64::max);
    let anorm = norm1(a);
    // augmented [A | I | b]
    let mut m: Vec<Vec<Hp>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..n).map(|j| if i == j { Hp::one() } else { Hp::zero() }));
            row.push(b[i].clone());
            row
        })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = m[i][j].norm();
                if v > best {
                    (pi, pj, best) = (i, j, v);
                }
            }
        }
        if !(best > 0.0) {
            return None;
        }
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        let piv = m[k][k].clone();
        for j in 0..m[k].len() {
            m[k][j] = &m[k][j] / &piv;
        }
        for i in 0..n {
            if i != k {
                let f = m[i][k].clone();
                for j in 0..m[i].len() {
                    let sub = &f * &m[k][j];
                    m[i][j] -= sub;
                }
            }
        }
    }
    // row k now holds unknown perm[k]
    let mut x = vec![Hp::zero(); n];
    let mut inv = vec![vec![Hp::zero(); n]; n];
    for k in 0..n {
        x[perm[k]] = m[k][2 * n].clone();
        for j in 0..n {
            inv[perm[k]][j] = m[k][n + j].clone();
        }
    }
    Some((x, anorm * norm1(&inv)))
}
