//! Dense arithmetic in Cl_n and its complexification, with the negative
//! definite signature e_i * e_i = -1 and orthonormal generators e_1..e_n.
//!
//! Blades are indexed by bitmask: bit i set means the factor e_{i+1} is
//! present, factors in ascending index order. A multivector is a dense
//! complex coefficient vector over all 2^n blades.

use std::fmt::Write as _;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hard cap on the algebra dimension; 4096 dense coefficients at n = 12.
pub const MAX_DIM: u32 = 12;

/// Tolerance used when tagging a multivector as "real" or "vector".
pub const TOL_ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BladeIndex {
    pub mask: u16,
}

impl BladeIndex {
    pub fn grade(self) -> u32 {
        self.mask.count_ones()
    }

    /// Canonical blade name: `1`, `e1`, `e1e2`, ...
    pub fn name(self) -> String {
        if self.mask == 0 {
            return "1".to_string();
        }
        let mut s = String::new();
        for i in 0..16 {
            if self.mask >> i & 1 == 1 {
                let _ = write!(s, "e{}", i + 1);
            }
        }
        s
    }

    pub fn parse(name: &str) -> Result<Self> {
        if name == "1" {
            return Ok(BladeIndex { mask: 0 });
        }
        let mut mask: u16 = 0;
        let mut last = 0u32;
        for part in name.split('e').skip(1) {
            let idx: u32 = part
                .parse()
                .map_err(|_| Error::Parse(format!("bad blade name {name:?}")))?;
            if idx == 0 || idx > 16 || idx <= last {
                return Err(Error::Parse(format!("bad blade name {name:?}")));
            }
            mask |= 1 << (idx - 1);
            last = idx;
        }
        if !name.starts_with('e') || mask == 0 {
            return Err(Error::Parse(format!("bad blade name {name:?}")));
        }
        Ok(BladeIndex { mask })
    }
}

fn sign_on_the_fly(a: u16, b: u16) -> i32 {
    // Transpositions needed to interleave the factors of b into a, plus one
    // factor -1 per contracted generator (e_i^2 = -1).
    let mut swaps = 0u32;
    for i in 0..16 {
        if b >> i & 1 == 1 {
            swaps += (a >> (i + 1)).count_ones();
        }
    }
    let contractions = (a & b).count_ones();
    if (swaps + contractions) % 2 == 0 {
        1
    } else {
        -1
    }
}

fn sign_table(n: u32) -> &'static [i8] {
    static TABLES: [OnceLock<Vec<i8>>; 9] = [const { OnceLock::new() }; 9];
    TABLES[n as usize].get_or_init(|| {
        let m = 1usize << n;
        let mut t = vec![0i8; m * m];
        for a in 0..m {
            for b in 0..m {
                t[a * m + b] = sign_on_the_fly(a as u16, b as u16) as i8;
            }
        }
        t
    })
}

/// Product of two basis blades: the result blade is `a XOR b`, the sign comes
/// from transposition counting and the signature.
pub fn blade_product(a: BladeIndex, b: BladeIndex, dim: u32) -> Result<(BladeIndex, i32)> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::DimensionRange(dim));
    }
    for m in [a.mask, b.mask] {
        if m >> dim != 0 {
            return Err(Error::DimensionOverflow { mask: m, dim });
        }
    }
    let sign = if dim <= 8 {
        sign_table(dim)[(a.mask as usize) << dim | b.mask as usize] as i32
    } else {
        sign_on_the_fly(a.mask, b.mask)
    };
    Ok((BladeIndex { mask: a.mask ^ b.mask }, sign))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multivector {
    dim: u32,
    coeffs: Vec<C64>,
}

impl Multivector {
    pub fn zero(dim: u32) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension out of range");
        Multivector {
            dim,
            coeffs: vec![C64::new(0.0, 0.0); 1 << dim],
        }
    }

    pub fn scalar(dim: u32, value: C64) -> Self {
        let mut m = Self::zero(dim);
        m.coeffs[0] = value;
        m
    }

    pub fn one(dim: u32) -> Self {
        Self::scalar(dim, C64::new(1.0, 0.0))
    }

    /// The generator e_{i+1} (0-based index).
    pub fn basis_vector(dim: u32, i: u32) -> Self {
        assert!(i < dim);
        let mut m = Self::zero(dim);
        m.coeffs[1 << i] = C64::new(1.0, 0.0);
        m
    }

    pub fn basis_blade(dim: u32, mask: u16) -> Self {
        assert!(mask >> dim == 0);
        let mut m = Self::zero(dim);
        m.coeffs[mask as usize] = C64::new(1.0, 0.0);
        m
    }

    pub fn from_coeffs(dim: u32, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), 1 << dim);
        Multivector { dim, coeffs }
    }

    /// Grade-1 element with the given real coordinates.
    pub fn from_real_vector(dim: u32, v: &[f64]) -> Self {
        assert_eq!(v.len(), dim as usize);
        let mut m = Self::zero(dim);
        for (i, &x) in v.iter().enumerate() {
            m.coeffs[1 << i] = C64::new(x, 0.0);
        }
        m
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u16) -> C64 {
        self.coeffs[mask as usize]
    }

    pub fn set(&mut self, mask: u16, value: C64) {
        self.coeffs[mask as usize] = value;
    }

    pub fn scale(&self, s: C64) -> Self {
        Multivector {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Multivector {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    /// Geometric product. Both operands must share the dimension.
    pub fn gp(&self, other: &Multivector) -> Result<Multivector> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self.gp_unchecked(other))
    }

    fn gp_unchecked(&self, other: &Multivector) -> Multivector {
        let n = self.dim;
        let m = 1usize << n;
        let mut out = vec![C64::new(0.0, 0.0); m];
        if n <= 8 {
            let table = sign_table(n);
            for a in 0..m {
                let ca = self.coeffs[a];
                if ca.norm_sqr() == 0.0 {
                    continue;
                }
                let row = &table[a << n..(a + 1) << n];
                for b in 0..m {
                    let cb = other.coeffs[b];
                    if cb.norm_sqr() == 0.0 {
                        continue;
                    }
                    let prod = ca * cb;
                    if row[b] > 0 {
                        out[a ^ b] += prod;
                    } else {
                        out[a ^ b] -= prod;
                    }
                }
            }
        } else {
            for a in 0..m {
                let ca = self.coeffs[a];
                if ca.norm_sqr() == 0.0 {
                    continue;
                }
                for b in 0..m {
                    let cb = other.coeffs[b];
                    if cb.norm_sqr() == 0.0 {
                        continue;
                    }
                    let s = sign_on_the_fly(a as u16, b as u16) as f64;
                    out[a ^ b] += ca * cb * s;
                }
            }
        }
        Multivector { dim: n, coeffs: out }
    }

    /// The antiautomorphism τ: on a grade-k blade with coefficient a it gives
    /// (-1)^{k(k+1)/2} conj(a) times the same blade.
    pub fn tau(&self) -> Multivector {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, c)| {
                let k = (mask as u16).count_ones();
                let sign = if (k * (k + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                c.conj() * sign
            })
            .collect();
        Multivector { dim: self.dim, coeffs }
    }

    pub fn grade_project(&self, k: u32) -> Multivector {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, c)| {
                if (mask as u16).count_ones() == k {
                    *c
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        Multivector { dim: self.dim, coeffs }
    }

    /// Real grade-1 coordinates plus the sup-norm of everything discarded
    /// (imaginary parts and other grades).
    pub fn vector_part(&self) -> (Vec<f64>, f64) {
        let mut v = vec![0.0; self.dim as usize];
        let mut residual = 0.0f64;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if (mask as u16).count_ones() == 1 {
                v[mask.trailing_zeros() as usize] = c.re;
                residual = residual.max(c.im.abs());
            } else {
                residual = residual.max(c.norm());
            }
        }
        (v, residual)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.im.abs() <= tol)
    }

    pub fn is_vector(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(mask, c)| (mask as u16).count_ones() == 1 || c.norm() <= tol)
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Frobenius norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Text serialization: one `<blade> <re> <im>` line per nonzero blade in
    /// canonical order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (mask, c) in self.coeffs.iter().enumerate() {
            if c.re != 0.0 || c.im != 0.0 {
                let _ = writeln!(
                    s,
                    "{} {:.17e} {:.17e}",
                    BladeIndex { mask: mask as u16 }.name(),
                    c.re,
                    c.im
                );
            }
        }
        s
    }

    pub fn from_text(dim: u32, text: &str) -> Result<Multivector> {
        let mut m = Multivector::zero(dim);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (name, re, im) = match (it.next(), it.next(), it.next(), it.next()) {
                (Some(n), Some(re), Some(im), None) => (n, re, im),
                _ => return Err(Error::Parse(format!("bad multivector line {line:?}"))),
            };
            let blade = BladeIndex::parse(name)?;
            if blade.mask >> dim != 0 {
                return Err(Error::DimensionOverflow { mask: blade.mask, dim });
            }
            let re: f64 = re
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in {line:?}")))?;
            let im: f64 = im
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in {line:?}")))?;
            m.coeffs[blade.mask as usize] = C64::new(re, im);
        }
        Ok(m)
    }
}

impl std::ops::Add for &Multivector {
    type Output = Multivector;
    fn add(self, rhs: &Multivector) -> Multivector {
        assert_eq!(self.dim, rhs.dim);
        Multivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &Multivector {
    type Output = Multivector;
    fn sub(self, rhs: &Multivector) -> Multivector {
        assert_eq!(self.dim, rhs.dim);
        Multivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl std::ops::Mul for &Multivector {
    type Output = Multivector;
    fn mul(self, rhs: &Multivector) -> Multivector {
        assert_eq!(self.dim, rhs.dim);
        self.gp_unchecked(rhs)
    }
}

impl std::ops::Neg for &Multivector {
    type Output = Multivector;
    fn neg(self) -> Multivector {
        self.scale(C64::new(-1.0, 0.0))
    }
}

pub fn geometric_product(x: &Multivector, y: &Multivector) -> Result<Multivector> {
    x.gp(y)
}

pub fn tau(x: &Multivector) -> Multivector {
    x.tau()
}

pub fn grade_project(x: &Multivector, k: u32) -> Multivector {
    x.grade_project(k)
}

/// Counts and dimensions of irreducible modules of Cl_n and its
/// complexification, per the standard classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgebraInfo {
    pub n: u32,
    pub nu_real: u64,
    pub d_real: u64,
    pub nu_complex: u64,
    pub d_complex: u64,
}

// Rows n = 1..8 of the classification table: (nu, d, nu_c, d_c).
const TABLE: [(u64, u64, u64, u64); 8] = [
    (1, 2, 2, 1),
    (1, 4, 1, 2),
    (2, 4, 2, 2),
    (1, 8, 1, 4),
    (1, 8, 2, 4),
    (1, 8, 1, 8),
    (2, 8, 2, 8),
    (1, 16, 1, 16),
];

/// Table values for n <= 8; the mod-8 (real) and mod-2 (complex) periodicity
/// rules above that.
pub fn algebra_info(n: u32) -> AlgebraInfo {
    assert!(n >= 1);
    let (nu_real, d_real) = {
        let m = ((n - 1) % 8 + 1) as usize;
        let k = (n - m as u32) / 8;
        let (nu, d, _, _) = TABLE[m - 1];
        (nu, d << (4 * k))
    };
    let (nu_complex, d_complex) = {
        let m = if n % 2 == 0 { 2 } else { 1 } as usize;
        let k = (n - m as u32) / 2;
        let (_, _, nu_c, d_c) = TABLE[m - 1];
        (nu_c, d_c << k)
    };
    AlgebraInfo {
        n,
        nu_real,
        d_real,
        nu_complex,
        d_complex,
    }
}
