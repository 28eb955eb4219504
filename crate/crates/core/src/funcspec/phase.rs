//! Exact arithmetic on `{0} ∪ {roots of unity of order dividing M}`.
//!
//! A value is an exponent `e` in `0..M` standing for `exp(2πi e / M)`, or the
//! sentinel [`ZERO`]. Products are exponent sums, so finite-range functions are
//! sieved without rounding and mapped to complex numbers once per letter.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::arith::gcd;

/// Sentinel exponent for the value 0.
pub const ZERO: u32 = u32::MAX;

/// Largest common order handled exactly; larger orders fall back to complex
/// arithmetic.
pub const MAX_ORDER: u32 = 1 << 16;

/// Largest root-of-unity order recognised when snapping user-supplied values.
pub const MAX_SNAP_ORDER: u32 = 360;

#[inline]
pub fn mul(a: u32, b: u32, order: u32) -> u32 {
    if a == ZERO || b == ZERO {
        ZERO
    } else {
        ((a as u64 + b as u64) % order as u64) as u32
    }
}

#[inline]
pub fn conj(a: u32, order: u32) -> u32 {
    if a == ZERO {
        ZERO
    } else {
        (order - a) % order
    }
}

#[inline]
pub fn pow(a: u32, k: u32, order: u32) -> u32 {
    if a == ZERO {
        if k == 0 {
            0
        } else {
            ZERO
        }
    } else {
        ((a as u64 * k as u64) % order as u64) as u32
    }
}

/// Canonical complex value of `exp(2πi e / m)`; equal fractions give
/// bit-identical results and the quarter turns are exact.
pub fn root_of_unity(e: u32, m: u32) -> Complex64 {
    if e == ZERO {
        return Complex64::new(0.0, 0.0);
    }
    let e = e % m;
    let g = gcd(e as u64, m as u64).max(1) as u32;
    let (e, m) = (e / g, m / g);
    match (e, m) {
        (0, _) => Complex64::new(1.0, 0.0),
        (1, 2) => Complex64::new(-1.0, 0.0),
        (1, 4) => Complex64::new(0.0, 1.0),
        (3, 4) => Complex64::new(0.0, -1.0),
        _ => {
            let angle = TAU * e as f64 / m as f64;
            Complex64::new(angle.cos(), angle.sin())
        }
    }
}

/// A root of unity `(e, m)` or zero recognised in a user value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Snapped {
    Zero,
    Root { e: u32, m: u32 },
}

/// Recognises `v` as 0 or a root of unity of order at most [`MAX_SNAP_ORDER`].
pub fn snap(v: Complex64) -> Option<Snapped> {
    if v.re == 0.0 && v.im == 0.0 {
        return Some(Snapped::Zero);
    }
    if (v.norm() - 1.0).abs() > 1e-12 {
        return None;
    }
    let turn = v.im.atan2(v.re) / TAU;
    let turn = if turn < 0.0 { turn + 1.0 } else { turn };
    (1..=MAX_SNAP_ORDER).find_map(|m| {
        let scaled = turn * m as f64;
        let e = scaled.round();
        ((scaled - e).abs() <= 1e-9 * m as f64).then(|| Snapped::Root {
            e: (e as u32) % m,
            m,
        })
    })
}

/// Closure of a set of exponents under multiplication (exponent addition),
/// always containing the identity.
pub fn monoid_closure(generators: &BTreeSet<u32>, order: u32) -> BTreeSet<u32> {
    let gens: Vec<u32> = generators.iter().copied().filter(|&g| g != ZERO).collect();
    let mut seen = BTreeSet::from([0u32]);
    let mut frontier = vec![0u32];
    while let Some(x) = frontier.pop() {
        for &g in &gens {
            let y = mul(x, g, order);
            if seen.insert(y) {
                frontier.push(y);
            }
        }
    }
    if generators.contains(&ZERO) {
        seen.insert(ZERO);
    }
    seen
}

/// Pairwise products of two value sets.
pub fn product_set(a: &BTreeSet<u32>, b: &BTreeSet<u32>, order: u32) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for &x in a {
        for &y in b {
            out.insert(mul(x, y, order));
        }
    }
    out
}
