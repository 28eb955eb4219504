//! Dirichlet characters in a fixed enumeration of the character group.
//!
//! `(ℤ/qℤ)*` is split by CRT into prime-power parts. An odd prime power `p^e`
//! contributes one cyclic factor generated by its smallest primitive root;
//! `4` contributes `{±1}`; `2^k` with `k ≥ 3` contributes the two factors
//! generated by `-1` and `5`. Factors are ordered `-1`, `5`, then odd primes
//! ascending. A character index is read as mixed-radix digits over the factor
//! orders, least significant first, so index 0 is the principal character.

use num_complex::Complex64;

use super::phase::{self, ZERO};
use crate::arith::{self, gcd, lcm};
use crate::error::{Error, Result};

/// Largest modulus for which a character table is built.
pub const MAX_MODULUS: u64 = 1 << 24;

struct CyclicFactor {
    order: u32,
    /// Discrete log of each residue modulo `modulus`, [`ZERO`] for non-units.
    modulus: u64,
    dlog: Vec<u32>,
}

fn cyclic_factors(q: u64) -> Vec<CyclicFactor> {
    let mut factors = Vec::new();
    let mut odd = Vec::new();
    for (p, e) in arith::factorize(q, arith::DEFAULT_TRIAL_BOUND).expect("modulus is bounded") {
        if p == 2 {
            let m = 1u64 << e;
            if e >= 2 {
                let dlog = (0..m)
                    .map(|r| match r % 4 {
                        1 => 0,
                        3 => 1,
                        _ => ZERO,
                    })
                    .collect();
                factors.push(CyclicFactor {
                    order: 2,
                    modulus: m,
                    dlog,
                });
            }
            if e >= 3 {
                let order = (m / 4) as u32;
                let mut power_log = vec![ZERO; m as usize];
                let mut x = 1u64;
                for j in 0..order {
                    power_log[x as usize] = j;
                    x = x * 5 % m;
                }
                let dlog = (0..m)
                    .map(|r| {
                        if r % 2 == 0 {
                            ZERO
                        } else {
                            let unsigned = if r % 4 == 1 { r } else { m - r };
                            power_log[unsigned as usize]
                        }
                    })
                    .collect();
                factors.push(CyclicFactor {
                    order,
                    modulus: m,
                    dlog,
                });
            }
        } else {
            odd.push((p, e));
        }
    }
    for (p, e) in odd {
        let m = p.pow(e);
        let order = m / p * (p - 1);
        let g = arith::primitive_root_odd_prime_power(p, e);
        let mut dlog = vec![ZERO; m as usize];
        let mut x = 1u64;
        for j in 0..order {
            dlog[x as usize] = j as u32;
            x = x * g % m;
        }
        factors.push(CyclicFactor {
            order: order as u32,
            modulus: m,
            dlog,
        });
    }
    factors
}

/// Values of one character modulo `q` over a full residue system, stored as
/// exponents of `exp(2πi / order)`.
#[derive(Clone, Debug)]
pub struct CharacterTable {
    modulus: u64,
    index: u64,
    order: u32,
    exps: Vec<u32>,
}

impl CharacterTable {
    pub fn new(q: u64, index: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("character modulus must be >= 1".into()));
        }
        if q > MAX_MODULUS {
            return Err(Error::InvalidArgument(format!(
                "character modulus {q} exceeds {MAX_MODULUS}"
            )));
        }
        let factors = cyclic_factors(q);
        let group_order: u64 = factors.iter().map(|f| f.order as u64).product();
        if index >= group_order {
            return Err(Error::InvalidArgument(format!(
                "character index {index} out of range: there are {group_order} characters mod {q}"
            )));
        }
        let order = factors
            .iter()
            .fold(1u64, |acc, f| lcm(acc, f.order as u64)) as u32;
        let mut digits = Vec::with_capacity(factors.len());
        let mut rest = index;
        for f in &factors {
            digits.push(rest % f.order as u64);
            rest /= f.order as u64;
        }
        let exps = (0..q)
            .map(|r| {
                if gcd(r, q) != 1 {
                    return ZERO;
                }
                let mut e = 0u64;
                for (f, &a) in factors.iter().zip(&digits) {
                    let d = f.dlog[(r % f.modulus) as usize] as u64;
                    e += a * d % f.order as u64 * (order as u64 / f.order as u64);
                }
                (e % order as u64) as u32
            })
            .collect();
        Ok(Self {
            modulus: q,
            index,
            order,
            exps,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Common order `M` of the stored exponents.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Exponent of `χ(n)` in units of `2π/M`, [`ZERO`] when `gcd(n, q) > 1`.
    #[inline]
    pub fn exponent(&self, n: u64) -> u32 {
        self.exps[(n % self.modulus) as usize]
    }

    #[inline]
    pub fn value(&self, n: u64) -> Complex64 {
        phase::root_of_unity(self.exponent(n), self.order)
    }

    /// Distinct exponents taken by the character, including [`ZERO`] when
    /// `q > 1`.
    pub fn value_set(&self) -> std::collections::BTreeSet<u32> {
        self.exps.iter().copied().collect()
    }
}

/// Number of characters modulo `q`, i.e. `φ(q)`.
pub fn character_count(q: u64) -> u64 {
    arith::euler_phi(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: Complex64) -> f64 {
        assert_eq!(v.im, 0.0);
        v.re
    }

    #[test]
    fn modulus_one_is_constant() {
        let chi = CharacterTable::new(1, 0).unwrap();
        for n in 1..20 {
            assert_eq!(chi.value(n), Complex64::new(1.0, 0.0));
        }
        assert!(CharacterTable::new(1, 1).is_err());
        assert!(CharacterTable::new(0, 0).is_err());
    }

    #[test]
    fn nonprincipal_mod_four() {
        let chi = CharacterTable::new(4, 1).unwrap();
        assert_eq!(real(chi.value(1)), 1.0);
        assert_eq!(real(chi.value(3)), -1.0);
        assert_eq!(real(chi.value(2)), 0.0);
        assert_eq!(real(chi.value(4)), 0.0);
        assert_eq!(real(chi.value(7)), -1.0);
    }

    #[test]
    fn mod_five_uses_generator_two() {
        // 2 generates (Z/5Z)*; index 1 sends 2 to i.
        let chi = CharacterTable::new(5, 1).unwrap();
        assert_eq!(chi.value(2), Complex64::new(0.0, 1.0));
        assert_eq!(chi.value(4), Complex64::new(-1.0, 0.0));
        for k in 1..4 {
            let chi = CharacterTable::new(5, k).unwrap();
            let s: Complex64 = (1..=5).map(|r| chi.value(r)).sum();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn group_order_is_totient() {
        for q in 1..200u64 {
            let phi = character_count(q);
            assert!(CharacterTable::new(q, phi - 1).is_ok(), "q = {q}");
            assert!(CharacterTable::new(q, phi).is_err(), "q = {q}");
        }
    }
}
