//! Elementary integer arithmetic: gcd, primes, trial-division factorization.

use crate::error::{Error, Result};

/// Default trial-division bound for pointwise factorization. Every
/// `n < (bound + 1)^2` factors completely.
pub const DEFAULT_TRIAL_BOUND: u64 = 1 << 20;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Sieve of Eratosthenes; returns all primes `<= limit` in increasing order.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::with_capacity(prime_count_estimate(limit));
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            if let Some(start) = i.checked_mul(i) {
                let mut j = start;
                while j <= n {
                    composite[j] = true;
                    j += i;
                }
            }
        }
    }
    primes
}

fn prime_count_estimate(limit: u64) -> usize {
    if limit < 17 {
        return 8;
    }
    let x = limit as f64;
    (1.26 * x / x.ln()) as usize + 8
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Factors `n` by trial division with a 2-3 wheel up to `bound`.
///
/// Returns `(p, k)` pairs with increasing `p`. Fails when a cofactor larger
/// than `bound^2` survives.
pub fn factorize(mut n: u64, bound: u64) -> Result<Vec<(u64, u32)>> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot factor 0".into()));
    }
    let original = n;
    let mut out = Vec::new();
    for p in [2u64, 3] {
        let mut k = 0;
        while n.is_multiple_of(p) {
            n /= p;
            k += 1;
        }
        if k > 0 {
            out.push((p, k));
        }
    }
    let mut d = 5u64;
    let mut step = 2u64;
    while d <= bound && d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            let mut k = 0;
            while n.is_multiple_of(d) {
                n /= d;
                k += 1;
            }
            out.push((d, k));
        }
        d += step;
        step = 6 - step;
    }
    if n > 1 {
        if d.saturating_mul(d) <= n {
            return Err(Error::FactorizationBudget {
                n: original,
                bound,
            });
        }
        out.push((n, 1));
    }
    Ok(out)
}

pub fn euler_phi(n: u64) -> u64 {
    let mut result = n;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

pub fn distinct_prime_factors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            out.push(p);
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Smallest primitive root modulo `p^e` for an odd prime `p`.
pub fn primitive_root_odd_prime_power(p: u64, e: u32) -> u64 {
    let modulus = p.pow(e);
    let order = modulus / p * (p - 1);
    let factors = distinct_prime_factors(order);
    (2..modulus)
        .find(|&g| {
            gcd(g, p) == 1 && factors.iter().all(|&r| pow_mod(g, order / r, modulus) != 1)
        })
        .expect("odd prime powers have primitive roots")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(primes_up_to(1), Vec::<u64>::new());
        assert_eq!(primes_up_to(100).len(), 25);
    }

    #[test]
    fn miller_rabin_agrees_with_sieve() {
        let primes = primes_up_to(100_000);
        let mut it = primes.iter().peekable();
        for n in 0..=100_000u64 {
            let expected = it.peek().is_some_and(|&&p| p == n);
            if expected {
                it.next();
            }
            assert_eq!(is_prime(n), expected, "n = {n}");
        }
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
        assert!(is_prime(18_446_744_073_709_551_557));
    }

    #[test]
    fn factorization() {
        assert_eq!(factorize(1, 100).unwrap(), vec![]);
        assert_eq!(factorize(360, 100).unwrap(), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factorize(97 * 101, 100).unwrap(), vec![(97, 1), (101, 1)]);
        assert!(matches!(
            factorize(1_000_003 * 1_000_033, 1000),
            Err(Error::FactorizationBudget { .. })
        ));
    }

    #[test]
    fn totient_and_roots() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(100), 40);
        assert_eq!(primitive_root_odd_prime_power(5, 1), 2);
        assert_eq!(primitive_root_odd_prime_power(7, 1), 3);
        let g = primitive_root_odd_prime_power(3, 3);
        let m = 27;
        let mut seen = std::collections::BTreeSet::new();
        let mut x = 1;
        for _ in 0..18 {
            seen.insert(x);
            x = x * g % m;
        }
        assert_eq!(seen.len(), 18);
    }
}
