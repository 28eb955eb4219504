//! Bulk evaluation of a [`MultiplicativeSpec`] on `[1, N]` and the on-disk
//! table cache.
//!
//! The range is cut into fixed-size segments that are sieved independently
//! (and in parallel). Within a segment every entry starts at `1` and each
//! prime `p <= sqrt(N)` divides its full power out of the entries it hits,
//! multiplying in `f(p^k)`; a cofactor left above 1 is a single large prime.
//! Primes are applied in increasing order, which is also the order used by
//! [`MultiplicativeSpec::evaluate_point`], so both paths agree bit for bit.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith;
use crate::error::{Error, Result};
use crate::funcspec::{archimedean_value, phase, MultiplicativeSpec};

pub const CACHE_MAGIC: [u8; 4] = *b"MFSV";
pub const CACHE_VERSION: u32 = 1;
/// Code value that never indexes the alphabet.
pub const INVALID_CODE: u8 = 255;

const KIND_SMALL: u8 = 0;
const KIND_COMPLEX: u8 = 1;

#[derive(Clone, Debug)]
pub struct SieveOptions {
    /// Entries per segment.
    pub segment_size: usize,
    /// Upper bound on the bytes of the finished table.
    pub memory_budget: u64,
}

impl Default for SieveOptions {
    fn default() -> Self {
        Self {
            segment_size: 1 << 22,
            memory_budget: 4 << 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    /// One byte per entry indexing `alphabet`.
    SmallAlphabet {
        codes: Vec<u8>,
        alphabet: Vec<Complex64>,
    },
    Complex64Pairs(Vec<Complex64>),
}

/// Values `f(1), …, f(N)`; entry `k` holds `f(k + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    spec_hash: u64,
    storage: Storage,
}

impl ValueTable {
    pub fn from_codes(spec_hash: u64, codes: Vec<u8>, alphabet: Vec<Complex64>) -> Result<Self> {
        if alphabet.is_empty() || alphabet.len() > INVALID_CODE as usize {
            return Err(Error::InvalidArgument(format!(
                "alphabet size {} not in 1..=255",
                alphabet.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= alphabet.len()) {
            return Err(Error::InvalidArgument(format!("code {bad} outside alphabet")));
        }
        Ok(Self {
            spec_hash,
            storage: Storage::SmallAlphabet { codes, alphabet },
        })
    }

    pub fn from_values(spec_hash: u64, values: Vec<Complex64>) -> Self {
        Self {
            spec_hash,
            storage: Storage::Complex64Pairs(values),
        }
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn len(&self) -> u64 {
        match &self.storage {
            Storage::SmallAlphabet { codes, .. } => codes.len() as u64,
            Storage::Complex64Pairs(v) => v.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `f(n)` for `1 <= n <= len`.
    #[inline]
    pub fn get(&self, n: u64) -> Complex64 {
        let i = (n - 1) as usize;
        match &self.storage {
            Storage::SmallAlphabet { codes, alphabet } => alphabet[codes[i] as usize],
            Storage::Complex64Pairs(v) => v[i],
        }
    }

    pub fn codes(&self) -> Option<&[u8]> {
        match &self.storage {
            Storage::SmallAlphabet { codes, .. } => Some(codes),
            Storage::Complex64Pairs(_) => None,
        }
    }

    pub fn alphabet(&self) -> Option<&[Complex64]> {
        match &self.storage {
            Storage::SmallAlphabet { alphabet, .. } => Some(alphabet),
            Storage::Complex64Pairs(_) => None,
        }
    }

    /// The first `n` entries.
    pub fn prefix(&self, n: u64) -> Result<ValueTable> {
        if n > self.len() {
            return Err(Error::TableTooShort {
                required: n,
                available: self.len(),
            });
        }
        let storage = match &self.storage {
            Storage::SmallAlphabet { codes, alphabet } => Storage::SmallAlphabet {
                codes: codes[..n as usize].to_vec(),
                alphabet: alphabet.clone(),
            },
            Storage::Complex64Pairs(v) => Storage::Complex64Pairs(v[..n as usize].to_vec()),
        };
        Ok(ValueTable {
            spec_hash: self.spec_hash,
            storage,
        })
    }

    /// Entries `f(lo), …, f(hi)` as complex numbers.
    pub fn values(&self, lo: u64, hi: u64) -> Vec<Complex64> {
        (lo..=hi).map(|n| self.get(n)).collect()
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

struct SmallPrimes<V> {
    primes: Vec<u64>,
    /// `powers[i][k - 1] = g(p_i^k)`.
    powers: Vec<Vec<V>>,
}

impl<V: Copy> SmallPrimes<V> {
    fn new(n: u64, rule: impl Fn(u64, u32) -> Result<V>) -> Result<Self> {
        let primes = arith::primes_up_to(isqrt(n));
        let powers = primes
            .iter()
            .map(|&p| {
                let mut out = Vec::new();
                let mut pk = p;
                let mut k = 1;
                loop {
                    out.push(rule(p, k)?);
                    match pk.checked_mul(p) {
                        Some(next) if next <= n => {
                            pk = next;
                            k += 1;
                        }
                        _ => break,
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { primes, powers })
    }
}

/// Sieves `out[i] = g(lo + i)` for one segment.
fn sieve_segment<V: Copy>(
    lo: u64,
    out: &mut [V],
    small: &SmallPrimes<V>,
    one: V,
    mul: impl Fn(V, V) -> V,
    large_prime: impl Fn(u64) -> Result<V>,
) -> Result<()> {
    let len = out.len() as u64;
    let hi = lo + len - 1;
    let mut rem: Vec<u64> = (lo..=hi).collect();
    out.fill(one);
    for (&p, powers) in small.primes.iter().zip(&small.powers) {
        if p * p > hi {
            break;
        }
        let first = lo.div_ceil(p) * p;
        let mut idx = (first - lo) as usize;
        while idx < out.len() {
            let r = &mut rem[idx];
            let mut k = 0usize;
            while (*r).is_multiple_of(p) {
                *r /= p;
                k += 1;
            }
            out[idx] = mul(out[idx], powers[k - 1]);
            idx += p as usize;
        }
    }
    for (v, &r) in out.iter_mut().zip(&rem) {
        if r > 1 {
            *v = mul(*v, large_prime(r)?);
        }
    }
    Ok(())
}

pub fn sieve_range(f: &MultiplicativeSpec, n: u64) -> Result<ValueTable> {
    sieve_range_with(f, n, &SieveOptions::default())
}

pub fn sieve_range_with(f: &MultiplicativeSpec, n: u64, opts: &SieveOptions) -> Result<ValueTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("table length must be >= 1".into()));
    }
    if opts.segment_size == 0 {
        return Err(Error::InvalidArgument("segment size must be >= 1".into()));
    }
    let compiled = f.compiled().clone();
    let small_alphabet = compiled
        .exact
        .as_ref()
        .filter(|e| e.alphabet.len() < INVALID_CODE as usize);
    let width: u64 = if small_alphabet.is_some() { 1 } else { 16 };
    let required = n.saturating_mul(width);
    if required > opts.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: opts.memory_budget,
        });
    }
    let seg = opts.segment_size;

    if let Some(exact) = &compiled.exact {
        let order = exact.order;
        let small = SmallPrimes::new(n, |p, k| compiled.prime_power_exponent(p, k))?;
        let large = |p: u64| compiled.prime_power_exponent(p, 1);
        let mul = |a, b| phase::mul(a, b, order);
        if let Some(exact) = small_alphabet {
            let mut lookup = vec![INVALID_CODE; order as usize + 1];
            for (code, &e) in exact.alphabet.iter().enumerate() {
                let slot = if e == phase::ZERO { order as usize } else { e as usize };
                lookup[slot] = code as u8;
            }
            let mut codes = vec![0u8; n as usize];
            codes
                .par_chunks_mut(seg)
                .enumerate()
                .try_for_each(|(i, chunk)| -> Result<()> {
                    let lo = 1 + (i * seg) as u64;
                    let mut vals = vec![0u32; chunk.len()];
                    sieve_segment(lo, &mut vals, &small, 0, mul, large)?;
                    for (c, &e) in chunk.iter_mut().zip(&vals) {
                        let slot = if e == phase::ZERO { order as usize } else { e as usize };
                        *c = lookup[slot];
                    }
                    Ok(())
                })?;
            let alphabet = exact
                .alphabet
                .iter()
                .map(|&e| phase::root_of_unity(e, order))
                .collect();
            return ValueTable::from_codes(f.spec_hash(), codes, alphabet);
        }
        let mut values = vec![Complex64::new(0.0, 0.0); n as usize];
        values
            .par_chunks_mut(seg)
            .enumerate()
            .try_for_each(|(i, chunk)| -> Result<()> {
                let lo = 1 + (i * seg) as u64;
                let mut vals = vec![0u32; chunk.len()];
                sieve_segment(lo, &mut vals, &small, 0, mul, large)?;
                for (z, &e) in chunk.iter_mut().zip(&vals) {
                    *z = phase::root_of_unity(e, order);
                }
                Ok(())
            })?;
        return Ok(ValueTable::from_values(f.spec_hash(), values));
    }

    let small = SmallPrimes::new(n, |p, k| compiled.prime_power_complex(p, k))?;
    let t = compiled.t;
    let mut values = vec![Complex64::new(0.0, 0.0); n as usize];
    values
        .par_chunks_mut(seg)
        .enumerate()
        .try_for_each(|(i, chunk)| -> Result<()> {
            let lo = 1 + (i * seg) as u64;
            sieve_segment(
                lo,
                chunk,
                &small,
                Complex64::new(1.0, 0.0),
                |a, b| a * b,
                |p| compiled.prime_power_complex(p, 1),
            )?;
            if t != 0.0 {
                for (j, z) in chunk.iter_mut().enumerate() {
                    *z *= archimedean_value(t, lo + j as u64);
                }
            }
            Ok(())
        })?;
    Ok(ValueTable::from_values(f.spec_hash(), values))
}

// ---------------------------------------------------------------------------
// Cache files
// ---------------------------------------------------------------------------

/// Writes `table` to `path` (via a temporary file and rename).
pub fn cache_store(table: &ValueTable, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&table.spec_hash.to_le_bytes())?;
        w.write_all(&table.len().to_le_bytes())?;
        match &table.storage {
            Storage::SmallAlphabet { codes, alphabet } => {
                w.write_all(&[KIND_SMALL, alphabet.len() as u8])?;
                for z in alphabet {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
                w.write_all(codes)?;
            }
            Storage::Complex64Pairs(values) => {
                w.write_all(&[KIND_COMPLEX])?;
                let mut buf = Vec::with_capacity(16 * 4096);
                for chunk in values.chunks(4096) {
                    buf.clear();
                    for z in chunk {
                        buf.extend_from_slice(&z.re.to_le_bytes());
                        buf.extend_from_slice(&z.im.to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
            }
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::CacheTruncated
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Loads the first `n` entries of the table cached at `path`.
pub fn cache_load(spec_hash: u64, n: u64, path: &Path) -> Result<ValueTable> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if magic != CACHE_MAGIC {
        return Err(Error::CacheMagic);
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::CacheVersion {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    let stored_hash = read_u64(&mut r)?;
    if stored_hash != spec_hash {
        return Err(Error::CacheHash {
            found: stored_hash,
            expected: spec_hash,
        });
    }
    let stored_n = read_u64(&mut r)?;
    if stored_n < n {
        return Err(Error::CacheTooShort {
            stored: stored_n,
            requested: n,
        });
    }
    let mut kind = [0u8; 1];
    read_exact_or_truncated(&mut r, &mut kind)?;
    let header = 4 + 4 + 8 + 8 + 1;
    match kind[0] {
        KIND_SMALL => {
            let mut count = [0u8; 1];
            read_exact_or_truncated(&mut r, &mut count)?;
            let count = count[0] as u64;
            let body = header + 1 + 16 * count;
            if file_len < body + stored_n {
                return Err(Error::CacheTruncated);
            }
            let alphabet = (0..count)
                .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
                .collect::<Result<Vec<_>>>()?;
            let mut codes = vec![0u8; n as usize];
            read_exact_or_truncated(&mut r, &mut codes)?;
            ValueTable::from_codes(spec_hash, codes, alphabet)
        }
        KIND_COMPLEX => {
            if file_len < header + 16 * stored_n {
                return Err(Error::CacheTruncated);
            }
            let mut values = Vec::with_capacity(n as usize);
            let mut buf = vec![0u8; 16 * 4096];
            let mut left = n as usize;
            while left > 0 {
                let take = left.min(4096);
                read_exact_or_truncated(&mut r, &mut buf[..16 * take])?;
                for c in buf[..16 * take].chunks_exact(16) {
                    let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                    values.push(Complex64::new(re, im));
                }
                left -= take;
            }
            Ok(ValueTable::from_values(spec_hash, values))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown cache storage kind {other}"
        ))),
    }
}
