//! Checkpointed Cesàro and logarithmic averages of shift products.
//!
//! A [`ShiftPattern`] describes `∏_j b_j(n + h_j)` where each `b_j` is a table
//! or its conjugate. Only `n` with every argument `n + h_j >= 1` is summed:
//! the effective range for a checkpoint `N` is `[1 + max(0, -min h), N]`, and
//! the logarithmic normalizer is the harmonic mass of that same range.
//!
//! Sums run over a fixed grid of blocks anchored at the start of the effective
//! range. Full blocks are reduced in parallel and merged left to right; the
//! last, partial block of each checkpoint is folded on its own. The value at a
//! checkpoint therefore depends on neither the other checkpoints requested nor
//! the number of threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sieve::{Storage, ValueTable};
use crate::summation::{ComplexNeumaier, Neumaier};

/// Default number of terms per reduction block.
pub const DEFAULT_BLOCK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug)]
pub struct ShiftFactor<'a> {
    pub table: &'a ValueTable,
    pub shift: i64,
    pub conjugate: bool,
}

impl<'a> ShiftFactor<'a> {
    pub fn new(table: &'a ValueTable, shift: i64, conjugate: bool) -> Self {
        Self { table, shift, conjugate }
    }
}

#[derive(Clone, Debug)]
pub struct ShiftPattern<'a> {
    pub factors: Vec<ShiftFactor<'a>>,
}

impl<'a> ShiftPattern<'a> {
    pub fn new(factors: Vec<ShiftFactor<'a>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("shift pattern needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn min_shift(&self) -> i64 {
        self.factors.iter().map(|f| f.shift).min().unwrap_or(0)
    }

    pub fn max_shift(&self) -> i64 {
        self.factors.iter().map(|f| f.shift).max().unwrap_or(0)
    }

    /// First summed `n`.
    pub fn effective_lo(&self) -> u64 {
        1 + (-self.min_shift()).max(0) as u64
    }

    /// Table length needed to reach checkpoint `n`.
    pub fn required_len(&self, n: u64) -> u64 {
        n + self.max_shift().max(0) as u64
    }

    /// The same pattern with every conjugation flag flipped.
    pub fn conjugated(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|f| ShiftFactor { conjugate: !f.conjugate, ..*f })
                .collect(),
        }
    }
}

/// Weight sequence `w(n)` multiplying the shift product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    #[default]
    None,
    /// `w(n) = e(n α)`.
    Exponential { alpha: f64 },
    /// `w(n) = e(P(n))` with `P(n) = Σ_k coefficients[k] n^k`.
    PolynomialPhase { coefficients: Vec<f64> },
    /// `w(n) = values[n - 1]`.
    ExplicitTable { values: Vec<Complex64> },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::None => Ok(()),
            WeightSpec::Exponential { alpha } => {
                if alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("weight frequency must be finite".into()))
                }
            }
            WeightSpec::PolynomialPhase { coefficients } => {
                if coefficients.iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("polynomial coefficients must be finite".into()))
                }
            }
            WeightSpec::ExplicitTable { values } => {
                if values.iter().all(|z| z.norm() <= 1.0 + 1e-12) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("weights must lie in the unit disc".into()))
                }
            }
        }
    }

    /// The weight `conj(w(n))`.
    pub fn conjugate(&self) -> Self {
        match self {
            WeightSpec::None => WeightSpec::None,
            WeightSpec::Exponential { alpha } => WeightSpec::Exponential { alpha: -alpha },
            WeightSpec::PolynomialPhase { coefficients } => WeightSpec::PolynomialPhase {
                coefficients: coefficients.iter().map(|c| -c).collect(),
            },
            WeightSpec::ExplicitTable { values } => WeightSpec::ExplicitTable {
                values: values.iter().map(|z| z.conj()).collect(),
            },
        }
    }

    fn is_none(&self) -> bool {
        matches!(self, WeightSpec::None)
    }

    /// `w(n)` for `n >= 1`.
    #[inline]
    pub fn value(&self, n: u64) -> Complex64 {
        match self {
            WeightSpec::None => Complex64::new(1.0, 0.0),
            WeightSpec::Exponential { alpha } => unit_phase(poly_phase(&[0.0, *alpha], n)),
            WeightSpec::PolynomialPhase { coefficients } => unit_phase(poly_phase(coefficients, n)),
            WeightSpec::ExplicitTable { values } => values[(n - 1) as usize],
        }
    }
}

#[inline]
fn unit_phase(frac: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * frac).sin_cos();
    Complex64::new(c, s)
}

/// Error-free product `a * b = hi + lo`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    (hi, a.mul_add(b, -hi))
}

/// Reduces the double-double `hi + lo` modulo 1 into `[0, 1)`.
#[inline]
fn frac_dd(hi: f64, lo: f64) -> (f64, f64) {
    let f = hi.floor();
    let h = hi - f;
    let s = h + lo;
    let lo = lo - (s - h);
    let f2 = s.floor();
    (s - f2, lo)
}

/// Fractional part of `P(n)`, evaluated by Horner's rule in double-double
/// arithmetic with a reduction modulo 1 after every step.
fn poly_phase(coeffs: &[f64], n: u64) -> f64 {
    let x = n as f64;
    let mut hi = 0.0;
    let mut lo = 0.0;
    for &c in coeffs.iter().rev() {
        let (p_hi, p_lo) = two_prod(hi, x);
        let p_lo = p_lo + lo * x;
        let (c_hi, c_lo) = frac_dd(c, 0.0);
        let s = p_hi + c_hi;
        let e = (p_hi - (s - (s - p_hi))) + (c_hi - (s - p_hi));
        (hi, lo) = frac_dd(s, e + p_lo + c_lo);
    }
    let v = hi + lo;
    v - v.floor()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub checkpoints: Vec<u64>,
    pub log_avg: Vec<Complex64>,
    pub cesaro_avg: Vec<Complex64>,
    /// Harmonic mass of the effective range at each checkpoint.
    pub harmonic_norm: Vec<f64>,
    /// First summed `n`; the range for checkpoint `N` is `[effective_lo, N]`.
    pub effective_lo: u64,
    /// Terms per reduction block.
    pub block_size: u64,
    /// Number of reduction blocks at the largest checkpoint.
    pub partitions: u64,
}

/// Reads a table, optionally conjugated, without re-matching on storage.
#[derive(Clone, Copy)]
enum Reader<'a> {
    Codes(&'a [u8], &'a [Complex64]),
    Values(&'a [Complex64], bool),
}

impl<'a> Reader<'a> {
    fn new(table: &'a ValueTable, conj_alphabet: &'a [Complex64], conjugate: bool) -> Self {
        match table.storage() {
            Storage::SmallAlphabet { codes, alphabet } => {
                Reader::Codes(codes, if conjugate { conj_alphabet } else { alphabet })
            }
            Storage::Complex64Pairs(v) => Reader::Values(v, conjugate),
        }
    }

    #[inline]
    fn get(&self, n: u64) -> Complex64 {
        let i = (n - 1) as usize;
        match *self {
            Reader::Codes(c, a) => a[c[i] as usize],
            Reader::Values(v, false) => v[i],
            Reader::Values(v, true) => v[i].conj(),
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Partial {
    log: ComplexNeumaier,
    cesaro: ComplexNeumaier,
    harmonic: Neumaier,
}

impl Partial {
    fn merge(&mut self, other: &Partial) {
        self.log.merge(&other.log);
        self.cesaro.merge(&other.cesaro);
        self.harmonic.merge(&other.harmonic);
    }
}

struct Summand<'a> {
    readers: Vec<(Reader<'a>, i64)>,
    weights: &'a WeightSpec,
}

impl Summand<'_> {
    fn fold(&self, lo: u64, hi: u64) -> Partial {
        let mut acc = Partial::default();
        let weighted = !self.weights.is_none();
        for n in lo..=hi {
            let mut z = Complex64::new(1.0, 0.0);
            for (r, h) in &self.readers {
                z *= r.get((n as i64 + h) as u64);
            }
            if weighted {
                z *= self.weights.value(n);
            }
            let inv = 1.0 / n as f64;
            acc.log.add(z * inv);
            acc.cesaro.add(z);
            acc.harmonic.add(inv);
        }
        acc
    }
}

/// Block-grid reduction over `[lo, checkpoint]` for every checkpoint.
fn blocked_prefix_sums(
    lo: u64,
    checkpoints: &[u64],
    block: u64,
    fold: impl Fn(u64, u64) -> Partial + Sync,
) -> (Vec<Partial>, u64) {
    let n_max = *checkpoints.last().unwrap();
    let full = (n_max + 1 - lo) / block;
    let blocks: Vec<Partial> = (0..full)
        .into_par_iter()
        .map(|b| fold(lo + b * block, lo + (b + 1) * block - 1))
        .collect();
    let out = checkpoints
        .iter()
        .map(|&n| {
            let f = (n + 1 - lo) / block;
            let mut acc = Partial::default();
            for b in &blocks[..f as usize] {
                acc.merge(b);
            }
            let tail_lo = lo + f * block;
            if tail_lo <= n {
                acc.merge(&fold(tail_lo, n));
            }
            acc
        })
        .collect();
    (out, full.max(1))
}

fn check_checkpoints(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadCheckpoints);
    }
    Ok(())
}

/// `Σ_{n=1}^{N} 1/n` with compensated summation.
pub fn harmonic_norm(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("harmonic_norm needs N >= 1".into()));
    }
    Ok(harmonic_range(1, n))
}

/// `Σ_{k=lo}^{hi} 1/k` (zero for an empty range), reduced on the same block
/// grid as [`correlation`].
pub fn harmonic_range(lo: u64, hi: u64) -> f64 {
    if lo > hi {
        return 0.0;
    }
    let (sums, _) = blocked_prefix_sums(lo, &[hi], DEFAULT_BLOCK, |a, b| {
        let mut acc = Partial::default();
        for k in a..=b {
            acc.harmonic.add(1.0 / k as f64);
        }
        acc
    });
    sums[0].harmonic.value()
}

pub fn correlation(
    pattern: &ShiftPattern<'_>,
    weights: &WeightSpec,
    checkpoints: &[u64],
) -> Result<CorrelationResult> {
    correlation_with_block(pattern, weights, checkpoints, DEFAULT_BLOCK)
}

pub fn correlation_with_block(
    pattern: &ShiftPattern<'_>,
    weights: &WeightSpec,
    checkpoints: &[u64],
    block: u64,
) -> Result<CorrelationResult> {
    check_checkpoints(checkpoints)?;
    if block == 0 {
        return Err(Error::InvalidArgument("block size must be >= 1".into()));
    }
    weights.validate()?;
    let lo = pattern.effective_lo();
    if checkpoints[0] < lo {
        return Err(Error::EmptyRange);
    }
    let n_max = *checkpoints.last().unwrap();
    let required = pattern.required_len(n_max);
    for f in &pattern.factors {
        if f.table.len() < required {
            return Err(Error::TableTooShort {
                required,
                available: f.table.len(),
            });
        }
    }
    if let WeightSpec::ExplicitTable { values } = weights {
        if (values.len() as u64) < n_max {
            return Err(Error::TableTooShort {
                required: n_max,
                available: values.len() as u64,
            });
        }
    }

    let conj_alphabets: Vec<Vec<Complex64>> = pattern
        .factors
        .iter()
        .map(|f| f.table.alphabet().map(|a| a.iter().map(|z| z.conj()).collect()).unwrap_or_default())
        .collect();
    let summand = Summand {
        readers: pattern
            .factors
            .iter()
            .zip(&conj_alphabets)
            .map(|(f, ca)| (Reader::new(f.table, ca, f.conjugate), f.shift))
            .collect(),
        weights,
    };
    let (sums, partitions) = blocked_prefix_sums(lo, checkpoints, block, |a, b| summand.fold(a, b));

    let mut result = CorrelationResult {
        checkpoints: checkpoints.to_vec(),
        log_avg: Vec::with_capacity(sums.len()),
        cesaro_avg: Vec::with_capacity(sums.len()),
        harmonic_norm: Vec::with_capacity(sums.len()),
        effective_lo: lo,
        block_size: block,
        partitions,
    };
    for (s, &n) in sums.iter().zip(checkpoints) {
        let l = s.harmonic.value();
        result.log_avg.push(s.log.value() / l);
        result.cesaro_avg.push(s.cesaro.value() / (n + 1 - lo) as f64);
        result.harmonic_norm.push(l);
    }
    Ok(result)
}

/// Limit of the logarithmic average of `∏_j (n + h_j)^{i t k_j}`: 1 when
/// `t = 0` or `Σ k_j = 0`, otherwise 0. The shifts do not affect the limit.
pub fn nit_correlation_oracle(t: f64, exponents: &[i64], _shifts: &[i64]) -> Complex64 {
    if t == 0.0 || exponents.iter().sum::<i64>() == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Uniform average of `f(a n + b)` over `n >= 1` with `1 <= a n + b` and
/// `n <= (N - b) / a`.
pub fn arithmetic_progression_average(table: &ValueTable, a: u64, b: i64, n: u64) -> Result<Complex64> {
    if a == 0 {
        return Err(Error::InvalidArgument("progression step must be >= 1".into()));
    }
    let a_i = a as i64;
    let hi = (n as i64 - b).div_euclid(a_i);
    // Smallest k >= 1 with a k + b >= 1.
    let lo = if b >= 0 { 1 } else { (1 - b + a_i - 1).div_euclid(a_i).max(1) };
    if hi < lo {
        return Err(Error::EmptyRange);
    }
    let top = (a_i * hi + b) as u64;
    if top > table.len() {
        return Err(Error::TableTooShort {
            required: top,
            available: table.len(),
        });
    }
    Ok(progression_sum(table, a, (a_i * lo + b) as u64, top) / (hi - lo + 1) as f64)
}

/// `Σ f(m)` over `m = first, first + step, …, <= last`.
pub(crate) fn progression_sum(table: &ValueTable, step: u64, first: u64, last: u64) -> Complex64 {
    let mut acc = ComplexNeumaier::new();
    match table.storage() {
        Storage::SmallAlphabet { codes, alphabet } => {
            // Count letters, then combine once.
            let mut counts = vec![0u64; alphabet.len()];
            let mut m = first;
            while m <= last {
                counts[codes[(m - 1) as usize] as usize] += 1;
                m += step;
            }
            for (c, z) in counts.iter().zip(alphabet) {
                if *c > 0 {
                    acc.add(z * *c as f64);
                }
            }
        }
        Storage::Complex64Pairs(v) => {
            let mut m = first;
            while m <= last {
                acc.add(v[(m - 1) as usize]);
                m += step;
            }
        }
    }
    acc.value()
}
