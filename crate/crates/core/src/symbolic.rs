//! Finite-alphabet views of value tables: cylinder densities, empirical
//! measures, block complexity and autocorrelations.
//!
//! A [`SymbolicSequence`] is a table read as letters. Finite-range tables are
//! used as is; complex tables need a [`Quantizer`] that maps each value to an
//! angular sector and modulus ring (or to a dedicated zero letter).

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::averages::harmonic_range;
use crate::error::{Error, Result};
use crate::sieve::{Storage, ValueTable};
use crate::summation::{partition, ComplexNeumaier, Neumaier, DEFAULT_PARTITIONS};

/// Tolerance for matching a pattern letter against an alphabet value.
const LETTER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Logarithmic,
    Cesaro,
}

impl Mode {
    #[inline]
    fn weight(self, n: u64) -> f64 {
        match self {
            Mode::Logarithmic => 1.0 / n as f64,
            Mode::Cesaro => 1.0,
        }
    }

    fn mass(self, lo: u64, hi: u64) -> f64 {
        match self {
            Mode::Logarithmic => harmonic_range(lo, hi),
            Mode::Cesaro => (hi + 1 - lo) as f64,
        }
    }
}

/// `k` angular sectors times `r` modulus rings, plus a zero letter for
/// `|z| < zero_tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub sectors: u32,
    pub rings: u32,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

fn default_zero_tol() -> f64 {
    1e-12
}

impl Default for Quantizer {
    fn default() -> Self {
        Self {
            sectors: 8,
            rings: 1,
            zero_tol: default_zero_tol(),
        }
    }
}

impl Quantizer {
    fn validate(&self) -> Result<()> {
        let letters = self.sectors as u64 * self.rings as u64 + 1;
        if self.sectors == 0 || self.rings == 0 || letters > 255 {
            return Err(Error::InvalidArgument(
                "quantizer needs sectors, rings >= 1 and at most 254 cells".into(),
            ));
        }
        Ok(())
    }

    /// Letter 0 is zero; letter `1 + ring * sectors + sector` otherwise.
    #[inline]
    pub fn code(&self, z: Complex64) -> u8 {
        let r = z.norm();
        if r < self.zero_tol {
            return 0;
        }
        let mut angle = z.im.atan2(z.re);
        if angle < 0.0 {
            angle += TAU;
        }
        let sector = ((angle / TAU * self.sectors as f64) as u32).min(self.sectors - 1);
        let ring = ((r * self.rings as f64) as u32).min(self.rings - 1);
        (1 + ring * self.sectors + sector) as u8
    }

    /// Cell centres in letter order.
    pub fn alphabet(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        for ring in 0..self.rings {
            let radius = (ring as f64 + 0.5) / self.rings as f64;
            let radius = if self.rings == 1 { 1.0 } else { radius };
            for s in 0..self.sectors {
                let angle = TAU * (s as f64 + 0.5) / self.sectors as f64;
                out.push(Complex64::from_polar(radius, angle));
            }
        }
        out
    }
}

/// A table read as a word over a finite alphabet.
#[derive(Clone, Debug)]
pub struct SymbolicSequence<'a> {
    codes: Cow<'a, [u8]>,
    alphabet: Vec<Complex64>,
    quantizer: Option<Quantizer>,
}

impl<'a> SymbolicSequence<'a> {
    /// Letters of a finite-range table, or quantized letters of a complex
    /// table (which requires `quantizer`).
    pub fn from_table(table: &'a ValueTable, quantizer: Option<&Quantizer>) -> Result<Self> {
        match table.storage() {
            Storage::SmallAlphabet { codes, alphabet } => Ok(Self {
                codes: Cow::Borrowed(codes),
                alphabet: alphabet.clone(),
                quantizer: None,
            }),
            Storage::Complex64Pairs(values) => {
                let q = quantizer.ok_or(Error::NeedsQuantizer)?;
                q.validate()?;
                let codes = values.par_iter().map(|&z| q.code(z)).collect::<Vec<u8>>();
                Ok(Self {
                    codes: Cow::Owned(codes),
                    alphabet: q.alphabet(),
                    quantizer: Some(q.clone()),
                })
            }
        }
    }

    pub fn from_codes(codes: Vec<u8>, alphabet: Vec<Complex64>) -> Result<Self> {
        if alphabet.is_empty() || codes.iter().any(|&c| c as usize >= alphabet.len()) {
            return Err(Error::InvalidArgument("codes must index a non-empty alphabet".into()));
        }
        Ok(Self {
            codes: Cow::Owned(codes),
            alphabet,
            quantizer: None,
        })
    }

    pub fn len(&self) -> u64 {
        self.codes.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn alphabet(&self) -> &[Complex64] {
        &self.alphabet
    }

    /// The quantizer applied, if any.
    pub fn quantizer(&self) -> Option<&Quantizer> {
        self.quantizer.as_ref()
    }

    /// Letter at position `n >= 1`.
    #[inline]
    pub fn code(&self, n: u64) -> u8 {
        self.codes[(n - 1) as usize]
    }

    /// Alphabet index of `z`, if present.
    pub fn letter_of(&self, z: Complex64) -> Option<u8> {
        self.alphabet
            .iter()
            .position(|a| (a - z).norm() <= LETTER_TOL)
            .map(|i| i as u8)
    }

    /// Human-readable form of a letter: real values as integers or decimals,
    /// others as `re+imi`.
    pub fn letter_name(&self, code: u8) -> String {
        letter_name(self.alphabet[code as usize])
    }
}

fn fmt_real(x: f64) -> String {
    if (x - x.round()).abs() < 1e-12 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.6}")
    }
}

pub fn letter_name(z: Complex64) -> String {
    if z.im.abs() < 1e-12 {
        fmt_real(z.re)
    } else {
        let sign = if z.im < 0.0 { "-" } else { "+" };
        format!("{}{}{}i", fmt_real(z.re), sign, fmt_real(z.im.abs()))
    }
}

/// A pattern letter. In JSON a letter is a real number, an `[re, im]` pair
/// or the wildcard `"*"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Letter {
    Value(Complex64),
    #[serde(serialize_with = "serialize_wildcard")]
    Any,
}

fn serialize_wildcard<S: Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("*")
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Real(x) => Ok(Letter::Value(Complex64::new(x, 0.0))),
            Repr::Pair([re, im]) => Ok(Letter::Value(Complex64::new(re, im))),
            Repr::Word(w) if w == "*" => Ok(Letter::Any),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "letter must be a number, [re, im] or \"*\", got \"{w}\""
            ))),
        }
    }
}

/// Letters `a_{-m}, …, a_m` at offsets `-m..=m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPattern {
    pub m: usize,
    pub letters: Vec<Letter>,
}

impl CylinderPattern {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument("cylinder pattern width must be odd".into()));
        }
        Ok(Self {
            m: letters.len() / 2,
            letters,
        })
    }

    /// Pattern from real letter values.
    pub fn real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Letter::Value(Complex64::new(v, 0.0))).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Density {
    pub value: f64,
    /// Set when some letter is not in the alphabet (the density is then 0).
    pub letter_outside_alphabet: bool,
}

fn check_len(seq: &SymbolicSequence<'_>, required: u64) -> Result<()> {
    if seq.len() < required {
        return Err(Error::TableTooShort {
            required,
            available: seq.len(),
        });
    }
    Ok(())
}

/// Density over `n ∈ [1 + m, N]` of `{n : f(n + j) = a_j for every
/// non-wildcard j}`.
pub fn cylinder_density(seq: &SymbolicSequence<'_>, pattern: &CylinderPattern, n: u64, mode: Mode) -> Result<Density> {
    let m = pattern.m as u64;
    if pattern.letters.len() != 2 * pattern.m + 1 {
        return Err(Error::InvalidArgument("pattern must have 2m + 1 letters".into()));
    }
    if n <= m {
        return Err(Error::EmptyRange);
    }
    check_len(seq, n + m)?;
    let mut fixed = Vec::new();
    for (j, l) in pattern.letters.iter().enumerate() {
        if let Letter::Value(z) = l {
            match seq.letter_of(*z) {
                Some(c) => fixed.push((j as u64, c)),
                None => {
                    return Ok(Density {
                        value: 0.0,
                        letter_outside_alphabet: true,
                    })
                }
            }
        }
    }
    let lo = 1 + m;
    let parts = partition(lo..n + 1, DEFAULT_PARTITIONS);
    let partials: Vec<Neumaier> = parts
        .into_par_iter()
        .map(|r| {
            let mut acc = Neumaier::new();
            for k in r {
                // window starts at k - m
                if fixed.iter().all(|&(j, c)| seq.code(k - m + j) == c) {
                    acc.add(mode.weight(k));
                }
            }
            acc
        })
        .collect();
    let mut total = Neumaier::new();
    for p in &partials {
        total.merge(p);
    }
    Ok(Density {
        value: total.value() / mode.mass(lo, n),
        letter_outside_alphabet: false,
    })
}

/// Densities of all centred windows of half-width `0..=m_max`, counted over
/// the common range `n ∈ [1 + m_max, N]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub n: u64,
    pub mode: Mode,
    pub m_max: usize,
    pub alphabet: Vec<Complex64>,
    /// `widths[m][idx]`: density of the window of half-width `m` whose letter
    /// at offset `j - m` is digit `j` of `idx` in base `|A|`.
    pub widths: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn base(&self) -> usize {
        self.alphabet.len()
    }

    /// Density of a pattern with half-width `<= m_max`; wildcards are summed
    /// out. Letters outside the alphabet give 0.
    pub fn density(&self, pattern: &CylinderPattern) -> f64 {
        let m = pattern.m;
        if m > self.m_max {
            return f64::NAN;
        }
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(pattern.letters.len());
        for l in &pattern.letters {
            match l {
                Letter::Any => choices.push((0..self.base()).collect()),
                Letter::Value(z) => match self.alphabet.iter().position(|a| (a - z).norm() <= LETTER_TOL) {
                    Some(c) => choices.push(vec![c]),
                    None => return 0.0,
                },
            }
        }
        let table = &self.widths[m];
        let mut acc = Neumaier::new();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let mut cell = 0usize;
            for (j, c) in choices.iter().enumerate().rev() {
                cell = cell * self.base() + c[idx[j]];
            }
            acc.add(table[cell]);
            // odometer
            let mut j = 0;
            loop {
                if j == idx.len() {
                    return acc.value();
                }
                idx[j] += 1;
                if idx[j] < choices[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// Pattern strings (letters joined by spaces) to densities, nonzero cells
    /// only.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let b = self.base();
        for (m, cells) in self.widths.iter().enumerate() {
            for (idx, &v) in cells.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let mut rest = idx;
                let mut letters = Vec::with_capacity(2 * m + 1);
                for _ in 0..2 * m + 1 {
                    letters.push(letter_name(self.alphabet[rest % b]));
                    rest /= b;
                }
                out.insert(letters.join(" "), v);
            }
        }
        out
    }
}

pub fn empirical_measure(seq: &SymbolicSequence<'_>, m_max: usize, n: u64, mode: Mode) -> Result<EmpiricalMeasure> {
    empirical_measure_with_budget(seq, m_max, n, mode, 1 << 26)
}

/// As [`empirical_measure`] with an explicit cap on the number of cells.
pub fn empirical_measure_with_budget(
    seq: &SymbolicSequence<'_>,
    m_max: usize,
    n: u64,
    mode: Mode,
    max_cells: u64,
) -> Result<EmpiricalMeasure> {
    let base = seq.alphabet().len() as u64;
    let width = 2 * m_max as u32 + 1;
    let cells = base.checked_pow(width).unwrap_or(u64::MAX);
    if cells > max_cells {
        return Err(Error::MemoryBudget {
            required: cells.saturating_mul(16),
            budget: max_cells.saturating_mul(16),
        });
    }
    let m = m_max as u64;
    if n <= m {
        return Err(Error::EmptyRange);
    }
    check_len(seq, n + m)?;
    let lo = 1 + m;
    let pow: Vec<u64> = (0..=width).map(|k| base.pow(k)).collect();
    let parts = partition(lo..n + 1, DEFAULT_PARTITIONS);
    let partials: Vec<Vec<Vec<Neumaier>>> = parts
        .into_par_iter()
        .map(|r| {
            let mut acc: Vec<Vec<Neumaier>> = (0..=m_max)
                .map(|k| vec![Neumaier::new(); pow[2 * k + 1] as usize])
                .collect();
            for k in r {
                let w = mode.weight(k);
                let mut full = 0u64;
                for j in (0..width as u64).rev() {
                    full = full * base + seq.code(k - m + j) as u64;
                }
                for (h, cells) in acc.iter_mut().enumerate() {
                    let idx = (full / pow[m_max - h]) % pow[2 * h + 1];
                    cells[idx as usize].add(w);
                }
            }
            acc
        })
        .collect();
    let mass = mode.mass(lo, n);
    let mut widths = Vec::with_capacity(m_max + 1);
    for h in 0..=m_max {
        let size = pow[2 * h + 1] as usize;
        let mut out = vec![0.0; size];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = Neumaier::new();
            for p in &partials {
                s.merge(&p[h][i]);
            }
            *o = s.value() / mass;
        }
        widths.push(out);
    }
    Ok(EmpiricalMeasure {
        n,
        mode,
        m_max,
        alphabet: seq.alphabet().to_vec(),
        widths,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityProfile {
    /// `counts[k]` is the number of distinct words of length `k + 1`.
    pub counts: Vec<u64>,
    pub n: u64,
    pub alphabet_size: usize,
}

impl ComplexityProfile {
    pub fn word_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.counts.len()
    }

    /// `P(k)` for `1 <= k <= n_max`.
    pub fn count(&self, k: usize) -> u64 {
        self.counts[k - 1]
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.count(k) as f64 / k as f64
    }
}

/// Bits per packed letter.
pub fn letter_bits(alphabet_size: usize) -> u32 {
    (usize::BITS - (alphabet_size.max(2) - 1).leading_zeros()).max(1)
}

/// Largest word length that fits a 64-bit packed word.
pub fn max_word_length(alphabet_size: usize) -> usize {
    (64 / letter_bits(alphabet_size)) as usize
}

enum WordSet {
    Dense(Vec<u64>),
    Sparse(HashSet<u64>),
}

impl WordSet {
    fn new(bits: u32) -> Self {
        if bits <= 24 {
            WordSet::Dense(vec![0; (1usize << bits).div_ceil(64)])
        } else {
            WordSet::Sparse(HashSet::new())
        }
    }

    #[inline]
    fn insert(&mut self, w: u64) {
        match self {
            WordSet::Dense(bits) => bits[(w >> 6) as usize] |= 1 << (w & 63),
            WordSet::Sparse(set) => {
                set.insert(w);
            }
        }
    }

    fn union(&mut self, other: WordSet) {
        match (self, other) {
            (WordSet::Dense(a), WordSet::Dense(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x |= y),
            (WordSet::Sparse(a), WordSet::Sparse(b)) => a.extend(b),
            _ => unreachable!("word sets of one length share a representation"),
        }
    }

    fn len(&self) -> u64 {
        match self {
            WordSet::Dense(bits) => bits.iter().map(|w| w.count_ones() as u64).sum(),
            WordSet::Sparse(set) => set.len() as u64,
        }
    }
}

/// Exact `P(k)`, the number of distinct words `f(s..s+k)` inside `f(1..=N)`,
/// for `k = 1..=n_max`.
pub fn block_complexity(seq: &SymbolicSequence<'_>, n_max: usize, n: u64) -> Result<ComplexityProfile> {
    let a = seq.alphabet().len();
    let max = max_word_length(a);
    if n_max == 0 || n_max > max {
        return Err(Error::PackingWidth { n_max, max });
    }
    if n < n_max as u64 {
        return Err(Error::EmptyRange);
    }
    check_len(seq, n)?;
    let bits = letter_bits(a);
    let mask = |k: usize| -> u64 {
        let b = bits as usize * k;
        if b >= 64 {
            u64::MAX
        } else {
            (1u64 << b) - 1
        }
    };
    // Shards overlap by n_max - 1 letters so every window lies in one shard.
    let shards = partition(1..n + 1, DEFAULT_PARTITIONS);
    let partials: Vec<Vec<WordSet>> = shards
        .into_par_iter()
        .map(|r| {
            let mut sets: Vec<WordSet> = (1..=n_max).map(|k| WordSet::new(bits * k as u32)).collect();
            // word(s) holds f(s), …, f(s + n_max - 1) with f(s) in the low bits;
            // letters past N are zero and never reach a counted window.
            let letter = |i: u64| if i <= n { seq.code(i) as u64 } else { 0 };
            let mut word = 0u64;
            for j in (0..n_max as u64).rev() {
                word = (word << bits) | letter(r.start + j);
            }
            let top_shift = bits as usize * (n_max - 1);
            for s in r {
                for (k, set) in sets.iter_mut().enumerate() {
                    let len = k as u64 + 1;
                    if s + len - 1 <= n {
                        set.insert(word & mask(k + 1));
                    }
                }
                word >>= bits;
                if n_max > 1 || bits < 64 {
                    word |= letter(s + n_max as u64) << top_shift;
                }
            }
            sets
        })
        .collect();
    let mut merged: Option<Vec<WordSet>> = None;
    for p in partials {
        match &mut merged {
            None => merged = Some(p),
            Some(m) => m.iter_mut().zip(p).for_each(|(a, b)| a.union(b)),
        }
    }
    let counts = merged.unwrap().iter().map(WordSet::len).collect();
    Ok(ComplexityProfile {
        counts,
        n,
        alphabet_size: a,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Autocorrelation {
    /// `rho[h]` for `h = 0..=H`.
    pub rho: Vec<Complex64>,
    pub n: u64,
    pub mode: Mode,
}

/// `ρ(h)`, the average over `n ∈ [1, N]` of `f(n) conj f(n + h)`.
pub fn autocorrelation_sequence(table: &ValueTable, max_lag: u64, n: u64, mode: Mode) -> Result<Autocorrelation> {
    if n == 0 {
        return Err(Error::EmptyRange);
    }
    if table.len() < n + max_lag {
        return Err(Error::TableTooShort {
            required: n + max_lag,
            available: table.len(),
        });
    }
    let mass = mode.mass(1, n);
    let parts = partition(1..n + 1, DEFAULT_PARTITIONS);
    let partials: Vec<Vec<ComplexNeumaier>> = parts
        .into_par_iter()
        .map(|r| {
            let mut acc = vec![ComplexNeumaier::new(); max_lag as usize + 1];
            for k in r {
                let w = mode.weight(k);
                let a = table.get(k) * w;
                for (h, slot) in acc.iter_mut().enumerate() {
                    slot.add(a * table.get(k + h as u64).conj());
                }
            }
            acc
        })
        .collect();
    let rho = (0..=max_lag as usize)
        .map(|h| {
            let mut s = ComplexNeumaier::new();
            for p in &partials {
                s.merge(&p[h]);
            }
            s.value() / mass
        })
        .collect();
    Ok(Autocorrelation { rho, n, mode })
}

/// `σ(α) = Σ_{h=0}^{H} ρ(h) e(-h α)` for each `α`.
pub fn spectrum_probe(rho: &[Complex64], alphas: &[f64]) -> Vec<Complex64> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut acc = ComplexNeumaier::new();
            for (h, r) in rho.iter().enumerate() {
                let frac = (h as f64 * alpha).rem_euclid(1.0);
                acc.add(r * Complex64::from_polar(1.0, -TAU * frac));
            }
            acc.value()
        })
        .collect()
}
