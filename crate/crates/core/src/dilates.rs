//! Correlations at prime dilates of the shifts.
//!
//! For a pattern `∏_j g_j(n + h_j)` and each prime `p` of a residue class
//! `P_d = {p ≡ 1 mod d}`, the dilated correlation `corr(p h)` is the
//! logarithmic average of `∏_j g_j(n + p h_j)` at truncation `N`. The report
//! compares it with `c_p · corr(h)`, `c_p = ∏_j g_j(p)`, averaged over primes
//! with the dyadic-logarithmic mean [`prime_dyadic_log_average`].
//!
//! Patterns with at most one distinct nonzero shift reduce to a single
//! cross-correlation `Σ_n x(n) y(n + s)` over all lags `s = p h` at once, which
//! is evaluated with one FFT convolution. Other patterns are summed directly,
//! one prime at a time.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith::primes_up_to;
use crate::averages::{correlation, harmonic_range, ShiftFactor, ShiftPattern, WeightSpec};
use crate::error::{Error, Result};
use crate::funcspec::MultiplicativeSpec;
use crate::sieve::ValueTable;
use crate::summation::{ComplexNeumaier, Neumaier};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeClass {
    pub d: u64,
    pub p_max: u64,
    pub primes: Vec<u64>,
}

pub fn primes_in_class(d: u64, p_max: u64) -> Result<PrimeClass> {
    if d == 0 || p_max < 2 {
        return Err(Error::InvalidArgument("prime class needs d >= 1 and P >= 2".into()));
    }
    let primes = primes_up_to(p_max).into_iter().filter(|p| (p - 1) % d == 0).collect();
    Ok(PrimeClass { d, p_max, primes })
}

/// Dyad index `m` with `2^m <= p < 2^{m+1}`.
fn dyad_of(p: u64) -> u32 {
    63 - p.leading_zeros()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadBlock {
    pub m: u32,
    pub count: usize,
    pub mean: Complex64,
}

/// Uniform means of `values` over each non-empty dyad `[2^m, 2^{m+1})`,
/// `1 <= m <= dyads`.
pub fn dyadic_blocks(values: &[(u64, Complex64)], dyads: u32) -> Vec<DyadBlock> {
    let mut sums: Vec<(ComplexNeumaier, usize)> = vec![(ComplexNeumaier::new(), 0); dyads as usize + 1];
    for &(p, v) in values {
        let m = dyad_of(p);
        if (1..=dyads).contains(&m) {
            sums[m as usize].0.add(v);
            sums[m as usize].1 += 1;
        }
    }
    sums.iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(m, (s, c))| DyadBlock {
            m: m as u32,
            count: *c,
            mean: s.value() / *c as f64,
        })
        .collect()
}

/// `(Σ_m (1/m) · mean over dyad m) / Σ_m (1/m)` over the non-empty dyads
/// `1 <= m <= dyads`.
pub fn prime_dyadic_log_average(values: &[(u64, Complex64)], dyads: u32) -> Result<Complex64> {
    let blocks = dyadic_blocks(values, dyads);
    if blocks.is_empty() {
        return Err(Error::EmptyDyads);
    }
    let mut num = ComplexNeumaier::new();
    let mut den = Neumaier::new();
    for b in &blocks {
        let w = 1.0 / b.m as f64;
        num.add(b.mean * w);
        den.add(w);
    }
    Ok(num.value() / den.value())
}

#[derive(Clone, Copy, Debug)]
pub struct DilateFactor<'a> {
    /// `g_j` as a spec, used for `g_j(p)`.
    pub spec: &'a MultiplicativeSpec,
    /// `g_j` sieved on `[1, len]`.
    pub table: &'a ValueTable,
    pub shift: i64,
    pub conjugate: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum DilateMethod {
    /// Spectral when the pattern allows it, direct otherwise.
    #[default]
    Auto,
    Direct,
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilateOptions {
    /// Correlation truncation `N`.
    pub n: u64,
    /// Dyad count `M`; `None` means `floor(log2 P)`.
    pub dyads: Option<u32>,
    pub method: DilateMethod,
}

impl DilateOptions {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            dyads: None,
            method: DilateMethod::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrimeRow {
    pub p: u64,
    pub dyad: u32,
    pub corr_dilated: Complex64,
    pub c_pm: Complex64,
    pub abs_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadSummary {
    pub m: u32,
    pub count: usize,
    pub mean_abs_residual: f64,
    pub mean_corr_dilated: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilateIdentityReport {
    /// `E*_p |c_p corr(h) - corr(p h)|`.
    pub residual_weighted: f64,
    /// `E*_p |corr(h) - corr(p h)|`.
    pub residual_unit: f64,
    /// `corr(h)`.
    pub lhs_corr: Complex64,
    /// Plain mean of `corr(p h)` over the class primes.
    pub rhs_dilate_mean: Complex64,
    pub per_dyad: Vec<DyadSummary>,
    pub rows: Vec<PrimeRow>,
    pub n: u64,
    pub p_max: u64,
    pub d: u64,
    pub dyads: u32,
    pub spectral: bool,
}

/// Table length needed for the dilated correlations up to `p_max`.
pub fn required_length(factors: &[DilateFactor<'_>], n: u64, p_max: u64) -> u64 {
    let h = factors.iter().map(|f| f.shift).max().unwrap_or(0).max(0) as u64;
    n + p_max * h
}

pub fn dilate_identity_residual(
    factors: &[DilateFactor<'_>],
    class: &PrimeClass,
    opts: &DilateOptions,
) -> Result<DilateIdentityReport> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("dilate pattern needs at least one factor".into()));
    }
    let n = opts.n;
    let p_max = class.primes.last().copied().unwrap_or(class.p_max);
    let required = required_length(factors, n, p_max);
    for f in factors {
        if f.table.len() < required {
            return Err(Error::TableTooShort {
                required,
                available: f.table.len(),
            });
        }
    }
    let dyads = opts.dyads.unwrap_or_else(|| dyad_of(class.p_max.max(2)));
    let in_dyads: Vec<u64> = class.primes.iter().copied().filter(|&p| dyad_of(p) <= dyads).collect();
    if in_dyads.is_empty() {
        return Err(Error::EmptyDyads);
    }
    let min_lag = factors.iter().map(|f| f.shift).min().unwrap().min(0).unsigned_abs();
    if 1 + min_lag * p_max > n {
        return Err(Error::EmptyRange);
    }

    let lhs_corr = correlation(&pattern_at(factors, 1)?, &WeightSpec::None, &[n])?.log_avg[0];
    let spectral = match opts.method {
        DilateMethod::Direct => false,
        DilateMethod::Spectral => {
            if !spectral_eligible(factors) {
                return Err(Error::InvalidArgument(
                    "spectral evaluation needs at most one distinct nonzero shift".into(),
                ));
            }
            true
        }
        DilateMethod::Auto => spectral_eligible(factors),
    };
    let dilated = if spectral {
        spectral_dilates(factors, &in_dyads, n)?
    } else {
        in_dyads
            .par_iter()
            .map(|&p| Ok(correlation(&pattern_at(factors, p as i64)?, &WeightSpec::None, &[n])?.log_avg[0]))
            .collect::<Result<Vec<_>>>()?
    };

    let mut rows = Vec::with_capacity(in_dyads.len());
    for (&p, &corr) in in_dyads.iter().zip(&dilated) {
        let mut c = Complex64::new(1.0, 0.0);
        for f in factors {
            let v = f.spec.value_at_prime(p)?;
            c *= if f.conjugate { v.conj() } else { v };
        }
        rows.push(PrimeRow {
            p,
            dyad: dyad_of(p),
            corr_dilated: corr,
            c_pm: c,
            abs_residual: (c * lhs_corr - corr).norm(),
        });
    }

    let weighted: Vec<(u64, Complex64)> = rows.iter().map(|r| (r.p, Complex64::new(r.abs_residual, 0.0))).collect();
    let unit: Vec<(u64, Complex64)> = rows
        .iter()
        .map(|r| (r.p, Complex64::new((lhs_corr - r.corr_dilated).norm(), 0.0)))
        .collect();
    let corrs: Vec<(u64, Complex64)> = rows.iter().map(|r| (r.p, r.corr_dilated)).collect();
    let residual_weighted = prime_dyadic_log_average(&weighted, dyads)?.re;
    let residual_unit = prime_dyadic_log_average(&unit, dyads)?.re;
    let mean: ComplexNeumaier = {
        let mut acc = ComplexNeumaier::new();
        for r in &rows {
            acc.add(r.corr_dilated);
        }
        acc
    };
    let rhs_dilate_mean = mean.value() / rows.len() as f64;
    let per_dyad = dyadic_blocks(&weighted, dyads)
        .into_iter()
        .zip(dyadic_blocks(&corrs, dyads))
        .map(|(w, c)| DyadSummary {
            m: w.m,
            count: w.count,
            mean_abs_residual: w.mean.re,
            mean_corr_dilated: c.mean,
        })
        .collect();

    Ok(DilateIdentityReport {
        residual_weighted,
        residual_unit,
        lhs_corr,
        rhs_dilate_mean,
        per_dyad,
        rows,
        n,
        p_max: class.p_max,
        d: class.d,
        dyads,
        spectral,
    })
}

fn pattern_at<'a>(factors: &[DilateFactor<'a>], scale: i64) -> Result<ShiftPattern<'a>> {
    ShiftPattern::new(
        factors
            .iter()
            .map(|f| ShiftFactor::new(f.table, f.shift * scale, f.conjugate))
            .collect(),
    )
}

fn spectral_eligible(factors: &[DilateFactor<'_>]) -> bool {
    let mut nonzero = factors.iter().map(|f| f.shift).filter(|&h| h != 0);
    match nonzero.next() {
        None => true,
        Some(h) => nonzero.all(|k| k == h),
    }
}

/// Product of the factors with the given shift, as a function of the
/// argument `k = n + shift`, for `k = 1..=len`.
fn factor_product(factors: &[DilateFactor<'_>], shift: i64, len: u64) -> Vec<Complex64> {
    let chosen: Vec<&DilateFactor<'_>> = factors.iter().filter(|f| f.shift == shift).collect();
    (1..=len)
        .into_par_iter()
        .map(|k| {
            let mut z = Complex64::new(1.0, 0.0);
            for f in &chosen {
                let v = f.table.get(k);
                z *= if f.conjugate { v.conj() } else { v };
            }
            z
        })
        .collect()
}

fn is_zero(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Smallest `2^a 3^b 5^c >= n`.
fn next_smooth(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// `c[s] = Σ_i u[i] v[i + s]` for `0 <= s < lags`, with both inputs taken
/// as zero outside their slices.
pub(crate) fn cross_correlation(u: &[Complex64], v: &[Complex64], lags: usize) -> Vec<Complex64> {
    let len = next_smooth(u.len().max(v.len()) + lags);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_inverse(len);
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    for (dst, src) in a.iter_mut().zip(u) {
        *dst = src.conj();
    }
    fwd.process(&mut a);
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    b[..v.len()].copy_from_slice(v);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = x.conj() * y;
    }
    drop(b);
    inv.process(&mut a);
    let scale = 1.0 / len as f64;
    a.truncate(lags);
    for x in a.iter_mut() {
        *x *= scale;
    }
    a
}

fn spectral_dilates(factors: &[DilateFactor<'_>], primes: &[u64], n: u64) -> Result<Vec<Complex64>> {
    let h = factors.iter().map(|f| f.shift).find(|&h| h != 0);
    let anchored = factor_product(factors, 0, n);
    let h = match h {
        // Every dilate equals the undilated pattern.
        None => {
            let c = correlation(&pattern_at(factors, 1)?, &WeightSpec::None, &[n])?.log_avg[0];
            return Ok(vec![c; primes.len()]);
        }
        Some(h) => h,
    };
    let x: Vec<Complex64> = anchored
        .iter()
        .enumerate()
        .map(|(i, z)| z / (i + 1) as f64)
        .collect();
    let s_max = (primes.last().copied().unwrap() * h.unsigned_abs()) as usize;
    let zero = Complex64::new(0.0, 0.0);
    let total = harmonic_range(1, n);
    let corr = if h > 0 {
        // Σ_{n=1}^{N} x(n) y(n + p h)
        let y = factor_product(factors, h, n + s_max as u64);
        if is_zero(&x) || is_zero(&y) {
            return Ok(vec![zero; primes.len()]);
        }
        let c = cross_correlation(&x, &y, s_max + 1);
        primes.iter().map(|&p| c[(p * h as u64) as usize] / total).collect()
    } else {
        // Σ_{n = 1 + p|h|}^{N} x(n) y(n - p|h|) = Σ_k y(k) x(k + p|h|)
        let y = factor_product(factors, h, n);
        if is_zero(&x) || is_zero(&y) {
            return Ok(vec![zero; primes.len()]);
        }
        let c = cross_correlation(&y, &x, s_max + 1);
        primes
            .iter()
            .map(|&p| {
                let s = p * h.unsigned_abs();
                c[s as usize] / harmonic_range(1 + s, n)
            })
            .collect()
    };
    Ok(corr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspec::make_dirichlet_character;
    use crate::sieve::sieve_range;

    #[test]
    fn class_examples() {
        assert_eq!(primes_in_class(1, 10).unwrap().primes, vec![2, 3, 5, 7]);
        assert_eq!(primes_in_class(4, 30).unwrap().primes, vec![5, 13, 17, 29]);
        let odd = primes_in_class(2, 100).unwrap();
        assert_eq!(odd.primes.len(), 24);
        assert!(!odd.primes.contains(&2));
    }

    #[test]
    fn class_membership_is_divisibility() {
        let all = primes_up_to(10_000);
        for d in 1..=50 {
            let class = primes_in_class(d, 10_000).unwrap();
            for &p in &all {
                assert_eq!(class.primes.binary_search(&p).is_ok(), (p - 1) % d == 0);
            }
        }
    }

    #[test]
    fn dyadic_average_examples() {
        let primes = primes_up_to(1 << 12);
        let ones: Vec<_> = primes.iter().map(|&p| (p, Complex64::new(1.0, 0.0))).collect();
        assert!((prime_dyadic_log_average(&ones, 11).unwrap() - 1.0).norm() < 1e-15);
        let v = Complex64::new(0.3, -0.4);
        let single: Vec<_> = primes
            .iter()
            .filter(|&&p| dyad_of(p) == 7)
            .map(|&p| (p, v))
            .collect();
        assert!((prime_dyadic_log_average(&single, 11).unwrap() - v).norm() < 1e-15);
        assert!(matches!(prime_dyadic_log_average(&[], 5), Err(Error::EmptyDyads)));
        assert!(matches!(prime_dyadic_log_average(&[(1 << 20, v)], 5), Err(Error::EmptyDyads)));
    }

    /// Direct evaluation: per-dyad means of χ(p) weighted by 1/m.
    fn naive_dyadic(chi: &MultiplicativeSpec, dyads: u32) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for m in 1..=dyads {
            let ps: Vec<u64> = primes_up_to((1 << (m + 1)) - 1).into_iter().filter(|&p| p >= 1 << m).collect();
            let s: f64 = ps.iter().map(|&p| chi.evaluate_point(p).unwrap().re).sum();
            num += s / ps.len() as f64 / m as f64;
            den += 1.0 / m as f64;
        }
        num / den
    }

    #[test]
    fn dyadic_average_of_character_matches_direct_sum() {
        let chi = make_dirichlet_character(4, 1).unwrap();
        let primes = primes_up_to(1 << 23);
        let vals: Vec<_> = primes.iter().map(|&p| (p, chi.value_at_prime(p).unwrap())).collect();
        let v = prime_dyadic_log_average(&vals, 22).unwrap();
        assert!((v.re - naive_dyadic(&chi, 22)).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
        // The first dyads {2, 3} and {17, …, 31} carry weight 1 and 1/4, so the
        // mean approaches 0 only like 1 / log M; the tail beyond m = 10 is small.
        let tail: Vec<_> = vals.iter().copied().filter(|&(p, _)| p >= 1 << 10).collect();
        assert!(prime_dyadic_log_average(&tail, 22).unwrap().norm() <= 0.05);
    }

    #[test]
    fn next_smooth_values() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(7), 8);
        assert_eq!(next_smooth(11), 12);
        assert_eq!(next_smooth(10_100_001), 10_125_000);
    }

    #[test]
    fn cross_correlation_matches_direct() {
        let u: Vec<Complex64> = (0..300).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos() / (i + 1) as f64)).collect();
        let v: Vec<Complex64> = (0..420).map(|i| Complex64::new(((i * i) % 17) as f64 - 8.0, 0.5)).collect();
        let c = cross_correlation(&u, &v, 121);
        for s in 0..121 {
            let direct: Complex64 = (0..300).filter(|i| i + s < 420).map(|i| u[i] * v[i + s]).sum();
            assert!((c[s] - direct).norm() < 1e-9, "lag {s}");
        }
    }

    fn report(
        specs: &[MultiplicativeSpec],
        shifts: &[i64],
        conj: &[bool],
        d: u64,
        p_max: u64,
        n: u64,
        method: DilateMethod,
    ) -> DilateIdentityReport {
        let class = primes_in_class(d, p_max).unwrap();
        let len = n + p_max * shifts.iter().copied().max().unwrap().max(0) as u64;
        let tables: Vec<ValueTable> = specs.iter().map(|s| sieve_range(s, len).unwrap()).collect();
        let factors: Vec<DilateFactor<'_>> = specs
            .iter()
            .zip(&tables)
            .zip(shifts.iter().zip(conj))
            .map(|((spec, table), (&shift, &conjugate))| DilateFactor { spec, table, shift, conjugate })
            .collect();
        let opts = DilateOptions { n, dyads: None, method };
        dilate_identity_residual(&factors, &class, &opts).unwrap()
    }

    #[test]
    fn spectral_and_direct_paths_agree() {
        let l = MultiplicativeSpec::liouville();
        let a = MultiplicativeSpec::archimedean(1.3).unwrap();
        for shifts in [[0i64, 1], [0, -2], [3, 0]] {
            let specs = [l.clone(), a.clone()];
            let d = report(&specs, &shifts, &[false, true], 1, 300, 20_000, DilateMethod::Direct);
            let s = report(&specs, &shifts, &[false, true], 1, 300, 20_000, DilateMethod::Spectral);
            assert!(s.spectral && !d.spectral);
            for (x, y) in d.rows.iter().zip(&s.rows) {
                assert_eq!(x.p, y.p);
                assert!((x.corr_dilated - y.corr_dilated).norm() < 1e-10, "{shifts:?} p={}", x.p);
            }
            assert!((d.residual_weighted - s.residual_weighted).abs() < 1e-10);
        }
    }

    #[test]
    fn liouville_pair_weights_are_one() {
        let l = MultiplicativeSpec::liouville();
        let r = report(&[l.clone(), l], &[0, 1], &[false, false], 1, 200, 10_000, DilateMethod::Auto);
        assert!(r.rows.iter().all(|row| row.c_pm == Complex64::new(1.0, 0.0)));
        assert_eq!(r.residual_weighted, r.residual_unit);
    }

    #[test]
    fn constant_one_has_zero_residual() {
        let one = MultiplicativeSpec::one();
        let r = report(&[one], &[1], &[false], 1, 100, 5000, DilateMethod::Direct);
        assert_eq!(r.lhs_corr, Complex64::new(1.0, 0.0));
        assert!(r.rows.iter().all(|row| row.abs_residual == 0.0));
        assert_eq!(r.residual_weighted, 0.0);
    }

    #[test]
    fn character_pair_on_class_four() {
        let chi = make_dirichlet_character(4, 1).unwrap();
        let r = report(&[chi.clone(), chi], &[0, 1], &[false, true], 4, 2000, 100_000, DilateMethod::Auto);
        assert!(r.rows.iter().all(|row| (row.c_pm - 1.0).norm() < 1e-15));
        assert!(r.residual_weighted < 0.01, "{}", r.residual_weighted);
        assert!((r.lhs_corr - r.rhs_dilate_mean).norm() < 0.01);
    }

    #[test]
    fn vanishing_factor_gives_zeros() {
        let zero = MultiplicativeSpec::new(crate::funcspec::SpecKind::CustomCompletelyMultiplicative {
            values: vec![],
            default: crate::funcspec::DefaultRule::Zero,
        })
        .unwrap();
        // f(n) = 0 for n >= 2, so f(n + p) λ(n) vanishes on the summed range.
        let l = MultiplicativeSpec::liouville();
        let direct = report(&[zero.clone(), l.clone()], &[1, 0], &[false, false], 1, 100, 5000, DilateMethod::Direct);
        assert_eq!(direct.lhs_corr, Complex64::new(0.0, 0.0));
        assert!(direct.rows.iter().all(|row| row.corr_dilated == Complex64::new(0.0, 0.0)));
        let spectral = report(&[zero, l], &[1, 0], &[false, false], 1, 100, 5000, DilateMethod::Spectral);
        assert!(spectral.rows.iter().all(|row| row.corr_dilated.norm() < 1e-15));
    }

    #[test]
    fn identically_zero_table_gives_exact_zeros() {
        let l = MultiplicativeSpec::liouville();
        let n = 4000;
        let zeros = ValueTable::from_values(0, vec![Complex64::new(0.0, 0.0); n + 200]);
        let lam = sieve_range(&l, n as u64 + 200).unwrap();
        let class = primes_in_class(1, 150).unwrap();
        for method in [DilateMethod::Direct, DilateMethod::Spectral] {
            let f = [
                DilateFactor { spec: &l, table: &lam, shift: 0, conjugate: false },
                DilateFactor { spec: &l, table: &zeros, shift: 1, conjugate: false },
            ];
            let r = dilate_identity_residual(&f, &class, &DilateOptions { n: n as u64, dyads: None, method }).unwrap();
            assert_eq!(r.lhs_corr, Complex64::new(0.0, 0.0));
            assert_eq!(r.rhs_dilate_mean, Complex64::new(0.0, 0.0));
            assert_eq!(r.residual_weighted, 0.0);
        }
    }

    #[test]
    fn short_table_reports_required_length() {
        let l = MultiplicativeSpec::liouville();
        let t = sieve_range(&l, 1000).unwrap();
        let f = [DilateFactor { spec: &l, table: &t, shift: 0, conjugate: false }, DilateFactor { spec: &l, table: &t, shift: 1, conjugate: false }];
        let class = primes_in_class(1, 100).unwrap();
        let err = dilate_identity_residual(&f, &class, &DilateOptions::new(1000)).unwrap_err();
        assert!(matches!(err, Error::TableTooShort { required: 1097, .. }));
    }
}
