//! Prime-sum distances between multiplicative functions.
//!
//! `D(f, g; N)^2 = Σ_{p <= N} (1 - Re f(p) conj g(p)) / p`, with each
//! `1 - Re(...)` clamped to `[0, 2]`. The strong-aperiodicity statistic
//! `M(f; N)` minimizes `D(f, n^{it}; N)^2` over `|t| <= T`: a uniform grid
//! locates the candidate basins and a golden-section search refines the best
//! few. Grid values are produced by rotating `p^{-it}` from one grid point to
//! the next, reseeded exactly at the start of each block of grid points.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::primes_up_to;
use crate::averages::progression_sum;
use crate::error::{Error, Result};
use crate::funcspec::{make_dirichlet_character, MultiplicativeSpec};
use crate::sieve::ValueTable;
use crate::summation::{reduce_partitioned, Neumaier, DEFAULT_PARTITIONS};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub d_squared: f64,
    pub n: u64,
    pub prime_count: u64,
    /// Running value after each prime, when requested.
    pub partial_series: Option<Vec<(u64, f64)>>,
}

#[inline]
fn clamp_term(x: f64) -> f64 {
    x.clamp(0.0, 2.0)
}

fn prime_values(f: &MultiplicativeSpec, primes: &[u64]) -> Result<Vec<Complex64>> {
    primes.par_iter().map(|&p| f.value_at_prime(p)).collect()
}

/// `Σ_{p <= N} 1/p` over primes, compensated.
pub fn prime_reciprocal_sum(n: u64) -> f64 {
    primes_up_to(n).iter().map(|&p| 1.0 / p as f64).collect::<Neumaier>().value()
}

pub fn distance_squared(f: &MultiplicativeSpec, g: &MultiplicativeSpec, n: u64) -> Result<DistanceReport> {
    distance_report(f, g, n, false)
}

/// As [`distance_squared`], also recording the running sum after each prime.
pub fn distance_squared_series(f: &MultiplicativeSpec, g: &MultiplicativeSpec, n: u64) -> Result<DistanceReport> {
    distance_report(f, g, n, true)
}

fn distance_report(f: &MultiplicativeSpec, g: &MultiplicativeSpec, n: u64, series: bool) -> Result<DistanceReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("distance needs N >= 2".into()));
    }
    let primes = primes_up_to(n);
    let fv = prime_values(f, &primes)?;
    let gv = prime_values(g, &primes)?;
    let term = |i: usize| clamp_term(1.0 - (fv[i] * gv[i].conj()).re) / primes[i] as f64;
    let partial_series = series.then(|| {
        let mut acc = Neumaier::new();
        (0..primes.len())
            .map(|i| {
                acc.add(term(i));
                (primes[i], acc.value())
            })
            .collect()
    });
    let total = reduce_partitioned(
        0..primes.len() as u64,
        DEFAULT_PARTITIONS,
        |r| r.map(|i| term(i as usize)).collect::<Neumaier>(),
        |mut a, b| {
            a.merge(&b);
            a
        },
    )
    .unwrap_or_default();
    Ok(DistanceReport {
        d_squared: total.value(),
        n,
        prime_count: primes.len() as u64,
        partial_series,
    })
}

/// Uniform average over primes `p <= P` of `1 - Re a(p) conj b(p)`.
pub fn weak_pretension_estimate(a: &MultiplicativeSpec, b: &MultiplicativeSpec, p_max: u64) -> Result<f64> {
    if p_max < 2 {
        return Err(Error::InvalidArgument("prime bound must be >= 2".into()));
    }
    let primes = primes_up_to(p_max);
    let av = prime_values(a, &primes)?;
    let bv = prime_values(b, &primes)?;
    let sum: Neumaier = av
        .iter()
        .zip(&bv)
        .map(|(x, y)| clamp_term(1.0 - (x * y.conj()).re))
        .collect();
    Ok(sum.value() / primes.len() as f64)
}

/// `Σ_{p <= N} (1 - |f(p)|) / p`; large values flag functions whose mean
/// modulus vanishes.
pub fn wirsing_defect(f: &MultiplicativeSpec, n: u64) -> Result<f64> {
    let primes = primes_up_to(n);
    let fv = prime_values(f, &primes)?;
    Ok(primes
        .iter()
        .zip(&fv)
        .map(|(&p, z)| (1.0 - z.norm()).max(0.0) / p as f64)
        .collect::<Neumaier>()
        .value())
}

// ---------------------------------------------------------------------------
// Strong aperiodicity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridParams {
    /// Grid step; `None` means `0.05 / ln N`.
    pub step: Option<f64>,
    /// Number of best local minima refined.
    pub kappa: usize,
    /// Final bracket width of the golden-section search.
    pub refine_width: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            step: None,
            kappa: 5,
            refine_width: 1e-6,
        }
    }
}

impl GridParams {
    pub fn step_for(&self, n: u64) -> f64 {
        self.step.unwrap_or(0.05 / (n as f64).ln())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AperiodicityStatistic {
    pub m_value: f64,
    pub minimizing_t: f64,
    pub t_search_bound: f64,
    pub grid_resolution: f64,
    pub n: u64,
}

/// Primes with `ln p`, `1/p` and `f(p)`, the inputs of `t ↦ D(f, n^{it}; N)^2`.
struct PrimeData {
    log_p: Vec<f64>,
    inv_p: Vec<f64>,
    values: Vec<Complex64>,
}

impl PrimeData {
    fn new(f: &MultiplicativeSpec, n: u64) -> Result<Self> {
        let primes = primes_up_to(n);
        Ok(Self {
            log_p: primes.iter().map(|&p| (p as f64).ln()).collect(),
            inv_p: primes.iter().map(|&p| 1.0 / p as f64).collect(),
            values: prime_values(f, &primes)?,
        })
    }

    /// Compensated `D(f, n^{it}; N)^2`.
    fn distance(&self, t: f64) -> f64 {
        let mut acc = Neumaier::new();
        for i in 0..self.log_p.len() {
            let (s, c) = (t * self.log_p[i]).sin_cos();
            // Re(f(p) p^{-it})
            let v = self.values[i];
            let re = v.re * c + v.im * s;
            acc.add(clamp_term(1.0 - re) * self.inv_p[i]);
        }
        acc.value()
    }

    /// `D^2` at `t0 + j δ` for `j < len`.
    fn grid_block(&self, t0: f64, step: f64, len: usize) -> Vec<f64> {
        let mut acc = vec![0.0; len];
        for i in 0..self.log_p.len() {
            let lp = self.log_p[i];
            let (s0, c0) = (t0 * lp).sin_cos();
            let (sd, cd) = (step * lp).sin_cos();
            let rot = Complex64::new(cd, -sd);
            let mut z = self.values[i] * Complex64::new(c0, -s0);
            let w = self.inv_p[i];
            for a in acc.iter_mut() {
                *a += clamp_term(1.0 - z.re) * w;
                z *= rot;
            }
        }
        acc
    }
}

const GRID_BLOCK: usize = 256;

fn candidate_order(a: &(f64, f64), b: &(f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.abs().total_cmp(&b.1.abs()))
        .then(a.1.total_cmp(&b.1))
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > width {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (f1, x1)
    } else {
        (f2, x2)
    }
}

/// `min_{|t| <= t_bound} D(f, n^{it}; N)^2` and its minimizer.
pub fn strong_aperiodicity_statistic(
    f: &MultiplicativeSpec,
    n: u64,
    t_bound: f64,
    grid: &GridParams,
) -> Result<AperiodicityStatistic> {
    if n < 2 {
        return Err(Error::InvalidArgument("statistic needs N >= 2".into()));
    }
    if !(t_bound > 0.0 && t_bound.is_finite()) {
        return Err(Error::InvalidArgument("t_bound must be positive and finite".into()));
    }
    let step = grid.step_for(n);
    if !(step > 0.0 && step.is_finite()) || grid.kappa == 0 || grid.refine_width.is_nan() || grid.refine_width <= 0.0 {
        return Err(Error::InvalidArgument("grid step, kappa and refine width must be positive".into()));
    }
    let data = PrimeData::new(f, n)?;

    // Grid t_k = k δ for |k| <= K, plus ±t_bound when off-grid.
    let k_max = (t_bound / step).floor() as i64;
    let count = (2 * k_max + 1) as usize;
    let t0 = -(k_max as f64) * step;
    let blocks: Vec<Vec<f64>> = (0..count.div_ceil(GRID_BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * GRID_BLOCK;
            let len = GRID_BLOCK.min(count - start);
            data.grid_block(t0 + start as f64 * step, step, len)
        })
        .collect();
    let mut points: Vec<(f64, f64)> = blocks
        .concat()
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, (k as i64 - k_max) as f64 * step))
        .collect();
    if (k_max as f64) * step < t_bound {
        points.insert(0, (data.distance(-t_bound), -t_bound));
        points.push((data.distance(t_bound), t_bound));
    }

    let mut minima: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let v = points[i].0;
            (i == 0 || v <= points[i - 1].0) && (i + 1 == points.len() || v <= points[i + 1].0)
        })
        .collect();
    minima.sort_by(|&a, &b| candidate_order(&points[a], &points[b]));
    minima.truncate(grid.kappa);

    let mut candidates: Vec<(f64, f64)> = minima
        .par_iter()
        .flat_map_iter(|&i| {
            let lo = points[i.saturating_sub(1)].1;
            let hi = points[(i + 1).min(points.len() - 1)].1;
            let exact = (data.distance(points[i].1), points[i].1);
            let refined = golden_section(|t| data.distance(t), lo, hi, grid.refine_width);
            [exact, refined]
        })
        .collect();
    candidates.push((data.distance(0.0), 0.0));
    let (m_value, minimizing_t) = candidates
        .into_iter()
        .min_by(candidate_order)
        .expect("candidate list is never empty");
    Ok(AperiodicityStatistic {
        m_value,
        minimizing_t,
        t_search_bound: t_bound,
        grid_resolution: step,
        n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub q: u64,
    pub char_index: u64,
    pub n: u64,
    pub m_value: f64,
    pub minimizing_t: f64,
}

/// `M(f χ; N)` for every character `χ` of every modulus in `moduli` and every
/// `N` in `ns`.
pub fn strong_aperiodicity_profile(
    f: &MultiplicativeSpec,
    moduli: &[u64],
    ns: &[u64],
    t_bound: f64,
    grid: &GridParams,
) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::new();
    for &q in moduli {
        if q == 0 {
            return Err(Error::InvalidArgument("character modulus must be >= 1".into()));
        }
        let count = crate::funcspec::character::character_count(q);
        for index in 0..count {
            let chi = make_dirichlet_character(q, index)?;
            let g = MultiplicativeSpec::product(&[f.clone(), chi])?;
            for &n in ns {
                let s = strong_aperiodicity_statistic(&g, n, t_bound, grid)?;
                rows.push(ProfileRow {
                    q,
                    char_index: index,
                    n,
                    m_value: s.m_value,
                    minimizing_t: s.minimizing_t,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub max_abs: f64,
    pub a: u64,
    pub b: u64,
}

/// Largest `|E_{m <= N, m ≡ b (a)} f(m)|` over `1 <= a <= a_max`, `0 <= b < a`.
pub fn aperiodicity_scan(table: &ValueTable, a_max: u64, n: u64) -> Result<ScanResult> {
    if a_max == 0 || n == 0 {
        return Err(Error::InvalidArgument("scan needs a_max >= 1 and N >= 1".into()));
    }
    if table.len() < n {
        return Err(Error::TableTooShort {
            required: n,
            available: table.len(),
        });
    }
    let cells: Vec<(u64, u64)> = (1..=a_max).flat_map(|a| (0..a).map(move |b| (a, b))).collect();
    let values: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(a, b)| {
            let first = if b == 0 { a } else { b };
            if first > n {
                return None;
            }
            let count = (n - first) / a + 1;
            Some((progression_sum(table, a, first, n) / count as f64).norm())
        })
        .collect();
    let mut best = ScanResult { max_abs: -1.0, a: 1, b: 0 };
    for (&(a, b), v) in cells.iter().zip(values) {
        if let Some(v) = v {
            if v > best.max_abs {
                best = ScanResult { max_abs: v, a, b };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::sieve_range;
    use proptest::prelude::*;

    fn chi4() -> MultiplicativeSpec {
        make_dirichlet_character(4, 1).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        for f in [MultiplicativeSpec::liouville(), chi4(), MultiplicativeSpec::archimedean(2.5).unwrap()] {
            let r = distance_squared(&f, &f, 1000).unwrap();
            // χ mod 4 vanishes at 2, which contributes (1 - 0)/2
            let expected = if f == chi4() { 0.5 } else { 0.0 };
            assert!((r.d_squared - expected).abs() < 1e-12, "{}", r.d_squared);
        }
    }

    #[test]
    fn character_mod_four_only_two_contributes() {
        let r = distance_squared(&chi4(), &chi4(), 100).unwrap();
        assert_eq!(r.d_squared, 0.5);
        assert_eq!(r.prime_count, 25);
    }

    #[test]
    fn liouville_against_one_is_twice_prime_sum() {
        let r = distance_squared(&MultiplicativeSpec::liouville(), &MultiplicativeSpec::one(), 100).unwrap();
        let oracle: f64 = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97]
            .iter()
            .map(|&p: &u64| 2.0 / p as f64)
            .sum();
        assert!((r.d_squared - oracle).abs() < 1e-14);
        assert!((r.d_squared - 2.0 * prime_reciprocal_sum(100)).abs() < 1e-14);
    }

    #[test]
    fn series_ends_at_total_and_is_monotone() {
        let f = MultiplicativeSpec::moebius();
        let g = MultiplicativeSpec::archimedean(0.3).unwrap();
        let r = distance_squared_series(&f, &g, 5000).unwrap();
        let s = r.partial_series.as_ref().unwrap();
        assert!(s.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!((s.last().unwrap().1 - r.d_squared).abs() < 1e-12);
        assert!(r.d_squared <= 2.0 * prime_reciprocal_sum(5000) + 1e-12);
    }

    #[test]
    fn weak_pretension_examples() {
        let l = MultiplicativeSpec::liouville();
        let one = MultiplicativeSpec::one();
        assert_eq!(weak_pretension_estimate(&l, &l, 1000).unwrap(), 0.0);
        assert_eq!(weak_pretension_estimate(&l, &one, 100_000).unwrap(), 2.0);
        let v = weak_pretension_estimate(&chi4(), &MultiplicativeSpec::archimedean(0.0).unwrap(), 100_000).unwrap();
        // 2 at p ≡ 3, 0 at p ≡ 1, and 1 at p = 2
        let primes = primes_up_to(100_000);
        let three = primes.iter().filter(|&&p| p % 4 == 3).count() as f64;
        let oracle = (2.0 * three + 1.0) / primes.len() as f64;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 1.0).abs() < 0.01);
    }

    #[test]
    fn wirsing_defect_values() {
        assert_eq!(wirsing_defect(&MultiplicativeSpec::liouville(), 1000).unwrap(), 0.0);
        assert!((wirsing_defect(&chi4(), 1000).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn statistic_finds_archimedean_minimizer() {
        let t0 = 3.7;
        let f = MultiplicativeSpec::archimedean(t0).unwrap();
        let s = strong_aperiodicity_statistic(&f, 10_000, 10.0, &GridParams::default()).unwrap();
        assert!(s.m_value <= 1e-6, "{}", s.m_value);
        assert!((s.minimizing_t - t0).abs() <= s.grid_resolution);
    }

    #[test]
    fn statistic_of_one_is_zero_at_origin() {
        let s = strong_aperiodicity_statistic(&MultiplicativeSpec::one(), 1000, 5.0, &GridParams::default()).unwrap();
        assert_eq!(s.m_value, 0.0);
        assert_eq!(s.minimizing_t, 0.0);
    }

    #[test]
    fn statistic_bounded_by_t_zero_distance() {
        for f in [MultiplicativeSpec::liouville(), MultiplicativeSpec::moebius(), make_dirichlet_character(5, 1).unwrap()] {
            let s = strong_aperiodicity_statistic(&f, 5000, 20.0, &GridParams::default()).unwrap();
            let d0 = distance_squared(&f, &MultiplicativeSpec::one(), 5000).unwrap().d_squared;
            assert!(s.m_value <= d0 + 1e-12);
            assert!(s.m_value >= 0.0);
        }
    }

    #[test]
    fn grid_recurrence_matches_direct_evaluation() {
        let data = PrimeData::new(&MultiplicativeSpec::liouville(), 20_000).unwrap();
        let step = 0.01;
        let block = data.grid_block(-1.3, step, GRID_BLOCK);
        for (j, v) in block.iter().enumerate() {
            assert!((v - data.distance(-1.3 + j as f64 * step)).abs() < 1e-10);
        }
    }

    #[test]
    fn liouville_statistic_grows_with_n() {
        let g = GridParams::default();
        let a = strong_aperiodicity_statistic(&MultiplicativeSpec::liouville(), 1000, 50.0, &g).unwrap();
        let b = strong_aperiodicity_statistic(&MultiplicativeSpec::liouville(), 10_000, 50.0, &g).unwrap();
        assert!(b.m_value >= a.m_value + 0.1, "{} then {}", a.m_value, b.m_value);
    }

    #[test]
    fn profile_rows() {
        let g = GridParams::default();
        let rows = strong_aperiodicity_profile(&MultiplicativeSpec::one(), &[1], &[100, 1000], 5.0, &g).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.m_value == 0.0));

        // f = conj χ for χ mod 5: f·χ is principal mod 5, so M <= D(f χ, 1)^2 = 1/5.
        let chi = make_dirichlet_character(5, 1).unwrap();
        let rows = strong_aperiodicity_profile(&chi.conjugate(), &[5], &[1000], 5.0, &g).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().any(|r| r.char_index == 1 && r.m_value <= 0.2 + 1e-12));
    }

    #[test]
    fn statistic_rejects_bad_bound() {
        let f = MultiplicativeSpec::liouville();
        assert!(strong_aperiodicity_statistic(&f, 100, 0.0, &GridParams::default()).is_err());
        assert!(strong_aperiodicity_statistic(&f, 100, -1.0, &GridParams::default()).is_err());
    }

    #[test]
    fn scan_examples() {
        let one = sieve_range(&MultiplicativeSpec::one(), 1000).unwrap();
        let r = aperiodicity_scan(&one, 5, 1000).unwrap();
        assert_eq!(r.max_abs, 1.0);
        let chi3 = sieve_range(&make_dirichlet_character(3, 1).unwrap(), 10_000).unwrap();
        let r = aperiodicity_scan(&chi3, 4, 10_000).unwrap();
        assert!(r.max_abs >= 1.0 - 1e-12);
        assert_eq!((r.a, r.b), (3, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugation_symmetry(q1 in 1u64..30, i1 in 0u64..1000, t in -5.0f64..5.0) {
            let chi = make_dirichlet_character(q1, i1 % crate::funcspec::character::character_count(q1)).unwrap();
            let g = MultiplicativeSpec::archimedean(t).unwrap();
            let a = distance_squared(&chi, &g, 2000).unwrap().d_squared;
            let b = distance_squared(&chi.conjugate(), &g.conjugate(), 2000).unwrap().d_squared;
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn product_inequality(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, q in 2u64..12) {
            let f = MultiplicativeSpec::archimedean(t1).unwrap();
            let g = MultiplicativeSpec::liouville();
            let h = MultiplicativeSpec::product(&[make_dirichlet_character(q, 1 % crate::funcspec::character::character_count(q)).unwrap(), MultiplicativeSpec::archimedean(t2).unwrap()]).unwrap();
            let n = 3000;
            let fh = MultiplicativeSpec::product(&[f.clone(), h.clone()]).unwrap();
            let gh = MultiplicativeSpec::product(&[g.clone(), h.clone()]).unwrap();
            let lhs = distance_squared(&fh, &gh, n).unwrap().d_squared;
            let rhs = 2.0 * distance_squared(&f, &g, n).unwrap().d_squared
                + 2.0 * distance_squared(&h, &h, n).unwrap().d_squared;
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn distance_is_monotone_in_n(t in -4.0f64..4.0, n in 2u64..3000) {
            let f = MultiplicativeSpec::moebius();
            let g = MultiplicativeSpec::archimedean(t).unwrap();
            let a = distance_squared(&f, &g, n).unwrap().d_squared;
            let b = distance_squared(&f, &g, n + 500).unwrap().d_squared;
            prop_assert!(a <= b);
        }
    }
}
