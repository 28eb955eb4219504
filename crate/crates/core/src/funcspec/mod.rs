//! Symbolic multiplicative functions and their pointwise evaluation.
//!
//! A [`MultiplicativeSpec`] is an immutable description of a bounded
//! multiplicative function through its values on prime powers. Specs
//! serialize to a canonical JSON document (sorted keys) whose truncated
//! SHA-256 digest is the [`spec_hash`](MultiplicativeSpec::spec_hash) used as
//! a cache key.
//!
//! Internally a spec is flattened into a product of arithmetic factors
//! (each possibly conjugated) times an archimedean part `n^{it}`. When every
//! factor is finite-valued and there is no archimedean part, values are
//! computed exactly as roots of unity (see [`phase`]); otherwise in complex
//! floating point.

pub mod character;
pub mod phase;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith;
use crate::error::{Error, Result};
use character::CharacterTable;
use phase::{Snapped, ZERO};

/// Completion rule for primes (or prime powers) a custom spec leaves out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultRule {
    One,
    Zero,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeValue {
    pub p: u64,
    pub value: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimePowerValue {
    pub p: u64,
    pub k: u32,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecKind {
    Moebius,
    Liouville,
    DirichletCharacter {
        modulus: u64,
        index: u64,
    },
    /// `n^{it}`.
    Archimedean {
        t: f64,
    },
    CustomCompletelyMultiplicative {
        values: Vec<PrimeValue>,
        default: DefaultRule,
    },
    CustomMultiplicative {
        values: Vec<PrimePowerValue>,
        default: DefaultRule,
    },
    PointwiseProduct {
        factors: Vec<SpecKind>,
    },
    Conjugate {
        inner: Box<SpecKind>,
    },
}

impl SpecKind {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            SpecKind::Moebius | SpecKind::Liouville => Ok(()),
            SpecKind::DirichletCharacter { modulus, index } => {
                if *modulus == 0 {
                    return bad("character modulus must be >= 1".into());
                }
                if *modulus > character::MAX_MODULUS {
                    return bad(format!("character modulus {modulus} is too large"));
                }
                let count = character::character_count(*modulus);
                if *index >= count {
                    return bad(format!(
                        "character index {index} out of range (modulus {modulus} has {count})"
                    ));
                }
                Ok(())
            }
            SpecKind::Archimedean { t } => {
                if t.is_finite() {
                    Ok(())
                } else {
                    bad("archimedean exponent must be finite".into())
                }
            }
            SpecKind::CustomCompletelyMultiplicative { values, .. } => {
                let mut seen = BTreeSet::new();
                for v in values {
                    check_value(v.value)?;
                    if !arith::is_prime(v.p) {
                        return Err(Error::NotPrime(v.p));
                    }
                    if !seen.insert(v.p) {
                        return bad(format!("duplicate value for prime {}", v.p));
                    }
                }
                Ok(())
            }
            SpecKind::CustomMultiplicative { values, .. } => {
                let mut seen = BTreeSet::new();
                for v in values {
                    check_value(v.value)?;
                    if !arith::is_prime(v.p) {
                        return Err(Error::NotPrime(v.p));
                    }
                    if v.k == 0 {
                        return bad("prime-power exponent must be >= 1".into());
                    }
                    if !seen.insert((v.p, v.k)) {
                        return bad(format!("duplicate value for {}^{}", v.p, v.k));
                    }
                }
                Ok(())
            }
            SpecKind::PointwiseProduct { factors } => {
                if factors.is_empty() {
                    return bad("pointwise product needs at least one factor".into());
                }
                factors.iter().try_for_each(SpecKind::validate)
            }
            SpecKind::Conjugate { inner } => inner.validate(),
        }
    }

    /// Sorts custom value lists so that equal functions serialize equally.
    fn canonicalize(&mut self) {
        match self {
            SpecKind::CustomCompletelyMultiplicative { values, .. } => {
                values.sort_by_key(|v| v.p)
            }
            SpecKind::CustomMultiplicative { values, .. } => values.sort_by_key(|v| (v.p, v.k)),
            SpecKind::PointwiseProduct { factors } => {
                factors.iter_mut().for_each(SpecKind::canonicalize)
            }
            SpecKind::Conjugate { inner } => inner.canonicalize(),
            _ => {}
        }
    }
}

fn check_value(v: Complex64) -> Result<()> {
    if !(v.re.is_finite() && v.im.is_finite()) || v.norm() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "value {v} lies outside the unit disc"
        )));
    }
    Ok(())
}

/// An immutable multiplicative function with values in the closed unit disc.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SpecKind", into = "SpecKind")]
pub struct MultiplicativeSpec {
    kind: SpecKind,
    hash: u64,
    #[serde(skip)]
    compiled: OnceLock<Arc<Compiled>>,
}

impl PartialEq for MultiplicativeSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl TryFrom<SpecKind> for MultiplicativeSpec {
    type Error = Error;

    fn try_from(kind: SpecKind) -> Result<Self> {
        MultiplicativeSpec::new(kind)
    }
}

impl From<MultiplicativeSpec> for SpecKind {
    fn from(spec: MultiplicativeSpec) -> Self {
        spec.kind
    }
}

impl MultiplicativeSpec {
    pub fn new(mut kind: SpecKind) -> Result<Self> {
        kind.validate()?;
        kind.canonicalize();
        let hash = hash_kind(&kind);
        Ok(Self {
            kind,
            hash,
            compiled: OnceLock::new(),
        })
    }

    pub fn moebius() -> Self {
        Self::new(SpecKind::Moebius).unwrap()
    }

    pub fn liouville() -> Self {
        Self::new(SpecKind::Liouville).unwrap()
    }

    /// The constant function 1 (the unique character modulo 1).
    pub fn one() -> Self {
        Self::new(SpecKind::DirichletCharacter {
            modulus: 1,
            index: 0,
        })
        .unwrap()
    }

    pub fn archimedean(t: f64) -> Result<Self> {
        Self::new(SpecKind::Archimedean { t })
    }

    pub fn conjugate(&self) -> Self {
        Self::new(SpecKind::Conjugate {
            inner: Box::new(self.kind.clone()),
        })
        .expect("conjugate of a valid spec is valid")
    }

    pub fn product(factors: &[MultiplicativeSpec]) -> Result<Self> {
        Self::new(SpecKind::PointwiseProduct {
            factors: factors.iter().map(|f| f.kind.clone()).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn kind(&self) -> &SpecKind {
        &self.kind
    }

    /// Canonical JSON serialization (object keys sorted).
    pub fn canonical_json(&self) -> String {
        canonical_json(&self.kind)
    }

    /// First 8 bytes (little-endian) of the SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn spec_hash(&self) -> u64 {
        self.hash
    }

    pub(crate) fn compiled(&self) -> &Arc<Compiled> {
        self.compiled
            .get_or_init(|| Arc::new(Compiled::new(&self.kind)))
    }

    /// True when the function takes finitely many values and is evaluated
    /// exactly.
    pub fn is_finite_range(&self) -> bool {
        self.compiled().exact.is_some()
    }

    /// The value set of a finite-range spec, in canonical order (zero first,
    /// then roots of unity by increasing angle). `None` otherwise.
    pub fn alphabet(&self) -> Option<Vec<Complex64>> {
        let compiled = self.compiled();
        let exact = compiled.exact.as_ref()?;
        Some(
            exact
                .alphabet
                .iter()
                .map(|&e| phase::root_of_unity(e, exact.order))
                .collect(),
        )
    }

    /// `f(n)` from the trial-division factorization of `n`.
    pub fn evaluate_point(&self, n: u64) -> Result<Complex64> {
        self.evaluate_point_with_bound(n, arith::DEFAULT_TRIAL_BOUND)
    }

    pub fn evaluate_point_with_bound(&self, n: u64, bound: u64) -> Result<Complex64> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "multiplicative functions are evaluated on n >= 1".into(),
            ));
        }
        let factors = arith::factorize(n, bound)?;
        self.compiled().value_from_factorization(n, &factors)
    }

    /// `f(p)` for a prime `p` (primality is the caller's responsibility).
    pub fn value_at_prime(&self, p: u64) -> Result<Complex64> {
        self.compiled().value_from_factorization(p, &[(p, 1)])
    }
}

/// The character with the given index in the canonical enumeration of the
/// character group modulo `q`; index 0 is principal.
pub fn make_dirichlet_character(q: u64, index: u64) -> Result<MultiplicativeSpec> {
    MultiplicativeSpec::new(SpecKind::DirichletCharacter { modulus: q, index })
}

pub fn evaluate_point(f: &MultiplicativeSpec, n: u64) -> Result<Complex64> {
    f.evaluate_point(n)
}

/// `∏_j g_j(p)` for a prime `p`.
pub fn product_value_at_prime(specs: &[MultiplicativeSpec], p: u64) -> Result<Complex64> {
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for g in specs {
        acc *= g.value_at_prime(p)?;
    }
    Ok(acc)
}

pub fn canonical_json(kind: &SpecKind) -> String {
    // serde_json's default map is ordered, so going through `Value` sorts keys.
    let value = serde_json::to_value(kind).expect("spec kinds always serialize");
    value.to_string()
}

fn hash_kind(kind: &SpecKind) -> u64 {
    let digest = Sha256::digest(canonical_json(kind).as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// `n^{it}` computed as `exp(i t ln n)`.
#[inline]
pub fn archimedean_value(t: f64, n: u64) -> Complex64 {
    let angle = t * (n as f64).ln();
    Complex64::new(angle.cos(), angle.sin())
}

// ---------------------------------------------------------------------------
// Compiled form
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum Rule {
    Moebius,
    Liouville,
    Character(CharacterTable),
    CompletelyMultiplicative {
        values: HashMap<u64, Complex64>,
        default: DefaultRule,
    },
    Multiplicative {
        values: HashMap<(u64, u32), Complex64>,
        default: DefaultRule,
    },
}

/// Exact exponents of one factor in units of `2π / order`.
#[derive(Debug)]
enum ExactRule {
    Fixed,
    Character,
    CompletelyMultiplicative { values: HashMap<u64, u32> },
    Multiplicative { values: HashMap<(u64, u32), u32> },
}

#[derive(Debug)]
struct Factor {
    rule: Rule,
    conj: bool,
    exact: Option<(ExactRule, u32)>,
}

#[derive(Debug)]
pub(crate) struct ExactInfo {
    pub order: u32,
    /// Possible exponents in canonical order ([`ZERO`] first).
    pub alphabet: Vec<u32>,
}

#[derive(Debug)]
pub(crate) struct Compiled {
    factors: Vec<Factor>,
    pub t: f64,
    pub exact: Option<ExactInfo>,
}

fn flatten(kind: &SpecKind, conj: bool, factors: &mut Vec<Factor>, t: &mut f64) {
    let rule = match kind {
        SpecKind::Moebius => Rule::Moebius,
        SpecKind::Liouville => Rule::Liouville,
        SpecKind::DirichletCharacter { modulus, index } => {
            Rule::Character(CharacterTable::new(*modulus, *index).expect("validated"))
        }
        SpecKind::Archimedean { t: s } => {
            *t += if conj { -s } else { *s };
            return;
        }
        SpecKind::CustomCompletelyMultiplicative { values, default } => {
            Rule::CompletelyMultiplicative {
                values: values.iter().map(|v| (v.p, v.value)).collect(),
                default: *default,
            }
        }
        SpecKind::CustomMultiplicative { values, default } => Rule::Multiplicative {
            values: values.iter().map(|v| ((v.p, v.k), v.value)).collect(),
            default: *default,
        },
        SpecKind::PointwiseProduct { factors: inner } => {
            for f in inner {
                flatten(f, conj, factors, t);
            }
            return;
        }
        SpecKind::Conjugate { inner } => {
            flatten(inner, !conj, factors, t);
            return;
        }
    };
    let exact = exact_rule(&rule);
    factors.push(Factor { rule, conj, exact });
}

fn snap_default(default: DefaultRule) -> Option<Option<Snapped>> {
    match default {
        DefaultRule::One => Some(Some(Snapped::Root { e: 0, m: 1 })),
        DefaultRule::Zero => Some(Some(Snapped::Zero)),
        DefaultRule::Error => Some(None),
    }
}

fn exact_rule(rule: &Rule) -> Option<(ExactRule, u32)> {
    fn collect<K: Copy + Eq + std::hash::Hash>(
        values: &HashMap<K, Complex64>,
        default: DefaultRule,
    ) -> Option<(HashMap<K, u32>, u32)> {
        let mut snapped = HashMap::with_capacity(values.len());
        let mut order = 1u64;
        for (&key, &v) in values {
            let s = phase::snap(v)?;
            if let Snapped::Root { m, .. } = s {
                order = arith::lcm(order, m as u64);
            }
            snapped.insert(key, s);
        }
        if let Some(Some(Snapped::Root { m, .. })) = snap_default(default) {
            order = arith::lcm(order, m as u64);
        }
        if order > phase::MAX_ORDER as u64 {
            return None;
        }
        let order = order as u32;
        let exps = snapped
            .into_iter()
            .map(|(k, s)| {
                let e = match s {
                    Snapped::Zero => ZERO,
                    Snapped::Root { e, m } => e * (order / m),
                };
                (k, e)
            })
            .collect();
        Some((exps, order))
    }
    match rule {
        Rule::Moebius | Rule::Liouville => Some((ExactRule::Fixed, 2)),
        Rule::Character(chi) => Some((ExactRule::Character, chi.order())),
        Rule::CompletelyMultiplicative { values, default } => {
            let (values, order) = collect(values, *default)?;
            Some((ExactRule::CompletelyMultiplicative { values }, order))
        }
        Rule::Multiplicative { values, default } => {
            let (values, order) = collect(values, *default)?;
            Some((ExactRule::Multiplicative { values }, order))
        }
    }
}

fn default_complex(default: DefaultRule, p: u64, k: u32) -> Result<Complex64> {
    match default {
        DefaultRule::One => Ok(Complex64::new(1.0, 0.0)),
        DefaultRule::Zero => Ok(Complex64::new(0.0, 0.0)),
        DefaultRule::Error => Err(Error::MissingPrimeValue { p, k }),
    }
}

fn default_exponent(default: DefaultRule, p: u64, k: u32) -> Result<u32> {
    match default {
        DefaultRule::One => Ok(0),
        DefaultRule::Zero => Ok(ZERO),
        DefaultRule::Error => Err(Error::MissingPrimeValue { p, k }),
    }
}

impl Factor {
    fn complex(&self, p: u64, k: u32) -> Result<Complex64> {
        let v = match &self.rule {
            Rule::Moebius => Complex64::new(if k == 1 { -1.0 } else { 0.0 }, 0.0),
            Rule::Liouville => Complex64::new(if k % 2 == 1 { -1.0 } else { 1.0 }, 0.0),
            Rule::Character(chi) => chi.value(arith::pow_mod(p, k as u64, chi.modulus())),
            Rule::CompletelyMultiplicative { values, default } => {
                let base = match values.get(&p) {
                    Some(&v) => v,
                    None => default_complex(*default, p, 1)?,
                };
                let mut acc = base;
                for _ in 1..k {
                    acc *= base;
                }
                acc
            }
            Rule::Multiplicative { values, default } => match values.get(&(p, k)) {
                Some(&v) => v,
                None => default_complex(*default, p, k)?,
            },
        };
        Ok(if self.conj { v.conj() } else { v })
    }

    /// Exponent of `f(p^k)` scaled to the common `order`.
    fn exponent(&self, p: u64, k: u32, order: u32) -> Result<u32> {
        let (rule, own) = self.exact.as_ref().expect("exact path requires exact factors");
        let e = match (rule, &self.rule) {
            (ExactRule::Fixed, Rule::Moebius) => {
                if k == 1 {
                    1
                } else {
                    ZERO
                }
            }
            (ExactRule::Fixed, _) => k % 2,
            (ExactRule::Character, Rule::Character(chi)) => {
                chi.exponent(arith::pow_mod(p, k as u64, chi.modulus()))
            }
            (ExactRule::CompletelyMultiplicative { values }, Rule::CompletelyMultiplicative { default, .. }) => {
                let base = match values.get(&p) {
                    Some(&e) => e,
                    None => default_exponent(*default, p, 1)?,
                };
                phase::pow(base, k, *own)
            }
            (ExactRule::Multiplicative { values }, Rule::Multiplicative { default, .. }) => {
                match values.get(&(p, k)) {
                    Some(&e) => e,
                    None => default_exponent(*default, p, k)?,
                }
            }
            _ => unreachable!("exact rule matches its factor"),
        };
        let e = if e == ZERO { ZERO } else { e * (order / own) };
        Ok(if self.conj { phase::conj(e, order) } else { e })
    }

    /// Superset of the factor's values (exponents in the common `order`).
    fn value_set(&self, order: u32) -> BTreeSet<u32> {
        let (rule, own) = self.exact.as_ref().unwrap();
        let scale = order / own;
        let raw: BTreeSet<u32> = match (rule, &self.rule) {
            (ExactRule::Fixed, Rule::Moebius) => BTreeSet::from([ZERO, 0, 1]),
            (ExactRule::Fixed, _) => BTreeSet::from([0, 1]),
            (ExactRule::Character, Rule::Character(chi)) => chi.value_set(),
            (ExactRule::CompletelyMultiplicative { values }, Rule::CompletelyMultiplicative { default, .. }) => {
                let mut gens: BTreeSet<u32> = values.values().copied().collect();
                if *default == DefaultRule::Zero {
                    gens.insert(ZERO);
                }
                phase::monoid_closure(&gens, *own)
            }
            (ExactRule::Multiplicative { values }, Rule::Multiplicative { default, .. }) => {
                let mut gens: BTreeSet<u32> = values.values().copied().collect();
                if *default == DefaultRule::Zero {
                    gens.insert(ZERO);
                }
                phase::monoid_closure(&gens, *own)
            }
            _ => unreachable!(),
        };
        raw.into_iter()
            .map(|e| {
                let e = if e == ZERO { ZERO } else { e * scale };
                if self.conj {
                    phase::conj(e, order)
                } else {
                    e
                }
            })
            .collect()
    }
}

/// Sort key placing zero first, then exponents by angle.
fn alphabet_order(e: u32) -> i64 {
    if e == ZERO {
        -1
    } else {
        e as i64
    }
}

impl Compiled {
    fn new(kind: &SpecKind) -> Self {
        let mut factors = Vec::new();
        let mut t = 0.0;
        flatten(kind, false, &mut factors, &mut t);
        let exact = Self::exact_info(&factors, t);
        Self { factors, t, exact }
    }

    fn exact_info(factors: &[Factor], t: f64) -> Option<ExactInfo> {
        if t != 0.0 {
            return None;
        }
        let mut order = 1u64;
        for f in factors {
            let (_, own) = f.exact.as_ref()?;
            order = arith::lcm(order, *own as u64);
        }
        if order > phase::MAX_ORDER as u64 {
            return None;
        }
        let order = order as u32;
        let mut set = BTreeSet::from([0u32]);
        for f in factors {
            set = phase::product_set(&set, &f.value_set(order), order);
        }
        let mut alphabet: Vec<u32> = set.into_iter().collect();
        alphabet.sort_by_key(|&e| alphabet_order(e));
        Some(ExactInfo { order, alphabet })
    }

    /// `g(p^k) = ∏ factors` in complex arithmetic (archimedean part excluded).
    pub fn prime_power_complex(&self, p: u64, k: u32) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for f in &self.factors {
            acc *= f.complex(p, k)?;
        }
        Ok(acc)
    }

    /// Exact exponent of `g(p^k)`; only valid when `exact` is set.
    pub fn prime_power_exponent(&self, p: u64, k: u32) -> Result<u32> {
        let order = self.exact.as_ref().expect("exact spec").order;
        let mut acc = 0u32;
        for f in &self.factors {
            acc = phase::mul(acc, f.exponent(p, k, order)?, order);
        }
        Ok(acc)
    }

    fn value_from_factorization(&self, n: u64, factors: &[(u64, u32)]) -> Result<Complex64> {
        if let Some(exact) = &self.exact {
            let mut e = 0u32;
            for &(p, k) in factors {
                e = phase::mul(e, self.prime_power_exponent(p, k)?, exact.order);
            }
            return Ok(phase::root_of_unity(e, exact.order));
        }
        let mut acc = Complex64::new(1.0, 0.0);
        for &(p, k) in factors {
            acc *= self.prime_power_complex(p, k)?;
        }
        if self.t != 0.0 {
            acc *= archimedean_value(self.t, n);
        }
        Ok(acc)
    }
}
