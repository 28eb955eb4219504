//! One function per subcommand. Each reads what it needs from the config,
//! pulls tables through the cache and writes its artifacts.

use std::collections::BTreeMap;

use mfstat_core::averages::{correlation, ShiftFactor, ShiftPattern, WeightSpec};
use mfstat_core::dilates::{dilate_identity_residual, primes_in_class, DilateFactor, DilateOptions};
use mfstat_core::pretentious::{aperiodicity_scan, distance_squared, strong_aperiodicity_profile};
use mfstat_core::sieve::{Storage, ValueTable};
use mfstat_core::symbolic::{
    autocorrelation_sequence, block_complexity, cylinder_density, empirical_measure, letter_name,
    max_word_length, spectrum_probe, CylinderPattern, Letter, SymbolicSequence,
};
use mfstat_core::{Complex64, MultiplicativeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cache::TableCache;
use crate::config::{RunConfig, Task};
use crate::error::CliError;
use crate::output::{fmt_f64, OutputDir};

pub const DEFAULT_DILATE_N: u64 = 10_000_000;
pub const DEFAULT_DILATE_P: u64 = 100_000;
pub const DEFAULT_M_MAX: usize = 2;
pub const DEFAULT_N_MAX: usize = 10;
pub const DEFAULT_MAX_LAG: u64 = 20;
pub const DEFAULT_SPECTRUM_POINTS: usize = 64;

pub struct TaskContext<'a> {
    pub cfg: &'a RunConfig,
    pub cache: &'a mut TableCache,
    pub out: &'a mut OutputDir,
    /// Task metadata copied into the manifest.
    pub meta: serde_json::Map<String, Value>,
}

impl TaskContext<'_> {
    fn table_len(&self, required: u64) -> u64 {
        self.cfg.table_len.unwrap_or(required)
    }
}

pub fn dispatch(task: Task, ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    match task {
        Task::Sieve => sieve(ctx),
        Task::Corr => corr(ctx, "corr.csv"),
        Task::Weights => {
            if matches!(ctx.cfg.weights, WeightSpec::None) {
                return Err(CliError::config("the weights task needs a non-trivial `weights` entry"));
            }
            corr(ctx, "weights.csv")
        }
        Task::Dist => dist(ctx),
        Task::Maperiodic => maperiodic(ctx),
        Task::Scan => scan(ctx),
        Task::Dilate => dilate(ctx),
        Task::Cylinder => cylinder(ctx),
        Task::Complexity => complexity(ctx),
        Task::Spectrum => spectrum(ctx),
    }
}

fn c_cols(z: Complex64) -> [String; 2] {
    [fmt_f64(z.re), fmt_f64(z.im)]
}

fn sieve(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let (name, f) = ctx.cfg.main_function()?;
    let n = ctx.cfg.require_n()?;
    let table = ctx.cache.table(f, n)?;

    let mut rows = Vec::new();
    if let Storage::SmallAlphabet { codes, alphabet } = table.storage() {
        let mut counts = vec![0u64; alphabet.len()];
        for &c in codes {
            counts[c as usize] += 1;
        }
        for (z, count) in alphabet.iter().zip(counts) {
            let [re, im] = c_cols(*z);
            rows.push(vec![letter_name(*z), re, im, count.to_string()]);
        }
        ctx.out.csv("sieve.csv", &["letter", "re", "im", "count"], &rows)?;
    }

    let samples = ctx.cfg.verify_samples;
    let mut mismatches = Vec::new();
    if samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
        for _ in 0..samples {
            let k = rng.gen_range(1..=n);
            let expected = f.evaluate_point(k)?;
            if table.get(k) != expected {
                mismatches.push(k);
            }
        }
    }
    let summary = json!({
        "function": name,
        "spec_hash": format!("{:016x}", f.spec_hash()),
        "n": n,
        "storage": match table.storage() {
            Storage::SmallAlphabet { .. } => "small_alphabet",
            Storage::Complex64Pairs(_) => "complex64_pairs",
        },
        "alphabet_size": table.alphabet().map(<[Complex64]>::len),
        "verify_samples": samples,
        "seed": ctx.cfg.seed,
        "mismatches": mismatches,
    });
    ctx.out.json("sieve.json", &summary)?;
    if !mismatches.is_empty() {
        return Err(CliError::task(format!(
            "{} of {samples} sampled values disagree with pointwise evaluation (first at n = {})",
            mismatches.len(),
            mismatches[0]
        )));
    }
    Ok(())
}

/// Tables for every function named in the pattern, sieved to `len`.
fn pattern_tables(
    ctx: &mut TaskContext<'_>,
    names: impl Iterator<Item = String>,
    len: u64,
) -> Result<BTreeMap<String, ValueTable>, CliError> {
    let mut tables = BTreeMap::new();
    for name in names {
        if let std::collections::btree_map::Entry::Vacant(slot) = tables.entry(name) {
            let spec = ctx.cfg.lookup(slot.key())?.clone();
            slot.insert(ctx.cache.table(&spec, len)?);
        }
    }
    Ok(tables)
}

fn corr(ctx: &mut TaskContext<'_>, file: &str) -> Result<(), CliError> {
    let pattern_cfg = ctx.cfg.pattern()?.to_vec();
    let min_shift = pattern_cfg.iter().map(|f| f.shift).min().unwrap();
    let max_shift = pattern_cfg.iter().map(|f| f.shift).max().unwrap();
    let lo = 1 + (-min_shift).max(0) as u64;
    let mut checkpoints = ctx.cfg.checkpoints()?;
    if ctx.cfg.checkpoints.is_none() {
        checkpoints.retain(|&c| c >= lo);
    }
    let top = *checkpoints
        .last()
        .ok_or_else(|| CliError::task(format!("no checkpoint reaches the first summed index {lo}")))?;
    let required = top + max_shift.max(0) as u64;
    let len = ctx.table_len(required);
    let tables = pattern_tables(ctx, pattern_cfg.iter().map(|f| f.function.clone()), len)?;
    let factors = pattern_cfg
        .iter()
        .map(|f| ShiftFactor::new(&tables[&f.function], f.shift, f.conjugate))
        .collect();
    let pattern = ShiftPattern::new(factors)?;
    let res = correlation(&pattern, &ctx.cfg.weights, &checkpoints)?;

    let rows: Vec<Vec<String>> = (0..res.checkpoints.len())
        .map(|i| {
            let [rl, il] = c_cols(res.log_avg[i]);
            let [rc, ic] = c_cols(res.cesaro_avg[i]);
            vec![
                res.checkpoints[i].to_string(),
                rl,
                il,
                rc,
                ic,
                fmt_f64(res.harmonic_norm[i]),
                res.effective_lo.to_string(),
                res.checkpoints[i].to_string(),
            ]
        })
        .collect();
    ctx.out.csv(
        file,
        &["N", "re_log", "im_log", "re_cesaro", "im_cesaro", "harmonic_norm", "effective_lo", "effective_hi"],
        &rows,
    )?;
    ctx.meta.insert("block_size".into(), json!(res.block_size));
    ctx.meta.insert("partitions".into(), json!(res.partitions));
    ctx.meta.insert("table_len".into(), json!(len));
    Ok(())
}

fn dist(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let (_, f) = ctx.cfg.main_function()?;
    let g = match &ctx.cfg.against {
        Some(name) => ctx.cfg.lookup(name)?.clone(),
        None => MultiplicativeSpec::one(),
    };
    let mut rows = Vec::new();
    for n in ctx.cfg.n_list()? {
        let r = distance_squared(f, &g, n)?;
        rows.push(vec![n.to_string(), fmt_f64(r.d_squared), r.prime_count.to_string()]);
    }
    ctx.out.csv("dist.csv", &["N", "D_squared", "prime_count"], &rows)?;
    ctx.meta.insert("against".into(), json!(ctx.cfg.against.as_deref().unwrap_or("one")));
    Ok(())
}

fn maperiodic(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let (_, f) = ctx.cfg.main_function()?;
    let ns = ctx.cfg.n_list()?;
    let moduli = ctx.cfg.moduli.clone().unwrap_or_else(|| vec![1]);
    let t_bound = ctx.cfg.t_bound()?;
    let grid = ctx.cfg.grid();
    let rows = strong_aperiodicity_profile(f, &moduli, &ns, t_bound, &grid)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.q.to_string(),
                r.char_index.to_string(),
                r.n.to_string(),
                fmt_f64(r.m_value),
                fmt_f64(r.minimizing_t),
            ]
        })
        .collect();
    ctx.out.csv("maperiodic.csv", &["q", "char_index", "N", "M_value", "minimizing_t"], &csv_rows)?;
    let steps: BTreeMap<String, f64> = ns.iter().map(|&n| (n.to_string(), grid.step_for(n))).collect();
    ctx.meta.insert(
        "t_search".into(),
        json!({
            "t_bound": t_bound,
            "note": "minimum taken over |t| <= t_bound rather than |t| <= N",
            "grid_step": steps,
            "kappa": grid.kappa,
            "refine_width": grid.refine_width,
        }),
    );
    Ok(())
}

fn scan(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let (_, f) = ctx.cfg.main_function()?;
    let n = ctx.cfg.require_n()?;
    let a_max = ctx.cfg.a_max.unwrap_or(10);
    let f = f.clone();
    let len = ctx.table_len(n);
    let table = ctx.cache.table(&f, len)?;
    let r = aperiodicity_scan(&table, a_max, n)?;
    ctx.out.csv(
        "scan.csv",
        &["a", "b", "abs"],
        &[vec![r.a.to_string(), r.b.to_string(), fmt_f64(r.max_abs)]],
    )?;
    ctx.meta.insert("a_max".into(), json!(a_max));
    Ok(())
}

fn dilate(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let pattern_cfg = ctx.cfg.pattern()?.to_vec();
    let n = ctx.cfg.n.unwrap_or(DEFAULT_DILATE_N);
    let p_max = ctx.cfg.p_max.unwrap_or(DEFAULT_DILATE_P);
    let ds: Vec<u64> = match (ctx.cfg.d, ctx.cfg.d_max) {
        (Some(d), None) => vec![d],
        (None, Some(dm)) => (1..=dm).collect(),
        (None, None) => vec![1],
        (Some(_), Some(_)) => return Err(CliError::config("set at most one of `d` and `d_max`")),
    };
    let max_shift = pattern_cfg.iter().map(|f| f.shift).max().unwrap().max(0) as u64;
    let len = ctx.table_len(n + p_max * max_shift);
    let tables = pattern_tables(ctx, pattern_cfg.iter().map(|f| f.function.clone()), len)?;
    let specs: Vec<MultiplicativeSpec> = pattern_cfg
        .iter()
        .map(|f| ctx.cfg.lookup(&f.function).cloned())
        .collect::<Result<_, _>>()?;
    let factors: Vec<DilateFactor<'_>> = pattern_cfg
        .iter()
        .zip(&specs)
        .map(|(f, spec)| DilateFactor {
            spec,
            table: &tables[&f.function],
            shift: f.shift,
            conjugate: f.conjugate,
        })
        .collect();
    let mut opts = DilateOptions::new(n);
    opts.dyads = ctx.cfg.dyads;

    let mut prime_rows = Vec::new();
    let mut dyad_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut summaries = Vec::new();
    for d in ds {
        let class = primes_in_class(d, p_max)?;
        let r = dilate_identity_residual(&factors, &class, &opts)?;
        for row in &r.rows {
            let [rc, ic] = c_cols(row.corr_dilated);
            let [rp, ip] = c_cols(row.c_pm);
            prime_rows.push(vec![
                d.to_string(),
                row.p.to_string(),
                row.dyad.to_string(),
                rc,
                ic,
                rp,
                ip,
                fmt_f64(row.abs_residual),
            ]);
        }
        for s in &r.per_dyad {
            let [re, im] = c_cols(s.mean_corr_dilated);
            dyad_rows.push(vec![
                d.to_string(),
                s.m.to_string(),
                s.count.to_string(),
                fmt_f64(s.mean_abs_residual),
                re,
                im,
            ]);
        }
        let [rl, il] = c_cols(r.lhs_corr);
        let [rr, ir] = c_cols(r.rhs_dilate_mean);
        summary_rows.push(vec![
            d.to_string(),
            r.rows.len().to_string(),
            fmt_f64(r.residual_weighted),
            fmt_f64(r.residual_unit),
            rl,
            il,
            rr,
            ir,
        ]);
        summaries.push(json!({
            "d": d,
            "residual_weighted": r.residual_weighted,
            "residual_unit": r.residual_unit,
            "lhs": [r.lhs_corr.re, r.lhs_corr.im],
            "rhs": [r.rhs_dilate_mean.re, r.rhs_dilate_mean.im],
            "dyads": r.dyads,
            "spectral": r.spectral,
            "prime_count": r.rows.len(),
        }));
    }
    ctx.out.csv(
        "dilate.csv",
        &["d", "p", "dyad", "re_corr_dilated", "im_corr_dilated", "re_c_pm", "im_c_pm", "abs_residual"],
        &prime_rows,
    )?;
    ctx.out.csv(
        "dilate_dyads.csv",
        &["d", "m", "count", "mean_abs_residual", "re_mean_corr_dilated", "im_mean_corr_dilated"],
        &dyad_rows,
    )?;
    ctx.out.csv(
        "dilate_summary.csv",
        &["d", "prime_count", "residual_weighted", "residual_unit", "re_lhs", "im_lhs", "re_rhs", "im_rhs"],
        &summary_rows,
    )?;
    ctx.out.json("dilate.json", &json!({ "n": n, "p_max": p_max, "classes": summaries }))?;
    ctx.meta.insert("table_len".into(), json!(len));
    Ok(())
}

/// The symbolic sequence of the main function on `[1, len]`, with the
/// quantizer recorded in the manifest when one was applied.
fn main_sequence(ctx: &mut TaskContext<'_>, len: u64) -> Result<ValueTable, CliError> {
    let (_, f) = ctx.cfg.main_function()?;
    let f = f.clone();
    if !f.is_finite_range() && ctx.cfg.quantizer.is_none() {
        return Err(CliError::config(
            "function is not finite-valued; symbolic tasks need a `quantizer`",
        ));
    }
    ctx.cache.table(&f, len)
}

fn record_quantizer(ctx: &mut TaskContext<'_>, seq: &SymbolicSequence<'_>) {
    ctx.meta.insert("quantizer".into(), json!(seq.quantizer()));
    let letters: Vec<String> = (0..seq.alphabet().len()).map(|c| seq.letter_name(c as u8)).collect();
    ctx.meta.insert("alphabet".into(), json!(letters));
}

fn cylinder(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let n = ctx.cfg.require_n()?;
    let m_max = ctx.cfg.m_max.unwrap_or(DEFAULT_M_MAX);
    let widest = ctx
        .cfg
        .patterns
        .iter()
        .flatten()
        .map(|p| p.len() / 2)
        .fold(m_max, usize::max);
    let len = ctx.table_len(n + widest as u64);
    let table = main_sequence(ctx, len)?;
    let seq = SymbolicSequence::from_table(&table, ctx.cfg.quantizer.as_ref())?;
    let mode = ctx.cfg.mode;
    let measure = empirical_measure(&seq, m_max, n, mode)?;
    ctx.out.json("measure.json", &measure.to_map())?;

    if let Some(patterns) = &ctx.cfg.patterns {
        let mut rows = Vec::new();
        for letters in patterns {
            let pattern = CylinderPattern::new(letters.clone())?;
            let d = cylinder_density(&seq, &pattern, n, mode)?;
            let label: Vec<String> = letters
                .iter()
                .map(|l| match l {
                    Letter::Any => "*".to_string(),
                    Letter::Value(z) => letter_name(*z),
                })
                .collect();
            rows.push(vec![
                label.join(" "),
                fmt_f64(d.value),
                d.letter_outside_alphabet.to_string(),
            ]);
        }
        ctx.out.csv("cylinder.csv", &["pattern", "density", "letter_outside_alphabet"], &rows)?;
    }
    record_quantizer(ctx, &seq);
    ctx.meta.insert("m_max".into(), json!(m_max));
    ctx.meta.insert("range".into(), json!([1 + m_max as u64, n]));
    Ok(())
}

fn complexity(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let n = ctx.cfg.require_n()?;
    let table = main_sequence(ctx, n)?;
    let seq = SymbolicSequence::from_table(&table, ctx.cfg.quantizer.as_ref())?;
    let n_max = ctx
        .cfg
        .n_max
        .unwrap_or_else(|| DEFAULT_N_MAX.min(max_word_length(seq.alphabet().len())));
    let profile = block_complexity(&seq, n_max, n)?;
    let rows: Vec<Vec<String>> = profile
        .word_lengths()
        .map(|k| vec![k.to_string(), profile.count(k).to_string(), fmt_f64(profile.ratio(k))])
        .collect();
    ctx.out.csv("complexity.csv", &["n", "P", "P_over_n"], &rows)?;
    record_quantizer(ctx, &seq);
    Ok(())
}

fn spectrum(ctx: &mut TaskContext<'_>) -> Result<(), CliError> {
    let (_, f) = ctx.cfg.main_function()?;
    let f = f.clone();
    let n = ctx.cfg.require_n()?;
    let max_lag = ctx.cfg.max_lag.unwrap_or(DEFAULT_MAX_LAG);
    let len = ctx.table_len(n + max_lag);
    let table = ctx.cache.table(&f, len)?;
    let ac = autocorrelation_sequence(&table, max_lag, n, ctx.cfg.mode)?;
    let alphas = ctx.cfg.alphas.clone().unwrap_or_else(|| {
        (0..DEFAULT_SPECTRUM_POINTS)
            .map(|j| j as f64 / DEFAULT_SPECTRUM_POINTS as f64)
            .collect()
    });
    let sigma = spectrum_probe(&ac.rho, &alphas);

    let ac_rows: Vec<Vec<String>> = ac
        .rho
        .iter()
        .enumerate()
        .map(|(h, z)| {
            let [re, im] = c_cols(*z);
            vec![h.to_string(), re, im]
        })
        .collect();
    ctx.out.csv("autocorrelation.csv", &["h", "re", "im"], &ac_rows)?;
    let rows: Vec<Vec<String>> = alphas
        .iter()
        .zip(&sigma)
        .map(|(a, z)| {
            let [re, im] = c_cols(*z);
            vec![fmt_f64(*a), re, im, fmt_f64(z.norm())]
        })
        .collect();
    ctx.out.csv("spectrum.csv", &["alpha", "re", "im", "abs"], &rows)?;
    ctx.meta.insert("max_lag".into(), json!(max_lag));
    Ok(())
}
