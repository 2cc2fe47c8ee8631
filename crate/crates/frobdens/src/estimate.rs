//! Empirical density estimators over enumerated rational primes.
//!
//! Two estimators approximate the same limit: `counting` takes the ratio of
//! prime counts below a cutoff, `weighted` takes the ratio of truncated
//! Dirichlet sums at s slightly above the abscissa 1/d. The true limit
//! s -> 1/d is numerically inaccessible (the partial sums diverge there, see
//! [`divergence_probe`]), so the counting value is the headline number and
//! the weighted sequence along a [`Schedule`] is a consistency signal. Report
//! emitters repeat this caveat in their output.
//!
//! Every pass is parallel over segment-aligned prime windows and merges the
//! per-window compensated sums in window order, so results are byte-identical
//! across thread counts.

use std::path::Path;
use std::sync::Arc;

use num::complex::Complex64;
use num::ToPrimitive;
use rayon::prelude::*;

use crate::density::{multiplicity_constant, CompiledSet, DensityError, SetExpr};
use crate::fields::{FieldError, FieldPair};
use crate::primes::{cached_primes_up_to, for_each_prime, PrimeError, PrimeWindow};
use crate::rat::{rat_to_f64, Rat};
use crate::util::{gcd_u64, mul_mod, order_mod, pow_mod, KahanSum};

/// Largest character modulus the L-probe will tabulate.
const MAX_CHARACTER_MODULUS: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error("s = {s} is not above the abscissa of convergence 1/{d}")]
    SBelowAbscissa { s: f64, d: u64 },
    #[error("no denominator primes below the cutoff")]
    EmptyDenominator,
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("bad character: {0}")]
    BadCharacter(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Prime(#[from] PrimeError),
}

type Result<T> = std::result::Result<T, EstimateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Counting,
    Weighted,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Counting => "counting",
            EstimatorKind::Weighted => "weighted",
        }
    }
}

/// One evaluated ratio. Counts are primes of the level field (each rational
/// prime contributes its multiplicity), sums are the truncated Dirichlet
/// numerator and denominator; for the counting estimator the sums just echo
/// the counts.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub estimator: EstimatorKind,
    pub s: Option<f64>,
    pub cutoff: u64,
    pub numer_count: u64,
    pub denom_count: u64,
    pub numer_sum: f64,
    pub denom_sum: f64,
    pub value: f64,
}

impl DensityEstimate {
    /// Bernoulli-style display aid, not a statistical guarantee.
    pub fn stderr_proxy(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.denom_count as f64).sqrt()
    }
}

/// Evaluation points for the weighted estimator: epsilon strictly decreasing
/// toward 0, cutoffs strictly increasing, evaluated at s = 1/d + epsilon.
#[derive(Debug, Clone)]
pub struct Schedule {
    entries: Vec<(f64, u64)>,
}

impl Schedule {
    pub fn new(entries: Vec<(f64, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EstimateError::BadSchedule("empty schedule".into()));
        }
        for pair in entries.windows(2) {
            if pair[1].0 >= pair[0].0 {
                return Err(EstimateError::BadSchedule(
                    "epsilon values must strictly decrease".into(),
                ));
            }
            if pair[1].1 <= pair[0].1 {
                return Err(EstimateError::BadSchedule(
                    "cutoffs must strictly increase".into(),
                ));
            }
        }
        for &(eps, x) in &entries {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(EstimateError::BadSchedule(format!(
                    "epsilon {eps} is not a positive finite number"
                )));
            }
            if x < 2 {
                return Err(EstimateError::BadSchedule(format!("cutoff {x} below 2")));
            }
        }
        Ok(Schedule { entries })
    }

    /// The default evaluation points.
    pub fn standard() -> Self {
        Self::scaled_to(10_000_000).expect("the built-in schedule is valid")
    }

    /// The standard shape scaled so the final cutoff is `x`: epsilons
    /// 0.2, 0.1, 0.05, 0.025 against x/100, x/10, x/2, x. Entries that
    /// collide after clamping to 2 are dropped from the front.
    pub fn scaled_to(x: u64) -> Result<Self> {
        if x < 2 {
            return Err(EstimateError::BadSchedule(format!("cutoff {x} below 2")));
        }
        let candidates = [
            (0.2, (x / 100).max(2)),
            (0.1, (x / 10).max(2)),
            (0.05, (x / 2).max(2)),
            (0.025, x),
        ];
        let mut kept: Vec<(f64, u64)> = Vec::new();
        for &(eps, cx) in candidates.iter().rev() {
            if kept.last().map_or(true, |&(_, px)| cx < px) {
                kept.push((eps, cx));
            }
        }
        kept.reverse();
        Self::new(kept)
    }

    pub fn entries(&self) -> &[(f64, u64)] {
        &self.entries
    }

    pub fn top_cutoff(&self) -> u64 {
        self.entries.last().expect("schedule is never empty").1
    }
}

/// Where the pass gets its primes. `Preloaded` exists for the on-disk cache;
/// both sources visit identical primes in identical order, so estimates do
/// not depend on the choice.
#[derive(Clone)]
pub enum PrimeSource {
    Sieve,
    Preloaded(Arc<Vec<u64>>),
}

impl PrimeSource {
    /// Sieve fresh, or load/extend the cache under `dir` when given.
    pub fn from_cache_dir(dir: Option<&Path>, bound: u64) -> Result<Self> {
        match dir {
            Some(d) => Ok(PrimeSource::Preloaded(Arc::new(cached_primes_up_to(
                d, bound,
            )?))),
            None => Ok(PrimeSource::Sieve),
        }
    }

    fn visit_window(&self, w: PrimeWindow, mut visit: impl FnMut(u64)) {
        match self {
            PrimeSource::Sieve => {
                for_each_prime(w.lo, w.hi, &mut visit)
                    .expect("window bounds were validated at construction");
            }
            PrimeSource::Preloaded(list) => {
                let a = list.partition_point(|&q| q < w.lo);
                let b = list.partition_point(|&q| q <= w.hi);
                for &p in &list[a..b] {
                    visit(p);
                }
            }
        }
    }
}

/// Everything fixed across one estimation pass: the field pair, the compiled
/// numerator set, an optional extra restriction applied to both sides of the
/// ratio, and the target Frobenius element x of the base level.
pub struct EstimateJob<'a> {
    pair: &'a FieldPair,
    set: CompiledSet,
    within: Option<CompiledSet>,
    x_class: usize,
    d: u64,
    mult: u64,
}

impl<'a> EstimateJob<'a> {
    pub fn new(pair: &'a FieldPair, set: &SetExpr, x: usize) -> Result<Self> {
        Self::build(pair, set, None, x)
    }

    /// Restrict both numerator and denominator to `denominator`; the plain
    /// job divides by all of P^x.
    pub fn with_denominator(
        pair: &'a FieldPair,
        set: &SetExpr,
        denominator: &SetExpr,
        x: usize,
    ) -> Result<Self> {
        Self::build(pair, set, Some(denominator), x)
    }

    fn build(
        pair: &'a FieldPair,
        set: &SetExpr,
        denominator: Option<&SetExpr>,
        x: usize,
    ) -> Result<Self> {
        let compiled = CompiledSet::compile(set, pair)?;
        let within = denominator
            .map(|d| CompiledSet::compile(d, pair))
            .transpose()?;
        let mult = multiplicity_constant(pair.base().group(), x)?;
        let mult = mult
            .to_integer()
            .to_u64()
            .expect("a centralizer order divided by a subgroup order fits in u64");
        let x_class = pair.base().table().class_of(x);
        let d = pair.base().table().order(x_class);
        Ok(EstimateJob {
            pair,
            set: compiled,
            within,
            x_class,
            d,
            mult,
        })
    }

    /// Common order d of the target class; the Dirichlet abscissa is 1/d.
    pub fn frobenius_order(&self) -> u64 {
        self.d
    }

    /// Primes of the level field with Frobenius exactly x over each rational
    /// prime of class C(x).
    pub fn multiplicity(&self) -> u64 {
        self.mult
    }
}

#[derive(Clone, Copy)]
struct Probe {
    cutoff: u64,
    s: Option<f64>,
}

#[derive(Clone, Default)]
struct Tally {
    numer_count: u64,
    denom_count: u64,
    numer: KahanSum,
    denom: KahanSum,
}

fn tally_window(job: &EstimateJob, probes: &[Probe], source: &PrimeSource, w: PrimeWindow) -> Vec<Tally> {
    let mut local = vec![Tally::default(); probes.len()];
    source.visit_window(w, |p| {
        let Some((tc, bc)) = job.pair.classes_of(p) else {
            return;
        };
        if bc != job.x_class {
            return;
        }
        if let Some(ds) = &job.within {
            if !ds.member(p, tc, bc) {
                return;
            }
        }
        let in_set = job.set.member(p, tc, bc);
        for (probe, t) in probes.iter().zip(local.iter_mut()) {
            if p > probe.cutoff {
                continue;
            }
            t.denom_count += job.mult;
            if in_set {
                t.numer_count += job.mult;
            }
            if let Some(s) = probe.s {
                let term = job.mult as f64 * (p as f64).powf(-(job.d as f64) * s);
                t.denom.add(term);
                if in_set {
                    t.numer.add(term);
                }
            }
        }
    });
    local
}

/// One parallel pass, one Tally per probe. Windows are segment-aligned and
/// merged in ascending order regardless of which thread handled them.
fn run_probes(job: &EstimateJob, probes: &[Probe], source: &PrimeSource) -> Result<Vec<Tally>> {
    let x_max = probes
        .iter()
        .map(|p| p.cutoff)
        .max()
        .ok_or_else(|| EstimateError::BadSchedule("no evaluation points".into()))?;
    let windows = PrimeWindow::new(2, x_max)?.aligned_chunks();
    let parts: Vec<Vec<Tally>> = windows
        .par_iter()
        .map(|w| tally_window(job, probes, source, *w))
        .collect();
    let mut acc = vec![Tally::default(); probes.len()];
    for part in &parts {
        for (a, t) in acc.iter_mut().zip(part) {
            a.numer_count += t.numer_count;
            a.denom_count += t.denom_count;
            a.numer.merge(&t.numer);
            a.denom.merge(&t.denom);
        }
    }
    Ok(acc)
}

fn weighted_estimate(t: &Tally, s: f64, cutoff: u64) -> Result<DensityEstimate> {
    if t.denom_count == 0 {
        return Err(EstimateError::EmptyDenominator);
    }
    let numer_sum = t.numer.value();
    let denom_sum = t.denom.value();
    let value = numer_sum / denom_sum;
    debug_assert!((0.0..=1.0).contains(&value));
    Ok(DensityEstimate {
        estimator: EstimatorKind::Weighted,
        s: Some(s),
        cutoff,
        numer_count: t.numer_count,
        denom_count: t.denom_count,
        numer_sum,
        denom_sum,
        value,
    })
}

fn counting_estimate(t: &Tally, cutoff: u64) -> Result<DensityEstimate> {
    if t.denom_count == 0 {
        return Err(EstimateError::EmptyDenominator);
    }
    let numer_sum = t.numer_count as f64;
    let denom_sum = t.denom_count as f64;
    let value = numer_sum / denom_sum;
    debug_assert!((0.0..=1.0).contains(&value));
    Ok(DensityEstimate {
        estimator: EstimatorKind::Counting,
        s: None,
        cutoff,
        numer_count: t.numer_count,
        denom_count: t.denom_count,
        numer_sum,
        denom_sum,
        value,
    })
}

/// Truncated Dirichlet sum over the job's set intersected with P^x: each
/// qualifying rational prime p <= cutoff contributes multiplicity * p^(-d*s).
pub fn weighted_partial(job: &EstimateJob, s: f64, cutoff: u64, source: &PrimeSource) -> Result<f64> {
    let d = job.d;
    if !(s > 1.0 / d as f64) {
        return Err(EstimateError::SBelowAbscissa { s, d });
    }
    if cutoff < 2 {
        return Err(EstimateError::BadSchedule(format!("cutoff {cutoff} below 2")));
    }
    let tallies = run_probes(job, &[Probe { cutoff, s: Some(s) }], source)?;
    Ok(tallies[0].numer.value())
}

/// The weighted ratio along a schedule; the last entry is the headline.
pub fn delta_x_weighted(
    job: &EstimateJob,
    schedule: &Schedule,
    source: &PrimeSource,
) -> Result<Vec<DensityEstimate>> {
    let (ests, _) = estimate_both(job, schedule, source)?;
    Ok(ests)
}

/// The counting ratio at one cutoff.
pub fn delta_x_counting(job: &EstimateJob, cutoff: u64, source: &PrimeSource) -> Result<DensityEstimate> {
    if cutoff < 2 {
        return Err(EstimateError::BadSchedule(format!("cutoff {cutoff} below 2")));
    }
    let tallies = run_probes(job, &[Probe { cutoff, s: None }], source)?;
    counting_estimate(&tallies[0], cutoff)
}

/// Weighted sequence plus the counting estimate at the schedule's top
/// cutoff, all from a single pass.
pub fn estimate_both(
    job: &EstimateJob,
    schedule: &Schedule,
    source: &PrimeSource,
) -> Result<(Vec<DensityEstimate>, DensityEstimate)> {
    let d = job.d as f64;
    let mut probes: Vec<Probe> = schedule
        .entries()
        .iter()
        .map(|&(eps, x)| Probe {
            cutoff: x,
            s: Some(1.0 / d + eps),
        })
        .collect();
    let top = schedule.top_cutoff();
    probes.push(Probe { cutoff: top, s: None });
    let tallies = run_probes(job, &probes, source)?;
    let mut weighted = Vec::with_capacity(schedule.entries().len());
    for (t, probe) in tallies.iter().zip(&probes).take(schedule.entries().len()) {
        weighted.push(weighted_estimate(t, probe.s.expect("schedule probe"), probe.cutoff)?);
    }
    let counting = counting_estimate(tallies.last().expect("one probe per entry plus one"), top)?;
    Ok((weighted, counting))
}

/// Partial sums of Sum N(p)^(-s) over P^x at exactly s = 1/d, where the
/// series diverges: strictly increasing in the cutoff, no upper bound.
pub fn divergence_probe(
    pair: &FieldPair,
    x: usize,
    cutoffs: &[u64],
    source: &PrimeSource,
) -> Result<Vec<f64>> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs[0] < 2 {
        return Err(EstimateError::BadSchedule(
            "cutoffs must be strictly increasing and start at 2 or above".into(),
        ));
    }
    let job = EstimateJob::new(pair, &SetExpr::all(), x)?;
    let s = 1.0 / job.d as f64;
    let probes: Vec<Probe> = cutoffs
        .iter()
        .map(|&cx| Probe {
            cutoff: cx,
            s: Some(s),
        })
        .collect();
    let tallies = run_probes(&job, &probes, source)?;
    Ok(tallies.iter().map(|t| t.numer.value()).collect())
}

/// A character of (Z/modulus)* by its exponent on the canonical generator,
/// the smallest primitive root. Exponent 0 is the trivial character and is
/// accepted for any modulus; anything else needs a cyclic unit group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharSpec {
    pub modulus: u64,
    pub exponent: u64,
}

impl CharSpec {
    pub fn trivial() -> Self {
        CharSpec {
            modulus: 1,
            exponent: 0,
        }
    }

    /// chi(r) for every residue r mod modulus, 0 outside the units.
    fn table(&self) -> Result<Vec<Complex64>> {
        let m = self.modulus;
        if m == 0 || m > MAX_CHARACTER_MODULUS {
            return Err(EstimateError::BadCharacter(format!(
                "modulus {m} outside 1..={MAX_CHARACTER_MODULUS}"
            )));
        }
        let mut tab = vec![Complex64::new(0.0, 0.0); m as usize];
        let phi = if m == 1 {
            1
        } else {
            (1..m).filter(|&r| gcd_u64(r, m) == 1).count() as u64
        };
        if self.exponent % phi == 0 {
            for r in 0..m {
                if m == 1 || gcd_u64(r, m) == 1 {
                    tab[r as usize] = Complex64::new(1.0, 0.0);
                }
            }
            return Ok(tab);
        }
        let gen = (2..m)
            .find(|&g| gcd_u64(g, m) == 1 && order_mod(g, m) == phi)
            .ok_or_else(|| {
                EstimateError::BadCharacter(format!(
                    "the unit group mod {m} is not cyclic; only the trivial character exists here"
                ))
            })?;
        let step = std::f64::consts::TAU * (self.exponent % phi) as f64 / phi as f64;
        let mut acc = 1u64;
        for k in 0..phi {
            let angle = step * k as f64;
            tab[acc as usize] = Complex64::new(angle.cos(), angle.sin());
            acc = mul_mod(acc, gen, m);
        }
        Ok(tab)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LProbeRow {
    pub s: f64,
    /// Real part of log Prod (1 - chi(p^d) N(p)^(-s))^(-1), the log of the
    /// product's modulus.
    pub log_product: f64,
    /// (1/d) * (log(1/(s - 1/d)) - log d), the predicted growth shape.
    pub model: f64,
}

/// Truncated Euler product over P^x against a character pulled through the
/// norm: the factor at p uses chi(p^d mod modulus). Ramified-for-chi primes
/// contribute the factor 1.
pub fn l_product_probe(
    pair: &FieldPair,
    x: usize,
    chi: &CharSpec,
    s_list: &[f64],
    cutoff: u64,
    source: &PrimeSource,
) -> Result<Vec<LProbeRow>> {
    if s_list.is_empty() {
        return Err(EstimateError::BadSchedule("no evaluation points".into()));
    }
    if cutoff < 2 {
        return Err(EstimateError::BadSchedule(format!("cutoff {cutoff} below 2")));
    }
    let job = EstimateJob::new(pair, &SetExpr::all(), x)?;
    let d = job.d;
    for &s in s_list {
        if !(s > 1.0 / d as f64) {
            return Err(EstimateError::SBelowAbscissa { s, d });
        }
    }
    let tab = chi.table()?;
    let m = chi.modulus;
    let windows = PrimeWindow::new(2, cutoff)?.aligned_chunks();
    let parts: Vec<Vec<(KahanSum, KahanSum)>> = windows
        .par_iter()
        .map(|w| {
            let mut acc = vec![(KahanSum::new(), KahanSum::new()); s_list.len()];
            source.visit_window(*w, |p| {
                let Some((_, bc)) = job.pair.classes_of(p) else {
                    return;
                };
                if bc != job.x_class {
                    return;
                }
                let chi_p = tab[pow_mod(p % m, d, m) as usize];
                if chi_p == Complex64::new(0.0, 0.0) {
                    return;
                }
                for (&s, (re, im)) in s_list.iter().zip(acc.iter_mut()) {
                    let z = chi_p * (p as f64).powf(-(d as f64) * s);
                    let w = -(Complex64::new(1.0, 0.0) - z).ln() * job.mult as f64;
                    re.add(w.re);
                    im.add(w.im);
                }
            });
            acc
        })
        .collect();
    let mut re_sums = vec![KahanSum::new(); s_list.len()];
    for part in &parts {
        for (a, (re, _)) in re_sums.iter_mut().zip(part) {
            a.merge(re);
        }
    }
    Ok(s_list
        .iter()
        .zip(&re_sums)
        .map(|(&s, re)| LProbeRow {
            s,
            log_product: re.value(),
            model: ((1.0 / (s - 1.0 / d as f64)).ln() - (d as f64).ln()) / d as f64,
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub pass: bool,
    pub expected: f64,
    pub tolerance: f64,
    pub counting: DensityEstimate,
    pub weighted: Vec<DensityEstimate>,
}

/// Check an exact prediction against both estimators at a cutoff: pass when
/// the counting value is within `tolerance` and the final weighted value is
/// within twice that (the weighted sequence sits farther from its limit at
/// any finite s).
pub fn verify(
    job: &EstimateJob,
    expected: &Rat,
    tolerance: f64,
    cutoff: u64,
    source: &PrimeSource,
) -> Result<VerifyReport> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(EstimateError::BadSchedule(format!(
            "tolerance {tolerance} is not a positive finite number"
        )));
    }
    let schedule = Schedule::scaled_to(cutoff)?;
    let (weighted, counting) = estimate_both(job, &schedule, source)?;
    let e = rat_to_f64(expected);
    let last = weighted.last().expect("schedule is never empty");
    let pass = (counting.value - e).abs() <= tolerance && (last.value - e).abs() <= 2.0 * tolerance;
    Ok(VerifyReport {
        pass,
        expected: e,
        tolerance,
        counting,
        weighted,
    })
}

pub const TSV_HEADER: &str = "estimator\ts\tX\tnumer\tdenom\tvalue\texpected\tabs_err\tpass";

/// One TSV row; absent fields print "-".
pub fn tsv_row(est: &DensityEstimate, expected: Option<f64>, pass: Option<bool>) -> String {
    let s_col = match est.s {
        Some(s) => format!("{s:.6}"),
        None => "-".into(),
    };
    let (exp_col, err_col) = match expected {
        Some(e) => (format!("{e:.9}"), format!("{:.9}", (est.value - e).abs())),
        None => ("-".into(), "-".into()),
    };
    let pass_col = match pass {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "-",
    };
    format!(
        "{}\t{}\t{}\t{}\t{}\t{:.9}\t{}\t{}\t{}",
        est.estimator.name(),
        s_col,
        est.cutoff,
        est.numer_count,
        est.denom_count,
        est.value,
        exp_col,
        err_col,
        pass_col,
    )
}
