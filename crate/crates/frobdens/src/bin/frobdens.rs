//! Batch front end: scenario files in, predictions, estimates and
//! verification reports out.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 bad input, 3 exact
//! prediction unavailable for the requested set, 4 internal invariant
//! breach (a cross-check inside the library panicked).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frobdens::density::{
    chebotarev_pullback, gamma_constant, multiplicity_constant, predict_conditional,
    predict_density, predict_per_element, psi_density_predict, tower_kernel_closure_verify,
    DensityError,
};
use frobdens::estimate::{
    estimate_both, l_product_probe, verify, EstimateError, EstimateJob, PrimeSource, TSV_HEADER,
};
use frobdens::fields::{FieldLevel, FieldPair};
use frobdens::group::{fiber_h_classes, FiniteGroup};
use frobdens::rat::rat_fmt;
use frobdens::scenario::{ResolvedField, Scenario, ScenarioError, ScenarioFile};
use frobdens::util::{order_mod, SplitMix64};

#[derive(Parser)]
#[command(
    name = "frobdens",
    version,
    about = "Exact and empirical Dirichlet-type densities attached to Frobenius elements"
)]
struct Cli {
    /// Worker threads for prime enumeration (default: all hardware threads)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the sampled spot-checks in `group`
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact density from a scenario file, printed as num/den
    Predict { file: PathBuf },
    /// Empirical convergence table (TSV)
    Estimate { file: PathBuf },
    /// Exact prediction against both estimators; exit 0 pass, 1 fail
    Verify { file: PathBuf },
    /// Structure report: orders, classes, centralizers, fiber partitions
    Group { file: PathBuf },
    /// Kernel-closure verdict per character psi of the cyclic tower base
    Lemma {
        /// Order of the cyclic base
        #[arg(long)]
        d: u32,
        /// Prime order of the translation coordinates
        #[arg(long)]
        p: u32,
        /// Image of the base generator under the acting character chi
        #[arg(long)]
        chi: u32,
        /// Number of translation coordinates
        #[arg(long, default_value_t = 1)]
        level: usize,
    },
    /// Truncated Euler-product probe table (TSV)
    Lprobe { file: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Group(#[from] frobdens::group::GroupError),
    #[error("{0}")]
    Input(String),
}

fn is_not_predictable(e: &AppError) -> bool {
    matches!(
        e,
        AppError::Density(DensityError::NotPredictable(_))
            | AppError::Estimate(EstimateError::Density(DensityError::NotPredictable(_)))
            | AppError::Scenario(ScenarioError::Estimate(EstimateError::Density(
                DensityError::NotPredictable(_)
            )))
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_not_predictable(&e) { 3 } else { 2 })
        }
        Err(_) => {
            eprintln!("error: internal invariant breach");
            ExitCode::from(4)
        }
    }
}

fn prime_source(cutoff: u64) -> Result<PrimeSource, AppError> {
    let dir = std::env::var_os("FROBDENS_CACHE_DIR").map(PathBuf::from);
    Ok(PrimeSource::from_cache_dir(dir.as_deref(), cutoff)?)
}

fn load(file: &PathBuf) -> Result<Scenario, AppError> {
    Ok(ScenarioFile::from_path(file)?.resolve()?)
}

fn run(cli: &Cli) -> Result<u8, AppError> {
    match &cli.cmd {
        Cmd::Predict { file } => cmd_predict(&load(file)?),
        Cmd::Estimate { file } => cmd_estimate(&load(file)?),
        Cmd::Verify { file } => cmd_verify(&load(file)?),
        Cmd::Group { file } => cmd_group(&load(file)?, cli.seed),
        Cmd::Lemma { d, p, chi, level } => cmd_lemma(*d, *p, *chi, *level),
        Cmd::Lprobe { file } => cmd_lprobe(&load(file)?),
    }
}

fn cmd_predict(sc: &Scenario) -> Result<u8, AppError> {
    let value = match &sc.field {
        ResolvedField::Cross(c) => {
            chebotarev_pullback(&c.to_common_left, &c.to_common_right, c.x, c.sigma)?
        }
        ResolvedField::Pair(pair) => {
            if let Some(psi) = &sc.psi {
                let per: BTreeMap<usize, _> = predict_per_element(pair, &sc.set)?
                    .into_iter()
                    .enumerate()
                    .collect();
                let v = psi_density_predict(psi, &per)?;
                v.as_exact()
                    .ok_or_else(|| {
                        AppError::Input("psi must be an exact table for prediction".into())
                    })?
                    .clone()
            } else {
                let x = sc.x()?;
                match &sc.denominator {
                    Some(d) => predict_conditional(pair, &sc.set, d, x)?,
                    None => predict_density(pair, &sc.set, x)?,
                }
            }
        }
    };
    println!("{}", rat_fmt(&value));
    Ok(0)
}

fn build_job<'a>(sc: &'a Scenario, pair: &'a FieldPair) -> Result<EstimateJob<'a>, AppError> {
    let x = sc.x()?;
    Ok(match &sc.denominator {
        Some(d) => EstimateJob::with_denominator(pair, &sc.set, d, x)?,
        None => EstimateJob::new(pair, &sc.set, x)?,
    })
}

fn cmd_estimate(sc: &Scenario) -> Result<u8, AppError> {
    let pair = sc.pair()?;
    let job = build_job(sc, pair)?;
    let source = prime_source(sc.schedule.top_cutoff().max(sc.cutoff))?;
    let (weighted, counting) = estimate_both(&job, &sc.schedule, &source)?;
    let expected = sc.expected.as_ref().map(frobdens::rat::rat_to_f64);
    println!("# the counting row is the headline; the weighted rows track the Dirichlet ratio at s = 1/d + eps, whose true limit s -> 1/d is out of numerical reach");
    println!(
        "# base level: {}; d = {}; multiplicity = {}",
        pair.base().label(),
        job.frobenius_order(),
        job.multiplicity()
    );
    println!("{TSV_HEADER}");
    for w in &weighted {
        println!("{}", frobdens::estimate::tsv_row(w, expected, None));
    }
    println!("{}", frobdens::estimate::tsv_row(&counting, expected, None));
    println!("# stderr_proxy (counting): {:.6}", counting.stderr_proxy());
    Ok(0)
}

fn cmd_verify(sc: &Scenario) -> Result<u8, AppError> {
    let pair = sc.pair()?;
    let expected = sc
        .expected
        .as_ref()
        .ok_or_else(|| AppError::Input("verify needs an \"expected\" rational".into()))?;
    let job = build_job(sc, pair)?;
    let source = prime_source(sc.cutoff)?;
    let report = verify(&job, expected, sc.tolerance, sc.cutoff, &source)?;
    println!("# pass needs the counting value within tolerance and the final weighted value within twice it");
    println!(
        "# expected {} = {:.9}, tolerance {:.6}",
        rat_fmt(expected),
        report.expected,
        report.tolerance
    );
    println!("{TSV_HEADER}");
    let last = report.weighted.len() - 1;
    for (i, w) in report.weighted.iter().enumerate() {
        let gate = if i == last {
            Some((w.value - report.expected).abs() <= 2.0 * report.tolerance)
        } else {
            None
        };
        println!(
            "{}",
            frobdens::estimate::tsv_row(w, Some(report.expected), gate)
        );
    }
    println!(
        "{}",
        frobdens::estimate::tsv_row(
            &report.counting,
            Some(report.expected),
            Some((report.counting.value - report.expected).abs() <= report.tolerance),
        )
    );
    println!("# verdict: {}", if report.pass { "pass" } else { "fail" });
    Ok(if report.pass { 0 } else { 1 })
}

fn describe_level(name: &str, level: &dyn FieldLevel) {
    let g = level.group();
    let t = level.table();
    println!("{name}: {}", level.label());
    println!(
        "  group {:?}, order {}, abelian: {}, classes: {}",
        g.label(),
        g.order(),
        g.is_abelian(),
        t.class_count()
    );
    for c in 0..t.class_count() {
        let rep = t.members(c)[0];
        let centralizer = g.centralizer(rep).expect("class representative is valid").len();
        println!(
            "  class {c}: size {}, element order {}, centralizer {}, rep {:?}",
            t.size(c),
            t.order(c),
            centralizer,
            g.elem(rep)
        );
    }
}

fn spot_check(g: &std::sync::Arc<FiniteGroup>, seed: u64) -> &'static str {
    let mut rng = SplitMix64::new(seed);
    let n = g.order();
    for _ in 0..64 {
        let (a, b, c) = (rng.below(n), rng.below(n), rng.below(n));
        if g.op_idx(g.op_idx(a, b), c) != g.op_idx(a, g.op_idx(b, c)) {
            return "FAILED";
        }
        if g.op_idx(a, g.inv_idx(a)) != g.identity() {
            return "FAILED";
        }
    }
    "ok"
}

fn cmd_group(sc: &Scenario, seed: u64) -> Result<u8, AppError> {
    match &sc.field {
        ResolvedField::Cross(c) => {
            println!("cross pair joined over {:?}", c.to_common_left.target().label());
            for (name, g) in [("left", &c.left), ("right", &c.right)] {
                println!(
                    "{name}: group {:?}, order {}, abelian: {}",
                    g.label(),
                    g.order(),
                    g.is_abelian()
                );
            }
            println!(
                "x rep {:?}, sigma rep {:?}",
                c.left.elem(c.x),
                c.right.elem(c.sigma)
            );
            println!(
                "spot-check (seed {seed}): associativity and inverses on 64 sampled triples: {}",
                spot_check(&c.left, seed)
            );
        }
        ResolvedField::Pair(pair) => {
            describe_level("top", pair.top());
            describe_level("base", pair.base());
            let pi = pair.pi();
            println!("kernel order {}", pi.kernel().len());
            let base = pair.base();
            for c in 0..base.table().class_count() {
                let x = base.table().members(c)[0];
                let part = fiber_h_classes(pi, x)?;
                let sizes: Vec<usize> = part.classes.iter().map(|cl| cl.len()).collect();
                let gamma = gamma_constant(pi, part.classes[0][0])?;
                let mult = multiplicity_constant(base.group(), x)?;
                println!(
                    "fiber over base class {c} (rep {:?}): kernel-class sizes {:?}, gamma(first) {}, multiplicity {}",
                    base.group().elem(x),
                    sizes,
                    rat_fmt(&gamma),
                    rat_fmt(&mult)
                );
            }
            println!(
                "spot-check (seed {seed}): associativity and inverses on 64 sampled triples: {}",
                spot_check(pair.top().group(), seed)
            );
        }
    }
    Ok(0)
}

fn cmd_lemma(d: u32, p: u32, chi: u32, level: usize) -> Result<u8, AppError> {
    println!(
        "# normal closure of the lifted kernel of psi against the full preimage, tower d={d} p={p} chi={chi} level={level}"
    );
    println!("psi_gen\tord_psi\tverdict");
    let mut rows = 0;
    for psi_gen in 1..p {
        let ord = order_mod(psi_gen as u64, p as u64);
        if d as u64 % ord != 0 {
            continue;
        }
        rows += 1;
        let verdict: &str = match tower_kernel_closure_verify(d, p, chi, level, psi_gen) {
            Ok(true) => "true",
            Ok(false) => "false",
            Err(DensityError::HypothesisViolated(_)) => "outside_hypothesis",
            Err(e) => return Err(e.into()),
        };
        println!("{psi_gen}\t{ord}\t{verdict}");
    }
    if rows == 0 {
        return Err(AppError::Input(format!(
            "no character of order dividing {d} exists mod {p}"
        )));
    }
    Ok(0)
}

fn cmd_lprobe(sc: &Scenario) -> Result<u8, AppError> {
    let pair = sc.pair()?;
    let x = sc.x()?;
    let d = pair.base().table().order(pair.base().table().class_of(x));
    let s_values = match &sc.s_values {
        Some(v) => v.clone(),
        None => (1..=7)
            .rev()
            .map(|k| 1.0 / d as f64 + 0.05 * k as f64)
            .collect(),
    };
    let source = prime_source(sc.cutoff)?;
    let rows = l_product_probe(pair, x, &sc.chi, &s_values, sc.cutoff, &source)?;
    println!(
        "# log of the truncated Euler product over P^x up to {}, character modulus {} exponent {}; the model column is (1/d)(log(1/(s - 1/d)) - log d)",
        sc.cutoff, sc.chi.modulus, sc.chi.exponent
    );
    println!("s\tlog_product\tmodel");
    for r in rows {
        println!("{:.6}\t{:.9}\t{:.9}", r.s, r.log_product, r.model);
    }
    Ok(0)
}
