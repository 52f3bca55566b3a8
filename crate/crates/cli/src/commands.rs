//! One function per subcommand except `experiment`.

use multiples::constructions::{
    build_besicovitch_intervals, build_difference_witness, build_loosening, build_odd_variant, build_thin_blocks,
    build_union_example, BuildMode, Construction, ExampleName, IntervalParams, LooseningPlan, ThinPolicy, UnionParams,
};
use multiples::criterion::{criterion_scan, g_sum, mertens_drift, mertens_progression_sum, residue_partition};
use multiples::density::{
    davenport_erdos_series, exact_density, log_partial, natural_partial, DensityEstimate, DensityValue, ExactOptions,
    SeriesOptions,
};
use multiples::sieve::sieve_multiples;
use multiples::structure::{behrend_evidence, check_pairwise_coprime, pattern_occurs, thin_check, toeplitz_scan, TailMode};
use multiples::{is_primitive, FamilySpec, PatternSpec};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::error::{config_err, CliError, CliResult};
use crate::input::parse_spec;
use crate::sink::Sink;

pub fn sieve(sink: &Sink, spec: &str, lo: u64, hi: u64, bitset: bool) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let b = spec.materialize(hi.saturating_sub(1))?;
    let w = sieve_multiples(&b, lo, hi)?;
    if bitset {
        sink.primary("sieve.bin", |out| Ok(out.write_all(&w.to_bytes())?))?;
    } else {
        sink.primary("sieve.csv", |out| {
            let mut wr = csv::Writer::from_writer(out);
            wr.write_record(["n"])?;
            for n in w.members() {
                wr.write_record([n.to_string()])?;
            }
            wr.flush()?;
            Ok(())
        })?;
    }
    sink.summary("sieve.json", &json!({ "lo": lo, "hi": hi, "count": w.count_ones() }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DensityMethod {
    Natural,
    Log,
    Exact,
}

fn estimate_row(n: Option<u64>, count: Option<u64>, e: &DensityEstimate) -> Vec<String> {
    let (num, den) = match &e.value {
        DensityValue::Exact(r) => (r.numer().to_string(), r.denom().to_string()),
        DensityValue::Float(_) => (String::new(), String::new()),
    };
    vec![
        n.map(|n| n.to_string()).unwrap_or_default(),
        count.map(|c| c.to_string()).unwrap_or_default(),
        num,
        den,
        format!("{:?}", e.to_f64()),
        format!("{:?}", e.raw.unwrap_or_else(|| e.to_f64())),
        e.kind.as_str().to_string(),
    ]
}

pub fn density(sink: &Sink, spec: &str, ns: &[u64], method: DensityMethod) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let mut rows = Vec::new();
    match method {
        DensityMethod::Exact => {
            let max = spec
                .finite_max()
                .filter(|_| spec.is_finite())
                .ok_or_else(|| config_err("exact densities need a finite family"))?;
            let r = exact_density(&spec.materialize(max)?, &ExactOptions::default())?;
            rows.push(estimate_row(None, None, &DensityEstimate::exact_periodic(r)));
        }
        DensityMethod::Natural | DensityMethod::Log => {
            if ns.is_empty() {
                return Err(config_err("--n is required for natural and log densities"));
            }
            for &n in ns {
                let e = if method == DensityMethod::Natural { natural_partial(&spec, n)? } else { log_partial(&spec, n)? };
                let count = match &e.value {
                    DensityValue::Exact(_) if method == DensityMethod::Natural => {
                        Some(multiples::sieve::count_multiples(&spec, n)?)
                    }
                    _ => None,
                };
                rows.push(estimate_row(Some(n), count, &e));
            }
        }
    }
    sink.primary("density.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["N", "count", "value_num", "value_den", "value_float", "raw", "kind"])?;
        for r in &rows {
            wr.write_record(r)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn de_series(sink: &Sink, spec: &str, grid: &[u64], fallback_n: Option<u64>) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let mut opts = SeriesOptions::default();
    if let Some(n) = fallback_n {
        opts.fallback_n = n;
    }
    let s = davenport_erdos_series(&spec, grid, &opts)?;
    sink.primary("de_series.csv", |out| Ok(s.write_csv(out)?))
}

pub fn criterion(sink: &Sink, spec: &str, x_grid: &[u64], eps_grid: &[f64], threshold: f64) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let r = criterion_scan(&spec, x_grid, eps_grid, threshold)?;
    sink.primary("criterion.csv", |out| Ok(r.write_csv(out)?))?;
    sink.summary("criterion.json", &r.summary_json())
}

pub fn g_sum_cmd(sink: &Sink, scale: u64, level: u32, cutoff: u64, xs: &[u64], eps: Option<f64>) -> CliResult<()> {
    let eps = eps.unwrap_or(0.5f64.powi(level as i32));
    let pattern = PatternSpec::progression(level, cutoff);
    let mut rows = Vec::new();
    for &x in xs {
        rows.push((x, g_sum(scale, &pattern, x, eps)?));
    }
    sink.primary("g_sum.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["x", "epsilon", "g"])?;
        for (x, g) in &rows {
            wr.write_record([x.to_string(), format!("{eps:?}"), format!("{g:?}")])?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn mertens(sink: &Sink, k: u64, l: u64, xs: &[u64], partition: bool) -> CliResult<()> {
    let mut rows = Vec::new();
    for &x in xs {
        rows.push((x, mertens_progression_sum(k, l, x)?, mertens_drift(k, l, x)?));
    }
    sink.primary("mertens.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["x", "k", "l", "sum", "drift"])?;
        for (x, s, d) in &rows {
            wr.write_record([x.to_string(), k.to_string(), l.to_string(), format!("{s:?}"), format!("{d:?}")])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    if partition {
        let x = *xs.last().ok_or_else(|| config_err("--x is empty"))?;
        let p = residue_partition(k, x)?;
        sink.summary("mertens_partition.json", &serde_json::to_value(&p).expect("partitions serialize"))?;
    }
    Ok(())
}

pub fn toeplitz(sink: &Sink, spec: &str, n_lo: i64, n_hi: i64, s_max: u64, window: Option<u64>) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let window = window.unwrap_or_else(|| (4 * s_max).max(s_max * s_max / 2 + s_max));
    let r = toeplitz_scan(&spec, n_lo, n_hi, s_max, window)?;
    sink.primary("toeplitz.csv", |out| Ok(r.write_csv(out)?))?;
    sink.summary(
        "toeplitz.json",
        &json!({
            "window": r.window,
            "s_max": r.s_max,
            "resolved": r.resolved.len(),
            "defects": r.defects,
            "note": r.note,
        }),
    )
}

pub fn pattern(sink: &Sink, star: &str, host: &str, n: u64, radius: u64) -> CliResult<()> {
    let (star, host) = (parse_spec(star)?, parse_spec(host)?);
    let k = pattern_occurs(&star, &host, n, radius)?;
    sink.json("pattern.json", &json!({ "n": n, "radius": radius, "offset": k }))
}

pub fn classify(sink: &Sink, spec: &str, k: u64, k_grid: &[u64], tol: f64) -> CliResult<()> {
    let spec = parse_spec(spec)?;
    let truncation = spec.materialize(k)?;
    let prim = is_primitive(&truncation);
    let mut verdicts = vec![json!({
        "property": "primitive",
        "verdict": if prim.primitive { "holds_on_truncation" } else { "fails" },
        "witness": prim.witness.map(|(a, b)| json!({ "kind": "divisibility_pair", "a": a, "b": b })),
        "parameters": { "K": k, "size": truncation.len() },
    })];
    verdicts.push(serde_json::to_value(thin_check(&spec, k, TailMode::Certified)?).expect("verdicts serialize"));
    verdicts.push(serde_json::to_value(check_pairwise_coprime(&spec, k)?).expect("verdicts serialize"));
    match behrend_evidence(&spec, k_grid, tol) {
        Ok(v) => verdicts.push(serde_json::to_value(v).expect("verdicts serialize")),
        Err(multiples::Error::ContainsOne) => verdicts.push(json!({
            "property": "behrend_evidence",
            "verdict": "certified",
            "note": "1 belongs to the set, so its multiples are everything",
        })),
        Err(e) => return Err(e.into()),
    }
    sink.json("classify.json", &json!(verdicts))
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum BuildKind {
    /// Union of intervals (T_k, 2T_k] with oscillating density.
    Intervals {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value = "1e6", value_parser = crate::input::parse_u64)]
        n_est: u64,
        #[arg(long)]
        best_effort: bool,
        /// Full parameter document; overrides the flags.
        #[arg(long)]
        params: Option<String>,
    },
    /// Primitive thin set built from sieved blocks.
    ThinBlocks {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Policy document (t1, len1, growth, align_cap).
        #[arg(long)]
        params: Option<String>,
    },
    /// Scaled progression primes above calibrated cutoffs.
    Loosening {
        #[arg(long)]
        scales: String,
        #[arg(long, default_value = "1e6", value_parser = crate::input::parse_u64)]
        n_cal: u64,
        /// Plan document (levels, stride, grid_ratio).
        #[arg(long)]
        params: Option<String>,
    },
    /// Loosening of an interval family whose difference keeps positive density.
    Witness {
        /// Interval family spec.
        #[arg(long)]
        spec: String,
    },
    /// One of the named union examples.
    Example {
        name: String,
        /// Union parameter document.
        #[arg(long)]
        params: Option<String>,
    },
    /// Odd elements of a family.
    Odd {
        #[arg(long)]
        spec: String,
    },
}

fn doc<T: DeserializeOwned>(arg: &str) -> CliResult<T> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {path}: {e}")))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| config_err(format!("parameters: {e}")))
}

pub fn build(sink: &Sink, kind: &BuildKind, require_checks: bool) -> CliResult<()> {
    let c: Construction = match kind {
        BuildKind::Intervals { epsilon, levels, n_est, best_effort, params } => {
            let p = match params {
                Some(p) => doc::<IntervalParams>(p)?,
                None => {
                    let p = IntervalParams::new(*epsilon, *levels, *n_est);
                    if *best_effort {
                        p.with_mode(BuildMode::BestEffort)
                    } else {
                        p
                    }
                }
            };
            build_besicovitch_intervals(&p)?
        }
        BuildKind::ThinBlocks { levels, beta, params } => {
            let policy = params.as_deref().map(doc::<ThinPolicy>).transpose()?.unwrap_or_default();
            build_thin_blocks(&policy, *levels, *beta)?
        }
        BuildKind::Loosening { scales, n_cal, params } => {
            let plan = params.as_deref().map(doc::<LooseningPlan>).transpose()?.unwrap_or_default();
            build_loosening(&crate::input::parse_set(scales)?, &plan, *n_cal)?
        }
        BuildKind::Witness { spec } => build_difference_witness(&parse_spec(spec)?)?,
        BuildKind::Example { name, params } => {
            let name: ExampleName = name.parse()?;
            let params = params.as_deref().map(doc::<UnionParams>).transpose()?.unwrap_or_default();
            build_union_example(name, &params)?
        }
        BuildKind::Odd { spec } => {
            let odd: FamilySpec = build_odd_variant(parse_spec(spec)?);
            return sink.json("family.json", &serde_json::to_value(&odd).expect("specs serialize"));
        }
    };
    let failed: Vec<String> = c.log.failed().map(|ch| check_label(&ch.name, ch.level)).collect();
    sink.primary("construction.json", |out| Ok(writeln!(out, "{}", c.to_json())?))?;
    sink.summary(
        "construction_summary.json",
        &json!({ "checks": c.log.checks.len(), "failed": failed, "notes": c.log.notes }),
    )?;
    if require_checks && !failed.is_empty() {
        return Err(CliError::Compute(multiples::Error::Internal(format!("failed checks: {}", failed.join(", ")))));
    }
    Ok(())
}

pub fn check_label(name: &str, level: Option<usize>) -> String {
    match level {
        Some(k) => format!("{name}[{k}]"),
        None => name.to_string(),
    }
}
