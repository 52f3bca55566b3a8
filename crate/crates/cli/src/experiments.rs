//! Scripted experiments driven by an [`ExperimentConfig`].

use multiples::constructions::{
    build_besicovitch_intervals, build_difference_witness, build_union_example, BuildMode, Construction, ExampleName,
    IntervalParams, Recipe, UnionParams,
};
use multiples::criterion::{criterion_scan, DEFAULT_TREND_THRESHOLD};
use multiples::density::{davenport_erdos_series, ratio, ratio_to_f64, upper_lower_proxies, SeriesOptions};
use multiples::sieve::{count_difference, count_multiples};
use multiples::structure::toeplitz_scan;
use multiples::{FamilySpec, FiniteSet, PatternSource, PatternSpec};
use num_integer::Integer;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::commands::check_label;
use crate::config::{ExperimentConfig, ExperimentName, ToeplitzConfig};
use crate::error::{config_err, CliResult};
use crate::sink::{write_file, Sink};

type Rows = Vec<Vec<String>>;

struct Artifacts<'a> {
    cfg: &'a ExperimentConfig,
    sink: &'a Sink,
}

impl Artifacts<'_> {
    fn name(&self) -> &'static str {
        self.cfg.experiment.as_str()
    }

    fn csv(&self, header: &[&str], rows: &Rows) -> CliResult<()> {
        let file = self.cfg.outputs.csv.clone().unwrap_or_else(|| format!("{}.csv", self.name()));
        write_file(&self.sink.dir_or_cwd().join(&file), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(header)?;
            for r in rows {
                wr.write_record(r)?;
            }
            wr.flush()?;
            Ok(())
        })?;
        let script = self.cfg.outputs.plot_script.clone().unwrap_or_else(|| format!("plot_{}.py", self.name()));
        write_file(&self.sink.dir_or_cwd().join(script), |w| Ok(w.write_all(plot_stub(&file).as_bytes())?))
    }

    fn json(&self, mut value: Value) -> CliResult<()> {
        value["experiment"] = json!(self.name());
        value["seed"] = json!(self.cfg.seed);
        let file = self.cfg.outputs.json.clone().unwrap_or_else(|| format!("{}.json", self.name()));
        let text = serde_json::to_string_pretty(&value).expect("json values serialize");
        write_file(&self.sink.dir_or_cwd().join(file), |w| Ok(writeln!(w, "{text}")?))
    }
}

fn plot_stub(csv: &str) -> String {
    format!(
        r#"# Plot stub: one line per numeric column against the first column.
import sys

import matplotlib.pyplot as plt
import pandas as pd

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
df = pd.read_csv(path)
x = df.columns[0]
for col in df.columns[1:]:
    if pd.api.types.is_numeric_dtype(df[col]):
        plt.plot(df[x], df[col], marker=".", linestyle="none", label=col)
plt.xscale("log")
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#
    )
}

pub fn run(cfg: &ExperimentConfig, sink: &Sink) -> CliResult<()> {
    let out = Artifacts { cfg, sink };
    match cfg.experiment {
        ExperimentName::DeConvergence => de_convergence(&out),
        ExperimentName::Oscillation => oscillation(&out),
        ExperimentName::DifferenceDensity => difference_density(&out),
        ExperimentName::CriterionScan => criterion(&out),
        ExperimentName::Toeplitz => toeplitz(&out),
        ExperimentName::Triples => triples(&out),
    }
}

fn family(cfg: &ExperimentConfig) -> CliResult<(FamilySpec, Option<Construction>)> {
    match (&cfg.family, &cfg.builder) {
        (Some(f), _) => Ok((f.clone(), None)),
        (None, Some(b)) => {
            let c = b.run()?;
            Ok((c.spec.clone(), Some(c)))
        }
        (None, None) => Err(config_err("no family or builder")),
    }
}

fn construction_summary(c: &Option<Construction>) -> Value {
    match c {
        None => Value::Null,
        Some(c) => json!({
            "checks": c.log.checks.len(),
            "failed": c.log.failed().map(|ch| check_label(&ch.name, ch.level)).collect::<Vec<_>>(),
            "notes": c.log.notes,
        }),
    }
}

fn rat_cells(r: &BigRational) -> [String; 3] {
    [r.numer().to_string(), r.denom().to_string(), format!("{:?}", ratio_to_f64(r))]
}

fn de_convergence(out: &Artifacts) -> CliResult<()> {
    let (spec, c) = family(out.cfg)?;
    let grid = out.cfg.grid.clone().expect("validated");
    let s = davenport_erdos_series(&spec, &grid, &SeriesOptions::default())?;
    let file = out.cfg.outputs.csv.clone().unwrap_or_else(|| "de-convergence.csv".into());
    write_file(&out.sink.dir_or_cwd().join(&file), |w| Ok(s.write_csv(w)?))?;
    let script = out.cfg.outputs.plot_script.clone().unwrap_or_else(|| "plot_de-convergence.py".into());
    write_file(&out.sink.dir_or_cwd().join(script), |w| Ok(w.write_all(plot_stub(&file).as_bytes())?))?;
    let exact: Vec<Value> = s
        .checkpoints
        .iter()
        .zip(&s.values)
        .map(|(k, v)| match v.exact().filter(|_| v.is_exact_periodic()) {
            Some(r) => json!({ "K": k, "value": r.to_string() }),
            None => json!({ "K": k, "value": null, "estimate": v.to_f64() }),
        })
        .collect();
    out.json(json!({ "checkpoints": exact, "construction": construction_summary(&c) }))
}

/// Interval levels and the construction that produced them, if any.
fn intervals(cfg: &ExperimentConfig) -> CliResult<(Vec<u64>, f64, FamilySpec, Option<Construction>)> {
    let (spec, c) = family(cfg)?;
    let FamilySpec::IntervalUnion { levels } = &spec else {
        return Err(config_err("expected an interval family"));
    };
    let eps = match &c {
        Some(Construction { log, .. }) => match &log.recipe {
            Recipe::BesicovitchIntervals(r) => r.params.epsilon,
            _ => 0.1,
        },
        None => 0.1,
    };
    Ok((levels.clone(), eps, spec, c))
}

fn oscillation(out: &Artifacts) -> CliResult<()> {
    let (ts, eps, spec, c) = intervals(out.cfg)?;
    let mut points: Vec<(u64, String, Option<usize>)> = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        points.push((t, "lower".into(), Some(i + 1)));
        points.push((2 * t, "upper".into(), Some(i + 1)));
    }
    for &n in out.cfg.grid.iter().flatten() {
        points.push((n, "grid".into(), None));
    }
    let mut rows = Rows::new();
    let mut upper_max: Option<BigRational> = None;
    let mut lower_min: Option<BigRational> = None;
    let mut all_upper_half = true;
    let mut all_lower_dip = true;
    let two_eps = 2.0 * eps;
    let mut extremes: Option<(BigRational, BigRational)> = None;
    for (n, role, level) in &points {
        let count = count_multiples(&spec, *n)?;
        let r = ratio(count, *n);
        extremes = Some(match extremes {
            None => (r.clone(), r.clone()),
            Some((lo, hi)) => (lo.min(r.clone()), hi.max(r.clone())),
        });
        match role.as_str() {
            "upper" => {
                all_upper_half &= r >= ratio(1, 2);
                upper_max = Some(upper_max.map_or(r.clone(), |m| m.max(r.clone())));
            }
            "lower" if level.unwrap_or(0) >= 2 => {
                all_lower_dip &= ratio_to_f64(&r) <= two_eps;
                lower_min = Some(lower_min.map_or(r.clone(), |m| m.min(r.clone())));
            }
            _ => {}
        }
        let [num, den, float] = rat_cells(&r);
        rows.push(vec![
            n.to_string(),
            role.clone(),
            level.map(|l| l.to_string()).unwrap_or_default(),
            count.to_string(),
            num,
            den,
            float,
        ]);
    }
    out.csv(&["N", "role", "level", "count", "value_num", "value_den", "value_float"], &rows)?;
    out.json(json!({
        "levels": ts,
        "epsilon": eps,
        "min_checkpoint": extremes.as_ref().map(|e| ratio_to_f64(&e.0)),
        "max_checkpoint": extremes.as_ref().map(|e| ratio_to_f64(&e.1)),
        "max_upper": upper_max.as_ref().map(ratio_to_f64),
        "min_lower_beyond_first": lower_min.as_ref().map(ratio_to_f64),
        "upper_at_least_half": all_upper_half,
        "lower_at_most_two_epsilon": all_lower_dip,
        "construction": construction_summary(&c),
    }))
}

fn difference_density(out: &Artifacts) -> CliResult<()> {
    let (ts, _, e, c) = intervals(out.cfg)?;
    let w = build_difference_witness(&e)?;
    let Recipe::DifferenceWitness(r) = &w.log.recipe else { unreachable!("witness builder emits witness recipes") };
    let eps0 = r.epsilon0()?;
    let half = &eps0 / BigRational::from_integer(2.into());
    let mut points: Vec<(u64, &str)> = r.levels.iter().map(|l| (l.checkpoint, "witness")).collect();
    points.extend(out.cfg.grid.iter().flatten().map(|&n| (n, "grid")));
    let mut rows = Rows::new();
    let mut floor_ok = true;
    let mut positive = true;
    for (n, role) in points {
        let d = count_difference(&e, &w.spec, n)?;
        let q = ratio(d, n);
        if role == "witness" {
            floor_ok &= q >= half;
            positive &= d > 0;
        }
        let [num, den, float] = rat_cells(&q);
        rows.push(vec![n.to_string(), role.into(), d.to_string(), num, den, float]);
    }
    out.csv(&["N", "role", "difference", "ratio_num", "ratio_den", "ratio_float"], &rows)?;
    out.json(json!({
        "levels": ts,
        "epsilon0": eps0.to_string(),
        "epsilon0_float": ratio_to_f64(&eps0),
        "witness_checkpoints": r.levels.len(),
        "all_positive": positive,
        "at_least_half_epsilon0": floor_ok,
        "scales_construction": construction_summary(&c),
        "witness_construction": construction_summary(&Some(w.clone())),
    }))
}

fn criterion(out: &Artifacts) -> CliResult<()> {
    let (spec, c) = family(out.cfg)?;
    let grid = out.cfg.grid.clone().expect("validated");
    let eps = out.cfg.epsilon_grid.clone().expect("validated");
    let r = criterion_scan(&spec, &grid, &eps, out.cfg.threshold.unwrap_or(DEFAULT_TREND_THRESHOLD))?;
    let file = out.cfg.outputs.csv.clone().unwrap_or_else(|| "criterion-scan.csv".into());
    write_file(&out.sink.dir_or_cwd().join(&file), |w| Ok(r.write_csv(w)?))?;
    let script = out.cfg.outputs.plot_script.clone().unwrap_or_else(|| "plot_criterion-scan.py".into());
    write_file(&out.sink.dir_or_cwd().join(script), |w| Ok(w.write_all(plot_stub(&file).as_bytes())?))?;
    let mut summary = r.summary_json();
    summary["construction"] = construction_summary(&c);
    out.json(summary)
}

fn random_sets(t: &ToeplitzConfig, seed: u64, count: usize) -> Vec<FiniteSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let size = rng.gen_range(1..=t.max_size);
        let mut v: Vec<u64> = (0..size).map(|_| rng.gen_range(2..=t.max_element.max(2))).collect();
        v.sort_unstable();
        v.dedup();
        let l = v.iter().try_fold(1u64, |acc, &x| {
            let l = acc.lcm(&x);
            (l <= t.lcm_cap).then_some(l)
        });
        if l.is_some() {
            out.push(FiniteSet::new(v).expect("elements are positive"));
        }
    }
    out
}

fn toeplitz(out: &Artifacts) -> CliResult<()> {
    let t = out.cfg.toeplitz.as_ref().expect("validated");
    let specs: Vec<FamilySpec> = match t.random_sets {
        Some(k) => random_sets(t, out.cfg.seed, k).into_iter().map(FamilySpec::from).collect(),
        None => vec![family(out.cfg)?.0],
    };
    let mut rows = Rows::new();
    let mut sets = Vec::new();
    for (id, spec) in specs.iter().enumerate() {
        let lcm = spec
            .finite_max()
            .filter(|_| spec.is_finite())
            .map(|m| spec.materialize(m).map(|b| b.iter().fold(1u64, |a, x| a.lcm(&x))))
            .transpose()?;
        let s_max = t.s_max.or(lcm).ok_or_else(|| config_err("s_max is required for infinite families"))?;
        let window = t.window.unwrap_or_else(|| (4 * s_max).max(s_max * s_max / 2 + s_max));
        let (lo, hi) = (t.positions[0].max(-(window as i64)), t.positions[1].min(window as i64 + 1));
        let r = toeplitz_scan(spec, lo, hi, s_max, window)?;
        let mut divides = true;
        for &(n, s) in &r.resolved {
            let d = lcm.map(|l| l % s == 0);
            divides &= d.unwrap_or(true);
            rows.push(vec![
                id.to_string(),
                n.to_string(),
                s.to_string(),
                lcm.map(|l| l.to_string()).unwrap_or_default(),
                d.map(|d| d.to_string()).unwrap_or_default(),
            ]);
        }
        for &n in &r.defects {
            rows.push(vec![id.to_string(), n.to_string(), "defect".into(), String::new(), String::new()]);
        }
        sets.push(json!({
            "id": id,
            "family": serde_json::to_value(spec).expect("specs serialize"),
            "lcm": lcm,
            "s_max": s_max,
            "window": window,
            "resolved": r.resolved.len(),
            "defects": r.defects,
            "periods_divide_lcm": divides,
        }));
    }
    out.csv(&["set", "n", "s_n", "lcm", "divides_lcm"], &rows)?;
    out.json(json!({
        "sets": sets,
        "note": "necessary-condition evidence on a finite window; not a proof that eta is Toeplitz",
    }))
}

/// One evidence row of the triples table.
struct TripleRow {
    name: String,
    triple: &'static str,
    /// (role, family) for ℬ and the stand-ins for ℬ′ and ℬ*; `None` marks a
    /// set that is only known to exist.
    sets: [Option<FamilySpec>; 3],
    levels: Vec<u64>,
    checks: (usize, Vec<String>),
    notes: Vec<String>,
}

fn twice_prime_squares() -> FamilySpec {
    FamilySpec::Loosening {
        scales: vec![2],
        patterns: vec![PatternSpec::new(PatternSource::Primes { cutoff: 2 }).with_power(2)],
    }
}

fn with_two(odd: &FiniteSet) -> CliResult<FamilySpec> {
    Ok(FamilySpec::from(odd.union(&FiniteSet::new(vec![2])?)))
}

fn one() -> FamilySpec {
    FamilySpec::explicit(&[1]).expect("1 is positive")
}

fn checks_of(c: &Construction) -> (usize, Vec<String>) {
    (c.log.checks.len(), c.log.failed().map(|ch| check_label(&ch.name, ch.level)).collect())
}

fn example_row(name: ExampleName, params: &UnionParams) -> CliResult<TripleRow> {
    let c = build_union_example(name, params)?;
    let Recipe::UnionExample(r) = &c.log.recipe else { unreachable!("union builder emits union recipes") };
    let parts = match &c.spec {
        FamilySpec::Union { parts } => parts.clone(),
        _ => unreachable!("union examples are unions"),
    };
    let two = || FamilySpec::explicit(&[2]).expect("2 is positive");
    let odd = || r.odd_part.clone().ok_or_else(|| config_err("missing odd part"));
    let sets = match name {
        ExampleName::Ex41 => [Some(c.spec.clone()), Some(FamilySpec::union(vec![parts[0].clone(), two()])), Some(one())],
        ExampleName::Ex1 => [Some(c.spec.clone()), Some(FamilySpec::union(vec![two(), parts[1].clone()])), Some(one())],
        ExampleName::Ex2 => [None, Some(c.spec.clone()), Some(with_two(&odd()?)?)],
        ExampleName::Ex110 => {
            let scales = r.loosening.as_ref().map(|l| l.scales.clone()).ok_or_else(|| config_err("missing loosening"))?;
            [Some(c.spec.clone()), Some(FamilySpec::union(vec![parts[0].clone(), two()])), Some(with_two(&scales)?)]
        }
        ExampleName::Ex000 => [
            Some(c.spec.clone()),
            Some(FamilySpec::union(vec![FamilySpec::from(odd()?), twice_prime_squares()])),
            Some(with_two(&odd()?)?),
        ],
    };
    Ok(TripleRow {
        name: name.as_str().into(),
        triple: name.triple(),
        sets,
        levels: r.interval_levels.clone(),
        checks: checks_of(&c),
        notes: c.log.notes.clone(),
    })
}

fn interval_build(params: &UnionParams) -> CliResult<Construction> {
    let p = IntervalParams::new(params.epsilon.unwrap_or(0.1), params.levels, params.n_est)
        .with_mode(BuildMode::BestEffort);
    Ok(build_besicovitch_intervals(&p)?)
}

fn intervals_row(params: &UnionParams) -> CliResult<TripleRow> {
    let c = interval_build(params)?;
    let FamilySpec::IntervalUnion { levels } = &c.spec else { unreachable!("interval builder emits intervals") };
    Ok(TripleRow {
        name: "intervals".into(),
        triple: "",
        sets: [Some(c.spec.clone()), None, None],
        levels: levels.clone(),
        checks: checks_of(&c),
        notes: c.log.notes.clone(),
    })
}

/// ℬ is the difference witness over the interval family ℰ, whose
/// tautification ℰ is standing in for; ℬ* = {1}.
fn ex101_row(params: &UnionParams) -> CliResult<TripleRow> {
    let e = interval_build(params)?;
    let w = build_difference_witness(&e.spec)?;
    let FamilySpec::IntervalUnion { levels } = &e.spec else { unreachable!("interval builder emits intervals") };
    let mut notes = w.log.notes.clone();
    notes.push("the interval family stands in for its own tautification".into());
    Ok(TripleRow {
        name: "ex_101".into(),
        triple: "101",
        sets: [Some(w.spec.clone()), Some(e.spec.clone()), Some(one())],
        levels: levels.clone(),
        checks: checks_of(&w),
        notes,
    })
}

fn triples(out: &Artifacts) -> CliResult<()> {
    let params = out.cfg.example_params.clone().unwrap_or_default();
    let names: Vec<String> = match &out.cfg.examples {
        Some(v) => v.clone(),
        None => ExampleName::ALL
            .iter()
            .map(|n| n.as_str().to_string())
            .chain(["ex_101".to_string(), "intervals".to_string()])
            .collect(),
    };
    let extra: Vec<u64> = out.cfg.grid.clone().unwrap_or_else(|| (0..10).map(|i| 1000 << i).collect());
    let burn_in = out.cfg.burn_in.unwrap_or(10);
    let mut rows = Rows::new();
    let mut docs = Vec::new();
    for name in &names {
        let row = match name.parse::<ExampleName>() {
            Ok(n) => example_row(n, &params),
            Err(_) if name == "ex_101" => ex101_row(&params),
            Err(_) => intervals_row(&params),
        };
        let row = row.and_then(|r| {
            let mut cps = extra.clone();
            cps.extend(r.levels.iter().flat_map(|&t| [t, 2 * t]));
            let mut spreads = Vec::new();
            for s in &r.sets {
                spreads.push(match s {
                    Some(spec) => {
                        let p = upper_lower_proxies(spec, &cps, burn_in)?;
                        Some((p.min_f64(), p.max_f64(), p.spread()))
                    }
                    None => None,
                });
            }
            Ok((r, spreads))
        });
        match row {
            Ok((r, spreads)) => {
                let cell = |i: usize| spreads[i].map(|s| format!("{:.6}", s.2)).unwrap_or_else(|| "n/a".into());
                let (lo, hi) = spreads[0].map(|s| (format!("{:.6}", s.0), format!("{:.6}", s.1))).unwrap_or_default();
                rows.push(vec![
                    r.name.clone(),
                    r.triple.into(),
                    cell(0),
                    lo,
                    hi,
                    cell(1),
                    cell(2),
                    format!("{}/{}", r.checks.0 - r.checks.1.len(), r.checks.0),
                    "ok".into(),
                ]);
                docs.push(json!({
                    "row": r.name,
                    "triple": r.triple,
                    "levels": r.levels,
                    "spreads": spreads.iter().map(|s| s.map(|s| json!({ "min": s.0, "max": s.1, "spread": s.2 }))).collect::<Vec<_>>(),
                    "families": r.sets.iter().map(|s| s.as_ref().map(|f| serde_json::to_value(f).expect("specs serialize"))).collect::<Vec<_>>(),
                    "failed_checks": r.checks.1,
                    "notes": r.notes,
                }));
            }
            Err(e) => {
                rows.push(vec![name.clone(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), format!("error (exit class {}): {e}", e.exit_code())]);
                docs.push(json!({ "row": name, "error": e.to_string() }));
            }
        }
    }
    out.csv(
        &["row", "triple", "b_spread", "b_min", "b_max", "b_prime_spread", "b_star_spread", "checks_passed", "status"],
        &rows,
    )?;
    out.json(json!({
        "rows": docs,
        "burn_in": burn_in,
        "note": "spreads are max minus min of finite density proxies; they never decide Besicovitch-ness. Columns after b are stand-ins for the tautification and the minimisation",
    }))
}
