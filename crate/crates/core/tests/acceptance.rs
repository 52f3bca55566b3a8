//! Acceptance gate: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::time::{Duration, Instant};

use multiples::constructions::{
    build_besicovitch_intervals, build_difference_witness, build_loosening, build_thin_blocks, uniform_loosening,
    BuildMode, IntervalParams, LooseningPlan, Recipe, ThinPolicy,
};
use multiples::criterion::{besicovitch_statistic, mertens_drift, residue_partition};
use multiples::density::{
    davenport_erdos_series, exact_density_finite, exact_density_period, natural_partial, ratio, SeriesOptions,
};
use multiples::family::{Block, FamilySpec, PatternSource, PatternSpec};
use multiples::sieve::{count_difference, count_multiples, sieve_multiples};
use multiples::structure::{pattern_occurs, toeplitz_scan};
use multiples::{is_primitive, FiniteSet};
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn sieve_primes(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn lcm_of(b: &[u64]) -> u64 {
    b.iter().fold(1u64, |acc, &x| acc.lcm(&x))
}

fn random_set(rng: &mut ChaCha8Rng, max_len: usize, max_elem: u64) -> Vec<u64> {
    let len = rng.gen_range(1..=max_len);
    let mut v: Vec<u64> = (0..len).map(|_| rng.gen_range(1..=max_elem)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// m > x^(1 − p/q), decided as m^q > x^(q − p).
fn above_power(m: u64, x: u64, p: u32, q: u32) -> bool {
    BigUint::from(m).pow(q) > BigUint::from(x).pow(q - p)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..200 {
        let b = random_set(&mut rng, 12, 100);
        let n = rng.gen_range(1..=10_000u64);
        let got = count_multiples(&FamilySpec::explicit(&b).map_err(e)?, n).map_err(e)?;
        let want = (1..=n).filter(|m| b.iter().any(|d| m % d == 0)).count() as u64;
        ensure(got == want, || format!("trial {trial}: B = {b:?}, N = {n}: {got} != {want}"))?;
    }
    Ok("200 random (B, N) match brute force".into())
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    let mut largest = 0;
    while done < 100 {
        let b = random_set(&mut rng, 10, 200);
        let l = lcm_of(&b);
        if l > 1_000_000 {
            continue;
        }
        let set = FiniteSet::new(b.clone()).map_err(e)?;
        let ie = exact_density_finite(&set).map_err(e)?;
        let per = exact_density_period(&set, 1_000_000).map_err(e)?;
        ensure(ie == per, || format!("B = {b:?}: {ie} != {per}"))?;
        largest = largest.max(l);
        done += 1;
    }
    Ok(format!("100 random B agree exactly (largest lcm {largest})"))
}

fn criterion_3() -> Outcome {
    let squares: Vec<u64> = sieve_primes(1000).into_iter().map(|p| p * p).collect();
    let spec = FamilySpec::explicit(&squares).map_err(e)?;
    let m = natural_partial(&spec, 10_000_000).map_err(e)?.to_f64();
    let free = 1.0 - m;
    let target = 6.0 / std::f64::consts::PI.powi(2);
    let diff = (free - target).abs();
    ensure(diff <= 2e-3, || format!("d(F) = {free:.6}, 6/pi^2 = {target:.6}, |diff| = {diff:.2e}"))?;
    Ok(format!("d(F) at 1e7 = {free:.6}, |diff| = {diff:.2e} <= 2e-3"))
}

fn exact_values(spec: &FamilySpec, grid: &[u64]) -> Result<Vec<Option<BigRational>>, String> {
    let s = davenport_erdos_series(spec, grid, &SeriesOptions::default()).map_err(e)?;
    Ok(s.values.iter().map(|v| if v.is_exact_periodic() { v.exact().cloned() } else { None }).collect())
}

fn nondecreasing(values: &[Option<BigRational>]) -> bool {
    let exact: Vec<&BigRational> = values.iter().flatten().collect();
    exact.windows(2).all(|w| w[0] <= w[1])
}

fn criterion_4() -> Outcome {
    let grid = [2, 4, 9, 25, 49, 100, 1000, 10_000];
    let sq = exact_values(&FamilySpec::prime_powers(2), &grid).map_err(e)?;
    ensure(nondecreasing(&sq), || "squares of primes: exact checkpoints decrease".into())?;
    let want = [(1, ratio(1, 4)), (2, ratio(1, 3)), (3, ratio(9, 25))];
    for (i, w) in want {
        ensure(sq[i].as_ref() == Some(&w), || format!("K = {}: got {:?}, want {w}", grid[i], sq[i]))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..5 {
        let b = random_set(&mut rng, 12, 300);
        let spec = FamilySpec::explicit(&b).map_err(e)?;
        let g: Vec<u64> = (1..=30).map(|k| k * 10).collect();
        let v = exact_values(&spec, &g)?;
        let exact = v.iter().flatten().count();
        ensure(exact >= 2, || format!("random spec {trial}: only {exact} exact checkpoints"))?;
        ensure(nondecreasing(&v), || format!("random spec {trial}: B = {b:?} decreases"))?;
    }
    Ok("nondecreasing on squares of primes and 5 random specs; 1/4, 1/3, 9/25 exact".into())
}

fn criterion_5() -> Outcome {
    let params = IntervalParams::new(0.1, 3, 10_000_000);
    let c = match build_besicovitch_intervals(&params) {
        Ok(c) => c,
        Err(err) => {
            let best = build_besicovitch_intervals(&params.clone().with_mode(BuildMode::BestEffort));
            let extra = match best {
                Ok(b) => {
                    let Recipe::BesicovitchIntervals(r) = &b.log.recipe else { unreachable!() };
                    let dips: Vec<String> = b
                        .log
                        .check("lower_dip")
                        .map(|c| c.detail.clone())
                        .collect();
                    format!(
                        "; best effort T = {:?}, d_hat = {:?}, lower dips [{}]",
                        r.ts(),
                        r.levels.iter().map(|l| format!("{:.3}", l.d_hat)).collect::<Vec<_>>(),
                        dips.join("; ")
                    )
                }
                Err(b) => format!("; best effort also failed: {b}"),
            };
            return Err(format!("strict build failed: {err}{extra}"));
        }
    };
    let Recipe::BesicovitchIntervals(r) = &c.log.recipe else { unreachable!() };
    for (k, t) in r.ts().into_iter().enumerate() {
        let up = count_multiples(&c.spec, 2 * t).map_err(e)?;
        ensure(2 * up >= 2 * t, || format!("level {}: count(2T)/2T = {up}/{}", k + 1, 2 * t))?;
        if k >= 1 {
            let low = count_multiples(&c.spec, t).map_err(e)?;
            ensure(5 * low <= t, || format!("level {}: count(T)/T = {low}/{t} > 0.2", k + 1))?;
        }
    }
    Ok(format!("T = {:?}", r.ts()))
}

fn criterion_6() -> Outcome {
    let params = IntervalParams::new(0.1, 3, 10_000_000).with_mode(BuildMode::BestEffort);
    let intervals = build_besicovitch_intervals(&params).map_err(e)?;
    let ts = match &intervals.spec {
        FamilySpec::IntervalUnion { levels } => levels.clone(),
        _ => unreachable!(),
    };
    let c = build_difference_witness(&intervals.spec).map_err(e)?;
    let Recipe::DifferenceWitness(r) = &c.log.recipe else { unreachable!() };
    let eps0 = r.epsilon0().map_err(e)?;
    ensure(r.levels.len() >= 3, || format!("only {} witness checkpoints", r.levels.len()))?;
    let mut ratios = Vec::new();
    for l in &r.levels {
        let n = l.checkpoint;
        let d = count_difference(&intervals.spec, &c.spec, n).map_err(e)?;
        ensure(d > 0, || format!("difference vanishes at {n}"))?;
        let lhs = ratio(d, n);
        ensure(lhs >= &eps0 / BigRational::from_integer(2.into()), || {
            format!("at N = {n}: {d}/{n} below epsilon0/2 = {}", &eps0 / BigRational::from_integer(2.into()))
        })?;
        ratios.push(format!("{:.3}", d as f64 / n as f64));
    }
    Ok(format!(
        "T = {ts:?}, epsilon0 = {:.4}, difference ratios {ratios:?} at {} checkpoints",
        multiples::density::ratio_to_f64(&eps0),
        r.levels.len()
    ))
}

fn criterion_7() -> Outcome {
    let c = build_thin_blocks(&ThinPolicy::default(), 4, 0.5).map_err(e)?;
    let FamilySpec::ThinBlocks { schedule } = &c.spec else { unreachable!() };
    ensure(schedule.len() == 4, || "expected 4 levels".into())?;
    let sum: BigRational = schedule
        .iter()
        .map(|b| ratio(b.len, b.t))
        .fold(BigRational::from_integer(0.into()), |a, b| a + b);
    ensure(sum <= ratio(1, 2), || format!("sum T_i/t_i = {sum} > 1/2"))?;
    let beta = BigRational::from_integer(1.into()) - &sum;
    let end = schedule.last().map(Block::end).unwrap();
    let e_set = c.spec.materialize(end).map_err(e)?;
    ensure(is_primitive(&e_set).primitive, || "emitted E is not primitive".into())?;
    // Independent primitivity oracle: no element has a proper divisor in E.
    for x in e_set.iter() {
        let mut d = 2;
        while d * d <= x {
            if x % d == 0 && (e_set.contains(d) || e_set.contains(x / d)) {
                return Err(format!("{x} has a divisor in E"));
            }
            d += 1;
        }
    }
    for (i, b) in schedule.iter().enumerate() {
        let n = e_set.iter().filter(|&x| x >= b.t && x <= b.end()).count() as u64;
        ensure(ratio(n, 1) >= &beta * ratio(b.len, 1), || format!("level {}: |E_i| = {n} < beta T_i", i + 1))?;
    }
    let cutoff = end + 1;
    let b_spec = uniform_loosening(&e_set, PatternSpec::new(PatternSource::Primes { cutoff }));
    let hit = sieve_multiples(&b_spec.materialize(end).map_err(e)?, 1, end + 1).map_err(e)?;
    ensure(e_set.iter().all(|x| !hit.get(x)), || "E meets M_B".into())?;
    let mut cumulative = 0u64;
    for b in schedule {
        cumulative += e_set.iter().filter(|&x| x >= b.t && x <= b.end()).count() as u64;
        let d = count_difference(&c.spec, &b_spec, b.end()).map_err(e)?;
        ensure(d >= cumulative, || format!("count_difference at {} = {d} < {cumulative}", b.end()))?;
    }
    Ok(format!(
        "blocks {:?}, sum T/t = {:.4}, |E| = {}",
        schedule.iter().map(|b| (b.t, b.len)).collect::<Vec<_>>(),
        multiples::density::ratio_to_f64(&sum),
        e_set.len()
    ))
}

fn brute_statistic(b: &[u64], x: u64, p: u32, q: u32) -> u64 {
    let mut total = 0;
    for &a in b.iter().filter(|&&a| a <= x && above_power(a, x, p, q)) {
        let smaller: Vec<u64> = b.iter().copied().filter(|&c| c < a).collect();
        total += (1..=x / a).map(|j| j * a).filter(|n| smaller.iter().all(|c| n % c != 0)).count() as u64;
    }
    total
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fractions = [(1u32, 4u32), (1, 3), (1, 2), (3, 4)];
    let mut compared = 0;
    for trial in 0..60 {
        let b = random_set(&mut rng, 10, 400);
        let spec = FamilySpec::explicit(&b).map_err(e)?;
        let (p, q) = fractions[trial % fractions.len()];
        let eps = p as f64 / q as f64;
        let x = rng.gen_range(2..=5000u64);
        let s = besicovitch_statistic(&spec, x, eps).map_err(e)?;
        let want = brute_statistic(&b, x, p, q);
        ensure(s.count == want, || format!("B = {b:?}, x = {x}, eps = {eps}: {} != {want}", s.count))?;
        compared += 1;
        // Past the point where x^(1-eps) exceeds max(B), nothing is counted.
        let max = *b.last().unwrap();
        let mut far = x;
        while above_power(max, far, p, q) {
            far *= 2;
        }
        let z = besicovitch_statistic(&spec, far, eps).map_err(e)?;
        ensure(z.count == 0 && z.value == 0.0, || format!("B = {b:?}: S({far}, {eps}) = {}", z.value))?;
    }
    Ok(format!("{compared} brute-force comparisons exact; statistic vanishes beyond max(B)"))
}

fn criterion_9() -> Outcome {
    let mut details = Vec::new();
    for (k, l) in [(4u64, 3u64), (8, 5)] {
        let d6 = mertens_drift(k, l, 1_000_000).map_err(e)?;
        let d7 = mertens_drift(k, l, 10_000_000).map_err(e)?;
        let drift = (d7 - d6).abs();
        ensure(drift <= 0.01, || format!("({k},{l}): |D(1e7) - D(1e6)| = {drift:.5}"))?;
        details.push(format!("({k},{l}) drift {drift:.2e}"));
        let part = residue_partition(k, 1_000_000).map_err(e)?;
        let counted: u64 = part.classes.iter().map(|c| c.1).sum::<u64>() + part.divisors_of_k.len() as u64;
        ensure(counted == part.total_count && part.total_count == 78_498, || {
            format!("k = {k}: partition counts {counted} vs {}", part.total_count)
        })?;
        let summed: f64 = part.classes.iter().map(|c| c.2).sum::<f64>()
            + part.divisors_of_k.iter().map(|&p| 1.0 / p as f64).sum::<f64>();
        ensure((summed - part.total_sum).abs() < 1e-12, || format!("k = {k}: partition sums differ"))?;
    }
    Ok(details.join(", "))
}

fn criterion_10() -> Outcome {
    let n_cal = 1_000_000;
    let scales = FiniteSet::new(vec![3, 5]).map_err(e)?;
    let c = build_loosening(&scales, &LooseningPlan::default(), n_cal).map_err(e)?;
    let Recipe::Loosening(r) = &c.log.recipe else { unreachable!() };
    for bound in [10_000, 100_000, n_cal] {
        let t = c.spec.materialize(bound).map_err(e)?;
        ensure(is_primitive(&t).primitive, || format!("truncation at {bound} is not primitive"))?;
        if bound == n_cal {
            for x in t.iter() {
                let mut d = 2;
                while d * d <= x {
                    if x % d == 0 && (t.contains(d) || t.contains(x / d)) {
                        return Err(format!("{x} has a divisor in B"));
                    }
                    d += 1;
                }
            }
        }
    }
    let primes = sieve_primes(n_cal);
    let mut worst = Vec::new();
    for l in &r.levels {
        let i = l.level;
        let (m, a) = (1u64 << (i + 1), (1u64 << i) + 1);
        let q = 1u32 << i;
        let tail: Vec<u64> = primes.iter().copied().filter(|&p| p % m == a && p >= l.cutoff).collect();
        let bound = 1.0 / 4f64.powi(i as i32 - 1);
        let mut max_g = 0.0f64;
        for &(x, _) in l.samples.iter().filter(|s| s.0 >= l.x_hat) {
            // p ∈ (x^(1-1/2^i)/e, x/e]  ⇔  (p e)^q > x^(q-1) and p e ≤ x.
            let g: f64 = tail
                .iter()
                .filter(|&&p| p * l.scale <= x && above_power(p * l.scale, x, 1, q))
                .map(|&p| 1.0 / p as f64)
                .sum();
            max_g = max_g.max(g);
            ensure(g <= bound, || format!("level {i}: g({x}) = {g:.5} > {bound}"))?;
        }
        worst.push(format!("level {i}: K = {}, max g = {max_g:.4} <= {bound}", l.cutoff));
    }
    Ok(worst.join("; "))
}

fn min_period(eta: &[bool], l: u64, n: i64) -> u64 {
    let at = |m: i64| eta[m.rem_euclid(l as i64) as usize];
    (1..=l).find(|&s| (0..l as i64).all(|j| at(n + j * s as i64) == at(n))).unwrap()
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut sets = 0;
    let mut positions = 0;
    while sets < 20 {
        let b = random_set(&mut rng, 4, 100);
        let l = lcm_of(&b);
        if l > 10_000 {
            continue;
        }
        let spec = FamilySpec::explicit(&b).map_err(e)?;
        let window = (4 * l).max(l * l / 2 + l);
        let r = 25.min(window as i64);
        let report = toeplitz_scan(&spec, -r, r + 1, l, window).map_err(e)?;
        ensure(report.defects.is_empty(), || format!("B = {b:?}: defects {:?}", report.defects))?;
        let eta: Vec<bool> = (0..l).map(|m| !b.iter().any(|d| m % d == 0)).collect();
        for &(n, s) in &report.resolved {
            ensure(l % s == 0, || format!("B = {b:?}: s_{n} = {s} does not divide {l}"))?;
            let want = min_period(&eta, l, n);
            ensure(s == want, || format!("B = {b:?}: s_{n} = {s}, oracle {want}"))?;
            positions += 1;
        }
        sets += 1;
    }
    let host = FamilySpec::IntervalUnion { levels: vec![10, 100, 1000] };
    let t1 = 10;
    let star = FamilySpec::explicit(&[1]).map_err(e)?;
    let k = pattern_occurs(&star, &host, t1 - 1, 10_000).map_err(e)?;
    let k = k.ok_or_else(|| "all-ones pattern of length T_1 not found".to_string())?;
    let m = host.materialize(k + t1).map_err(e)?;
    let window_ok = (k..k + t1).all(|x| x == 0 || b_divides(&m, x));
    ensure(window_ok, || format!("offset {k} does not give a run of multiples"))?;
    Ok(format!("{sets} sets, {positions} positions resolved with s_n | lcm; all-ones run of length {t1} at k = {k}"))
}

fn b_divides(b: &FiniteSet, x: u64) -> bool {
    b.iter().any(|d| x % d == 0)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 11] = [
        ("sieve matches brute force", criterion_1, 10),
        ("exact densities agree", criterion_2, 60),
        ("squarefree benchmark", criterion_3, 60),
        ("Davenport-Erdos monotonicity", criterion_4, 30),
        ("Besicovitch oscillation", criterion_5, 300),
        ("difference density", criterion_6, 300),
        ("thin blocks", criterion_7, 60),
        ("criterion sanity", criterion_8, 30),
        ("Mertens progression drift", criterion_9, 120),
        ("loosening audit", criterion_10, 120),
        ("Toeplitz scanner", criterion_11, 60),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > Duration::from_secs(limit) => Err(format!("{msg}; took {took:.1?} > {limit}s")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS [{took:.1?}] {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{took:.1?}] {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
