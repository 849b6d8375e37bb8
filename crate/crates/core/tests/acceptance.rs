//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ddp::curvature::{detect_chains, PdiRecord};
use ddp::lengthscale::{diagonal_root, enumerate_roots};
use ddp::normalization::normalize_burst;
use ddp::ranking::{borda_counts, objective_ranks};
use ddp::report::percent_change;
use ddp::zoomout::{critical_chain_lengths, gti, line_polyline_intersections, CriticalLengths, ZoomLevel, ZoomProfile};
use ddp::{
    analyze_dataset, analyze_dataset_sequential, synthesize, AnalyzeOptions, CorpusShape, DataBurst, Dataset,
    PipelineConfig, Profile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const ORACLE_REL_TOL: f64 = 1e-10;

fn random_burst(rng: &mut ChaCha8Rng, points: usize, dims: usize) -> DataBurst {
    let rows = (0..points)
        .map(|_| (0..dims).map(|_| rng.random_range(0.2..2.0)).collect())
        .collect();
    DataBurst::from_rows(rows, 1.0, 0, "acc")
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= ORACLE_REL_TOL * scale.max(a.abs()).max(b.abs()).max(f64::MIN_POSITIVE)
}

fn root_count_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dims in 1..=4usize {
        let config = PipelineConfig {
            dims,
            ..Default::default()
        };
        for i in 0..1000 {
            let ranks: Vec<f64> = (0..dims).map(|_| rng.random_range(1.0..=81.0)).collect();
            let dh: Vec<f64> = (0..dims)
                .map(|_| match i % 10 {
                    0 => 0.0,
                    1 => 1e-14,
                    _ => rng.random_range(-5.0..5.0),
                })
                .collect();
            let n = enumerate_roots(&ranks, &dh, &config).len();
            if n != 1 << dims {
                return Err(format!("D={dims}: {n} roots"));
            }
        }
    }
    Ok("2/4/8/16 roots for D=1..4 over 1000 points each".into())
}

fn borda_zero_sum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=81);
        let field = normalize_burst(&random_burst(&mut rng, n, 4), 1e-9);
        for h in borda_counts(&field) {
            worst = worst.max(h.iter().sum::<f64>().abs());
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max |sum H| = {worst:.3e}"))
    } else {
        Err(format!("max |sum H| = {worst:.3e}"))
    }
}

fn antisymmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairs = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(2..=81);
        let field = normalize_burst(&random_burst(&mut rng, n, 4), 1e-9);
        for d in 0..4 {
            for a in 0..n {
                for b in 0..n {
                    if field.margin(d, a, b) + field.margin(d, b, a) != 0.0 {
                        return Err(format!("a[{a}][{b}] + a[{b}][{a}] != 0 in dimension {d}"));
                    }
                    pairs += 1;
                }
            }
        }
    }
    Ok(format!("{pairs} ordered pairs exact"))
}

fn null_signal() -> Outcome {
    let config = PipelineConfig::default();
    let mut dataset = Dataset::default();
    for burst in 0..5u64 {
        let rows = vec![vec![1.0, 0.5, 2.0, 0.75]; config.burst_len];
        dataset.bursts.push(DataBurst::from_rows(rows, 1.0, burst, "flat"));
    }
    let analysis =
        analyze_dataset(&dataset, &config, AnalyzeOptions { keep_levels: true }).map_err(|e| e.to_string())?;
    let subject = &analysis.subjects[0];
    for (frame, levels) in subject.frames.iter().zip(&subject.levels) {
        for level in levels {
            if level.delta.dh.iter().flatten().any(|v| *v != 0.0) {
                return Err(format!("non-zero dH at level {}", level.points));
            }
            if level.kappa.iter().flatten().flatten().any(|v| *v != 0.0) {
                return Err(format!("non-zero curvature at level {}", level.points));
            }
        }
        if frame.rc.rc_combined != Some(0.0) || frame.rc.rc_dim.iter().any(|v| *v != Some(0.0)) {
            return Err(format!("residual curvature {:?}", frame.rc.rc_dim));
        }
        if frame.categories.iter().any(|c| *c != 1) {
            return Err("point category other than 1".into());
        }
        if frame.gti.triggered {
            return Err("GTI triggered".into());
        }
    }
    Ok(format!("{} frame pairs, all zero", subject.frames.len()))
}

fn aggregation_ladder() -> Outcome {
    let config = PipelineConfig::default();
    let ladder = config.level_sizes();
    if ladder != Some(vec![81, 27, 9]) {
        return Err(format!("config ladder {ladder:?}"));
    }
    let data = synthesize(
        Profile::Stable,
        &config,
        CorpusShape {
            subjects: 1,
            bursts_per_subject: 2,
        },
    )
    .map_err(|e| e.to_string())?;
    let analysis = analyze_dataset(&data, &config, AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = analysis.subjects[0].frames[0]
        .zoom
        .levels
        .iter()
        .map(|l| l.point_count)
        .collect();
    if counts == [81, 27, 9] {
        Ok(format!("{counts:?}"))
    } else {
        Err(format!("pipeline levels {counts:?}"))
    }
}

fn gti_table() -> Outcome {
    let critical = CriticalLengths { short: 3.0, long: 20.0 };
    let cases = [
        ("rc [2.0, 0.3], chain 5 > 3", [Some(2.0), Some(0.3)], 5usize, true),
        ("drop 0.79, chain 5 > 3", [Some(1.0), Some(0.21)], 5, false),
        ("drop 0.95, chain 2 < 3", [Some(1.0), Some(0.05)], 2, false),
    ];
    for (label, history, chain, expected) in cases {
        let record = gti(&history, chain, critical, true, 0.8);
        if record.triggered != expected {
            return Err(format!("{label}: triggered = {}", record.triggered));
        }
    }
    Ok("triggered / not / not".into())
}

fn detection_smoke() -> Outcome {
    let mut total = 0usize;
    let mut unstable = 0usize;
    for seed in 0..20u64 {
        let config = PipelineConfig {
            seed,
            ..Default::default()
        };
        let burst = synthesize(Profile::Burst, &config, CorpusShape::default()).map_err(|e| e.to_string())?;
        let injection = &burst.injections[0];
        let analysis = analyze_dataset(&burst, &config, AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        let frame = analysis.subjects[0]
            .frames
            .iter()
            .find(|f| f.burst == injection.burst_index)
            .ok_or("no frame ends at the injected burst")?;
        let t = injection.time_index as usize;
        let window = t.saturating_sub(5)..=(t + 5).min(frame.categories.len() - 1);
        if !frame.categories[window].iter().any(|c| *c >= 5) {
            return Err(format!("seed {seed}: nothing flagged near index {t}"));
        }

        let stable = synthesize(Profile::Stable, &config, CorpusShape::default()).map_err(|e| e.to_string())?;
        let analysis = analyze_dataset(&stable, &config, AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        for frame in &analysis.subjects[0].frames {
            total += frame.categories.len();
            unstable += frame.categories.iter().filter(|c| **c >= 5).count();
        }
    }
    let rate = unstable as f64 / total as f64;
    let detail = format!("burst found for 20/20 seeds; stable PDI>=5 rate {:.3}%", rate * 100.0);
    if rate < 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn percent_change_check() -> Outcome {
    let value = percent_change(0.364, 0.480).ok_or("undefined")?;
    let target = 32.05;
    if (value - 31.868).abs() < 1e-3 && (value - target).abs() <= 0.5 {
        Ok(format!("{value:.2}% vs {target}% within 0.5"))
    } else {
        Err(format!("{value}%"))
    }
}

/// Pair constant from the quadratic formula written out directly.
fn oracle_datum(u: &[f64], eps: f64) -> Option<f64> {
    let mut acc = Vec::new();
    for a in 0..u.len() {
        for b in a + 1..u.len() {
            let c = u[a] - u[b];
            let disc = 1.0 - 4.0 * c;
            if disc < 0.0 {
                continue;
            }
            let candidates: Vec<f64> = [0.5 + disc.sqrt() / 2.0, 0.5 - disc.sqrt() / 2.0]
                .into_iter()
                .filter(|s| s.abs() > eps)
                .map(|s| (s - u[a] - u[b]) / 2.0)
                .collect();
            let best = candidates.iter().copied().reduce(|x, y| {
                if y.abs() < x.abs() || (y.abs() == x.abs() && y > x) {
                    y
                } else {
                    x
                }
            });
            acc.extend(best);
        }
    }
    (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
}

fn oracle_ranks(h: &[f64]) -> Vec<f64> {
    let mut sorted = h.to_vec();
    sorted.sort_by(f64::total_cmp);
    h.iter()
        .map(|v| {
            let first = sorted.iter().position(|s| s == v).unwrap();
            let last = sorted.iter().rposition(|s| s == v).unwrap();
            (first + last) as f64 / 2.0 + 1.0
        })
        .collect()
}

/// Roots of `dh x^2 - r = 0`; the modulus of either root.
fn oracle_root_modulus(r: f64, dh: f64) -> f64 {
    let disc = 4.0 * dh * r;
    disc.abs().sqrt() / (2.0 * dh.abs())
}

fn oracle_runs(categories: &[u8]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(bool, usize, usize)> = Vec::new();
    for (i, c) in categories.iter().enumerate() {
        let hot = *c >= 5;
        match runs.last_mut() {
            Some(run) if run.0 == hot => run.2 += 1,
            _ => runs.push((hot, i, 1)),
        }
    }
    runs.into_iter().filter(|r| r.0).map(|r| (r.1, r.2)).collect()
}

fn poly_value(poly: &[(f64, f64)], t: f64) -> f64 {
    let i = poly.windows(2).position(|w| t <= w[1].0).unwrap_or(poly.len() - 2);
    let (p, q) = (poly[i], poly[i + 1]);
    p.1 + (t - p.0) / (q.0 - p.0) * (q.1 - p.1)
}

/// Dense scan for sign changes, each refined by bisection.
fn oracle_crossings(line: (f64, f64), poly: &[(f64, f64)]) -> Vec<f64> {
    let gap = |t: f64| poly_value(poly, t) - (line.0 + line.1 * t);
    let (lo, hi) = (poly[0].0, poly[poly.len() - 1].0);
    let steps = 20_000;
    let mut out = Vec::new();
    let mut prev_t = lo;
    let mut prev_g = gap(lo);
    for i in 1..=steps {
        let t = lo + (hi - lo) * i as f64 / steps as f64;
        let g = gap(t);
        if (prev_g < 0.0) != (g < 0.0) {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (gap(a) < 0.0) != (gap(m) < 0.0) {
                    b = m;
                } else {
                    a = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_g = g;
    }
    out
}

fn record(category: u8) -> PdiRecord {
    PdiRecord {
        category,
        short_unstable: vec![category >= 5],
        long_unstable: vec![category >= 5],
        mode_mixity_controllable: false,
        mixed_short_long: false,
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = 1e-9;
    let mut checks = 0usize;
    for _ in 0..500 {
        let n = rng.random_range(2..=6);
        let burst = random_burst(&mut rng, n, 3);
        let field = normalize_burst(&burst, eps);
        let h = borda_counts(&field);
        for (d, hd) in h.iter().enumerate() {
            let u = burst.column(d);
            let Some(mbar) = oracle_datum(&u, eps) else {
                continue;
            };
            for a in 0..n {
                let terms: Vec<f64> = (0..n)
                    .filter(|b| *b != a)
                    .map(|b| (u[a] - u[b]) / (u[a] + u[b] + 2.0 * mbar))
                    .collect();
                let expect: f64 = terms.iter().sum();
                let scale: f64 = terms.iter().map(|t| t.abs()).sum();
                if !close(hd[a], expect, scale) {
                    return Err(format!("H mismatch {} vs {expect}", hd[a]));
                }
                checks += 1;
            }
            let ranks = objective_ranks(hd);
            if ranks != oracle_ranks(hd) {
                return Err(format!("ranks {ranks:?}"));
            }
        }
    }

    for _ in 0..2000 {
        let r = rng.random_range(1.0..=6.0);
        let dh = rng.random_range(-3.0..3.0);
        let root = diagonal_root(r, dh).magnitude.ok_or("unexpected sentinel")?;
        if !close(root, oracle_root_modulus(r, dh), 0.0) {
            return Err(format!("root R={r} dH={dh}: {root}"));
        }
        checks += 1;
    }

    for _ in 0..2000 {
        let n = rng.random_range(1..=6);
        let cats: Vec<u8> = (0..n).map(|_| rng.random_range(1..=7)).collect();
        let records: Vec<PdiRecord> = cats.iter().map(|c| record(*c)).collect();
        let got: Vec<(usize, usize)> = detect_chains(&records).iter().map(|c| (c.start, c.length)).collect();
        if got != oracle_runs(&cats) {
            return Err(format!("chains for {cats:?}: {got:?}"));
        }
        checks += 1;
    }

    for _ in 0..500 {
        let n = rng.random_range(2..=6);
        let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        if ts.len() < 2 || ts.windows(2).any(|w| w[1] - w[0] < 1e-2) {
            continue;
        }
        let poly: Vec<(f64, f64)> = ts.iter().map(|t| (*t, rng.random_range(0.0..2.0))).collect();
        let line = (rng.random_range(0.0..2.0), rng.random_range(-0.5..0.5));
        let got: Vec<f64> = line_polyline_intersections(line, &poly).iter().map(|p| p.0).collect();
        let want = oracle_crossings(line, &poly);
        if got.len() != want.len() || got.iter().zip(&want).any(|(g, w)| !close(*g, *w, 1.0)) {
            return Err(format!("intersections {got:?} vs {want:?}"));
        }
        checks += 1;
    }

    // kappa (1.0, 0.6, 0.2) against inv_Ltilde (0.3, 0.5, 0.7) at x = 1, 3, 9
    let levels: Vec<ZoomLevel> = [(81, 1.0, 1.0, 0.3), (27, 3.0, 0.6, 0.5), (9, 9.0, 0.2, 0.7)]
        .into_iter()
        .map(|(point_count, x, kappa, inv_ltilde)| ZoomLevel {
            point_count,
            x,
            kappa_dim: vec![Some(kappa)],
            kappa_root: vec![None],
            kappa: Some(kappa),
            inv_ltilde: Some(inv_ltilde),
            inv_l: None,
        })
        .collect();
    let profile = ZoomProfile {
        levels,
        partial: vec![false],
    };
    let length = critical_chain_lengths(&profile, 81).long;
    let line = (0.3, 0.2 / 3f64.ln());
    let curve: Vec<(f64, f64)> = [(81.0, 0.2), (9.0, 0.2), (3.0, 0.6)]
        .iter()
        .map(|(x, k): &(f64, f64)| (-x.ln(), *k))
        .chain([(0.0, 1.0), (3f64.ln(), 0.6), (9f64.ln(), 0.2), (81f64.ln(), 0.2)])
        .collect();
    let crossings = oracle_crossings(line, &curve);
    let [crossing] = crossings[..] else {
        return Err(format!("oracle crossings {crossings:?}"));
    };
    if !close(length, crossing.abs().exp(), 0.0) || !close(length, 3f64.powf(7.0 / 6.0), 0.0) {
        return Err(format!("chain length {length} vs {}", crossing.abs().exp()));
    }
    Ok(format!("{} comparisons; reference case length {length:.6}", checks + 1))
}

fn determinism_and_budget() -> Outcome {
    let config = PipelineConfig::default();
    let data = synthesize(
        Profile::Stable,
        &config,
        CorpusShape {
            subjects: 100,
            bursts_per_subject: 10,
        },
    )
    .map_err(|e| e.to_string())?;
    let run = || -> Result<(String, Duration), String> {
        let start = Instant::now();
        let analysis =
            analyze_dataset_sequential(&data, &config, AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        let json = analysis.report(&config).to_json().map_err(|e| e.to_string())?;
        Ok((json, start.elapsed()))
    };
    let (first, elapsed) = run()?;
    let (second, _) = run()?;
    if first != second {
        return Err("reports differ between runs".into());
    }
    let detail = format!(
        "{:.1} s single-threaded, {} identical bytes",
        elapsed.as_secs_f64(),
        first.len()
    );
    if elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("root-count law", root_count_law),
        ("Borda zero-sum", borda_zero_sum),
        ("antisymmetry", antisymmetry),
        ("null-signal fixed point", null_signal),
        ("aggregation ladder", aggregation_ladder),
        ("GTI logic table", gti_table),
        ("detection smoke test", detection_smoke),
        ("percent-change formula", percent_change_check),
        ("oracle equivalence", oracle_equivalence),
        ("determinism and performance", determinism_and_budget),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
