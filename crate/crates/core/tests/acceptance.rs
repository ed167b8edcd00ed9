//! Acceptance suite. Prints one PASS/FAIL line per criterion. With
//! `ACCEPTANCE_STRICT=1` any failure also makes the process exit nonzero;
//! otherwise the verdicts are reported without failing `cargo test`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::time::{Duration, Instant};

use dirtplan::config::RunConfig;
use dirtplan::grid::{estimate_cell_rate, CellHistory, DirtMap};
use dirtplan::partition::{partition, validate_partition, Partition};
use dirtplan::pipeline::{Pipeline, Stage};
use dirtplan::route::{dwell_time, plan_route, RouteConfig};
use dirtplan::sim::{compare, sample_dirt_field, simulate_baseline, simulate_team, SimParams};
use dirtplan::route::annotate_route;
use dirtplan::GridMap;
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

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn three_robot_partition() -> Outcome {
    let dm = common::three_robot_model();
    let started = Instant::now();
    let p: Partition<f64> = partition(&dm, 3).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(p.lambda_total == 11382.0, || format!("lambda_total {}", p.lambda_total))?;
    ensure(p.lambda_s == 3794.0, || format!("lambda_s {}", p.lambda_s))?;
    let first = &p.regions[0];
    let last = *first.cells.last().ok_or("empty first region")?;
    let before = first.lambda_actual - dm.lambda(last).unwrap();
    ensure(first.lambda_actual == 3808.0 && before == 3745.0, || {
        format!("first region {} ({} before last vertex)", first.lambda_actual, before)
    })?;
    ensure(p.regions[1].lambda_actual == 3748.0, || {
        format!("second region {}", p.regions[1].lambda_actual)
    })?;
    within(Duration::from_secs(1), elapsed)?;
    Ok(format!(
        "lambda_s 3794, regions {:?}, {elapsed:.2?}",
        p.regions.iter().map(|r| r.lambda_actual).collect::<Vec<_>>()
    ))
}

fn dwell_table() -> Outcome {
    let lambdas = [0, 12, 13, 26, 27, 39, 40, 51, 52, 64, 65, 77];
    let expected = [0.0, 0.0, 1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5, 3.0, 3.0];
    for (l, want) in lambdas.iter().zip(expected) {
        let got = dwell_time(*l as f64).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("lambda {l}: {got} s, expected {want} s"))?;
    }
    Ok("12 boundary values exact".into())
}

fn team_vs_baseline() -> Outcome {
    let started = Instant::now();
    let dm = common::three_robot_model();
    let p = partition(&dm, 3).map_err(|e| e.to_string())?;
    let routes = p
        .regions
        .iter()
        .map(|r| annotate_route(r.id, &plan_route(&r.cells, &RouteConfig::default())?, &dm))
        .collect::<dirtplan::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let (mut makespan, mut battery) = (0.0, 0.0);
    let seeds = 0..10u64;
    for seed in seeds.clone() {
        let params = SimParams {
            rng_seed: seed,
            ..SimParams::default()
        };
        let field = sample_dirt_field(&dm, seed);
        let team = simulate_team(&routes, &dm, &field, &params).map_err(|e| e.to_string())?;
        let base = simulate_baseline(&dm, &field, &params).map_err(|e| e.to_string())?;
        ensure(team.residual_on_visited == 0.0 && base.residual_on_visited == 0.0, || {
            format!("seed {seed}: residual on visited cells")
        })?;
        let c = compare(&team, &base).map_err(|e| e.to_string())?;
        makespan += c.makespan_ratio;
        battery += c.battery_ratio;
    }
    let n = seeds.count() as f64;
    let (makespan, battery) = (makespan / n, battery / n);
    ensure(makespan <= 0.45, || format!("mean makespan ratio {makespan:.4}"))?;
    ensure((1.0..=1.25).contains(&battery), || format!("mean battery ratio {battery:.4}"))?;
    within(Duration::from_secs(10), started.elapsed())?;
    Ok(format!("makespan ratio {makespan:.4}, battery ratio {battery:.4}"))
}

fn partition_validity() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut failures = Vec::new();
    for case in 0..200 {
        let robots = [2, 3, 4][case % 3];
        let grid = common::random_connected_grid(&mut rng, 20, robots);
        let dm = common::random_dirt(&mut rng, grid);
        match partition(&dm, robots) {
            Err(e) => failures.push(format!("case {case} (r={robots}): {e}")),
            Ok(p) => {
                let report = validate_partition(&p, &dm);
                if !report.passed() {
                    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
                    failures.push(format!("case {case} (r={robots}) failed {failed:?}"));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(failures.is_empty(), || {
        format!("{} of 200 grids failed in {elapsed:.2?}: {}", failures.len(), failures.join("; "))
    })?;
    within(Duration::from_secs(60), elapsed)?;
    Ok(format!("200 grids valid in {elapsed:.2?}"))
}

fn route_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70u64);
    let mut equal = 0;
    for case in 0..500 {
        let n = rng.random_range(1..=8);
        let cells = common::random_region(&mut rng, n);
        let tour = plan_route(&cells, &RouteConfig::default()).map_err(|e| e.to_string())?;
        let best = common::brute_force_path(&cells);
        ensure(tour.travel_distance >= best, || {
            format!("case {case}: {} below optimum {best}", tour.travel_distance)
        })?;
        equal += usize::from(tour.travel_distance == best);
    }
    let rate = equal as f64 / 500.0;
    ensure(rate >= 0.6, || format!("optimal in {rate:.3} of cases"))?;
    within(Duration::from_secs(30), started.elapsed())?;
    Ok(format!("optimal in {:.1}% of 500 regions", rate * 100.0))
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn estimator_properties() -> Outcome {
    let cell = dirtplan::Coord::new(0, 0);
    let worked = CellHistory::new(cell, 0.0)
        .record_pass(2.0, 6.0)
        .and_then(|h| h.record_pass(5.0, 9.0))
        .map_err(|e| e.to_string())?;
    let v = estimate_cell_rate(&worked, 5.0, 10.0).map_err(|e| e.to_string())?;
    ensure(v == 15.0, || format!("worked example gave {v}"))?;

    // Dyadic times and counts keep every sum exact so the tolerance tests
    // the formula rather than rounding.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dyadic = |rng: &mut ChaCha8Rng, hi: u32| f64::from(rng.random_range(1..=hi)) / 8.0;
    for case in 0..1000 {
        let epoch = dyadic(&mut rng, 64) - 4.0;
        let n = rng.random_range(1..6);
        let mut t = epoch;
        let mut passes = Vec::new();
        for _ in 0..n {
            t += dyadic(&mut rng, 40);
            passes.push((t, f64::from(rng.random_range(0..50u32)), f64::from(rng.random_range(0..50u32))));
        }
        let s = dyadic(&mut rng, 200);
        let len = dyadic(&mut rng, 200);
        let (a, b) = (dyadic(&mut rng, 24), dyadic(&mut rng, 24));
        let c = dyadic(&mut rng, 32);
        let delta = dyadic(&mut rng, 400) - 25.0;
        let build = |shift: f64, k: &dyn Fn(f64, f64) -> f64| {
            passes
                .iter()
                .try_fold(CellHistory::new(cell, epoch + shift), |h, &(t, k1, k2)| h.record_pass(t + shift, k(k1, k2)))
        };
        let est = |h: &CellHistory<f64>, s: f64, t: f64| estimate_cell_rate(h, s, t);
        let run = || -> dirtplan::Result<Result<(), String>> {
            let h1 = build(0.0, &|k1, _| k1)?;
            let h2 = build(0.0, &|_, k2| k2)?;
            let hab = build(0.0, &|k1, k2| a * k1 + b * k2)?;
            let lin_lhs = est(&hab, s, s + len)?;
            let lin_rhs = a * est(&h1, s, s + len)? + b * est(&h2, s, s + len)?;
            if !rel_close(lin_lhs, lin_rhs) {
                return Ok(Err(format!("case {case}: linearity {lin_lhs} vs {lin_rhs}")));
            }
            let wide = est(&h1, s, s + c * len)?;
            let narrow = est(&h1, s, s + len)?;
            if !rel_close(wide, c * narrow) {
                return Ok(Err(format!("case {case}: proportionality {wide} vs {}", c * narrow)));
            }
            let shifted = est(&build(delta, &|k1, _| k1)?, s + delta, s + len + delta)?;
            if !rel_close(shifted, narrow) {
                return Ok(Err(format!("case {case}: shift {shifted} vs {narrow}")));
            }
            Ok(Ok(()))
        };
        run().map_err(|e| format!("case {case}: {e}"))??;
    }
    Ok("worked example 15; 1000 histories within 1e-12".into())
}

fn deterministic_runs() -> Outcome {
    let mut checked = 0;
    for conf in ["three_robot.conf", "small.conf"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for name in ["a", "b"] {
            let mut cfg = RunConfig::load(&common::fixture_path(conf)).map_err(|e| e.to_string())?;
            cfg.output_dir = dir.path().join(name);
            Pipeline::new(&cfg)
                .and_then(|p| p.run(Stage::Run))
                .map_err(|e| format!("{conf}: {e}"))?;
            let mut files = BTreeMap::new();
            for entry in fs::read_dir(&cfg.output_dir).map_err(|e| e.to_string())? {
                let path = entry.map_err(|e| e.to_string())?.path();
                files.insert(path.file_name().unwrap().to_owned(), fs::read(&path).map_err(|e| e.to_string())?);
            }
            outputs.push(files);
        }
        ensure(outputs[0] == outputs[1], || format!("{conf}: outputs differ"))?;
        checked += outputs[0].len();
    }
    Ok(format!("{checked} artifacts byte-identical across two runs"))
}

fn poisson_calibration() -> Outcome {
    let grid = GridMap::all_free(100, 100).map_err(|e| e.to_string())?;
    let dm = DirtMap::uniform(grid, 50.0).map_err(|e| e.to_string())?;
    let mut means = Vec::new();
    for seed in 0..10 {
        let field = sample_dirt_field(&dm, seed);
        let mean = field.total() / 10_000.0;
        ensure((48.5..=51.5).contains(&mean), || format!("seed {seed}: mean {mean}"))?;
        means.push(mean);
    }
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("means in [{lo:.3}, {hi:.3}]"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("three-robot partition", three_robot_partition),
        ("dwell table", dwell_table),
        ("team vs single robot", team_vs_baseline),
        ("partition validity", partition_validity),
        ("route oracle bracket", route_oracle),
        ("estimator properties", estimator_properties),
        ("deterministic runs", deterministic_runs),
        ("poisson calibration", poisson_calibration),
    ];
    // `cargo test --test acceptance -- 1 4` runs only the listed criteria
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
