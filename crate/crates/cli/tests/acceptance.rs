//! Acceptance checks, one PASS/FAIL line each. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use modelimp::data::TaskBundle;
use modelimp::importance::{subset_weight_exact, SubsetScores};
use modelimp::{
    aggregate, impute, lasomo_task, lomo_task, score, wis, AggFun, EnsembleSpec, Forecast,
    ImportanceTable, NaAction, SummaryFn, TaskKey, TruthValue, WeightScheme,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

const F: &str = "Flusight-baseline";
const M: &str = "MOBS-GLEAM_FLUH";
const P: &str = "PSI-DICE";

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn modelimp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modelimp"))
        .args(args)
        .env_remove("MODELIMP_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = modelimp(args);
    if !out.status.success() {
        return Err(format!(
            "`modelimp {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn score_args<'a>(extra: &[&'a str], forecasts: &'a str, oracle: &'a str) -> Vec<&'a str> {
    let mut args = vec!["score", "--forecasts", forecasts, "--oracle", oracle, "--quiet"];
    args.extend_from_slice(extra);
    args
}

fn example_scores(extra: &[&str]) -> Result<Vec<u8>, String> {
    let (f, o) = (data("forecasts.csv"), data("oracle.csv"));
    stdout_of(&score_args(extra, f.to_str().unwrap(), o.to_str().unwrap()))
}

/// Parses a two-column aggregate CSV into (model, value) pairs in file order.
fn parse_aggregate(bytes: &[u8]) -> Result<Vec<(String, f64)>, String> {
    let mut rdr = csv::Reader::from_reader(bytes);
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let v = r[1].parse::<f64>().map_err(|e| e.to_string())?;
            Ok((r[0].to_string(), v))
        })
        .collect()
}

fn aggregate_via_cli(scores: &[u8], na_action: &str) -> Result<Vec<(String, f64)>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("scores.csv");
    std::fs::write(&path, scores).map_err(|e| e.to_string())?;
    let out = stdout_of(&["aggregate", "--scores", path.to_str().unwrap(), "--na-action", na_action])?;
    parse_aggregate(&out)
}

fn check_aggregate(got: &[(String, f64)], want: &[(&str, f64)], label: &str) -> Result<(), String> {
    ensure(got.len() == want.len(), || format!("{label}: {got:?}"))?;
    for ((gm, gv), (wm, wv)) in got.iter().zip(want) {
        ensure(gm == wm, || format!("{label}: order {got:?}"))?;
        ensure((gv - wv).abs() <= 0.05, || format!("{label}: {gm} {gv} vs {wv}"))?;
    }
    Ok(())
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let out = example_scores(&[])?;
    let elapsed = start.elapsed();
    let table = ImportanceTable::read_any(out.as_slice()).map_err(|e| e.to_string())?;
    let want = [
        Some(-19.50), None, Some(19.50),
        Some(-32.33), Some(-22.33), Some(54.67),
        Some(-16.67), Some(-20.67), Some(37.33),
        Some(182.00), Some(-182.00), None,
    ];
    ensure(table.len() == want.len(), || format!("{} rows", table.len()))?;
    let mut worst = 0.0f64;
    for (row, w) in table.rows().iter().zip(want) {
        match (row.importance, w) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (None, None) => {}
            _ => return Err(format!("NA placement differs at {row:?}")),
        }
    }
    ensure(worst <= 5e-3, || format!("max abs error {worst}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("10 values, max abs error {worst:.1e}, 2 NA, {elapsed:.0?}"))
}

fn criterion_2() -> Check {
    let scores = example_scores(&[])?;
    check_aggregate(&aggregate_via_cli(&scores, "drop")?, &[(P, 37.2), (F, 28.4), (M, -75.0)], "drop")?;
    check_aggregate(&aggregate_via_cli(&scores, "worst")?, &[(F, 28.4), (P, -17.6), (M, -61.1)], "worst")?;
    check_aggregate(&aggregate_via_cli(&scores, "average")?, &[(F, 28.4), (P, 27.9), (M, -56.2)], "average")?;
    Ok("drop, worst and average match in value and order".into())
}

fn criterion_3() -> Check {
    let equal = example_scores(&["--algorithm", "lasomo", "--subset-wt", "equal"])?;
    check_aggregate(&aggregate_via_cli(&equal, "drop")?, &[(P, 47.4), (F, 24.3), (M, -79.8)], "equal")?;
    let perm = example_scores(&["--algorithm", "lasomo", "--subset-wt", "perm_based"])?;
    check_aggregate(&aggregate_via_cli(&perm, "drop")?, &[(P, 44.8), (F, 25.3), (M, -78.6)], "perm_based")?;
    Ok("equal and perm_based match in value and order".into())
}

fn choose(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn criterion_4() -> Check {
    for n in 2..=16usize {
        for scheme in [WeightScheme::Equal, WeightScheme::PermBased] {
            let mut total = BigRational::zero();
            for k in 1..n {
                let w = subset_weight_exact(n, k, scheme).map_err(|e| e.to_string())?;
                let w = BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()));
                total += w * BigRational::from_integer(choose(n as u64 - 1, k as u64));
            }
            ensure(total.is_one(), || format!("n={n} {scheme}: sum {total}"))?;
        }
        let last = subset_weight_exact(n, n - 1, WeightScheme::PermBased).map_err(|e| e.to_string())?;
        ensure(*last.numer() == 1 && *last.denom() == n as u128 - 1, || {
            format!("n={n}: perm_based weight at k=n-1 is {last}")
        })?;
    }
    Ok("n = 2..16, both schemes, exact".into())
}

struct PointTask {
    values: Vec<f64>,
    y: f64,
    agg: AggFun,
}

impl PointTask {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.random_range(2..=6);
        PointTask {
            values: (0..n).map(|_| rng.random_range(0.0..100.0)).collect(),
            y: rng.random_range(0.0..100.0),
            agg: if rng.random_bool(0.5) { AggFun::Mean } else { AggFun::Median },
        }
    }

    fn bundle(&self) -> TaskBundle {
        let columns: Arc<[String]> = vec!["reference_date".to_string()].into();
        TaskBundle {
            key: TaskKey::new(columns, vec!["2024-01-06".into()]),
            forecasts: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| (format!("m{i}"), Forecast::Median(v)))
                .collect(),
            truth: TruthValue::Numeric(self.y),
        }
    }

    fn subset_score(&self, members: &[usize]) -> f64 {
        let mut v: Vec<f64> = members.iter().map(|&i| self.values[i]).collect();
        v.sort_by(f64::total_cmp);
        let e = match self.agg {
            AggFun::Mean => v.iter().sum::<f64>() / v.len() as f64,
            AggFun::Median if v.len() % 2 == 1 => v[v.len() / 2],
            AggFun::Median => (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0,
        };
        -(e - self.y).abs()
    }

    /// Exact-fraction enumeration of every subset of the other models.
    fn naive(&self, i: usize, scheme: WeightScheme) -> f64 {
        let n = self.values.len();
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut by_size: BTreeMap<usize, Vec<BigRational>> = BTreeMap::new();
        for bits in 1u32..(1 << others.len()) {
            let s: Vec<usize> = (0..others.len()).filter(|b| bits & (1 << b) != 0).map(|b| others[b]).collect();
            let mut with_i = s.clone();
            with_i.push(i);
            let gain = BigRational::from_float(self.subset_score(&with_i)).unwrap()
                - BigRational::from_float(self.subset_score(&s)).unwrap();
            by_size.entry(s.len()).or_default().push(gain);
        }
        let mean = |xs: &[&BigRational]| {
            xs.iter().fold(BigRational::zero(), |a, g| a + *g) / BigRational::from_integer(BigInt::from(xs.len()))
        };
        let exact = match scheme {
            WeightScheme::Equal => mean(&by_size.values().flatten().collect::<Vec<_>>()),
            WeightScheme::PermBased => {
                let per_size: Vec<BigRational> =
                    by_size.values().map(|g| mean(&g.iter().collect::<Vec<_>>())).collect();
                mean(&per_size.iter().collect::<Vec<_>>())
            }
        };
        exact.to_f64().unwrap()
    }
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_lasomo, mut worst_lomo) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let task = PointTask::random(&mut rng);
        let bundle = task.bundle();
        let spec = EnsembleSpec::Simple(task.agg);
        for scheme in [WeightScheme::Equal, WeightScheme::PermBased] {
            let got = lasomo_task(&bundle, &spec, scheme, -10.0, 16).map_err(|e| e.to_string())?;
            for i in 0..task.values.len() {
                worst_lasomo = worst_lasomo.max((got.scores[&format!("m{i}")] - task.naive(i, scheme)).abs());
            }
        }
        let lomo = lomo_task(&bundle, &spec, -10.0).map_err(|e| e.to_string())?;
        let subsets = SubsetScores::compute(&bundle, &spec, -10.0, 16).map_err(|e| e.to_string())?;
        let full = (1usize << task.values.len()) - 1;
        for (i, m) in subsets.models().iter().enumerate() {
            worst_lomo = worst_lomo.max((lomo.scores[m] - subsets.marginal(i, full ^ (1 << i))).abs());
        }
    }
    ensure(worst_lasomo <= 1e-10, || format!("LASOMO max error {worst_lasomo:e}"))?;
    ensure(worst_lomo <= 1e-12, || format!("LOMO max error {worst_lomo:e}"))?;
    Ok(format!("200 tasks, LASOMO max error {worst_lasomo:.1e}, LOMO max error {worst_lomo:.1e}"))
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let levels = [0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975];
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut q: Vec<f64> = levels.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        q.sort_by(f64::total_cmp);
        let y = rng.random_range(-12.0..12.0);
        let pinball = wis(&levels, &q, y).map_err(|e| e.to_string())?;
        let mut interval = (y - q[3]).abs();
        for j in 0..3 {
            let (l, u, alpha) = (q[j], q[6 - j], 2.0 * levels[j]);
            let is = (u - l) + 2.0 / alpha * ((l - y).max(0.0) + (y - u).max(0.0));
            interval += alpha * is;
        }
        worst = worst.max((pinball - interval / levels.len() as f64).abs());
    }
    ensure(worst <= 1e-12, || format!("decomposition error {worst:e}"))?;
    for _ in 0..100 {
        let (q, y) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let w = wis(&[0.5], &[q], y).map_err(|e| e.to_string())?;
        ensure(w == (q - y).abs(), || format!("single level: {w} vs {}", (q - y).abs()))?;
    }
    let hit = TruthValue::Category("hit".into());
    let log = |p: f64| -> Result<f64, String> {
        let f = Forecast::pmf([("hit", p), ("miss", 1.0 - p)]).map_err(|e| e.to_string())?;
        Ok(score(&f, &hit, -10.0).map_err(|e| e.to_string())?.value())
    };
    ensure(log(1.0)? == 0.0, || "p = 1".into())?;
    ensure((log((-10.0f64).exp())? + 10.0).abs() < 1e-12, || "p = exp(-10)".into())?;
    ensure(log(1e-6)? == -10.0, || "p = 1e-6 not floored".into())?;
    Ok(format!("1000 WIS instances, max error {worst:.1e}; floor holds at 1, e^-10, 1e-6"))
}

fn bench_counts(algorithm: &str) -> Result<usize, String> {
    let out = stdout_of(&[
        "bench", "--algorithm", algorithm, "--models-grid", "2..10", "--tasks-grid", "10,20,50,100", "--quiet",
    ])?;
    let mut rdr = csv::Reader::from_reader(out.as_slice());
    let mut cells = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let n: u64 = rec[1].parse().unwrap();
        let t: u64 = rec[2].parse().unwrap();
        let count: u64 = rec[3].parse().unwrap();
        let want = match algorithm {
            "lomo" => t * (n + 1),
            _ => t * ((1 << n) - 1),
        };
        ensure(count == want, || format!("{algorithm} n={n} t={t}: {count} vs {want}"))?;
        cells += 1;
    }
    ensure(cells == 36, || format!("{cells} cells"))?;
    Ok(cells)
}

fn bench_ms(workers: &str, timings: &Path) -> Result<f64, String> {
    stdout_of(&[
        "bench", "--algorithm", "lasomo", "--models-grid", "10", "--tasks-grid", "100",
        "--workers", workers, "--quiet", "--timings", timings.to_str().unwrap(),
    ])?;
    let text = std::fs::read_to_string(timings).map_err(|e| e.to_string())?;
    let ms = text.lines().nth(1).and_then(|l| l.rsplit(',').next()).unwrap_or_default();
    ms.parse().map_err(|_| format!("bad timings file: {text}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median times of the n = 10, t = 100 LASOMO cell with 1 and 4 workers,
/// from interleaved runs so drift affects both alike.
fn lasomo_times() -> Result<(f64, f64), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("timings.csv");
    let (mut seq, mut par) = (Vec::new(), Vec::new());
    for _ in 0..7 {
        seq.push(bench_ms("1", &path)?);
        par.push(bench_ms("4", &path)?);
    }
    Ok((median(seq), median(par)))
}

fn criterion_7() -> Check {
    bench_counts("lomo")?;
    bench_counts("lasomo")?;
    let (sequential, parallel) = lasomo_times()?;
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    // With a single CPU the four workers time-share one core, so any
    // difference between the medians is noise, not a parallel speedup.
    ensure(cpus >= 2, || {
        format!(
            "counts exact for all 72 cells, but the parallel speedup cannot be shown with {cpus} CPU \
             available (medians: {sequential:.1} ms sequential, {parallel:.1} ms with 4 workers)"
        )
    })?;
    ensure(parallel < sequential, || {
        format!(
            "counts exact for all 72 cells, but 4 workers took a median {parallel:.1} ms vs {sequential:.1} ms \
             sequential with {cpus} CPU(s) available"
        )
    })?;
    Ok(format!(
        "counts exact for all 72 cells; n=10, t=100 LASOMO median {sequential:.1} ms sequential, \
         {parallel:.1} ms with 4 workers ({cpus} CPU(s))"
    ))
}

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (f, o) = (data("forecasts.csv"), data("oracle.csv"));
    let (f, o) = (f.to_str().unwrap(), o.to_str().unwrap());
    let scores_path = dir.path().join("scores.csv");
    let s = scores_path.to_str().unwrap();
    let mut runs: Vec<Vec<&str>> = Vec::new();
    for extra in [
        vec![],
        vec!["--algorithm", "lasomo"],
        vec!["--algorithm", "lasomo", "--subset-wt", "perm_based", "--format", "json"],
    ] {
        for workers in ["1", "4"] {
            let mut args = score_args(&extra, f, o);
            args.extend_from_slice(&["--workers", workers]);
            runs.push(args);
        }
    }
    let first = stdout_of(&runs[0])?;
    std::fs::write(&scores_path, &first).map_err(|e| e.to_string())?;
    let others: Vec<Vec<&str>> = vec![
        vec!["aggregate", "--scores", s],
        vec!["aggregate", "--scores", s, "--na-action", "worst", "--format", "json"],
        vec!["aggregate", "--scores", s, "--by", "model_id,location", "--fun", "quantile", "--fun-arg", "probs=0.25"],
        vec!["summary", "--scores", s, "--details"],
        vec!["summary", "--scores", s, "--format", "json"],
        vec!["bench", "--models-grid", "2..6", "--tasks-grid", "10,20", "--algorithm", "lasomo", "--workers", "1", "-q"],
        vec!["bench", "--models-grid", "2..6", "--tasks-grid", "10,20", "--algorithm", "lasomo", "--workers", "4", "-q"],
    ];
    runs.extend(others);
    let mut outputs = Vec::new();
    for args in &runs {
        let a = stdout_of(args)?;
        let b = stdout_of(args)?;
        ensure(a == b, || format!("`{}` differs between runs", args.join(" ")))?;
        outputs.push(a);
    }
    for pair in [(0, 1), (2, 3), (4, 5), (11, 12)] {
        ensure(outputs[pair.0] == outputs[pair.1], || {
            format!("`{}` differs between 1 and 4 workers", runs[pair.0].join(" "))
        })?;
    }
    Ok(format!("{} command lines byte-identical across runs and worker counts", runs.len()))
}

/// Five randomized properties, each over `CASES` inputs.
const CASES: usize = 128;

fn random_bundle(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, f64) {
    ((0..n).map(|_| rng.random_range(0.0..200.0)).collect(), rng.random_range(0.0..200.0))
}

fn bundle_of(names: &[String], values: &[f64], y: f64) -> TaskBundle {
    let columns: Arc<[String]> = vec!["reference_date".to_string()].into();
    TaskBundle {
        key: TaskKey::new(columns, vec!["2024-01-06".into()]),
        forecasts: names.iter().cloned().zip(values.iter().map(|&v| Forecast::Median(v))).collect(),
        truth: TruthValue::Numeric(y),
    }
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let specs = [EnsembleSpec::Simple(AggFun::Mean), EnsembleSpec::Simple(AggFun::Median)];
    // Permutation and label equivariance.
    for case in 0..CASES {
        let n = rng.random_range(2..=6);
        let (values, y) = random_bundle(&mut rng, n);
        let names: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let relabeled: Vec<String> = (0..n).map(|i| format!("z{}", n - i)).collect();
        let spec = &specs[case % 2];
        let scheme = [WeightScheme::Equal, WeightScheme::PermBased][(case / 2) % 2];
        let a = lasomo_task(&bundle_of(&names, &values, y), spec, scheme, -10.0, 16).map_err(|e| e.to_string())?;
        let b = lasomo_task(&bundle_of(&relabeled, &values, y), spec, scheme, -10.0, 16).map_err(|e| e.to_string())?;
        let c = lomo_task(&bundle_of(&names, &values, y), spec, -10.0).map_err(|e| e.to_string())?;
        let d = lomo_task(&bundle_of(&relabeled, &values, y), spec, -10.0).map_err(|e| e.to_string())?;
        for i in 0..n {
            let (x, z) = (a.scores[&names[i]], b.scores[&relabeled[i]]);
            ensure((x - z).abs() <= 1e-9 * (1.0 + x.abs()), || format!("relabel LASOMO {x} vs {z}"))?;
            let (x, z) = (c.scores[&names[i]], d.scores[&relabeled[i]]);
            ensure((x - z).abs() <= 1e-9 * (1.0 + x.abs()), || format!("relabel LOMO {x} vs {z}"))?;
        }
    }
    // Idempotent ensembling of identical forecasts.
    for _ in 0..CASES {
        let n = rng.random_range(1..=6);
        let (v, _) = random_bundle(&mut rng, 1);
        let f = Forecast::Median(v[0]);
        let copies: Vec<&Forecast> = std::iter::repeat_n(&f, n).collect();
        for spec in &specs {
            let e = spec.build(&copies).map_err(|e| e.to_string())?.as_point().unwrap();
            ensure((e - v[0]).abs() <= 1e-12 * (1.0 + v[0].abs()), || format!("{spec}: {e} vs {}", v[0]))?;
        }
        let mut q: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
        q.sort_by(f64::total_cmp);
        let fq = Forecast::quantile(vec![0.25, 0.5, 0.75], q.clone()).map_err(|e| e.to_string())?;
        let copies: Vec<&Forecast> = std::iter::repeat_n(&fq, n).collect();
        let e = EnsembleSpec::Simple(AggFun::Mean).build(&copies).map_err(|e| e.to_string())?;
        for (a, b) in e.as_quantile().unwrap().values().iter().zip(&q) {
            ensure((a - b).abs() <= 1e-12 * (1.0 + b.abs()), || "quantile mean".into())?;
        }
    }
    // Zero importance for identical submissions.
    for case in 0..CASES {
        let n = rng.random_range(2..=6);
        let (v, y) = random_bundle(&mut rng, 1);
        let names: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let bundle = bundle_of(&names, &vec![v[0]; n], y);
        let spec = &specs[case % 2];
        let lasomo = lasomo_task(&bundle, spec, WeightScheme::PermBased, -10.0, 16).map_err(|e| e.to_string())?;
        let lomo = lomo_task(&bundle, spec, -10.0).map_err(|e| e.to_string())?;
        for imp in lasomo.scores.values().chain(lomo.scores.values()) {
            ensure(imp.abs() <= 1e-9, || format!("identical submissions scored {imp}"))?;
        }
    }
    // Monotone ensembled quantiles.
    let levels = vec![0.1, 0.25, 0.5, 0.75, 0.9];
    for _ in 0..CASES {
        let n = rng.random_range(1..=5);
        let forecasts: Vec<Forecast> = (0..n)
            .map(|_| {
                let mut q: Vec<f64> = (0..5).map(|_| rng.random_range(-100.0..100.0)).collect();
                q.sort_by(f64::total_cmp);
                Forecast::quantile(levels.clone(), q).unwrap()
            })
            .collect();
        let refs: Vec<&Forecast> = forecasts.iter().collect();
        for spec in [specs[0], specs[1], EnsembleSpec::LinearPool { grid_size: 1023 }] {
            let e = spec.build(&refs).map_err(|e| e.to_string())?;
            let v = e.as_quantile().unwrap().values().to_vec();
            ensure(v.windows(2).all(|w| w[0] <= w[1]), || format!("{spec} not monotone: {v:?}"))?;
        }
    }
    // Imputation neutrality.
    for _ in 0..CASES {
        let n = rng.random_range(2..=5);
        let t = rng.random_range(1..=4);
        let scores: Vec<BTreeMap<String, Option<f64>>> = (0..t)
            .map(|_| (0..n).map(|i| (format!("m{i}"), Some(rng.random_range(-50.0..50.0)))).collect())
            .collect();
        for s in &scores {
            let dropped = impute(s, NaAction::Drop).map_err(|e| e.to_string())?;
            for action in [NaAction::Worst, NaAction::Average] {
                ensure(impute(s, action).map_err(|e| e.to_string())? == dropped, || "impute".into())?;
            }
        }
        let columns: Arc<[String]> = vec!["location".to_string()].into();
        let rows = scores
            .iter()
            .enumerate()
            .flat_map(|(task, s)| {
                let key = TaskKey::new(Arc::clone(&columns), vec![task.to_string()]);
                s.iter()
                    .map(move |(m, v)| modelimp::ImportanceRow {
                        model_id: m.clone(),
                        task: key.clone(),
                        output_type: modelimp::OutputType::Median,
                        importance: *v,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let table = ImportanceTable::new(columns, rows);
        let by = ["model_id".to_string()];
        let drop = aggregate(&table, &by, NaAction::Drop, &SummaryFn::Mean).map_err(|e| e.to_string())?;
        for action in [NaAction::Worst, NaAction::Average] {
            let other = aggregate(&table, &by, action, &SummaryFn::Mean).map_err(|e| e.to_string())?;
            ensure(other == drop, || format!("{action} differs from drop"))?;
        }
    }
    Ok(format!("5 properties x {CASES} cases"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden LOMO per-task scores", criterion_1),
        ("golden LOMO aggregates", criterion_2),
        ("golden LASOMO aggregates", criterion_3),
        ("subset weight normalization", criterion_4),
        ("brute-force oracle equivalence", criterion_5),
        ("scoring rule checks", criterion_6),
        ("evaluation counts and parallel runtime", criterion_7),
        ("determinism", criterion_8),
        ("property suite", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
