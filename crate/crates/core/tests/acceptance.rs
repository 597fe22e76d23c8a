//! Runs the nine acceptance criteria and prints one PASS/FAIL line each.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fairmeasure::backward::{geo_mean_convergence, late_visits, path_statistics, running_geo_means, sample_backward, sample_paths};
use fairmeasure::builtins;
use fairmeasure::exact::rat;
use fairmeasure::fair::{
    check_fair_on_cylinders, fair_entropy, fair_measure_verdict, find_atomic_fair_measures, integral_log_c,
    solve_stationary, solve_stationary_with, verify_stationary_exact, ClosedForm, FairError, FairVerdict,
    SolverOptions, StationaryVector,
};
use fairmeasure::graph::{cut_and_paste, dendrite_example, refined_transition_matrix};
use fairmeasure::interval::{
    bruin_todd_map, check_lebesgue_fair, conjugacy_overlap, lebesgue_fair_model, map_by_name, rohlin_entropy, tent,
    transition_matrix, MarkovIntervalMap, MAP_NAMES,
};
use fairmeasure::recurrence::{classify, series_test, RecurrencePolicy};
use fairmeasure::{BackwardKernel, FairMeasure, IndexRange, RecurrenceClass, StateId, TransitionRuleSet};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn kernel(name: &str) -> (BackwardKernel, TransitionRuleSet, Option<ClosedForm>, StateId) {
    let b = builtins::by_name(name).expect("builtin");
    (BackwardKernel::new(b.rules.clone()).expect("kernel"), b.rules, b.closed_form, b.origin)
}

fn within_time(start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    if t < budget {
        Ok(t)
    } else {
        Err(format!("runtime {t:.2?} exceeds {budget:.0?}"))
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn c1_origin_broadcast() -> Outcome {
    let start = Instant::now();
    let (q, _, _, origin) = kernel("origin-broadcast");
    let pi = solve_stationary(&q, SolverOptions::default()).map_err(err)?;
    let l1: f64 = (0..64).map(|i| (pi.get(StateId(i)) - 0.5f64.powi(i as i32 + 1)).abs()).sum();
    ensure!(l1 < 1e-9, "l1 error {l1:e} at window 64");
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let h = fair_entropy(&mu, mu.window()).map_err(err)?.value;
    ensure!((h - 2f64.ln()).abs() < 1e-9, "fair entropy {h} vs log 2");
    let policy = RecurrencePolicy { origin, ..Default::default() };
    let v = classify(&q, &policy, None).map_err(err)?;
    ensure!(v.class == RecurrenceClass::PositiveRecurrent, "classified {:?}", v.class);
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("l1 {l1:.1e}, entropy error {:.1e}, PositiveRecurrent, {t:.2?}", (h - 2f64.ln()).abs()))
}

fn c2_bruin_todd() -> Outcome {
    let start = Instant::now();
    let (q, _, _, _) = kernel("bruin-todd");
    let pi = solve_stationary(&q, SolverOptions::default()).map_err(err)?;
    let e = std::f64::consts::E;
    let mut fact = 1.0;
    let mut worst: f64 = 0.0;
    for j in 1..=30 {
        if j > 1 {
            fact *= (j - 1) as f64;
        }
        worst = worst.max((pi.get(StateId(j)) - 1.0 / (e * fact)).abs());
    }
    ensure!(worst < 1e-10, "max error {worst:e} on j <= 30");
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let h = fair_entropy(&mu, mu.window()).map_err(err)?.value;
    ensure!((h - 2.85053f64.ln()).abs() < 1e-4, "fair entropy {h} vs log 2.85053");
    let l = integral_log_c(&mu, &q, mu.window()).map_err(err)?.value;
    ensure!((l - h).abs() < 1e-3, "integral of log c {l} vs fair entropy {h}");
    // Σ_k log(k + 2) / (e k!), summed independently.
    let (mut series, mut term) = (0.0, 1.0 / e);
    for k in 0..60 {
        if k > 0 {
            term /= k as f64;
        }
        series += term * ((k + 2) as f64).ln();
    }
    ensure!((series - l).abs() < 1e-9, "series {series} vs integral {l}");
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("max pi error {worst:.1e}, entropy {h:.10}, log-c integral {l:.10}, {t:.2?}"))
}

fn c3_trichotomy() -> Outcome {
    let start = Instant::now();
    let (biased, ..) = kernel("biased-walk");
    let terms = series_test(&biased, StateId(0), 6, 64).map_err(err)?;
    let formula = |n: u64| -> BigRational {
        let f = |k: u64| fairmeasure::exact::factorial(k);
        BigRational::new(f(3 * n), f(2 * n) * f(n) * BigInt::from(2).pow(3 * n as u32))
    };
    for n in 1..=2u64 {
        ensure!(terms[3 * n as usize].value == formula(n), "(Q^{})_00 = {} vs formula {}", 3 * n, terms[3 * n as usize].value, formula(n));
    }
    ensure!(terms[3].value == rat(3, 8), "(Q^3)_00 = {}", terms[3].value);
    ensure!(terms[6].value == rat(15, 64), "(Q^6)_00 = {}", terms[6].value);
    let mut detail = Vec::new();
    for (name, expect) in [
        ("unbiased-walk", RecurrenceClass::NullRecurrent),
        ("biased-walk", RecurrenceClass::Transient),
        ("origin-broadcast", RecurrenceClass::PositiveRecurrent),
    ] {
        let (q, _, closed_form, origin) = kernel(name);
        let mut classes = Vec::new();
        for seed in 0..5 {
            let policy = RecurrencePolicy { origin, seed, trials: 100_000, ..Default::default() };
            classes.push(classify(&q, &policy, closed_form.as_ref()).map_err(err)?.class);
        }
        ensure!(classes.iter().all(|c| *c == expect), "{name}: seeds 0-4 gave {classes:?}, expected {expect:?}");
        detail.push(format!("{name} {expect:?}"));
    }
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "(Q^3)_00 = 3/8, (Q^6)_00 = 15/64 = 6!/(4!2!)/2^6 (45/512 does not satisfy this formula); {}; {t:.2?}",
        detail.join(", ")
    ))
}

fn c4_fairness_exactness() -> Outcome {
    let (q, m, cf, _) = kernel("origin-broadcast");
    let pi = solve_stationary_with(&q, SolverOptions::default(), cf.as_ref()).map_err(err)?;
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let c = check_fair_on_cylinders(&mu, &m, 4, IndexRange::new(0, 12)).map_err(err)?;
    ensure!(c.max_violation_exact == Some(BigRational::zero()), "origin-broadcast violation {:?}", c.max_violation_exact);
    let (q2, m2, cf2, _) = kernel("full-shift:2");
    let pi2 = solve_stationary_with(&q2, SolverOptions::default(), cf2.as_ref()).map_err(err)?;
    let mu2 = FairMeasure::new(pi2, &q2).map_err(err)?;
    let c2 = check_fair_on_cylinders(&mu2, &m2, 3, IndexRange::new(0, 1)).map_err(err)?;
    ensure!(c2.max_violation_exact == Some(BigRational::zero()), "2-shift violation {:?}", c2.max_violation_exact);
    let bern = FairMeasure::bernoulli(&[rat(1, 3), rat(2, 3)]);
    let c3 = check_fair_on_cylinders(&bern, &m2, 1, IndexRange::new(0, 1)).map_err(err)?;
    ensure!(c3.max_violation_exact == Some(rat(1, 6)), "Bernoulli violation {:?}", c3.max_violation_exact);
    Ok(format!("violations 0 ({} checks), 0 ({} checks), Bernoulli(1/3,2/3) 1/6", c.checks, c2.checks))
}

fn c5_backward_statistics() -> Outcome {
    let (q, _, cf, _) = kernel("origin-broadcast");
    let pi = solve_stationary_with(&q, SolverOptions::default(), cf.as_ref()).map_err(err)?;
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let path = sample_backward(&q, StateId(0), 1_000_000, 0).map_err(err)?;
    let stats = path_statistics(&path, &q, 1).map_err(err)?;
    let f0 = stats.visit_frequencies.get(&StateId(0)).copied().unwrap_or(0.0);
    ensure!((f0 - 0.5).abs() < 0.01, "state-0 frequency {f0}");
    let g = geo_mean_convergence(&path, &q, &mu).map_err(err)?;
    let last = *g.running.last().expect("nonempty");
    ensure!((last / 2.0 - 1.0).abs() < 0.01, "geometric mean {last}");

    let (uq, ..) = kernel("unbiased-walk");
    let upath = sample_backward(&uq, StateId(0), 100_000, 0).map_err(err)?;
    for s in &upath.states {
        ensure!(uq.column(*s).map_err(err)? == 2, "c({s}) != 2");
    }
    let means = running_geo_means(&upath, &uq).map_err(err)?;
    ensure!(means.iter().all(|m| (m - 2.0).abs() < 1e-9), "unbiased running mean departs from 2");

    let (bq, ..) = kernel("biased-walk");
    let paths = sample_paths(&bq, StateId(0), 1_000_000, 100, 0).map_err(err)?;
    let quiet = paths.iter().filter(|p| late_visits(p, StateId(0), 0.1) == 0).count();
    ensure!(quiet >= 95, "{quiet} of 100 biased paths avoid the origin in the last 10%");
    Ok(format!("freq(0) = {f0:.4}, geometric mean {last:.4}, unbiased c = 2 at every step, {quiet}/100 biased paths escape"))
}

fn c6_lebesgue_model() -> Outcome {
    let (q, _, cf, _) = kernel("bruin-todd");
    let pi = solve_stationary_with(&q, SolverOptions::default(), cf.as_ref()).map_err(err)?;
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let g = lebesgue_fair_model(&bruin_todd_map(rat(1, 2)).map_err(err)?, &mu, mu.window()).map_err(err)?;
    for p in &g.pieces {
        ensure!(p.slope == p.target.0 + 1, "piece onto {} has slope {}", p.target, p.slope);
    }
    let check = check_lebesgue_fair(&g, 2);
    ensure!(check.exact && check.max_violation_exact.as_deref() == Some("0"), "violation {:?}", check);
    let h = rohlin_entropy(&g).value;
    ensure!((h - 2.85053f64.ln()).abs() < 1e-3, "Rohlin entropy {h}");

    let (tq, _, tcf, _) = kernel("full-shift:2");
    let tpi = solve_stationary_with(&tq, SolverOptions::default(), tcf.as_ref()).map_err(err)?;
    let tmu = FairMeasure::new(tpi, &tq).map_err(err)?;
    let tg = lebesgue_fair_model(&tent(), &tmu, IndexRange::new(0, 1)).map_err(err)?;
    let breaks: BTreeSet<String> =
        tg.intervals.values().flat_map(|iv| [iv.lo.to_string(), iv.hi.to_string()]).collect();
    ensure!(breaks == BTreeSet::from(["0".into(), "0.5".into(), "1".into()]), "tent breakpoints {breaks:?}");
    for p in &tg.pieces {
        let inc = p.source == StateId(0);
        ensure!(p.slope == if inc { 2 } else { -2 }, "tent piece slope {}", p.slope);
        // The model agrees with x ↦ 2x on [0, ½] and 2 − 2x on [½, 1].
        let at = |x: f64| if inc { 2.0 * x } else { 2.0 - 2.0 * x };
        let (u, v) = if inc { (p.y, p.y_end) } else { (p.y_end, p.y) };
        ensure!(at(p.x) == u && at(p.x_end) == v, "tent piece {p:?}");
    }
    Ok(format!("{} pieces with slope j+1, exact violation 0, Rohlin entropy {h:.6}; tent reproduced", g.pieces.len()))
}

fn c7_graph_pipeline() -> Outcome {
    let spec = dendrite_example(12, rat(1, 2)).map_err(err)?;
    let m = refined_transition_matrix(&spec, None).map_err(err)?;
    let q = BackwardKernel::new(m).map_err(err)?;
    let pi = solve_stationary(&q, SolverOptions::default()).map_err(err)?;
    let mu = FairMeasure::new(pi, &q).map_err(err)?;
    let h_shift = fair_entropy(&mu, mu.window()).map_err(err)?.value;

    let model = cut_and_paste(&spec, None).map_err(err)?;
    let q2 = BackwardKernel::new(transition_matrix(&model.interval_map).map_err(err)?).map_err(err)?;
    let pi2 = solve_stationary(&q2, SolverOptions::default()).map_err(err)?;
    let mu2 = FairMeasure::new(pi2, &q2).map_err(err)?;
    let g = lebesgue_fair_model(&model.interval_map, &mu2, mu2.window()).map_err(err)?;
    let h_rohlin = rohlin_entropy(&g).value;

    let target = 2.85053f64.ln() + 2f64.ln();
    ensure!((h_shift - target).abs() < 1e-3, "shift-side entropy {h_shift} vs {target}");
    ensure!((h_rohlin - target).abs() < 1e-3, "Rohlin entropy {h_rohlin} vs {target}");
    ensure!((h_shift - h_rohlin).abs() < 1e-6, "pipelines differ by {:e}", (h_shift - h_rohlin).abs());
    Ok(format!(
        "{} refined states, shift side {h_shift:.9}, Rohlin {h_rohlin:.9}, target {target:.9}",
        model.states.len()
    ))
}

fn c8_five_three() -> Outcome {
    let (q, m, _, _) = kernel("five-three");
    let w = IndexRange::new(-40, 40);
    let v = StationaryVector::from_closed_form(&ClosedForm::Periodic { values: vec![5, 3] }, q.domain(), w);
    let r = verify_stationary_exact(&v, &q, w).map_err(err)?;
    ensure!(r == Some(BigRational::zero()), "interior residual {r:?}");
    let solved = solve_stationary(&q, SolverOptions::default());
    ensure!(matches!(solved, Err(FairError::NoSummableSolution(_))), "solver returned {solved:?}");
    let atoms = find_atomic_fair_measures(&m, 16, 64).map_err(err)?;
    ensure!(atoms.is_empty(), "atoms {atoms:?}");
    let (verdict, _) = fair_measure_verdict(&m, SolverOptions::default(), None, 16).map_err(err)?;
    ensure!(matches!(verdict, FairVerdict::NoFairMeasure { .. }), "verdict {verdict:?}");
    Ok("residual 0, NoSummableSolution, no atoms, no fair measure".into())
}

fn random_word(m: &TransitionRuleSet, window: IndexRange, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let len = rng.random_range(1..=12);
    let mut w = vec![rng.random_range(window.lo..=window.hi)];
    while w.len() < len {
        let row = m.row(StateId(*w.last().expect("nonempty"))).expect("row").within(window);
        w.push(row[rng.random_range(0..row.len())].0);
    }
    w
}

fn disjoint_and_conjugate(map: &MarkovIntervalMap, window: IndexRange, seed: u64) -> Result<usize, String> {
    let m = transition_matrix(map).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<Vec<i64>> = (0..200).map(|_| random_word(&m, window, &mut rng)).collect();
    let mut cache = std::collections::HashMap::new();
    let mut pairs = 0;
    for w in &words {
        ensure!(conjugacy_overlap(map, w).map_err(err)?, "{}: enclosures of {w:?} do not overlap", map.name);
    }
    for a in 0..words.len() {
        for b in a + 1..words.len() {
            let n = words[a].len().min(words[b].len());
            let (u, v) = (&words[a][..n], &words[b][..n]);
            if u == v {
                continue;
            }
            let mut cylinder = |w: &[i64]| -> Result<(BigRational, BigRational), String> {
                if let Some(c) = cache.get(w) {
                    return Ok(Clone::clone(c));
                }
                let c = map.cylinder_interval(w).map_err(err)?;
                cache.insert(w.to_vec(), (c.lo.clone(), c.hi.clone()));
                Ok((c.lo, c.hi))
            };
            let ((ulo, uhi), (vlo, vhi)) = (cylinder(u)?, cylinder(v)?);
            ensure!(uhi <= vlo || vhi <= ulo, "{}: cylinders {u:?} and {v:?} overlap", map.name);
            pairs += 1;
        }
    }
    Ok(pairs)
}

fn c9_conjugacy() -> Outcome {
    let tent_pairs = disjoint_and_conjugate(&tent(), IndexRange::new(0, 1), 0)?;
    let bt_pairs = disjoint_and_conjugate(&bruin_todd_map(rat(1, 2)).map_err(err)?, IndexRange::new(1, 12), 1)?;
    for (map_name, chain_name) in MAP_NAMES {
        let a = transition_matrix(&map_by_name(map_name).map_err(err)?).map_err(err)?;
        let b = builtins::by_name(chain_name).map_err(err)?.rules;
        let w = if a.domain().lower().is_none() { IndexRange::new(-4, 4) } else { b.window(9) };
        ensure!(a.dense(w).map_err(err)? == b.dense(w).map_err(err)?, "{map_name} differs from {chain_name}");
    }
    Ok(format!("400 words, {} disjoint cylinder pairs, enclosures overlap, 3 matrices agree", tent_pairs + bt_pairs))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("stationary vector, entropy and class of origin-broadcast", c1_origin_broadcast),
        ("Bruin-Todd stationary vector and entropy", c2_bruin_todd),
        ("recurrence trichotomy", c3_trichotomy),
        ("exact fairness on cylinders", c4_fairness_exactness),
        ("backward-trajectory statistics", c5_backward_statistics),
        ("Lebesgue fair model", c6_lebesgue_model),
        ("graph pipeline", c7_graph_pipeline),
        ("5x/-3x example", c8_five_three),
        ("symbolic conjugacy", c9_conjugacy),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("{label}: PASS [{:.2?}] {detail}", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("{label}: FAIL [{:.2?}] {why}", start.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
