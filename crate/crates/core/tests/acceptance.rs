//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so every line is
//! printed in order.

use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use grwm::cli::report::to_json;
use grwm::cli::run::run;
use grwm::cli::{Scenario, ScenarioConfig};
use grwm::counting::{consistent, couple, CouplingSpec};
use grwm::fuzzylink::{critical_n, enumeration_report, FuzzyParams};
use grwm::grw::{localized, outcome_probabilities};
use grwm::massdensity::{box_mass_report, ggb_states, mass_report, AccessibilityParams};
use grwm::state::{
    product_state, ConfigKey, FactorizedState, Layout, MarbleCoeffs, Site, WaveFunction,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn report_line(id: u32, name: &str, budget: Duration, job: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = job();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    let status = if pass { "PASS" } else { "FAIL" };
    let timing = format!(
        "{:.2}s of {:.0}s",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    let timing = if in_time {
        timing
    } else {
        format!("{timing}, over budget")
    };
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "criterion {id:>2} {status}  {name}: {} [{timing}]",
        v.detail
    )
    .unwrap();
    out.flush().unwrap();
    pass
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> MarbleCoeffs {
    let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let b = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    MarbleCoeffs::new(a / norm, b / norm).unwrap()
}

fn expansion_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0u64;
    for draw in 0..100 {
        let n = 1 + draw % 12;
        let coeffs = random_coeffs(&mut rng);
        let wf = product_state(&vec![coeffs; n]).unwrap();
        for key in 0u64..1 << n {
            let k = key.count_ones();
            // a^(n-k) b^k by repeated multiplication.
            let mut expected = Complex64::new(1.0, 0.0);
            for _ in 0..n as u32 - k {
                expected *= coeffs.a();
            }
            for _ in 0..k {
                expected *= coeffs.b();
            }
            worst = worst.max((wf.amplitude_at(ConfigKey(key)) - expected).norm());
            checked += 1;
        }
    }
    verdict(
        worst <= 1e-12,
        format!("{checked} amplitudes, max deviation {worst:.2e}"),
    )
}

fn anomaly_onset() -> Verdict {
    let fuzzy = FuzzyParams::new(0.1).unwrap();
    // Incremental search: multiply in one marble at a time.
    let mut oracle = None;
    let mut mass = 1.0;
    for n in 1..=100u64 {
        mass *= 0.99;
        if mass < 0.9 {
            oracle = Some(n);
            break;
        }
    }
    let computed = critical_n(0.99, fuzzy).unwrap();
    let coeffs = MarbleCoeffs::from_in_probability(0.99).unwrap();
    let mut wrong = Vec::new();
    for n in 1..=50usize {
        let flagged = enumeration_report(&FactorizedState::uniform(coeffs, n).unwrap(), fuzzy)
            .unwrap()
            .anomaly;
        let dense_ok = n > 14
            || enumeration_report(&product_state(&vec![coeffs; n]).unwrap(), fuzzy)
                .unwrap()
                .anomaly
                == flagged;
        if flagged != (n >= 11) || !dense_ok {
            wrong.push(n);
        }
    }
    verdict(
        computed == Some(11) && oracle == Some(11) && wrong.is_empty(),
        format!(
            "critical_n = {computed:?}, incremental search = {oracle:?}, grid mismatches {wrong:?}"
        ),
    )
}

fn ggb_reproduction() -> Verdict {
    let access = AccessibilityParams::default();
    let mut failures = Vec::new();
    for n in (2..=16).step_by(2) {
        for m in [1.0, 2.5] {
            let (plus, split, grid) = ggb_states(n, m).unwrap();
            let half = n as f64 * m / 2.0;
            for (label, wf, ratio) in [("superposed", &plus, 1.0), ("split", &split, 0.0)] {
                let report = mass_report(wf, &grid, access).unwrap();
                for (cell, c) in &report.cells {
                    if c.expected != half || c.ratio != ratio {
                        failures.push(format!(
                            "{label} N={n} m={m} {cell}: M={} R={}",
                            c.expected, c.ratio
                        ));
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "M = Nm/2 in both regions, R = 1 superposed, R = 0 split, for N = 2..16".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn trilemma() -> Verdict {
    // Integer oracle: with |a|^2 = 99/100 the deficit is n/100 marbles.
    let oracle = (1u64..).find(|&n| n >= 1000 * 100).unwrap();
    let coeffs = MarbleCoeffs::from_in_probability(0.99).unwrap();
    let at_n = box_mass_report(coeffs, oracle, 1.0, 1000.0).unwrap();
    let min_n = at_n.min_n_for_deficit;
    let exact = at_n.in_box_expected == (oracle - 1000) as f64;
    verdict(
        min_n == Some(100_000) && oracle == 100_000 && exact,
        format!(
            "min n = {min_n:?}, in-box mass at that n = {} (m(n-1000) = {})",
            at_n.in_box_expected,
            oracle - 1000
        ),
    )
}

fn random_state(rng: &mut ChaCha8Rng) -> WaveFunction {
    let n = rng.random_range(1..=8usize);
    let coupled = n <= 6 && rng.random_bool(0.3);
    let layout = if coupled {
        Layout::coupled(n)
    } else {
        Layout::marbles_only(n)
    };
    let mut entries = Vec::new();
    for key in 0u64..1 << n {
        if rng.random_bool(0.25) {
            continue;
        }
        let mut config = layout.decode(ConfigKey(key));
        if coupled {
            config.register_readings = Some(
                (0..n)
                    .map(|_| Site::from_index(rng.random_range(0..2)).unwrap())
                    .collect(),
            );
            config.pointer = Some(rng.random_range(0..=n));
        }
        let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        entries.push((config, amp));
    }
    if entries.is_empty() {
        entries.push((layout.decode(ConfigKey(0)), Complex64::new(1.0, 0.0)));
    }
    WaveFunction::from_unnormalized(layout, entries).unwrap()
}

fn martingale() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..100 {
        let wf = random_state(&mut rng);
        let before: Vec<(ConfigKey, f64)> = wf.probabilities().collect();
        for sub in wf.layout().subsystems() {
            for tail in [0.0, 0.1, 0.5] {
                let probs = outcome_probabilities(&wf, sub, tail).unwrap();
                let mut averaged = vec![0.0; before.len()];
                for (outcome, &p) in probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let after = localized(&wf, sub, outcome, tail).unwrap();
                    let total = after.norm_sqr();
                    for (slot, (key, _)) in averaged.iter_mut().zip(&before) {
                        *slot += p * after.amplitude_at(*key).norm_sqr() / total;
                    }
                }
                for (avg, (_, b)) in averaged.iter().zip(&before) {
                    worst = worst.max((avg - b).abs());
                }
                cases += 1;
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("{cases} (state, subsystem, t) cases, max deviation {worst:.2e}"),
    )
}

fn config(scenario: Scenario, edit: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut c = ScenarioConfig::defaults(scenario);
    c.seed = Some(20_240_601);
    edit(&mut c);
    c.validate().unwrap();
    c
}

fn report(c: &ScenarioConfig) -> (String, Value) {
    let value = run(c).unwrap();
    (to_json(&value), value)
}

fn num(v: &Value, path: &str) -> f64 {
    path.split('.')
        .fold(v, |v, k| &v[k])
        .as_f64()
        .unwrap_or_else(|| panic!("{path} is not a number"))
}

fn collapse_statistics() -> ScenarioConfig {
    config(Scenario::Evolve, |c| {
        c.n = 20;
        c.a_sq = 0.99;
        c.t = 0.0;
        // 20 expected hits per marble at 1e5 s^-1.
        c.duration_s = 2e-4;
        c.trials = 10_000;
    })
}

fn timescale() -> ScenarioConfig {
    config(Scenario::Evolve, |c| {
        c.n = 10;
        c.a_sq = 0.99;
        c.t = 0.0;
        c.delta = 0.01;
        c.duration_s = 1e-3;
        c.trials = 1000;
    })
}

fn suppression(t: f64) -> ScenarioConfig {
    config(Scenario::Count, |c| {
        c.n = 25;
        c.a_sq = 0.99;
        c.p = 0.1;
        c.t = t;
        c.delta = 0.1;
        c.trials = 1000;
    })
}

fn imperfect() -> ScenarioConfig {
    config(Scenario::Count, |c| {
        c.n = 10;
        c.a_sq = 0.99;
        c.eta = 0.05;
        c.trials = 1000;
    })
}

fn check_collapse_statistics(v: &Value) -> Verdict {
    let p = 0.99f64.powi(20);
    let trials = num(v, "result.trials");
    let freq = num(v, "result.all_in_fraction");
    let sigma = (p * (1.0 - p) / trials).sqrt();
    let mean_hits = num(v, "result.mean_events") / 20.0;
    verdict(
        (freq - p).abs() <= 3.0 * sigma && mean_hits >= 20.0 * 0.99,
        format!(
            "all-IN fraction {freq:.5} vs {p:.5} ({:.2} sigma), {mean_hits:.1} hits per marble",
            (freq - p) / sigma
        ),
    )
}

fn check_timescale(v: &Value) -> Verdict {
    let median = num(v, "result.collapse_time.median");
    let samples = num(v, "result.collapse_time.samples");
    verdict(
        (1e-7..=1e-5).contains(&median) && samples == num(v, "result.trials"),
        format!(
            "median collapse time {median:.3e} s over {samples} trajectories (window 1e-7..1e-5 s)"
        ),
    )
}

fn check_suppression(t: f64, v: &Value) -> (bool, String) {
    let pre = v["result"]["pre_report"]["anomaly"] == Value::Bool(true);
    let agreement = num(v, "result.agreement_rate");
    let post = num(v, "result.post_anomaly_rate");
    let collapsed = num(v, "result.collapsed");
    let seed = num(v, "result.master_seed");
    let bad = v["result"]["counterexample_trials"]
        .as_array()
        .unwrap()
        .clone();
    let pass = pre && agreement == 1.0 && post == 0.0 && bad.is_empty() && collapsed > 0.0;
    let mut detail = format!(
        "t={t}: pre anomaly {pre}, {collapsed} of 1000 collapsed, agreement {agreement}, post anomaly {post}"
    );
    if !bad.is_empty() {
        detail.push_str(&format!(
            ", counterexamples (master seed {seed}, trial) {bad:?}"
        ));
    }
    (pass, detail)
}

fn check_imperfect(v: &Value) -> Verdict {
    // Branch-weight oracle: weight of coupled configurations whose pointer
    // disagrees with the register count.
    let coeffs = MarbleCoeffs::from_in_probability(0.99).unwrap();
    let coupled = couple(
        &product_state(&[coeffs; 10]).unwrap(),
        CouplingSpec::imperfect(0.05).unwrap(),
    )
    .unwrap();
    let total = coupled.norm_sqr();
    let predicted: f64 = coupled
        .iter()
        .filter(|(c, _)| !consistent(c).unwrap())
        .map(|(_, a)| a.norm_sqr() / total)
        .sum();
    let collapsed = num(v, "result.collapsed");
    let miscount = num(v, "result.miscount_rate");
    let manifest = num(v, "result.anomaly_manifest_rate");
    let sigma = (predicted * (1.0 - predicted) / collapsed).sqrt();
    verdict(
        (miscount - predicted).abs() <= 3.0 * sigma && manifest == 0.0,
        format!(
            "miscount {miscount:.4} vs oracle {predicted:.4} ({:.2} sigma over {collapsed} collapsed), manifest anomaly rate {manifest}",
            (miscount - predicted) / sigma
        ),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let mut failed = Vec::new();
    let mut record = |id: u32, pass: bool| {
        if !pass {
            failed.push(id);
        }
    };

    record(
        1,
        report_line(1, "expansion amplitudes", secs(5), expansion_equivalence),
    );
    record(2, report_line(2, "anomaly onset", secs(1), anomaly_onset));
    record(
        3,
        report_line(3, "two-region mass density", secs(1), ggb_reproduction),
    );
    record(
        4,
        report_line(4, "box deficit arithmetic", secs(1), trilemma),
    );
    record(5, report_line(5, "martingale", secs(10), martingale));

    let mut first_reports: Vec<(ScenarioConfig, String)> = Vec::new();
    let mut keep = |c: ScenarioConfig, text: String| first_reports.push((c, text));

    let c6 = collapse_statistics();
    record(
        6,
        report_line(6, "collapse statistics", secs(60), || {
            let (text, v) = report(&c6);
            keep(c6.clone(), text);
            check_collapse_statistics(&v)
        }),
    );

    let c7 = timescale();
    record(
        7,
        report_line(7, "collapse timescale", secs(30), || {
            let (text, v) = report(&c7);
            keep(c7.clone(), text);
            check_timescale(&v)
        }),
    );

    record(
        8,
        report_line(8, "suppression after collapse", secs(60), || {
            let mut pass = true;
            let mut details = Vec::new();
            for t in [0.0, 0.1] {
                let c = suppression(t);
                let (text, v) = report(&c);
                keep(c, text);
                let (ok, detail) = check_suppression(t, &v);
                pass &= ok;
                details.push(detail);
            }
            verdict(pass, details.join("; "))
        }),
    );

    let c9 = imperfect();
    record(
        9,
        report_line(9, "imperfect pointer", secs(60), || {
            let (text, v) = report(&c9);
            keep(c9.clone(), text);
            check_imperfect(&v)
        }),
    );

    record(
        10,
        report_line(10, "determinism", secs(300), || {
            let differing: Vec<String> = first_reports
                .iter()
                .filter(|(c, text)| &report(c).0 != text)
                .map(|(c, _)| format!("{} n={} t={}", c.scenario, c.n, c.t))
                .collect();
            verdict(
                differing.is_empty() && first_reports.len() == 5,
                format!(
                    "{} reports re-run, differing: {differing:?}",
                    first_reports.len()
                ),
            )
        }),
    );

    let mut out = std::io::stdout().lock();
    if failed.is_empty() {
        writeln!(out, "acceptance: all 10 criteria passed").unwrap();
    } else {
        writeln!(out, "acceptance: failed criteria {failed:?}").unwrap();
        drop(out);
        std::process::exit(1);
    }
}
