use grwm::counting::{consistent, couple, couple_factorized, CouplingSpec, Experiment};
use grwm::fuzzylink::FuzzyParams;
use grwm::grw::{collapse_time, collapsed, ensemble, evolve_seeded, EvolveOptions, HitParams};
use grwm::state::{product_state, FactorizedState, MarbleCoeffs};
use proptest::prelude::*;

fn coeffs(a_sq: f64) -> MarbleCoeffs {
    MarbleCoeffs::from_in_probability(a_sq).unwrap()
}

#[test]
fn doubling_the_rate_halves_the_median_collapse_time() {
    let state = FactorizedState::uniform(coeffs(0.99), 10).unwrap();
    let base = HitParams::new(0.0, 1e-16, 1e21).unwrap();
    let fast = base.scaled(2.0).unwrap();
    let trials = 1000;
    let times = |params: HitParams, master: u64| -> Vec<f64> {
        ensemble(master, trials, |seed| {
            collapse_time(&state, &params, 0.01, 1.0, &mut seed.rng())
                .unwrap()
                .unwrap()
        })
    };
    let mut slow_times = times(base, 1);
    slow_times.sort_by(f64::total_cmp);
    let slow_median = slow_times[trials as usize / 2];
    // Under halving, half of the fast times fall below slow_median / 2.
    let below = times(fast, 2)
        .iter()
        .filter(|&&t| t < slow_median / 2.0)
        .count() as f64;
    let sigma = (2.0 * trials as f64 * 0.25).sqrt();
    assert!(
        (below - trials as f64 / 2.0).abs() < 3.0 * sigma,
        "{below} of {trials}"
    );
}

#[test]
fn long_evolution_collapses() {
    // Rate 1e5 per marble for 3e-4 s: 30 expected hits per marble.
    let state = FactorizedState::uniform(coeffs(0.99), 10).unwrap();
    let params = HitParams::new(0.01, 1e-16, 1e21).unwrap();
    let results = ensemble(17, 1000, |seed| {
        let tr = evolve_seeded(&state, 3e-4, &params, EvolveOptions::default(), seed).unwrap();
        collapsed(&tr.final_state, 0.01)
    });
    let rate = results.iter().filter(|&&c| c).count() as f64 / results.len() as f64;
    assert!(rate >= 0.99, "{rate}");
}

#[test]
fn perfect_coupling_is_consistent_on_every_branch() {
    for n in [1usize, 5, 12, 20] {
        let coupled = couple(
            &product_state(&vec![coeffs(0.7); n]).unwrap(),
            CouplingSpec::perfect(),
        )
        .unwrap();
        assert_eq!(coupled.support_len(), 1 << n);
        assert!(
            coupled.iter().all(|(c, _)| consistent(&c).unwrap()),
            "n = {n}"
        );
        assert!((coupled.norm_sqr() - 1.0).abs() < 1e-12);
    }
    // Factorized path: the pointer only has weight where it equals the count.
    for n in [25usize, 200] {
        let state = couple_factorized(
            FactorizedState::uniform(coeffs(0.7), n).unwrap(),
            CouplingSpec::perfect(),
        )
        .unwrap();
        let h = state.pointer_amplitudes().unwrap();
        for (k, row) in h.iter().enumerate() {
            for (j, amp) in row.iter().enumerate() {
                assert!(j == k || amp.norm() == 0.0);
            }
        }
    }
}

fn experiment(n: usize, tail: f64, seed: u64) -> Experiment {
    Experiment {
        n,
        coeffs: coeffs(0.99),
        fuzzy: FuzzyParams::default(),
        hits: HitParams::new(tail, 1e-16, 1e21).unwrap(),
        coupling: CouplingSpec::perfect(),
        duration: 2e-4,
        trials: 60,
        master_seed: seed,
        delta: 0.1,
    }
}

#[test]
fn agreement_is_exact_across_tails() {
    for tail in [0.0, 0.05, 0.1, 0.2] {
        let report = experiment(14, tail, 5).run().unwrap();
        assert!(report.pre_report.anomaly);
        assert!(report.collapsed > 0);
        assert_eq!(report.agreement_rate, Some(1.0), "t = {tail}");
        assert_eq!(report.post_anomaly_rate, Some(0.0), "t = {tail}");
        assert_eq!(report.readout_mismatches, 0);
        assert!(report.counterexamples.is_empty());
    }
}

#[test]
fn short_runs_are_reported_as_non_collapsed() {
    let mut exp = experiment(14, 0.01, 3);
    exp.duration = 0.0;
    let report = exp.run().unwrap();
    assert_eq!(report.non_collapsed, report.trials);
    assert_eq!(report.agreement_rate, None);
    assert_eq!(report.uncollapsed_anomalies, report.trials);
}

#[test]
fn report_is_reproducible() {
    let a = experiment(13, 0.1, 77).run().unwrap();
    let b = experiment(13, 0.1, 77).run().unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perfect_branches_always_agree(a_sq in 0.05f64..0.95, n in 1usize..9) {
        let coupled = couple(&product_state(&vec![coeffs(a_sq); n]).unwrap(), CouplingSpec::perfect()).unwrap();
        prop_assert!(coupled.iter().all(|(c, _)| consistent(&c).unwrap()));
    }

    #[test]
    fn trials_keep_unit_norm(seed in 0u64..1000, tail in 0.0f64..0.5) {
        let state = couple_factorized(FactorizedState::uniform(coeffs(0.9), 6).unwrap(), CouplingSpec::imperfect(0.1).unwrap()).unwrap();
        let params = HitParams::new(tail, 1e-16, 1e21).unwrap();
        let tr = evolve_seeded(&state, 5e-5, &params, EvolveOptions::default(), grwm::grw::TrajectorySeed::new(seed, 0)).unwrap();
        let dense = tr.final_state.to_wavefunction().unwrap();
        prop_assert!((dense.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
