//! Scenario execution.

use serde_json::Value;

use super::config::{Scenario, ScenarioConfig};
use super::report::{opt_float, Obj, SCHEMA_VERSION};
use crate::counting::{
    predicted_miscount, CollapseTimeStats, CouplingSpec, Experiment, ExperimentReport,
};
use crate::error::Result;
use crate::fuzzylink::{critical_n, enumeration_report, AnomalyReport, FuzzyParams};
use crate::grw::{collapsed, ensemble, evolve_seeded, EvolveOptions, HitParams, Trajectory};
use crate::massdensity::{
    box_mass_report, ggb_states, mass_report, product_mass_summary, AccessibilityParams, CellMass,
    MassReport,
};
use crate::state::{Configuration, FactorizedState, MarbleCoeffs, Site};

/// Builds the full report for a validated config.
pub fn run(config: &ScenarioConfig) -> Result<Value> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .expect("thread pool construction");
    let result = pool.install(|| match config.scenario {
        Scenario::Anomaly => anomaly(config),
        Scenario::Mass => mass(config),
        Scenario::Ggb => ggb(config),
        Scenario::Evolve => evolve(config),
        Scenario::Count => count(config),
    })?;
    let embedded: serde_json::Map<String, Value> = config
        .to_map()
        .into_iter()
        .map(|(k, v)| (k, Value::String(v)))
        .collect();
    Ok(Obj::new()
        .put("schema_version", SCHEMA_VERSION)
        .put("scenario", config.scenario.as_str())
        .put("config", Value::Object(embedded))
        .put("result", result)
        .build())
}

fn coeffs(config: &ScenarioConfig) -> Result<MarbleCoeffs> {
    MarbleCoeffs::from_in_probability(config.a_sq)
}

fn hit_params(config: &ScenarioConfig) -> Result<HitParams> {
    HitParams::new(config.t, config.lambda_particle, config.constituents)
}

fn critical(config: &ScenarioConfig, fuzzy: FuzzyParams) -> Result<Option<u64>> {
    if config.a_sq < 1.0 {
        critical_n(config.a_sq, fuzzy)
    } else {
        Ok(None)
    }
}

fn anomaly_json(r: &AnomalyReport) -> Obj {
    let min_single = r
        .per_marble_mass
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Obj::new()
        .put("anomaly", r.anomaly)
        .f("conjunction_mass", r.conjunction_mass)
        .put("conjunction_holds", r.conjunction_holds)
        .f("min_single_claim_mass", min_single)
        .put(
            "single_claims_holding",
            r.per_marble_holds.iter().filter(|&&h| h).count(),
        )
}

fn anomaly(config: &ScenarioConfig) -> Result<Value> {
    let fuzzy = FuzzyParams::new(config.p)?;
    let state = FactorizedState::uniform(coeffs(config)?, config.n as usize)?;
    let report = enumeration_report(&state, fuzzy)?;
    Ok(anomaly_json(&report)
        .put("n", config.n)
        .f("threshold", fuzzy.threshold())
        .put("critical_n", critical(config, fuzzy)?)
        .build())
}

fn cell_json(c: &CellMass) -> Value {
    Obj::new()
        .f("expected", c.expected)
        .f("variance", c.variance)
        .f("ratio", c.ratio)
        .put("accessible", c.accessible)
        .build()
}

fn mass(config: &ScenarioConfig) -> Result<Value> {
    let coeffs = coeffs(config)?;
    let fuzzy = FuzzyParams::new(config.p)?;
    let access = AccessibilityParams::new(config.epsilon)?;
    let boxed = box_mass_report(coeffs, config.n, config.mass, config.deficit * config.mass)?;
    let summary = product_mass_summary(coeffs, config.n, config.mass, fuzzy, access)?;
    Ok(Obj::new()
        .put("n", config.n)
        .f("in_box_expected", boxed.in_box_expected)
        .f("deficit", boxed.deficit)
        .f("deficit_target", boxed.deficit_target)
        .put("min_n_for_deficit", boxed.min_n_for_deficit)
        .put("box_cell", cell_json(&summary.box_cell))
        .put("per_marble_cell", cell_json(&summary.per_marble_cell))
        .f("joint_all_in", summary.joint_all_in)
        .put("per_marble_claim_holds", summary.per_marble_claim_holds)
        .put("conjunction_holds", summary.conjunction_holds)
        .put("critical_n", critical(config, fuzzy)?)
        .build())
}

fn mass_report_json(r: &MassReport) -> Value {
    let mut cells = Obj::new();
    for (name, cell) in &r.cells {
        cells = cells.put(name, cell_json(cell));
    }
    cells.build()
}

fn ggb(config: &ScenarioConfig) -> Result<Value> {
    let access = AccessibilityParams::new(config.epsilon)?;
    let (superposed, split, grid) = ggb_states(config.n as usize, config.mass)?;
    Ok(Obj::new()
        .put("n", config.n)
        .put(
            "superposed",
            mass_report_json(&mass_report(&superposed, &grid, access)?),
        )
        .put(
            "split",
            mass_report_json(&mass_report(&split, &grid, access)?),
        )
        .build())
}

fn out_marbles(config: &Configuration) -> Vec<usize> {
    config
        .marble_sites
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == Site::Out)
        .map(|(i, _)| i)
        .collect()
}

fn collapse_stats_json(stats: Option<CollapseTimeStats>) -> Value {
    match stats {
        None => Value::Null,
        Some(s) => Obj::new()
            .f("median", s.median)
            .f("p90", s.p90)
            .put("samples", s.samples)
            .build(),
    }
}

fn trajectory_json(tr: &Trajectory<FactorizedState>, delta: f64) -> Value {
    let events: Vec<Value> = tr
        .events
        .iter()
        .map(|e| {
            Obj::new()
                .f("time", e.time)
                .put("subsystem", e.subsystem.to_string())
                .put("outcome", e.outcome)
                .build()
        })
        .collect();
    let (dominant, probability) = tr.final_state.dominant_config();
    Obj::new()
        .put("events", events)
        .put("dominant_out_marbles", out_marbles(&dominant))
        .f("dominant_probability", probability)
        .put("collapsed", collapsed(&tr.final_state, delta))
        .put("first_collapse", opt_float(tr.first_collapse))
        .build()
}

fn evolve(config: &ScenarioConfig) -> Result<Value> {
    let state = FactorizedState::uniform(coeffs(config)?, config.n as usize)?;
    let params = hit_params(config)?;
    let master = config.seed.expect("validated");
    let options = EvolveOptions {
        record_snapshots: false,
        collapse_delta: Some(config.delta),
        stop_when_collapsed: false,
    };
    let runs = ensemble(master, config.trials, |seed| {
        evolve_seeded(&state, config.duration_s, &params, options, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<(bool, bool, usize)> = runs
        .iter()
        .map(|tr| {
            let (dominant, _) = tr.final_state.dominant_config();
            (
                dominant.in_count() == dominant.n(),
                collapsed(&tr.final_state, config.delta),
                tr.events.len(),
            )
        })
        .collect();
    let trials = runs.len() as f64;
    let frac = |pick: fn(&(bool, bool, usize)) -> bool| {
        summaries.iter().filter(|s| pick(s)).count() as f64 / trials
    };
    let times = runs.iter().filter_map(|tr| tr.first_collapse).collect();
    Ok(Obj::new()
        .put("n", config.n)
        .f("rate_per_marble", params.effective_rate())
        .put("trials", config.trials)
        .f("all_in_fraction", frac(|s| s.0))
        .f("collapsed_fraction", frac(|s| s.1))
        .f(
            "mean_events",
            summaries.iter().map(|s| s.2 as f64).sum::<f64>() / trials,
        )
        .put(
            "collapse_time",
            collapse_stats_json(CollapseTimeStats::from_times(times)),
        )
        .put("trajectory_0", trajectory_json(&runs[0], config.delta))
        .build())
}

pub fn experiment_json(r: &ExperimentReport) -> Obj {
    Obj::new()
        .put("n", r.n)
        .put("pre_report", anomaly_json(&r.pre_report))
        .put("critical_n", r.critical_n)
        .put("trials", r.trials)
        .put("collapsed", r.collapsed)
        .put("non_collapsed", r.non_collapsed)
        .put("agreement_rate", opt_float(r.agreement_rate))
        .put("miscount_rate", opt_float(r.miscount_rate))
        .put("post_anomaly_rate", opt_float(r.post_anomaly_rate))
        .put("dominant_anomaly_rate", opt_float(r.dominant_anomaly_rate))
        .put("anomaly_manifest_rate", opt_float(r.anomaly_manifest_rate))
        .put("readout_mismatches", r.readout_mismatches)
        .put("uncollapsed_anomalies", r.uncollapsed_anomalies)
        .put("collapse_time", collapse_stats_json(r.collapse_time))
        .f("mean_events", r.mean_events)
        .put("master_seed", r.master_seed)
        .put("counterexample_trials", r.counterexamples.clone())
}

fn count(config: &ScenarioConfig) -> Result<Value> {
    let coupling = if config.eta == 0.0 {
        CouplingSpec::perfect()
    } else {
        CouplingSpec::imperfect(config.eta)?
    };
    let experiment = Experiment {
        n: config.n as usize,
        coeffs: coeffs(config)?,
        fuzzy: FuzzyParams::new(config.p)?,
        hits: hit_params(config)?,
        coupling,
        duration: config.duration_s,
        trials: config.trials,
        master_seed: config.seed.expect("validated"),
        delta: config.delta,
    };
    let report = experiment.run()?;
    let predicted = predicted_miscount(experiment.coeffs, experiment.n, coupling)?;
    Ok(experiment_json(&report)
        .f("predicted_miscount", predicted)
        .put("seed_stream", "chacha8, stream = trial index")
        .put("perfect_coupling", coupling.is_perfect())
        .build())
}
