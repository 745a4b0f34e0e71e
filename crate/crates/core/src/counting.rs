//! Register coupling and the anomaly-suppression experiment.
//!
//! Each marble is copied into its own register and a pointer records how many
//! marbles are IN. The coupled state then evolves under hits on marbles,
//! registers and pointer alike; registers and pointer are read off the
//! collapsed state and the enumeration check is repeated on it.

use num_complex::Complex64;
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{check_range, Error, Result};
use crate::fuzzylink::{
    critical_n, enumeration_report, enumeration_report_for, AnomalyReport, FuzzyParams,
};
use crate::grw::{
    collapsed, ensemble, evolve_seeded, EvolveOptions, HitParams, Localizable, TrajectorySeed,
};
use crate::state::{
    ConfigKey, Configuration, FactorizedState, Layout, MarbleCoeffs, MarbleDistribution, Site,
    Subsystem, WaveFunction,
};

/// How faithfully the pointer registers the count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    eta: f64,
}

impl CouplingSpec {
    pub fn perfect() -> Self {
        Self { eta: 0.0 }
    }

    /// Pointer displaced by one unit, up or down, with total weight `eta`.
    pub fn imperfect(eta: f64) -> Result<Self> {
        check_range("eta", eta, (0.0..1.0).contains(&eta), "[0, 1)")?;
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn is_perfect(&self) -> bool {
        self.eta == 0.0
    }

    /// Pointer amplitude `h[k][j]` for reading `j` when `k` marbles are IN.
    ///
    /// Row `k` has weight `1 - eta` on `k` and `eta / 2` on each neighbor that
    /// exists, rescaled to unit norm so the marble distribution is untouched.
    pub fn pointer_matrix(&self, n: usize) -> Vec<Vec<Complex64>> {
        (0..=n)
            .map(|k| {
                let mut row = vec![0.0; n + 1];
                row[k] = 1.0 - self.eta;
                if self.eta > 0.0 {
                    if k > 0 {
                        row[k - 1] = self.eta / 2.0;
                    }
                    if k < n {
                        row[k + 1] = self.eta / 2.0;
                    }
                }
                let total: f64 = row.iter().sum();
                row.iter()
                    .map(|w| Complex64::new((w / total).sqrt(), 0.0))
                    .collect()
            })
            .collect()
    }

    /// Probability that the pointer misreads a count of `k` out of `n`.
    pub fn miss_probability(&self, n: usize, k: usize) -> f64 {
        let row = &self.pointer_matrix(n)[k];
        1.0 - row[k].norm_sqr()
    }
}

/// Couples a marble-only sparse state to registers and pointer.
pub fn couple(wf: &WaveFunction, spec: CouplingSpec) -> Result<WaveFunction> {
    let from = wf.layout();
    if from.has_registers() {
        return Err(Error::AlreadyCoupled);
    }
    let n = from.marbles();
    let layout = Layout::coupled(n);
    let h = spec.pointer_matrix(n);
    let shift = layout.pointer_shift();
    wf.remap(layout, |key, amp| {
        let k = n - key.0.count_ones() as usize;
        h[k].iter()
            .enumerate()
            .filter(|(_, hk)| hk.norm_sqr() > 0.0)
            .map(|(j, hk)| {
                (
                    ConfigKey(key.0 | key.0 << n | (j as u64) << shift),
                    amp * hk,
                )
            })
            .collect()
    })
}

/// Couples a marble-only factorized state to registers and pointer.
pub fn couple_factorized(state: FactorizedState, spec: CouplingSpec) -> Result<FactorizedState> {
    let n = state.n();
    state.with_pointer(spec.pointer_matrix(n))
}

/// Registers match their marbles and the pointer equals the number IN.
pub fn consistent(config: &Configuration) -> Result<bool> {
    let (Some(registers), Some(pointer)) = (&config.register_readings, config.pointer) else {
        return Err(Error::MissingRegisters);
    };
    Ok(registers == &config.marble_sites && config.register_in_count() == Some(pointer))
}

/// What the registers and the pointer show.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Readout {
    pub marbles: Vec<Site>,
    pub registers: Vec<Site>,
    pub pointer: usize,
}

impl Readout {
    pub fn from_config(config: &Configuration) -> Result<Self> {
        let (Some(registers), Some(pointer)) = (&config.register_readings, config.pointer) else {
            return Err(Error::MissingRegisters);
        };
        Ok(Self {
            marbles: config.marble_sites.clone(),
            registers: registers.clone(),
            pointer,
        })
    }

    pub fn register_in_count(&self) -> usize {
        self.registers.iter().filter(|&&s| s == Site::In).count()
    }

    /// The pointer shows the number of registers reading IN.
    pub fn agrees(&self) -> bool {
        self.pointer == self.register_in_count()
    }
}

/// Readout from the most probable configuration.
pub fn dominant_readout<S: Localizable>(state: &S) -> Result<Readout> {
    Readout::from_config(&state.dominant_config().0)
}

/// Readout by the fuzzy link: each subsystem reads the outcome whose marginal
/// reaches the threshold. `None` if some subsystem has no such outcome.
pub fn fuzzy_readout<S: Localizable>(state: &S, params: FuzzyParams) -> Result<Option<Readout>> {
    let layout = state.layout();
    if !layout.has_pointer() {
        return Err(Error::MissingRegisters);
    }
    let read = |sub: Subsystem| -> Result<Option<usize>> {
        let probs = state.subsystem_probabilities(sub)?;
        Ok(probs.iter().position(|&p| p >= params.threshold()))
    };
    let mut marbles = Vec::with_capacity(layout.marbles());
    let mut registers = Vec::with_capacity(layout.marbles());
    for i in 0..layout.marbles() {
        let (Some(m), Some(r)) = (read(Subsystem::Marble(i))?, read(Subsystem::Register(i))?)
        else {
            return Ok(None);
        };
        marbles.push(Site::from_index(m).expect("two outcomes"));
        registers.push(Site::from_index(r).expect("two outcomes"));
    }
    Ok(read(Subsystem::Pointer)?.map(|pointer| Readout {
        marbles,
        registers,
        pointer,
    }))
}

/// Parameters of one suppression experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub n: usize,
    pub coeffs: MarbleCoeffs,
    pub fuzzy: FuzzyParams,
    pub hits: HitParams,
    pub coupling: CouplingSpec,
    pub duration: f64,
    pub trials: u64,
    pub master_seed: u64,
    /// A trajectory counts as collapsed when its dominant configuration
    /// carries at least `1 - delta`.
    pub delta: f64,
}

/// Result of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: TrajectorySeed,
    pub events: usize,
    pub collapsed: bool,
    pub first_collapse: Option<f64>,
    pub dominant: Readout,
    pub fuzzy: Option<Readout>,
    /// Anomaly for the all-IN target.
    pub anomaly_in: bool,
    /// Anomaly for the dominant configuration as target.
    pub anomaly_dominant: bool,
}

impl TrialOutcome {
    pub fn agrees(&self) -> bool {
        self.dominant.agrees()
    }

    pub fn readouts_match(&self) -> bool {
        self.fuzzy.as_ref() == Some(&self.dominant)
    }

    /// Every per-marble claim holds yet their conjunction fails.
    pub fn anomaly_manifest(&self) -> bool {
        self.anomaly_in || self.anomaly_dominant
    }

    /// A collapsed trajectory that breaks agreement, readout consistency or
    /// enumeration.
    pub fn counterexample(&self, perfect: bool) -> bool {
        self.collapsed
            && ((perfect && !self.agrees()) || !self.readouts_match() || self.anomaly_manifest())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseTimeStats {
    pub median: f64,
    pub p90: f64,
    pub samples: u64,
}

impl CollapseTimeStats {
    pub fn from_times(times: Vec<f64>) -> Option<Self> {
        if times.is_empty() {
            return None;
        }
        let samples = times.len() as u64;
        let mut data = Data::new(times);
        Some(Self {
            median: data.median(),
            p90: data.percentile(90),
            samples,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub n: usize,
    pub pre_report: AnomalyReport,
    pub critical_n: Option<u64>,
    pub trials: u64,
    pub collapsed: u64,
    pub non_collapsed: u64,
    /// Over collapsed trajectories; `None` when none collapsed.
    pub agreement_rate: Option<f64>,
    pub miscount_rate: Option<f64>,
    pub post_anomaly_rate: Option<f64>,
    pub dominant_anomaly_rate: Option<f64>,
    pub anomaly_manifest_rate: Option<f64>,
    pub readout_mismatches: u64,
    /// Non-collapsed trajectories whose final state still shows the anomaly.
    pub uncollapsed_anomalies: u64,
    pub collapse_time: Option<CollapseTimeStats>,
    pub mean_events: f64,
    pub master_seed: u64,
    /// Trial indices of counterexample trajectories; replay with
    /// `TrajectorySeed::new(master_seed, index)`.
    pub counterexamples: Vec<u64>,
}

impl Experiment {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyCoefficients);
        }
        check_range("trials", self.trials as f64, self.trials >= 1, "[1, inf)")?;
        check_range(
            "duration_s",
            self.duration,
            self.duration >= 0.0 && self.duration.is_finite(),
            "[0, inf)",
        )?;
        check_range(
            "delta",
            self.delta,
            self.delta > 0.0 && self.delta < 1.0,
            "(0, 1)",
        )?;
        Ok(())
    }

    pub fn initial_state(&self) -> Result<FactorizedState> {
        FactorizedState::uniform(self.coeffs, self.n)
    }

    pub fn coupled_state(&self) -> Result<FactorizedState> {
        couple_factorized(self.initial_state()?, self.coupling)
    }

    /// Evolves `coupled` along one trajectory and reads it out.
    pub fn run_trial<S>(&self, coupled: &S, seed: TrajectorySeed) -> Result<TrialOutcome>
    where
        S: Localizable + MarbleDistribution,
    {
        let options = EvolveOptions {
            record_snapshots: false,
            collapse_delta: Some(self.delta),
            stop_when_collapsed: false,
        };
        let trajectory = evolve_seeded(coupled, self.duration, &self.hits, options, seed)?;
        let state = &trajectory.final_state;
        let (config, _) = state.dominant_config();
        let dominant = Readout::from_config(&config)?;
        let anomaly_in = enumeration_report(state, self.fuzzy)?.anomaly;
        let anomaly_dominant =
            enumeration_report_for(state, &config.marble_sites, self.fuzzy)?.anomaly;
        Ok(TrialOutcome {
            seed,
            events: trajectory.events.len(),
            collapsed: collapsed(state, self.delta),
            first_collapse: trajectory.first_collapse,
            dominant,
            fuzzy: fuzzy_readout(state, self.fuzzy)?,
            anomaly_in,
            anomaly_dominant,
        })
    }

    /// All trials, in index order, run in parallel.
    pub fn run_trials(&self) -> Result<Vec<TrialOutcome>> {
        self.validate()?;
        let coupled = self.coupled_state()?;
        ensemble(self.master_seed, self.trials, |seed| {
            self.run_trial(&coupled, seed)
        })
        .into_iter()
        .collect()
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        self.validate()?;
        let outcomes = self.run_trials()?;
        self.report(&outcomes)
    }

    pub fn report(&self, outcomes: &[TrialOutcome]) -> Result<ExperimentReport> {
        let pre_report = enumeration_report(&self.initial_state()?, self.fuzzy)?;
        let a_sq = self.coeffs.in_probability();
        let critical = if a_sq > 0.0 && a_sq < 1.0 {
            critical_n(a_sq, self.fuzzy)?
        } else {
            None
        };
        let done: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.collapsed).collect();
        let collapsed_count = done.len() as u64;
        let rate = |pred: &dyn Fn(&TrialOutcome) -> bool| {
            (collapsed_count > 0)
                .then(|| done.iter().filter(|o| pred(o)).count() as f64 / collapsed_count as f64)
        };
        let times = outcomes.iter().filter_map(|o| o.first_collapse).collect();
        let perfect = self.coupling.is_perfect();
        Ok(ExperimentReport {
            n: self.n,
            pre_report,
            critical_n: critical,
            trials: outcomes.len() as u64,
            collapsed: collapsed_count,
            non_collapsed: outcomes.len() as u64 - collapsed_count,
            agreement_rate: rate(&|o| o.agrees()),
            miscount_rate: rate(&|o| !o.agrees()),
            post_anomaly_rate: rate(&|o| o.anomaly_in),
            dominant_anomaly_rate: rate(&|o| o.anomaly_dominant),
            anomaly_manifest_rate: rate(&|o| o.anomaly_manifest()),
            readout_mismatches: done.iter().filter(|o| !o.readouts_match()).count() as u64,
            uncollapsed_anomalies: outcomes
                .iter()
                .filter(|o| !o.collapsed && o.anomaly_in)
                .count() as u64,
            collapse_time: CollapseTimeStats::from_times(times),
            mean_events: outcomes.iter().map(|o| o.events as f64).sum::<f64>()
                / outcomes.len().max(1) as f64,
            master_seed: self.master_seed,
            counterexamples: outcomes
                .iter()
                .filter(|o| o.counterexample(perfect))
                .map(|o| o.seed.index)
                .collect(),
        })
    }
}

/// Measurement error versus manifest anomaly for an imperfect pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct ImperfectPointerReport {
    pub miscount_rate: Option<f64>,
    pub anomaly_manifest_rate: Option<f64>,
    /// Total weight of coupled branches whose pointer misreads the count.
    pub predicted_miscount: f64,
    pub experiment: ExperimentReport,
}

/// Branch weight of pointer readings that differ from the IN count, for the
/// uniform product state.
pub fn predicted_miscount(coeffs: MarbleCoeffs, n: usize, spec: CouplingSpec) -> Result<f64> {
    let counts = FactorizedState::uniform(coeffs, n)?.count_distribution();
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, p)| p * spec.miss_probability(n, k))
        .sum())
}

pub fn imperfect_pointer_analysis(experiment: &Experiment) -> Result<ImperfectPointerReport> {
    if experiment.coupling.is_perfect() {
        return Err(Error::Parameter {
            name: "eta",
            value: 0.0,
            range: "(0, 1)",
        });
    }
    let report = experiment.run()?;
    Ok(ImperfectPointerReport {
        miscount_rate: report.miscount_rate,
        anomaly_manifest_rate: report.anomaly_manifest_rate,
        predicted_miscount: predicted_miscount(
            experiment.coeffs,
            experiment.n,
            experiment.coupling,
        )?,
        experiment: report,
    })
}
