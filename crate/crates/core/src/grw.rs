//! Two-site GRW localization: hits, trajectories and collapse times.
//!
//! A hit on a subsystem selects outcome `s` and applies `L_s`, which keeps
//! every amplitude whose subsystem value is `s` and multiplies the others by
//! the tail factor `t`. With `K` possible outcomes, `sum_s L_s^2 = (1 + (K-1) t^2)`
//! times the identity, so outcome `s` is drawn with probability
//! `|L_s psi|^2 / (1 + (K-1) t^2)` and the configuration probabilities form
//! a martingale. Marbles and registers have `K = 2`; the pointer has `n + 1`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::state::{Configuration, FactorizedState, Layout, Site, Subsystem, WaveFunction};

pub const DEFAULT_LAMBDA: f64 = 1e-16;
pub const DEFAULT_CONSTITUENTS: f64 = 1e21;
pub const DEFAULT_TAIL: f64 = 0.01;

/// A state the hit process can act on.
pub trait Localizable: Clone {
    fn layout(&self) -> Layout;
    /// Marginal distribution of a subsystem's outcome.
    fn subsystem_probabilities(&self, subsystem: Subsystem) -> Result<Vec<f64>>;
    /// Applies `L_outcome` with tail `tail` and renormalizes.
    fn localize(&mut self, subsystem: Subsystem, outcome: usize, tail: f64) -> Result<()>;
    /// Most probable configuration; ties go to the lowest key.
    fn dominant_config(&self) -> (Configuration, f64);
}

impl Localizable for WaveFunction {
    fn layout(&self) -> Layout {
        WaveFunction::layout(self)
    }

    fn subsystem_probabilities(&self, subsystem: Subsystem) -> Result<Vec<f64>> {
        WaveFunction::subsystem_probabilities(self, subsystem)
    }

    fn localize(&mut self, subsystem: Subsystem, outcome: usize, tail: f64) -> Result<()> {
        WaveFunction::localize(self, subsystem, outcome, tail)
    }

    fn dominant_config(&self) -> (Configuration, f64) {
        WaveFunction::dominant_config(self)
    }
}

impl Localizable for FactorizedState {
    fn layout(&self) -> Layout {
        FactorizedState::layout(self)
    }

    fn subsystem_probabilities(&self, subsystem: Subsystem) -> Result<Vec<f64>> {
        FactorizedState::subsystem_probabilities(self, subsystem)
    }

    fn localize(&mut self, subsystem: Subsystem, outcome: usize, tail: f64) -> Result<()> {
        FactorizedState::localize(self, subsystem, outcome, tail)
    }

    fn dominant_config(&self) -> (Configuration, f64) {
        FactorizedState::dominant_config(self)
    }
}

/// Tail factor and hit rates.
///
/// Every subsystem is hit at `constituents * lambda`; registers and the
/// pointer can be given their own constituent counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitParams {
    tail: f64,
    lambda: f64,
    constituents: f64,
    register_constituents: Option<f64>,
    pointer_constituents: Option<f64>,
}

fn check_count(name: &'static str, value: f64) -> Result<f64> {
    check_range(name, value, value >= 0.0 && value.is_finite(), "[0, inf)")
}

impl HitParams {
    pub fn new(tail: f64, lambda: f64, constituents: f64) -> Result<Self> {
        check_range("t", tail, (0.0..1.0).contains(&tail), "[0, 1)")?;
        check_count("lambda_particle", lambda)?;
        check_count("constituents", constituents)?;
        Ok(Self {
            tail,
            lambda,
            constituents,
            register_constituents: None,
            pointer_constituents: None,
        })
    }

    pub fn with_register_constituents(mut self, count: f64) -> Result<Self> {
        self.register_constituents = Some(check_count("register_constituents", count)?);
        Ok(self)
    }

    pub fn with_pointer_constituents(mut self, count: f64) -> Result<Self> {
        self.pointer_constituents = Some(check_count("pointer_constituents", count)?);
        Ok(self)
    }

    /// Parameters whose marble rate equals `rate` (one constituent).
    pub fn with_rate(tail: f64, rate: f64) -> Result<Self> {
        Self::new(tail, rate, 1.0)
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn constituents(&self) -> f64 {
        self.constituents
    }

    /// Hit rate of one marble, in s^-1.
    pub fn effective_rate(&self) -> f64 {
        self.constituents * self.lambda
    }

    pub fn rate_for(&self, subsystem: Subsystem) -> f64 {
        let count = match subsystem {
            Subsystem::Marble(_) => self.constituents,
            Subsystem::Register(_) => self.register_constituents.unwrap_or(self.constituents),
            Subsystem::Pointer => self.pointer_constituents.unwrap_or(self.constituents),
        };
        count * self.lambda
    }

    /// Same parameters with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut scaled = Self::new(self.tail, self.lambda * factor, self.constituents)?;
        scaled.register_constituents = self.register_constituents;
        scaled.pointer_constituents = self.pointer_constituents;
        Ok(scaled)
    }
}

impl Default for HitParams {
    fn default() -> Self {
        Self {
            tail: DEFAULT_TAIL,
            lambda: DEFAULT_LAMBDA,
            constituents: DEFAULT_CONSTITUENTS,
            register_constituents: None,
            pointer_constituents: None,
        }
    }
}

/// Probability of each outcome of a hit on `subsystem`.
pub fn outcome_probabilities<S: Localizable>(
    state: &S,
    subsystem: Subsystem,
    tail: f64,
) -> Result<Vec<f64>> {
    let marginal = state.subsystem_probabilities(subsystem)?;
    let t2 = tail * tail;
    let denom = 1.0 + (marginal.len() - 1) as f64 * t2;
    Ok(marginal
        .iter()
        .map(|&q| (q + t2 * (1.0 - q)) / denom)
        .collect())
}

/// The state after a hit with the given outcome.
pub fn localized<S: Localizable>(
    state: &S,
    subsystem: Subsystem,
    outcome: usize,
    tail: f64,
) -> Result<S> {
    let mut next = state.clone();
    next.localize(subsystem, outcome, tail)?;
    Ok(next)
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u * total < acc {
            return i;
        }
    }
    // Rounding can leave u * total just above the last partial sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Hits `subsystem` in place and returns the selected outcome.
pub fn hit<S: Localizable, R: Rng + ?Sized>(
    state: &mut S,
    subsystem: Subsystem,
    tail: f64,
    rng: &mut R,
) -> Result<usize> {
    let probs = outcome_probabilities(state, subsystem, tail)?;
    let outcome = sample_index(&probs, rng.random::<f64>());
    state.localize(subsystem, outcome, tail)?;
    Ok(outcome)
}

/// Whether the dominant configuration's probability reaches `1 - delta`.
pub fn collapsed<S: Localizable>(state: &S, delta: f64) -> bool {
    state.dominant_config().1 >= 1.0 - delta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitEvent {
    pub time: f64,
    pub subsystem: Subsystem,
    pub outcome: usize,
}

impl HitEvent {
    /// Selected site for marble and register hits.
    pub fn site(&self) -> Option<Site> {
        match self.subsystem {
            Subsystem::Pointer => None,
            _ => Site::from_index(self.outcome),
        }
    }
}

/// Identifies one trajectory of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolveOptions {
    pub record_snapshots: bool,
    /// Track the first time the state is collapsed at this delta.
    pub collapse_delta: Option<f64>,
    /// End the trajectory as soon as it is collapsed.
    pub stop_when_collapsed: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub events: Vec<HitEvent>,
    /// State after each event, when requested.
    pub snapshots: Vec<S>,
    pub final_state: S,
    pub seed: Option<TrajectorySeed>,
    pub first_collapse: Option<f64>,
}

/// Runs the merged hit process for `duration` seconds.
///
/// Inter-event times are exponential at the total rate of all subsystems;
/// each event picks a subsystem with probability proportional to its rate.
pub fn evolve<S: Localizable, R: Rng + ?Sized>(
    state: &S,
    duration: f64,
    params: &HitParams,
    options: EvolveOptions,
    rng: &mut R,
) -> Result<Trajectory<S>> {
    check_range("duration_s", duration, duration >= 0.0, "[0, inf)")?;
    if let Some(delta) = options.collapse_delta {
        check_range("delta", delta, delta > 0.0 && delta < 1.0, "(0, 1)")?;
    }
    let mut current = state.clone();
    let mut trajectory = Trajectory {
        events: Vec::new(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        seed: None,
        first_collapse: None,
    };
    let is_collapsed = |s: &S| options.collapse_delta.is_some_and(|d| collapsed(s, d));
    if is_collapsed(&current) {
        trajectory.first_collapse = Some(0.0);
        if options.stop_when_collapsed {
            return Ok(trajectory);
        }
    }

    let subsystems = current.layout().subsystems();
    let rates: Vec<f64> = subsystems.iter().map(|&s| params.rate_for(s)).collect();
    let total: f64 = rates.iter().sum();
    if total <= 0.0 || !total.is_finite() || duration == 0.0 {
        return Ok(trajectory);
    }
    let waiting = Exp::new(total).map_err(|_| Error::Parameter {
        name: "rate",
        value: total,
        range: "(0, inf)",
    })?;
    let picker = WeightedIndex::new(&rates).expect("rates are finite with a positive sum");

    let mut time = 0.0;
    loop {
        time += waiting.sample(rng);
        if time > duration {
            break;
        }
        let subsystem = subsystems[picker.sample(rng)];
        let outcome = hit(&mut current, subsystem, params.tail(), rng)?;
        trajectory.events.push(HitEvent {
            time,
            subsystem,
            outcome,
        });
        if options.record_snapshots {
            trajectory.snapshots.push(current.clone());
        }
        if trajectory.first_collapse.is_none() && is_collapsed(&current) {
            trajectory.first_collapse = Some(time);
            if options.stop_when_collapsed {
                break;
            }
        }
    }
    trajectory.final_state = current;
    Ok(trajectory)
}

/// [`evolve`] with the trajectory's own RNG stream, recording the seed.
pub fn evolve_seeded<S: Localizable>(
    state: &S,
    duration: f64,
    params: &HitParams,
    options: EvolveOptions,
    seed: TrajectorySeed,
) -> Result<Trajectory<S>> {
    let mut trajectory = evolve(state, duration, params, options, &mut seed.rng())?;
    trajectory.seed = Some(seed);
    Ok(trajectory)
}

/// First time a fresh trajectory is collapsed at `delta`, or `None` if that
/// does not happen within `max_duration`.
pub fn collapse_time<S: Localizable, R: Rng + ?Sized>(
    state: &S,
    params: &HitParams,
    delta: f64,
    max_duration: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let options = EvolveOptions {
        record_snapshots: false,
        collapse_delta: Some(delta),
        stop_when_collapsed: true,
    };
    Ok(evolve(state, max_duration, params, options, rng)?.first_collapse)
}

/// Runs `trials` independent jobs in parallel, one per trajectory seed, and
/// returns the results in trial order.
pub fn ensemble<T, F>(master: u64, trials: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(TrajectorySeed) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| job(TrajectorySeed::new(master, i)))
        .collect()
}
