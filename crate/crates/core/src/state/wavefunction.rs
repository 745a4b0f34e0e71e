use num_complex::Complex64;

use super::{
    check_assignment, compensated_sum, Assignment, ConfigKey, Configuration, Layout, MarbleCoeffs,
    MarbleDistribution, Site, Subsystem, DENSE_MAX_MARBLES, NORM_TOLERANCE, PRUNE_THRESHOLD,
};
use crate::error::{Error, Result};

/// Sparse, normalized amplitude map over bit-packed configurations.
///
/// Entries are kept sorted by key with no duplicates and no amplitude below
/// [`PRUNE_THRESHOLD`] in magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    layout: Layout,
    entries: Vec<(ConfigKey, Complex64)>,
}

impl WaveFunction {
    /// Builds a state from amplitudes that must already be normalized.
    pub fn from_amplitudes<I>(layout: Layout, amplitudes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Configuration, Complex64)>,
    {
        let entries = amplitudes
            .into_iter()
            .map(|(c, amp)| Ok((layout.encode(&c)?, amp)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_keyed(layout, entries, false)
    }

    /// Builds a state from arbitrary nonzero amplitudes, rescaling to norm 1.
    pub fn from_unnormalized<I>(layout: Layout, amplitudes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Configuration, Complex64)>,
    {
        let entries = amplitudes
            .into_iter()
            .map(|(c, amp)| Ok((layout.encode(&c)?, amp)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_keyed(layout, entries, true)
    }

    pub(crate) fn from_keyed(
        layout: Layout,
        mut entries: Vec<(ConfigKey, Complex64)>,
        normalize: bool,
    ) -> Result<Self> {
        if layout.marbles() == 0 {
            return Err(Error::EmptyCoefficients);
        }
        if layout.marbles() > DENSE_MAX_MARBLES {
            return Err(Error::TooManyMarbles {
                n: layout.marbles(),
                limit: DENSE_MAX_MARBLES,
            });
        }
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfiguration(format!(
                "configuration {:?} given twice",
                layout.decode(w[0].0)
            )));
        }
        entries.retain(|(_, amp)| amp.norm() >= PRUNE_THRESHOLD);
        let wf = Self { layout, entries };
        if normalize {
            wf.renormalize()
        } else {
            let norm = wf.norm_sqr();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::StateNorm(norm));
            }
            Ok(wf)
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.marbles()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(ConfigKey, Complex64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (Configuration, Complex64)> + '_ {
        self.entries
            .iter()
            .map(|&(k, amp)| (self.layout.decode(k), amp))
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|(_, a)| a.norm_sqr()))
    }

    pub fn amplitude_at(&self, key: ConfigKey) -> Complex64 {
        match self.entries.binary_search_by_key(&key, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn amplitude(&self, config: &Configuration) -> Result<Complex64> {
        Ok(self.amplitude_at(self.layout.encode(config)?))
    }

    pub fn renormalize(&self) -> Result<Self> {
        let norm = self.norm_sqr();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let scale = norm.sqrt().recip();
        let entries = self
            .entries
            .iter()
            .map(|&(k, amp)| (k, amp * scale))
            .filter(|(_, amp)| amp.norm() >= PRUNE_THRESHOLD)
            .collect();
        Ok(Self {
            layout: self.layout,
            entries,
        })
    }

    /// Probability of the configurations whose key satisfies `pred`.
    ///
    /// Weights are divided by the stored norm so that exactly balanced
    /// branches come out exactly balanced.
    pub fn probability_where(&self, pred: impl Fn(ConfigKey) -> bool) -> f64 {
        let total = self.norm_sqr();
        let hit = compensated_sum(
            self.entries
                .iter()
                .filter(|(k, _)| pred(*k))
                .map(|(_, a)| a.norm_sqr()),
        );
        hit / total
    }

    /// Normalized `(configuration key, probability)` pairs.
    pub fn probabilities(&self) -> impl Iterator<Item = (ConfigKey, f64)> + '_ {
        let total = self.norm_sqr();
        self.entries
            .iter()
            .map(move |&(k, a)| (k, a.norm_sqr() / total))
    }

    /// Distribution of outcomes of one subsystem.
    pub fn subsystem_probabilities(&self, subsystem: Subsystem) -> Result<Vec<f64>> {
        let count = self.layout.outcome_count(subsystem)?;
        let mut probs = vec![0.0; count];
        let total = self.norm_sqr();
        for &(k, amp) in &self.entries {
            probs[self.layout.outcome_of(k, subsystem)] += amp.norm_sqr();
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(probs)
    }

    /// Applies the two-site (or pointer) localization operator selecting
    /// `outcome` and renormalizes: amplitudes whose subsystem value differs
    /// from `outcome` are scaled by `tail`.
    pub fn localize(&mut self, subsystem: Subsystem, outcome: usize, tail: f64) -> Result<()> {
        self.layout.check_outcome(subsystem, outcome)?;
        let layout = self.layout;
        for (k, amp) in self.entries.iter_mut() {
            if layout.outcome_of(*k, subsystem) != outcome {
                *amp *= tail;
            }
        }
        self.entries
            .retain(|(_, amp)| amp.norm() >= PRUNE_THRESHOLD);
        *self = self.renormalize()?;
        Ok(())
    }

    /// Configuration of maximal probability; ties go to the lowest key.
    pub fn dominant_config(&self) -> (Configuration, f64) {
        let total = self.norm_sqr();
        let mut best = self.entries[0];
        for &e in &self.entries[1..] {
            // Entries are key-sorted, so strict comparison keeps the lowest key.
            if e.1.norm_sqr() > best.1.norm_sqr() {
                best = e;
            }
        }
        (self.layout.decode(best.0), best.1.norm_sqr() / total)
    }

    /// Maps every entry onto zero or more entries of a new layout and
    /// renormalizes. Used by register coupling.
    pub(crate) fn remap(
        &self,
        layout: Layout,
        f: impl Fn(ConfigKey, Complex64) -> Vec<(ConfigKey, Complex64)>,
    ) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .flat_map(|&(k, amp)| f(k, amp))
            .collect();
        Self::from_keyed(layout, entries, true)
    }
}

fn assignment_mask(assignment: &Assignment) -> (u64, u64) {
    let mut mask = 0u64;
    let mut value = 0u64;
    for (&i, &site) in assignment {
        mask |= 1 << i;
        if site == Site::Out {
            value |= 1 << i;
        }
    }
    (mask, value)
}

impl MarbleDistribution for WaveFunction {
    fn marble_count(&self) -> usize {
        self.n()
    }

    fn joint_probability(&self, assignment: &Assignment) -> Result<f64> {
        check_assignment(assignment, self.n())?;
        let (mask, value) = assignment_mask(assignment);
        Ok(self.probability_where(|k| k.0 & mask == value))
    }
}

/// Product state `(a_1|in> + b_1|out>) ⊗ ... ⊗ (a_n|in> + b_n|out>)`.
pub fn product_state(coeffs: &[MarbleCoeffs]) -> Result<WaveFunction> {
    let n = coeffs.len();
    if n == 0 {
        return Err(Error::EmptyCoefficients);
    }
    if n > DENSE_MAX_MARBLES {
        return Err(Error::TooManyMarbles {
            n,
            limit: DENSE_MAX_MARBLES,
        });
    }
    // Doubling at bit i keeps keys sorted: new keys all exceed old ones.
    let mut entries = vec![(0u64, Complex64::new(1.0, 0.0))];
    for (i, c) in coeffs.iter().enumerate() {
        let mut next = Vec::with_capacity(entries.len() * 2);
        next.extend(entries.iter().map(|&(k, amp)| (k, amp * c.a())));
        next.extend(entries.iter().map(|&(k, amp)| (k | 1 << i, amp * c.b())));
        entries = next;
    }
    let entries = entries
        .into_iter()
        .map(|(k, amp)| (ConfigKey(k), amp))
        .collect();
    WaveFunction::from_keyed(Layout::marbles_only(n), entries, false)
}

/// Branch coefficient `a^(n-|out|) b^|out|` of the expansion of a uniform
/// product state.
pub fn expansion_amplitude(coeffs: MarbleCoeffs, n: usize, out_set: &[usize]) -> Result<Complex64> {
    let mut seen = vec![false; n];
    for &index in out_set {
        if index >= n {
            return Err(Error::MarbleIndex { index, n });
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(Error::DuplicateMarble(index));
        }
    }
    let k = out_set.len() as u32;
    Ok(coeffs.a().powu(n as u32 - k) * coeffs.b().powu(k))
}
