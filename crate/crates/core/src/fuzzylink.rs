//! Location claims under the fuzzy eigenstate-eigenvalue link.
//!
//! A conjunctive claim "marble i is at site s_i and marble j is at s_j and
//! ..." holds when the squared amplitude of the matching configurations is
//! at least `1 - p`. The enumeration principle fails for a state when every
//! single-marble claim "marble i is in the box" holds but "all n marbles are
//! in the box" does not.

use crate::error::{check_range, Error, Result};
use crate::state::{Assignment, MarbleDistribution, Site};

/// Default fuzzy-link threshold parameter.
pub const DEFAULT_P: f64 = 0.1;

/// Conjunction of single-marble location assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationClaim {
    assignment: Assignment,
}

impl LocationClaim {
    pub fn new(assignment: Assignment) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidConfiguration(
                "location claim must mention at least one marble".into(),
            ));
        }
        Ok(Self { assignment })
    }

    pub fn single(marble: usize, site: Site) -> Self {
        Self {
            assignment: Assignment::from([(marble, site)]),
        }
    }

    /// "Marble i is at `sites[i]`" for every marble.
    pub fn from_sites(sites: &[Site]) -> Result<Self> {
        Self::new(sites.iter().copied().enumerate().collect())
    }

    /// Every one of `n` marbles at `site`.
    pub fn all(n: usize, site: Site) -> Result<Self> {
        Self::new((0..n).map(|i| (i, site)).collect())
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    /// Adds (or replaces) one conjunct.
    pub fn and(mut self, marble: usize, site: Site) -> Self {
        self.assignment.insert(marble, site);
        self
    }

    /// The claim with every mentioned marble moved to the other site.
    pub fn negation(&self) -> Self {
        Self {
            assignment: self
                .assignment
                .iter()
                .map(|(&i, s)| (i, s.other()))
                .collect(),
        }
    }
}

/// Threshold `p` of the fuzzy link: a claim holds at squared amplitude
/// `>= 1 - p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyParams {
    p: f64,
}

impl FuzzyParams {
    pub fn new(p: f64) -> Result<Self> {
        check_range("p", p, p > 0.0 && p < 0.5, "(0, 0.5)")?;
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn threshold(&self) -> f64 {
        1.0 - self.p
    }
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self { p: DEFAULT_P }
    }
}

/// Per-marble and conjunctive verdicts for one target configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub per_marble_holds: Vec<bool>,
    pub per_marble_mass: Vec<f64>,
    pub conjunction_holds: bool,
    pub conjunction_mass: f64,
    /// Every conjunct holds yet the conjunction does not.
    pub anomaly: bool,
}

pub fn claim_mass<D>(wf: &D, claim: &LocationClaim) -> Result<f64>
where
    D: MarbleDistribution + ?Sized,
{
    wf.joint_probability(&claim.assignment)
}

pub fn holds<D>(wf: &D, claim: &LocationClaim, params: FuzzyParams) -> Result<bool>
where
    D: MarbleDistribution + ?Sized,
{
    // Ties count as holding.
    Ok(claim_mass(wf, claim)? >= params.threshold())
}

/// Enumeration check for "marble i is in the box" against "all n marbles are
/// in the box". Registers and pointer, if present, are summed over.
pub fn enumeration_report<D>(wf: &D, params: FuzzyParams) -> Result<AnomalyReport>
where
    D: MarbleDistribution + ?Sized,
{
    enumeration_report_for(wf, &vec![Site::In; wf.marble_count()], params)
}

/// Enumeration check for an arbitrary target configuration of all marbles.
pub fn enumeration_report_for<D>(
    wf: &D,
    target: &[Site],
    params: FuzzyParams,
) -> Result<AnomalyReport>
where
    D: MarbleDistribution + ?Sized,
{
    let n = wf.marble_count();
    if target.len() != n {
        return Err(Error::InvalidConfiguration(format!(
            "target names {} marbles, state has {n}",
            target.len()
        )));
    }
    let threshold = params.threshold();
    let per_marble_mass = target
        .iter()
        .enumerate()
        .map(|(i, &site)| wf.marginal_probability(i, site))
        .collect::<Result<Vec<_>>>()?;
    let per_marble_holds: Vec<bool> = per_marble_mass.iter().map(|&m| m >= threshold).collect();
    let conjunction_mass = claim_mass(wf, &LocationClaim::from_sites(target)?)?;
    let conjunction_holds = conjunction_mass >= threshold;
    let anomaly = per_marble_holds.iter().all(|&h| h) && !conjunction_holds;
    Ok(AnomalyReport {
        per_marble_holds,
        per_marble_mass,
        conjunction_holds,
        conjunction_mass,
        anomaly,
    })
}

/// `a_sq^n` for any count.
pub fn uniform_conjunction_mass(a_sq: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => a_sq.powi(n),
        Err(_) => a_sq.powf(n as f64),
    }
}

/// Smallest marble count at which the uniform product state with in-box
/// probability `a_sq` violates enumeration, or `None` when single-marble
/// claims already fail.
pub fn critical_n(a_sq: f64, params: FuzzyParams) -> Result<Option<u64>> {
    check_range("a_sq", a_sq, a_sq > 0.0 && a_sq < 1.0, "(0, 1)")?;
    let threshold = params.threshold();
    if a_sq < threshold {
        return Ok(None);
    }
    let fails = |n: u64| uniform_conjunction_mass(a_sq, n) < threshold;
    let estimate = (threshold.ln() / a_sq.ln()).floor();
    let mut n = if estimate.is_finite() && estimate >= 0.0 {
        estimate as u64 + 1
    } else {
        2
    };
    // Correct the logarithmic estimate against the exact predicate.
    while n > 1 && fails(n - 1) {
        n -= 1;
    }
    while !fails(n) {
        n += 1;
    }
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use proptest::prelude::*;

    use super::*;
    use crate::state::{product_state, FactorizedState, Layout, MarbleCoeffs, WaveFunction};

    fn psi_all(a_sq: f64, n: usize) -> WaveFunction {
        product_state(&vec![MarbleCoeffs::from_in_probability(a_sq).unwrap(); n]).unwrap()
    }

    fn brute_critical(a_sq: f64, p: f64) -> Option<u64> {
        if a_sq < 1.0 - p {
            return None;
        }
        let mut mass = 1.0;
        for n in 1u64.. {
            mass *= a_sq;
            if mass < 1.0 - p {
                return Some(n);
            }
        }
        unreachable!()
    }

    fn random_state(n: usize, seed: u64) -> WaveFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let layout = Layout::marbles_only(n);
        WaveFunction::from_unnormalized(
            layout,
            (0u64..1 << n).map(|k| {
                (
                    layout.decode(crate::state::ConfigKey(k)),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn claim_mass_on_product_state() {
        let wf = psi_all(0.9, 6);
        let single = claim_mass(&wf, &LocationClaim::single(4, Site::In)).unwrap();
        assert!((single - 0.9).abs() < 1e-12);
        let all = claim_mass(&wf, &LocationClaim::all(6, Site::In).unwrap()).unwrap();
        assert!((all - 0.9f64.powi(6)).abs() < 1e-12);
    }

    #[test]
    fn claim_mass_matches_enumeration() {
        let wf = random_state(4, 7);
        let claim = LocationClaim::single(1, Site::In).and(3, Site::Out);
        let brute: f64 = wf
            .iter()
            .filter(|(c, _)| c.marble_sites[1] == Site::In && c.marble_sites[3] == Site::Out)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((claim_mass(&wf, &claim).unwrap() - brute).abs() < 1e-12);
        assert!(claim_mass(&wf, &LocationClaim::single(4, Site::In)).is_err());
    }

    #[test]
    fn holds_examples() {
        let p = FuzzyParams::new(0.05).unwrap();
        let eigen = psi_all(1.0, 3);
        assert!(holds(&eigen, &LocationClaim::all(3, Site::In).unwrap(), p).unwrap());
        assert!(!holds(&psi_all(0.9, 3), &LocationClaim::single(0, Site::In), p).unwrap());

        let p = FuzzyParams::new(0.1).unwrap();
        let wf = psi_all(0.99, 11);
        let all = LocationClaim::all(11, Site::In).unwrap();
        assert!((claim_mass(&wf, &all).unwrap() - 0.8953382542587163).abs() < 1e-12);
        assert!(!holds(&wf, &all, p).unwrap());
    }

    #[test]
    fn enumeration_examples() {
        let p = FuzzyParams::new(0.1).unwrap();
        let small = enumeration_report(&psi_all(0.99, 5), p).unwrap();
        assert!(small.per_marble_holds.iter().all(|&h| h));
        assert!(small.conjunction_holds);
        assert!((small.conjunction_mass - 0.99f64.powi(5)).abs() < 1e-12);
        assert!(!small.anomaly);

        let coeffs = MarbleCoeffs::from_in_probability(0.99).unwrap();
        let large = enumeration_report(&FactorizedState::uniform(coeffs, 25).unwrap(), p).unwrap();
        assert!(large.per_marble_holds.iter().all(|&h| h));
        assert!(!large.conjunction_holds);
        assert!((large.conjunction_mass - 0.7778213593991465).abs() < 1e-12);
        assert!(large.anomaly);

        let eigen = MarbleCoeffs::from_in_probability(1.0).unwrap();
        for n in [1, 10, 1000] {
            let r = enumeration_report(&FactorizedState::uniform(eigen, n).unwrap(), p).unwrap();
            assert!(!r.anomaly);
        }
    }

    #[test]
    fn critical_n_examples() {
        let p = FuzzyParams::new(0.1).unwrap();
        assert_eq!(critical_n(0.99, p).unwrap(), Some(11));
        assert_eq!(critical_n(0.99, p).unwrap(), brute_critical(0.99, 0.1));
        assert_eq!(
            critical_n(0.9, FuzzyParams::new(0.05).unwrap()).unwrap(),
            None
        );
        assert_eq!(
            critical_n(0.5, FuzzyParams::new(0.4).unwrap()).unwrap(),
            None
        );
        assert!(critical_n(1.0, p).is_err());
        assert!(critical_n(0.0, p).is_err());
    }

    #[test]
    fn critical_n_matches_incremental_search() {
        for &a_sq in &[0.9, 0.95, 0.97, 0.99, 0.995, 0.999, 0.9999] {
            for &p in &[0.01, 0.05, 0.1, 0.2, 0.3, 0.45] {
                let params = FuzzyParams::new(p).unwrap();
                assert_eq!(
                    critical_n(a_sq, params).unwrap(),
                    brute_critical(a_sq, p),
                    "a_sq={a_sq} p={p}"
                );
            }
        }
    }

    #[test]
    fn params_range() {
        assert!(FuzzyParams::new(0.0).is_err());
        assert!(FuzzyParams::new(0.5).is_err());
        assert!(FuzzyParams::new(f64::NAN).is_err());
        assert_eq!(FuzzyParams::default().p(), 0.1);
    }

    proptest! {
        #[test]
        fn adding_conjunct_never_increases_mass(seed in 0u64..500, extra in 0usize..5) {
            let wf = random_state(5, seed);
            let claim = LocationClaim::single(0, Site::In).and(2, Site::Out);
            let site = if seed % 2 == 0 { Site::In } else { Site::Out };
            let bigger = claim.clone().and(extra.max(3), site);
            prop_assert!(claim_mass(&wf, &bigger).unwrap() <= claim_mass(&wf, &claim).unwrap() + 1e-15);
        }

        #[test]
        fn claim_and_negation_never_both_hold(seed in 0u64..500, p in 0.001f64..0.499) {
            let wf = random_state(4, seed);
            let params = FuzzyParams::new(p).unwrap();
            let claim = LocationClaim::single(0, Site::In).and(1, Site::Out).and(3, Site::In);
            prop_assert!(!(holds(&wf, &claim, params).unwrap() && holds(&wf, &claim.negation(), params).unwrap()));
            let one = LocationClaim::single(2, Site::Out);
            prop_assert!(!(holds(&wf, &one, params).unwrap() && holds(&wf, &one.negation(), params).unwrap()));
        }

        #[test]
        fn holds_is_the_threshold_comparison(a_sq in 0.5f64..1.0, p in 0.001f64..0.499, n in 1usize..8) {
            let wf = psi_all(a_sq, n);
            let params = FuzzyParams::new(p).unwrap();
            let claim = LocationClaim::all(n, Site::In).unwrap();
            let mass = claim_mass(&wf, &claim).unwrap();
            prop_assert_eq!(holds(&wf, &claim, params).unwrap(), mass >= 1.0 - p);
        }
    }
}
