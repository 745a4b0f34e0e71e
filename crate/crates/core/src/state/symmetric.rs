use num_complex::Complex64;
use statrs::function::factorial::{binomial, ln_binomial};

use super::{
    check_assignment, Assignment, ConfigKey, Layout, MarbleCoeffs, MarbleDistribution, Site,
    WaveFunction, DENSE_MAX_MARBLES, NORM_TOLERANCE, SYMMETRY_TOLERANCE,
};
use crate::error::{Error, Result};

/// Permutation-symmetric marble state: every configuration with exactly `k`
/// marbles OUT carries amplitude `coeff_by_out_count[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricWaveFunction {
    n: usize,
    coeff_by_out_count: Vec<Complex64>,
}

fn binomial_weight(n: usize, k: usize, amp: Complex64) -> f64 {
    let sq = amp.norm_sqr();
    if sq == 0.0 {
        return 0.0;
    }
    if n <= 170 {
        // Exact binomials from the factorial table.
        binomial(n as u64, k as u64) * sq
    } else {
        (ln_binomial(n as u64, k as u64) + sq.ln()).exp()
    }
}

impl SymmetricWaveFunction {
    pub fn new(n: usize, coeff_by_out_count: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyCoefficients);
        }
        if coeff_by_out_count.len() != n + 1 {
            return Err(Error::InvalidConfiguration(format!(
                "{} class amplitudes for {n} marbles",
                coeff_by_out_count.len()
            )));
        }
        let swf = Self {
            n,
            coeff_by_out_count,
        };
        let norm: f64 = (0..=n).map(|k| swf.class_weight(k)).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::StateNorm(norm));
        }
        Ok(swf)
    }

    /// Uniform product state, `c_k = a^(n-k) b^k`.
    pub fn product(coeffs: MarbleCoeffs, n: usize) -> Result<Self> {
        let c = (0..=n)
            .map(|k| coeffs.a().powu((n - k) as u32) * coeffs.b().powu(k as u32))
            .collect();
        Self::new(n, c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeff_by_out_count(&self) -> &[Complex64] {
        &self.coeff_by_out_count
    }

    /// Total probability of the `C(n, k)` configurations with `k` OUT.
    pub fn class_weight(&self, k: usize) -> f64 {
        binomial_weight(self.n, k, self.coeff_by_out_count[k])
    }

    /// Compresses a marble-only state that is invariant under permutations.
    pub fn compress(wf: &WaveFunction) -> Result<Self> {
        let layout = wf.layout();
        if layout.has_registers() {
            return Err(Error::Asymmetric("state carries registers".into()));
        }
        let n = wf.n();
        let mut first: Vec<Option<Complex64>> = vec![None; n + 1];
        let mut present = vec![0u64; n + 1];
        for &(key, amp) in wf.entries() {
            let k = key.0.count_ones() as usize;
            present[k] += 1;
            match first[k] {
                None => first[k] = Some(amp),
                Some(reference) if (amp - reference).norm() > SYMMETRY_TOLERANCE => {
                    return Err(Error::Asymmetric(format!(
                        "amplitudes differ within the {k}-out class"
                    )));
                }
                Some(_) => {}
            }
        }
        let mut coeffs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let class_size = binomial(n as u64, k as u64) as u64;
            let c = match first[k] {
                Some(amp) if present[k] == class_size => amp,
                // Partially populated classes are symmetric only if what is
                // stored is numerically zero.
                Some(amp) if amp.norm() <= SYMMETRY_TOLERANCE => Complex64::new(0.0, 0.0),
                Some(_) => {
                    return Err(Error::Asymmetric(format!(
                        "{}/{class_size} configurations of the {k}-out class populated",
                        present[k]
                    )))
                }
                None => Complex64::new(0.0, 0.0),
            };
            coeffs.push(c);
        }
        Self::new(n, coeffs)
    }

    pub fn decompress(&self) -> Result<WaveFunction> {
        if self.n > DENSE_MAX_MARBLES {
            return Err(Error::TooManyMarbles {
                n: self.n,
                limit: DENSE_MAX_MARBLES,
            });
        }
        let entries = (0u64..1 << self.n)
            .map(|key| {
                (
                    ConfigKey(key),
                    self.coeff_by_out_count[key.count_ones() as usize],
                )
            })
            .collect();
        WaveFunction::from_keyed(Layout::marbles_only(self.n), entries, false)
    }
}

impl MarbleDistribution for SymmetricWaveFunction {
    fn marble_count(&self) -> usize {
        self.n
    }

    fn joint_probability(&self, assignment: &Assignment) -> Result<f64> {
        check_assignment(assignment, self.n)?;
        let fixed_out = assignment.values().filter(|&&s| s == Site::Out).count();
        let free = self.n - assignment.len();
        // Each class-k configuration consistent with the assignment has
        // k - fixed_out OUT marbles among the free ones.
        Ok((0..=free)
            .map(|j| binomial_weight(free, j, self.coeff_by_out_count[fixed_out + j]))
            .sum())
    }
}
