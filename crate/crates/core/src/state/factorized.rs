use num_complex::Complex64;

use super::{
    check_assignment, Assignment, Configuration, Layout, MarbleCoeffs, MarbleDistribution, Site,
    Subsystem, DENSE_MAX_MARBLES, PRUNE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::state::{ConfigKey, WaveFunction};

/// State of the form
///
/// ```text
/// Σ_σ Σ_j  Π_i f_i(σ_i) · h[k(σ)][j]  |σ> |registers = σ> |O = j>
/// ```
///
/// where `k(σ)` is the number of marbles IN. Without a pointer the state is a
/// plain product of the per-marble factors. Localizing a marble or register
/// rescales one factor and localizing the pointer rescales columns of `h`,
/// so the form is preserved by every hit.
///
/// Factors are kept at unit norm; the pointer matrix carries the global
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedState {
    factors: Vec<[Complex64; 2]>,
    registers: bool,
    pointer: Option<Vec<Vec<Complex64>>>,
}

fn prune(amp: Complex64) -> Complex64 {
    if amp.norm() < PRUNE_THRESHOLD {
        Complex64::new(0.0, 0.0)
    } else {
        amp
    }
}

impl FactorizedState {
    pub fn product(coeffs: &[MarbleCoeffs]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        Ok(Self {
            factors: coeffs.iter().map(|c| [c.a(), c.b()]).collect(),
            registers: false,
            pointer: None,
        })
    }

    pub fn uniform(coeffs: MarbleCoeffs, n: usize) -> Result<Self> {
        Self::product(&vec![coeffs; n])
    }

    /// Attaches registers mirroring the marbles and a pointer whose amplitude
    /// for reading `j` given `k` marbles IN is `pointer[k][j]`.
    pub fn with_pointer(self, pointer: Vec<Vec<Complex64>>) -> Result<Self> {
        if self.registers {
            return Err(Error::AlreadyCoupled);
        }
        let n = self.n();
        if pointer.len() != n + 1 || pointer.iter().any(|row| row.len() != n + 1) {
            return Err(Error::Layout(format!(
                "pointer matrix must be {0}x{0}",
                n + 1
            )));
        }
        let mut state = Self {
            factors: self.factors,
            registers: true,
            pointer: Some(pointer),
        };
        state.normalize_pointer()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n(), self.registers, self.pointer.is_some())
            .expect("pointer is only attached together with registers")
    }

    pub fn factors(&self) -> &[[Complex64; 2]] {
        &self.factors
    }

    pub fn pointer_amplitudes(&self) -> Option<&[Vec<Complex64>]> {
        self.pointer.as_deref()
    }

    fn weights(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.factors[i];
        let (wa, wb) = (a.norm_sqr(), b.norm_sqr());
        let norm = wa + wb;
        [wa / norm, wb / norm]
    }

    /// Weighted distribution of the IN count. `w(i)` gives the (IN, OUT)
    /// multipliers for marble `i`; `[0, 1]` removes the marble from the count.
    fn count_weights(&self, w: impl Fn(usize) -> [f64; 2]) -> Vec<f64> {
        let n = self.n();
        let mut d = vec![0.0; n + 1];
        d[0] = 1.0;
        for i in 0..n {
            let [w_in, w_out] = w(i);
            for k in (1..=i + 1).rev() {
                d[k] = d[k] * w_out + d[k - 1] * w_in;
            }
            d[0] *= w_out;
        }
        d
    }

    /// Distribution of the number of marbles IN (ignoring the pointer factor).
    pub fn count_distribution(&self) -> Vec<f64> {
        self.count_weights(|i| self.weights(i))
    }

    fn row_weights(h: &[Vec<Complex64>]) -> Vec<f64> {
        h.iter()
            .map(|row| row.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    fn pointer_norm(&self, h: &[Vec<Complex64>]) -> f64 {
        let d = self.count_distribution();
        let rows = Self::row_weights(h);
        d.iter().zip(&rows).map(|(x, y)| x * y).sum()
    }

    fn normalize_pointer(&mut self) -> Result<()> {
        let Some(h) = &self.pointer else {
            return Ok(());
        };
        let total = self.pointer_norm(h);
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let scale = total.sqrt().recip();
        if let Some(h) = &mut self.pointer {
            for amp in h.iter_mut().flatten() {
                *amp = prune(*amp * scale);
            }
        }
        Ok(())
    }

    pub fn subsystem_probabilities(&self, subsystem: Subsystem) -> Result<Vec<f64>> {
        self.layout().check_subsystem(subsystem)?;
        match subsystem {
            Subsystem::Marble(i) | Subsystem::Register(i) => {
                let w = self.weights(i);
                let Some(h) = &self.pointer else {
                    return Ok(w.to_vec());
                };
                let rows = Self::row_weights(h);
                let rest =
                    self.count_weights(|m| if m == i { [0.0, 1.0] } else { self.weights(m) });
                let mut p_in = 0.0;
                let mut p_out = 0.0;
                for (k, d) in rest.iter().enumerate() {
                    p_out += d * rows[k];
                    if k < self.n() {
                        p_in += d * rows[k + 1];
                    }
                }
                let (p_in, p_out) = (w[0] * p_in, w[1] * p_out);
                let total = p_in + p_out;
                Ok(vec![p_in / total, p_out / total])
            }
            Subsystem::Pointer => {
                let h = self.pointer.as_ref().expect("checked by layout");
                let d = self.count_distribution();
                let mut probs = vec![0.0; self.n() + 1];
                for (k, row) in h.iter().enumerate() {
                    for (j, amp) in row.iter().enumerate() {
                        probs[j] += d[k] * amp.norm_sqr();
                    }
                }
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                Ok(probs)
            }
        }
    }

    /// Same operator as [`WaveFunction::localize`], acting on the factors.
    pub fn localize(&mut self, subsystem: Subsystem, outcome: usize, tail: f64) -> Result<()> {
        self.layout().check_outcome(subsystem, outcome)?;
        match subsystem {
            Subsystem::Marble(i) | Subsystem::Register(i) => {
                let f = &mut self.factors[i];
                f[1 - outcome] = prune(f[1 - outcome] * tail);
                let norm = f[0].norm_sqr() + f[1].norm_sqr();
                if norm <= 0.0 {
                    return Err(Error::ZeroNorm);
                }
                let scale = norm.sqrt().recip();
                f[0] = prune(f[0] * scale);
                f[1] = prune(f[1] * scale);
            }
            Subsystem::Pointer => {
                if let Some(h) = &mut self.pointer {
                    for row in h.iter_mut() {
                        for (j, amp) in row.iter_mut().enumerate() {
                            if j != outcome {
                                *amp = prune(*amp * tail);
                            }
                        }
                    }
                }
            }
        }
        self.normalize_pointer()
    }

    fn build_config(&self, sites: Vec<Site>, reading: Option<usize>) -> Configuration {
        Configuration {
            register_readings: self.registers.then(|| sites.clone()),
            marble_sites: sites,
            pointer: reading,
        }
    }

    /// Configuration of maximal probability; exact ties go to the
    /// configuration with the lowest key.
    pub fn dominant_config(&self) -> (Configuration, f64) {
        let n = self.n();
        let w: Vec<[f64; 2]> = (0..n).map(|i| self.weights(i)).collect();
        let Some(h) = &self.pointer else {
            let sites = w
                .iter()
                .map(|w| if w[0] >= w[1] { Site::In } else { Site::Out })
                .collect();
            let p = w.iter().map(|w| w[0].max(w[1])).product();
            return (self.build_config(sites, None), p);
        };

        // The best configuration with exactly k marbles IN puts the k marbles
        // with the largest IN/OUT odds IN. Equal odds send IN to higher
        // indices, which yields the lower key.
        let log_odds: Vec<f64> = w.iter().map(|w| w[0].ln() - w[1].ln()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| log_odds[j].total_cmp(&log_odds[i]).then(j.cmp(&i)));
        let mut in_prefix = vec![1.0; n + 1];
        for m in 0..n {
            in_prefix[m + 1] = in_prefix[m] * w[order[m]][0];
        }
        let mut out_suffix = vec![1.0; n + 1];
        for m in (0..n).rev() {
            out_suffix[m] = out_suffix[m + 1] * w[order[m]][1];
        }
        let total = self.pointer_norm(h);
        let sites_for = |k: usize| {
            let mut sites = vec![Site::Out; n];
            for &i in &order[..k] {
                sites[i] = Site::In;
            }
            sites
        };

        let mut best: Option<(Configuration, f64)> = None;
        for (k, row) in h.iter().enumerate() {
            let marble_part = in_prefix[k] * out_suffix[k];
            for (j, amp) in row.iter().enumerate() {
                let p = marble_part * amp.norm_sqr() / total;
                let replace = match &best {
                    None => true,
                    Some((_, bp)) if p > *bp => true,
                    Some((cfg, bp)) if p == *bp => {
                        let candidate = self.build_config(sites_for(k), Some(j));
                        candidate.key_cmp(cfg).is_lt()
                    }
                    _ => false,
                };
                if replace {
                    best = Some((self.build_config(sites_for(k), Some(j)), p));
                }
            }
        }
        best.expect("pointer matrix is non-empty")
    }

    /// Expands into the sparse representation (at most 24 marbles).
    pub fn to_wavefunction(&self) -> Result<WaveFunction> {
        let n = self.n();
        if n > DENSE_MAX_MARBLES {
            return Err(Error::TooManyMarbles {
                n,
                limit: DENSE_MAX_MARBLES,
            });
        }
        let layout = self.layout();
        let mut entries = Vec::new();
        for sigma in 0u64..1 << n {
            let mut amp = Complex64::new(1.0, 0.0);
            for (i, f) in self.factors.iter().enumerate() {
                amp *= f[(sigma >> i & 1) as usize];
            }
            let mut key = sigma;
            if self.registers {
                key |= sigma << n;
            }
            match &self.pointer {
                None => entries.push((ConfigKey(key), amp)),
                Some(h) => {
                    let k = n - sigma.count_ones() as usize;
                    for (j, hk) in h[k].iter().enumerate() {
                        let full = key | (j as u64) << layout.pointer_shift();
                        entries.push((ConfigKey(full), amp * hk));
                    }
                }
            }
        }
        WaveFunction::from_keyed(layout, entries, false)
    }
}

impl MarbleDistribution for FactorizedState {
    fn marble_count(&self) -> usize {
        self.n()
    }

    fn joint_probability(&self, assignment: &Assignment) -> Result<f64> {
        check_assignment(assignment, self.n())?;
        let Some(h) = &self.pointer else {
            return Ok(assignment
                .iter()
                .map(|(&i, &site)| self.weights(i)[site.index()])
                .product());
        };
        let rows = Self::row_weights(h);
        let forced = self.count_weights(|i| {
            let w = self.weights(i);
            match assignment.get(&i) {
                Some(Site::In) => [w[0], 0.0],
                Some(Site::Out) => [0.0, w[1]],
                None => w,
            }
        });
        let hit: f64 = forced.iter().zip(&rows).map(|(x, y)| x * y).sum();
        Ok(hit / self.pointer_norm(h))
    }
}
