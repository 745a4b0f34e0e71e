//! Mass-density functionals over spatial cells.
//!
//! The per-cell mass operator is diagonal in the configuration basis: a
//! configuration puts mass `m` in a cell for every particle whose site maps
//! there. For each cell we report the expectation `M`, the variance `V` and
//! the ratio `R = V / M^2`; the cell's mass counts as accessible when
//! `R < epsilon`.

use crate::error::{check_range, Error, Result};
use crate::fuzzylink::{uniform_conjunction_mass, FuzzyParams};
use crate::state::{ConfigKey, Configuration, Layout, MarbleCoeffs, Site, WaveFunction};
use num_complex::Complex64;

/// Default threshold standing in for "much less than one".
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub usize);

/// Spatial cells and the map from (particle, site) to cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    names: Vec<String>,
    site_to_cell: Vec<[CellId; 2]>,
    mass_per_particle: f64,
}

impl CellGrid {
    pub fn new(
        names: Vec<String>,
        site_to_cell: Vec<[CellId; 2]>,
        mass_per_particle: f64,
    ) -> Result<Self> {
        check_range(
            "mass",
            mass_per_particle,
            mass_per_particle > 0.0 && mass_per_particle.is_finite(),
            "(0, inf)",
        )?;
        if let Some(bad) = site_to_cell.iter().flatten().find(|c| c.0 >= names.len()) {
            return Err(Error::UnknownCell(bad.0));
        }
        Ok(Self {
            names,
            site_to_cell,
            mass_per_particle,
        })
    }

    /// One cell for the box and one for everything outside it.
    pub fn box_cells(n: usize, m: f64) -> Result<Self> {
        Self::new(
            vec!["box".into(), "outside".into()],
            vec![[CellId(0), CellId(1)]; n],
            m,
        )
    }

    /// Separate in-box and out-of-box cells for every marble.
    pub fn per_marble(n: usize, m: f64) -> Result<Self> {
        let names = (0..n)
            .flat_map(|i| [format!("in[{i}]"), format!("out[{i}]")])
            .collect();
        let map = (0..n).map(|i| [CellId(2 * i), CellId(2 * i + 1)]).collect();
        Self::new(names, map, m)
    }

    /// Two regions A and B; IN denotes region A and OUT region B.
    pub fn regions(n: usize, m: f64) -> Result<Self> {
        Self::new(
            vec!["A".into(), "B".into()],
            vec![[CellId(0), CellId(1)]; n],
            m,
        )
    }

    pub fn particles(&self) -> usize {
        self.site_to_cell.len()
    }

    pub fn mass_per_particle(&self) -> f64 {
        self.mass_per_particle
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.names.len()).map(CellId)
    }

    pub fn cell_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, cell: CellId) -> Result<&str> {
        self.names
            .get(cell.0)
            .map(String::as_str)
            .ok_or(Error::UnknownCell(cell.0))
    }

    pub fn cell_of(&self, particle: usize, site: Site) -> CellId {
        self.site_to_cell[particle][site.index()]
    }

    /// Same cells with the particle mass multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.names.clone(),
            self.site_to_cell.clone(),
            self.mass_per_particle * s,
        )
    }

    fn check(&self, cell: CellId) -> Result<()> {
        if cell.0 < self.names.len() {
            Ok(())
        } else {
            Err(Error::UnknownCell(cell.0))
        }
    }

    fn check_layout(&self, layout: Layout) -> Result<()> {
        if layout.marbles() == self.particles() {
            Ok(())
        } else {
            Err(Error::Layout(format!(
                "grid covers {} particles, state has {}",
                self.particles(),
                layout.marbles()
            )))
        }
    }

    fn key_mass(&self, key: ConfigKey, cell: CellId) -> f64 {
        let count = (0..self.particles())
            .filter(|&i| {
                self.cell_of(i, Site::from_index((key.0 >> i & 1) as usize).unwrap()) == cell
            })
            .count();
        count as f64 * self.mass_per_particle
    }
}

/// Eigenvalue of the cell mass operator on one configuration.
pub fn mass_in_cell(config: &Configuration, grid: &CellGrid, cell: CellId) -> Result<f64> {
    grid.check(cell)?;
    if config.n() != grid.particles() {
        return Err(Error::Layout(format!(
            "configuration has {} particles, grid covers {}",
            config.n(),
            grid.particles()
        )));
    }
    let count = config
        .marble_sites
        .iter()
        .enumerate()
        .filter(|&(i, &site)| grid.cell_of(i, site) == cell)
        .count();
    Ok(count as f64 * grid.mass_per_particle)
}

fn cell_moments(wf: &WaveFunction, grid: &CellGrid, cell: CellId) -> Result<(f64, f64)> {
    grid.check(cell)?;
    grid.check_layout(wf.layout())?;
    let weighted: Vec<(f64, f64)> = wf
        .probabilities()
        .map(|(k, p)| (p, grid.key_mass(k, cell)))
        .collect();
    let expected: f64 = weighted.iter().map(|(p, x)| p * x).sum();
    let variance: f64 = weighted
        .iter()
        .map(|(p, x)| p * (x - expected) * (x - expected))
        .sum();
    Ok((expected, variance))
}

/// `<psi| M_cell |psi>`.
pub fn expected_mass(wf: &WaveFunction, grid: &CellGrid, cell: CellId) -> Result<f64> {
    Ok(cell_moments(wf, grid, cell)?.0)
}

/// `<psi| (M_cell - <M_cell>)^2 |psi>`.
pub fn variance_mass(wf: &WaveFunction, grid: &CellGrid, cell: CellId) -> Result<f64> {
    Ok(cell_moments(wf, grid, cell)?.1)
}

/// Threshold for accessibility: `R < epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessibilityParams {
    epsilon: f64,
}

impl AccessibilityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        check_range("epsilon", epsilon, epsilon > 0.0 && epsilon < 1.0, "(0, 1)")?;
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for AccessibilityParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Moments and verdict for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMass {
    pub expected: f64,
    pub variance: f64,
    /// `V / M^2`; `+inf` when `M = 0 < V`; `0` for an empty cell.
    pub ratio: f64,
    pub accessible: bool,
}

impl CellMass {
    pub fn from_moments(expected: f64, variance: f64, params: AccessibilityParams) -> Self {
        let ratio = if expected > 0.0 {
            variance / (expected * expected)
        } else if variance > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let vacuous = expected == 0.0 && variance == 0.0;
        Self {
            expected,
            variance,
            ratio,
            accessible: vacuous || ratio < params.epsilon,
        }
    }
}

pub fn ratio(wf: &WaveFunction, grid: &CellGrid, cell: CellId) -> Result<f64> {
    let (e, v) = cell_moments(wf, grid, cell)?;
    Ok(CellMass::from_moments(e, v, AccessibilityParams::default()).ratio)
}

pub fn accessible(
    wf: &WaveFunction,
    grid: &CellGrid,
    cell: CellId,
    params: AccessibilityParams,
) -> Result<bool> {
    let (e, v) = cell_moments(wf, grid, cell)?;
    Ok(CellMass::from_moments(e, v, params).accessible)
}

/// Per-cell moments in cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    pub cells: Vec<(String, CellMass)>,
}

impl MassReport {
    pub fn get(&self, name: &str) -> Option<&CellMass> {
        self.cells.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn total_expected(&self) -> f64 {
        self.cells.iter().map(|(_, c)| c.expected).sum()
    }
}

pub fn mass_report(
    wf: &WaveFunction,
    grid: &CellGrid,
    params: AccessibilityParams,
) -> Result<MassReport> {
    let cells = grid
        .cells()
        .map(|cell| {
            let (e, v) = cell_moments(wf, grid, cell)?;
            Ok((
                grid.name(cell)?.to_string(),
                CellMass::from_moments(e, v, params),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MassReport { cells })
}

/// The two-region states: the superposition of all `n` particles in A with
/// all `n` in B, and the product of half the particles in A with half in B.
/// Returns `(superposed, split, grid)` with one cell per region.
pub fn ggb_states(n: usize, m: f64) -> Result<(WaveFunction, WaveFunction, CellGrid)> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Parameter {
            name: "n",
            value: n as f64,
            range: "an even count >= 2",
        });
    }
    let layout = Layout::marbles_only(n);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let superposed = WaveFunction::from_amplitudes(
        layout,
        [
            (Configuration::marbles(vec![Site::In; n]), h),
            (Configuration::marbles(vec![Site::Out; n]), h),
        ],
    )?;
    let halves = (0..n)
        .map(|i| if i < n / 2 { Site::In } else { Site::Out })
        .collect();
    let split = WaveFunction::from_amplitudes(
        layout,
        [(Configuration::marbles(halves), Complex64::new(1.0, 0.0))],
    )?;
    Ok((superposed, split, CellGrid::regions(n, m)?))
}

/// Accessible mass in the box for `n` marbles in the uniform product state.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMassReport {
    pub n: u64,
    pub a_sq: f64,
    pub mass: f64,
    pub in_box_expected: f64,
    pub deficit: f64,
    pub deficit_target: f64,
    /// Smallest `n` whose deficit reaches `deficit_target`; `None` when no
    /// finite `n` does.
    pub min_n_for_deficit: Option<u64>,
}

pub fn box_mass_report(
    coeffs: MarbleCoeffs,
    n: u64,
    mass: f64,
    deficit_target: f64,
) -> Result<BoxMassReport> {
    check_range("mass", mass, mass > 0.0 && mass.is_finite(), "(0, inf)")?;
    check_range(
        "deficit",
        deficit_target,
        deficit_target >= 0.0 && deficit_target.is_finite(),
        "[0, inf)",
    )?;
    let a_sq = coeffs.in_probability();
    let in_box_expected = n as f64 * a_sq * mass;
    let deficit = n as f64 * mass - in_box_expected;
    Ok(BoxMassReport {
        n,
        a_sq,
        mass,
        in_box_expected,
        deficit,
        deficit_target,
        min_n_for_deficit: min_n_for_deficit(a_sq, mass, deficit_target),
    })
}

fn min_n_for_deficit(a_sq: f64, mass: f64, target: f64) -> Option<u64> {
    let reaches = |n: u64| n as f64 * mass - n as f64 * a_sq * mass >= target;
    if target <= 0.0 {
        return Some(0);
    }
    let per_marble = (1.0 - a_sq) * mass;
    if per_marble <= 0.0 {
        return None;
    }
    let mut n = (target / per_marble).ceil().max(0.0) as u64;
    while n > 0 && reaches(n - 1) {
        n -= 1;
    }
    while !reaches(n) {
        n += 1;
    }
    Some(n)
}

/// Closed-form mass and location verdicts for the uniform product state,
/// under both cell groupings: one box cell for all marbles, or one in-box
/// cell per marble.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMassSummary {
    pub n: u64,
    pub box_cell: CellMass,
    pub per_marble_cell: CellMass,
    pub joint_all_in: f64,
    pub per_marble_claim_holds: bool,
    pub conjunction_holds: bool,
}

pub fn product_mass_summary(
    coeffs: MarbleCoeffs,
    n: u64,
    mass: f64,
    fuzzy: FuzzyParams,
    access: AccessibilityParams,
) -> Result<ProductMassSummary> {
    check_range("mass", mass, mass > 0.0 && mass.is_finite(), "(0, inf)")?;
    let a_sq = coeffs.in_probability();
    let b_sq = coeffs.b().norm_sqr();
    let nf = n as f64;
    // Bernoulli per marble; the box cell holds a binomial count.
    let per_marble_cell = CellMass::from_moments(mass * a_sq, mass * mass * a_sq * b_sq, access);
    let box_cell = CellMass::from_moments(nf * mass * a_sq, nf * mass * mass * a_sq * b_sq, access);
    let joint_all_in = uniform_conjunction_mass(a_sq, n);
    Ok(ProductMassSummary {
        n,
        box_cell,
        per_marble_cell,
        joint_all_in,
        per_marble_claim_holds: a_sq >= fuzzy.threshold(),
        conjunction_holds: joint_all_in >= fuzzy.threshold(),
    })
}
