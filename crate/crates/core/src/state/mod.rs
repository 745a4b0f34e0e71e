//! Wavefunctions over discrete marble configurations.
//!
//! Each marble sits IN or OUT of a single box. A configuration may also carry
//! one register reading per marble and a pointer reading `O` in `0..=n` (the
//! number of marbles the counting apparatus reports as IN).
//!
//! Three representations are provided:
//!
//! * [`WaveFunction`]: a sparse amplitude map keyed by bit-packed
//!   configurations. General, capped at [`DENSE_MAX_MARBLES`] marbles.
//! * [`SymmetricWaveFunction`]: permutation-symmetric states stored as one
//!   amplitude per OUT count.
//! * [`FactorizedState`]: per-marble factors times an optional pointer matrix
//!   indexed by IN count. Exact for product states and for product states
//!   coupled to registers and a pointer, and closed under localization hits,
//!   so it carries the large-`n` simulations.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{check_range, Error, Result};

mod factorized;
mod symmetric;
mod wavefunction;

pub use factorized::FactorizedState;
pub use symmetric::SymmetricWaveFunction;
pub use wavefunction::{expansion_amplitude, product_state, WaveFunction};

/// Absolute tolerance for normalization and equality checks.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance used when deciding whether a state is permutation symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Amplitudes with magnitude below this are dropped from sparse storage.
pub const PRUNE_THRESHOLD: f64 = 1e-300;
/// Largest marble count the sparse map accepts (2^24 marble configurations).
pub const DENSE_MAX_MARBLES: usize = 24;

/// Location of a marble, or the reading of a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    In,
    Out,
}

impl Site {
    pub const BOTH: [Site; 2] = [Site::In, Site::Out];

    pub fn other(self) -> Site {
        match self {
            Site::In => Site::Out,
            Site::Out => Site::In,
        }
    }

    /// Outcome index used by localization hits: IN is 0, OUT is 1.
    pub fn index(self) -> usize {
        match self {
            Site::In => 0,
            Site::Out => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Site> {
        match index {
            0 => Some(Site::In),
            1 => Some(Site::Out),
            _ => None,
        }
    }

    pub(crate) fn from_bit(bit: bool) -> Site {
        if bit {
            Site::Out
        } else {
            Site::In
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Site::In => "in",
            Site::Out => "out",
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Partial assignment of marbles to sites.
pub type Assignment = BTreeMap<usize, Site>;

pub(crate) fn check_assignment(assignment: &Assignment, n: usize) -> Result<()> {
    match assignment.keys().next_back() {
        Some(&index) if index >= n => Err(Error::MarbleIndex { index, n }),
        _ => Ok(()),
    }
}

/// One basis configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub marble_sites: Vec<Site>,
    pub register_readings: Option<Vec<Site>>,
    pub pointer: Option<usize>,
}

impl Configuration {
    pub fn new(
        marble_sites: Vec<Site>,
        register_readings: Option<Vec<Site>>,
        pointer: Option<usize>,
    ) -> Result<Self> {
        let n = marble_sites.len();
        if let Some(registers) = &register_readings {
            if registers.len() != n {
                return Err(Error::InvalidConfiguration(format!(
                    "{} register readings for {n} marbles",
                    registers.len()
                )));
            }
        }
        if let Some(reading) = pointer {
            if register_readings.is_none() {
                return Err(Error::InvalidConfiguration(
                    "pointer present without registers".into(),
                ));
            }
            if reading > n {
                return Err(Error::InvalidConfiguration(format!(
                    "pointer reading {reading} exceeds {n}"
                )));
            }
        }
        Ok(Self {
            marble_sites,
            register_readings,
            pointer,
        })
    }

    pub fn marbles(marble_sites: Vec<Site>) -> Self {
        Self {
            marble_sites,
            register_readings: None,
            pointer: None,
        }
    }

    pub fn n(&self) -> usize {
        self.marble_sites.len()
    }

    pub fn in_count(&self) -> usize {
        self.marble_sites.iter().filter(|&&s| s == Site::In).count()
    }

    pub fn register_in_count(&self) -> Option<usize> {
        self.register_readings
            .as_ref()
            .map(|r| r.iter().filter(|&&s| s == Site::In).count())
    }

    /// Order matching the bit-packed key: pointer first, then registers and
    /// marbles from the highest index down, with IN < OUT.
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.pointer
            .cmp(&other.pointer)
            .then_with(|| {
                let lhs = self.register_readings.iter().flat_map(|r| r.iter().rev());
                let rhs = other.register_readings.iter().flat_map(|r| r.iter().rev());
                lhs.cmp(rhs)
            })
            .then_with(|| {
                self.marble_sites
                    .iter()
                    .rev()
                    .cmp(other.marble_sites.iter().rev())
            })
    }
}

/// Neumaier-compensated sum; plain summation over 2^20 weights drifts past
/// the norm tolerance.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Localizable subsystem of a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subsystem {
    Marble(usize),
    Register(usize),
    Pointer,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsystem::Marble(i) => write!(f, "marble[{i}]"),
            Subsystem::Register(i) => write!(f, "register[{i}]"),
            Subsystem::Pointer => f.write_str("pointer"),
        }
    }
}

/// Bit-packed configuration key.
///
/// Bit `i` is set when marble `i` is OUT, bit `n + i` when register `i` reads
/// OUT, and the pointer reading occupies the bits from `2n` upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigKey(pub u64);

/// Which dimensions a state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    marbles: usize,
    registers: bool,
    pointer: bool,
}

impl Layout {
    pub fn marbles_only(n: usize) -> Self {
        Self {
            marbles: n,
            registers: false,
            pointer: false,
        }
    }

    /// Marbles plus one register per marble and the counting pointer.
    pub fn coupled(n: usize) -> Self {
        Self {
            marbles: n,
            registers: true,
            pointer: true,
        }
    }

    pub fn new(n: usize, registers: bool, pointer: bool) -> Result<Self> {
        if pointer && !registers {
            return Err(Error::Layout("pointer requires registers".into()));
        }
        Ok(Self {
            marbles: n,
            registers,
            pointer,
        })
    }

    pub fn marbles(&self) -> usize {
        self.marbles
    }

    pub fn has_registers(&self) -> bool {
        self.registers
    }

    pub fn has_pointer(&self) -> bool {
        self.pointer
    }

    /// Every subsystem hits can act on, in a fixed order.
    pub fn subsystems(&self) -> Vec<Subsystem> {
        let n = self.marbles;
        let mut out: Vec<Subsystem> = (0..n).map(Subsystem::Marble).collect();
        if self.registers {
            out.extend((0..n).map(Subsystem::Register));
        }
        if self.pointer {
            out.push(Subsystem::Pointer);
        }
        out
    }

    /// Number of distinguishable outcomes for a subsystem.
    pub fn outcome_count(&self, subsystem: Subsystem) -> Result<usize> {
        self.check_subsystem(subsystem)?;
        Ok(match subsystem {
            Subsystem::Pointer => self.marbles + 1,
            _ => 2,
        })
    }

    pub(crate) fn check_subsystem(&self, subsystem: Subsystem) -> Result<()> {
        let ok = match subsystem {
            Subsystem::Marble(i) => i < self.marbles,
            Subsystem::Register(i) => self.registers && i < self.marbles,
            Subsystem::Pointer => self.pointer,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSubsystem(subsystem.to_string()))
        }
    }

    pub(crate) fn check_outcome(&self, subsystem: Subsystem, outcome: usize) -> Result<()> {
        if outcome < self.outcome_count(subsystem)? {
            Ok(())
        } else {
            Err(Error::InvalidOutcome {
                subsystem: subsystem.to_string(),
                outcome,
            })
        }
    }

    fn pointer_width(&self) -> u32 {
        usize::BITS - self.marbles.leading_zeros()
    }

    pub(crate) fn pointer_shift(&self) -> u32 {
        2 * self.marbles as u32
    }

    /// Total key bits.
    #[cfg(test)]
    pub(crate) fn key_bits(&self) -> u32 {
        let n = self.marbles as u32;
        let mut bits = n;
        if self.registers {
            bits += n;
        }
        if self.pointer {
            bits += self.pointer_width();
        }
        bits
    }

    pub fn encode(&self, config: &Configuration) -> Result<ConfigKey> {
        let n = self.marbles;
        if config.n() != n {
            return Err(Error::Layout(format!(
                "configuration has {} marbles, layout has {n}",
                config.n()
            )));
        }
        if config.register_readings.is_some() != self.registers
            || config.pointer.is_some() != self.pointer
        {
            return Err(Error::Layout(
                "configuration dimensions do not match layout".into(),
            ));
        }
        let mut key = 0u64;
        for (i, &site) in config.marble_sites.iter().enumerate() {
            if site == Site::Out {
                key |= 1 << i;
            }
        }
        if let Some(registers) = &config.register_readings {
            for (i, &site) in registers.iter().enumerate() {
                if site == Site::Out {
                    key |= 1 << (n + i);
                }
            }
        }
        if let Some(reading) = config.pointer {
            if reading > n {
                return Err(Error::InvalidConfiguration(format!(
                    "pointer reading {reading} exceeds {n}"
                )));
            }
            key |= (reading as u64) << self.pointer_shift();
        }
        Ok(ConfigKey(key))
    }

    pub fn decode(&self, key: ConfigKey) -> Configuration {
        let n = self.marbles;
        let k = key.0;
        let marble_sites = (0..n).map(|i| Site::from_bit(k >> i & 1 == 1)).collect();
        let register_readings = self.registers.then(|| {
            (0..n)
                .map(|i| Site::from_bit(k >> (n + i) & 1 == 1))
                .collect()
        });
        let pointer = self
            .pointer
            .then(|| ((k >> self.pointer_shift()) & ((1u64 << self.pointer_width()) - 1)) as usize);
        Configuration {
            marble_sites,
            register_readings,
            pointer,
        }
    }

    /// Outcome index of `subsystem` in the configuration behind `key`.
    pub(crate) fn outcome_of(&self, key: ConfigKey, subsystem: Subsystem) -> usize {
        let k = key.0;
        match subsystem {
            Subsystem::Marble(i) => (k >> i & 1) as usize,
            Subsystem::Register(i) => (k >> (self.marbles + i) & 1) as usize,
            Subsystem::Pointer => {
                ((k >> self.pointer_shift()) & ((1u64 << self.pointer_width()) - 1)) as usize
            }
        }
    }
}

/// Per-marble amplitudes of `a|in> + b|out>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarbleCoeffs {
    a: Complex64,
    b: Complex64,
}

impl MarbleCoeffs {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { a, b })
    }

    /// Real non-negative amplitudes with `|a|^2 = a_sq`.
    pub fn from_in_probability(a_sq: f64) -> Result<Self> {
        check_range("a_sq", a_sq, (0.0..=1.0).contains(&a_sq), "[0, 1]")?;
        Self::new(
            Complex64::new(a_sq.sqrt(), 0.0),
            Complex64::new((1.0 - a_sq).sqrt(), 0.0),
        )
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn amplitude(&self, site: Site) -> Complex64 {
        match site {
            Site::In => self.a,
            Site::Out => self.b,
        }
    }

    /// `|a|^2`, the probability of finding the marble in the box.
    pub fn in_probability(&self) -> f64 {
        self.a.norm_sqr()
    }
}

/// Anything that assigns probabilities to marble-site assignments.
pub trait MarbleDistribution {
    fn marble_count(&self) -> usize;

    /// Squared amplitude carried by configurations consistent with
    /// `assignment`; registers and pointer are summed over.
    fn joint_probability(&self, assignment: &Assignment) -> Result<f64>;

    fn marginal_probability(&self, marble: usize, site: Site) -> Result<f64> {
        let n = self.marble_count();
        if marble >= n {
            return Err(Error::MarbleIndex { index: marble, n });
        }
        self.joint_probability(&Assignment::from([(marble, site)]))
    }
}
