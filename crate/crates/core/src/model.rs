//! Domain types for single-cell slotted backoff networks.
//!
//! A [`Scenario`] holds one or two backoff classes. Each class has a vector
//! of per-stage attempt intensities. In [`Mode::Scaled`] these are the scaled
//! rates `q_k`, and the per-slot probability of a node is `q_k / N`. In
//! [`Mode::Raw`] they are per-slot probabilities `p_k` directly, and the
//! mean-field machinery works with the effective rates `N * p_k`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Relative tolerance for the halving test of the BMP condition.
const BMP_REL_TOL: f64 = 1e-12;

/// Tolerance on the sum of class shares.
const SIGMA_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field}: dimension mismatch, expected {expected} entries but found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{field}: rate {value} is negative or not finite")]
    NegativeRate { field: String, value: f64 },
    #[error("{field}: all rates are zero")]
    AllRatesZero { field: String },
    #[error("{field}: share {value} is outside [0, 1]")]
    ShareOutOfRange { field: String, value: f64 },
    #[error("classes: shares sum to {sum}, expected 1")]
    ShareSum { sum: f64 },
    #[error("{field}: probability {value} is outside [0, 1] in raw mode")]
    ProbabilityOutOfRange { field: String, value: f64 },
    #[error("classes: expected 1 or 2 classes, found {found}")]
    ClassCount { found: usize },
    #[error("N: population must be at least 1")]
    EmptyPopulation,
    #[error("delta: {0}")]
    BadDelta(String),
    #[error("scenario document: {0}")]
    Parse(String),
}

/// Per-class backoff parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    q: Vec<f64>,
    sigma: f64,
}

impl ClassParams {
    /// Builds a class with `k + 1` stages. `q` holds scaled rates or raw
    /// probabilities depending on the scenario mode.
    pub fn new(q: Vec<f64>, k: usize, sigma: f64) -> Result<Self, ModelError> {
        Self::checked(q, k, sigma, "class")
    }

    fn checked(q: Vec<f64>, k: usize, sigma: f64, prefix: &str) -> Result<Self, ModelError> {
        if q.len() != k + 1 {
            return Err(ModelError::DimensionMismatch {
                field: format!("{prefix}.q"),
                expected: k + 1,
                found: q.len(),
            });
        }
        for (i, &v) in q.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::NegativeRate {
                    field: format!("{prefix}.q[{i}]"),
                    value: v,
                });
            }
        }
        if q.iter().all(|&v| v == 0.0) {
            return Err(ModelError::AllRatesZero {
                field: format!("{prefix}.q"),
            });
        }
        if !(0.0..=1.0).contains(&sigma) {
            return Err(ModelError::ShareOutOfRange {
                field: format!("{prefix}.sigma"),
                value: sigma,
            });
        }
        Ok(Self { q, sigma })
    }

    /// Single class holding the whole population.
    pub fn homogeneous(q: Vec<f64>) -> Result<Self, ModelError> {
        let k = q.len().saturating_sub(1);
        Self::new(q, k, 1.0)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Index of the highest backoff stage.
    pub fn k(&self) -> usize {
        self.q.len() - 1
    }

    pub fn stages(&self) -> usize {
        self.q.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn max_rate(&self) -> f64 {
        self.q.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn with_rates(&self, q: Vec<f64>) -> Self {
        Self {
            q,
            sigma: self.sigma,
        }
    }
}

/// AIFS gap between the two classes, in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Finite(u32),
    Infinite,
}

impl Delta {
    pub fn is_infinite(self) -> bool {
        matches!(self, Delta::Infinite)
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Finite(d) => write!(f, "{d}"),
            Delta::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Delta::Finite(d) => s.serialize_u32(*d),
            Delta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u32),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Delta::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(Delta::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "delta must be a nonnegative integer or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// How class rate vectors are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Scaled rates `q_k`; per-slot probability `q_k / N`; time in
    /// mean-field units (one unit is `N` slots).
    Scaled,
    /// Per-slot probabilities `p_k`; time in backoff slots.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    classes: Vec<ClassParams>,
    delta: Delta,
    n: u64,
    mode: Mode,
}

impl Scenario {
    pub fn new(
        classes: Vec<ClassParams>,
        delta: Delta,
        n: u64,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        validate(Scenario {
            classes,
            delta,
            n,
            mode,
        })
    }

    /// One class holding the whole population.
    pub fn homogeneous(class: ClassParams, n: u64, mode: Mode) -> Result<Self, ModelError> {
        Self::new(vec![class], Delta::Infinite, n, mode)
    }

    pub fn classes(&self) -> &[ClassParams] {
        &self.classes
    }

    pub fn class(&self, i: usize) -> &ClassParams {
        &self.classes[i]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_heterogeneous(&self) -> bool {
        self.classes.len() == 2
    }

    pub fn delta(&self) -> Delta {
        self.delta
    }

    pub fn population(&self) -> u64 {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Effective mean-field rates of class `i`: `q_k` in scaled mode,
    /// `N * p_k` in raw mode.
    pub fn effective_rates(&self, i: usize) -> Vec<f64> {
        let q = self.classes[i].q();
        match self.mode {
            Mode::Scaled => q.to_vec(),
            Mode::Raw => q.iter().map(|p| p * self.n as f64).collect(),
        }
    }

    /// Per-slot attempt probabilities of class `i`.
    pub fn slot_probabilities(&self, i: usize) -> Vec<f64> {
        let q = self.classes[i].q();
        match self.mode {
            Mode::Scaled => q.iter().map(|v| v / self.n as f64).collect(),
            Mode::Raw => q.to_vec(),
        }
    }

    /// The class with effective rates in place of the configured vector.
    pub fn effective_class(&self, i: usize) -> ClassParams {
        self.classes[i].with_rates(self.effective_rates(i))
    }

    /// Factor converting the mean-field vector field into the trajectory's
    /// time unit: 1 in scaled mode, `1/N` (per slot) in raw mode.
    pub fn time_scale(&self) -> f64 {
        match self.mode {
            Mode::Scaled => 1.0,
            Mode::Raw => 1.0 / self.n as f64,
        }
    }

    pub fn time_unit(&self) -> &'static str {
        match self.mode {
            Mode::Scaled => "mean-field time",
            Mode::Raw => "slots",
        }
    }

    /// Number of nodes in class `i`, when `sigma * N` is integral.
    pub fn class_population(&self, i: usize) -> Option<u64> {
        let exact = self.classes[i].sigma() * self.n as f64;
        let rounded = exact.round();
        ((exact - rounded).abs() <= 1e-6).then_some(rounded as u64)
    }

    /// Parses and validates a scenario JSON document.
    pub fn from_json_str(doc: &str) -> Result<Self, ModelError> {
        let raw: ScenarioDoc =
            serde_json::from_str(doc).map_err(|e| ModelError::Parse(e.to_string()))?;
        raw.into_scenario()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = ScenarioDoc {
            classes: self
                .classes
                .iter()
                .map(|c| ClassDoc {
                    q: c.q.clone(),
                    k: c.k(),
                    sigma: c.sigma,
                })
                .collect(),
            delta: self.delta,
            n: self.n,
            mode: self.mode,
        };
        serde_json::to_value(doc).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    q: Vec<f64>,
    #[serde(rename = "K")]
    k: usize,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    classes: Vec<ClassDoc>,
    delta: Delta,
    #[serde(rename = "N")]
    n: u64,
    mode: Mode,
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario, ModelError> {
        let classes = self
            .classes
            .into_iter()
            .enumerate()
            .map(|(i, c)| ClassParams::checked(c.q, c.k, c.sigma, &format!("classes[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Scenario::new(classes, self.delta, self.n, self.mode)
    }
}

/// Checks every scenario invariant. One-class scenarios get `delta = inf`.
pub fn validate(mut s: Scenario) -> Result<Scenario, ModelError> {
    if !(1..=2).contains(&s.classes.len()) {
        return Err(ModelError::ClassCount {
            found: s.classes.len(),
        });
    }
    if s.n == 0 {
        return Err(ModelError::EmptyPopulation);
    }
    for (i, c) in s.classes.iter().enumerate() {
        // ClassParams::new already enforces these, but scenarios may be
        // assembled from clones of other scenarios' classes.
        let c = ClassParams::checked(c.q.clone(), c.k(), c.sigma, &format!("classes[{i}]"))?;
        if s.mode == Mode::Raw {
            if let Some((k, &v)) = c.q.iter().enumerate().find(|(_, &v)| v > 1.0) {
                return Err(ModelError::ProbabilityOutOfRange {
                    field: format!("classes[{i}].q[{k}]"),
                    value: v,
                });
            }
        }
    }
    let sum: f64 = s.classes.iter().map(|c| c.sigma).sum();
    if (sum - 1.0).abs() > SIGMA_SUM_TOL {
        return Err(ModelError::ShareSum { sum });
    }
    if s.classes.len() == 1 {
        s.delta = Delta::Infinite;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub mono: bool,
    pub mint: bool,
    pub bmp: bool,
    pub uniq_hint: bool,
}

/// Evaluates MONO (nonincreasing rates), MINT (all rates at most 1) and the
/// infinite-stage BMP condition (`q_0 < ln 2` with exact halving).
pub fn check_conditions(c: &ClassParams) -> ConditionReport {
    let q = c.q();
    let mono = q.windows(2).all(|w| w[0] >= w[1]);
    let mint = q.iter().all(|&v| v <= 1.0);
    let bmp = q[0] < std::f64::consts::LN_2
        && q.windows(2).all(|w| {
            let half = w[0] / 2.0;
            (w[1] - half).abs() <= BMP_REL_TOL * half.abs().max(f64::MIN_POSITIVE)
        });
    ConditionReport {
        mono,
        mint,
        bmp,
        uniq_hint: mono || mint,
    }
}

/// `sum_k q_k * phi_k`.
pub fn mean_attempt_rate(phi: &[f64], c: &ClassParams) -> f64 {
    debug_assert_eq!(phi.len(), c.stages());
    dot(c.q(), phi)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean-field collision probability `1 - exp(-rate)`.
pub fn collision_mfl(rate: f64) -> f64 {
    debug_assert!(rate >= 0.0);
    -(-rate).exp_m1()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("no node in tagged stage {0}")]
    EmptyTaggedStage(usize),
    #[error("counts and probabilities differ in length")]
    LengthMismatch,
}

/// Finite-N collision probability seen by a node in stage `tagged`: the
/// probability that at least one of the other nodes attempts.
pub fn collision_finite(counts: &[u64], p: &[f64], tagged: usize) -> Result<f64, CollisionError> {
    if counts.len() != p.len() {
        return Err(CollisionError::LengthMismatch);
    }
    if counts.get(tagged).copied().unwrap_or(0) == 0 {
        return Err(CollisionError::EmptyTaggedStage(tagged));
    }
    // Product over the other nodes, evaluated in log space.
    let mut log_quiet = 0.0;
    for (k, (&n, &pk)) in counts.iter().zip(p).enumerate() {
        let others = if k == tagged { n - 1 } else { n };
        if others == 0 {
            continue;
        }
        if pk >= 1.0 {
            return Ok(1.0);
        }
        log_quiet += others as f64 * (-pk).ln_1p();
    }
    Ok((-log_quiet.exp_m1()).clamp(0.0, 1.0))
}

/// Stage-distribution vectors of every class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyState {
    pub classes: Vec<Vec<f64>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("class {class}: expected {expected} stages, found {found}")]
    Shape {
        class: usize,
        expected: usize,
        found: usize,
    },
    #[error("class {class} stage {stage}: occupancy {value} below tolerance")]
    Negative {
        class: usize,
        stage: usize,
        value: f64,
    },
    #[error("class {class}: occupancy sums to {sum}, expected share {sigma}")]
    Mass { class: usize, sum: f64, sigma: f64 },
}

/// Tolerance for occupancy invariants.
pub const OCCUPANCY_TOL: f64 = 1e-9;

impl OccupancyState {
    /// Every node of every class in stage 0.
    pub fn all_stage_zero(s: &Scenario) -> Self {
        let classes = s
            .classes()
            .iter()
            .map(|c| {
                let mut v = vec![0.0; c.stages()];
                v[0] = c.sigma();
                v
            })
            .collect();
        Self { classes }
    }

    pub fn check(&self, s: &Scenario) -> Result<(), OccupancyError> {
        if self.classes.len() != s.num_classes() {
            return Err(OccupancyError::Shape {
                class: self.classes.len(),
                expected: s.num_classes(),
                found: self.classes.len(),
            });
        }
        for (i, (phi, c)) in self.classes.iter().zip(s.classes()).enumerate() {
            check_class(i, phi, c)?;
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.classes.iter().flatten().copied().collect()
    }

    /// Splits a flat vector according to the scenario's class layout.
    pub fn from_flat(flat: &[f64], s: &Scenario) -> Self {
        let mut classes = Vec::with_capacity(s.num_classes());
        let mut offset = 0;
        for c in s.classes() {
            classes.push(flat[offset..offset + c.stages()].to_vec());
            offset += c.stages();
        }
        Self { classes }
    }
}

pub(crate) fn check_class(i: usize, phi: &[f64], c: &ClassParams) -> Result<(), OccupancyError> {
    if phi.len() != c.stages() {
        return Err(OccupancyError::Shape {
            class: i,
            expected: c.stages(),
            found: phi.len(),
        });
    }
    if let Some((k, &v)) = phi
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= -OCCUPANCY_TOL))
    {
        return Err(OccupancyError::Negative {
            class: i,
            stage: k,
            value: v,
        });
    }
    let sum: f64 = phi.iter().sum();
    if !((sum - c.sigma()).abs() <= OCCUPANCY_TOL) {
        return Err(OccupancyError::Mass {
            class: i,
            sum,
            sigma: c.sigma(),
        });
    }
    Ok(())
}
