//! Equilibrium classification, limit-cycle detection and basin probing.

use nalgebra::{DMatrix, Schur};
use serde::Serialize;
use thiserror::Error;

use crate::fpe::{equilibrium_occupancy, solve, FpeError, FpeSolution};
use crate::model::{OccupancyState, Scenario};
use crate::ode::{integrate, Controls, MeanField, OdeError, Trajectory, VectorField};

/// Real-part threshold separating stable, marginal and unstable.
pub const EIGEN_TOL: f64 = 1e-8;

/// Relative finite-difference step for Jacobians.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("non-finite Jacobian entry ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("trajectory too short: {0} samples after burn-in")]
    TooShort(usize),
    #[error(transparent)]
    Fpe(#[from] FpeError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Mean-field dynamics on the reduced coordinates: stage 0 of each class is
/// eliminated through `phi_0 = sigma - sum_{k>=1} phi_k`.
pub struct ReducedField<'a> {
    mf: &'a MeanField,
}

impl<'a> ReducedField<'a> {
    pub fn new(mf: &'a MeanField) -> Self {
        Self { mf }
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for c in 0..self.mf.num_classes() {
            let o = self.mf.offset(c);
            out.extend_from_slice(&full[o + 1..o + self.mf.stages(c)]);
        }
        out
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(self.mf.dim());
        let mut r = 0;
        for c in 0..self.mf.num_classes() {
            let k = self.mf.stages(c) - 1;
            let tail = &reduced[r..r + k];
            full.push(self.mf.sigma(c) - tail.iter().sum::<f64>());
            full.extend_from_slice(tail);
            r += k;
        }
        full
    }
}

impl VectorField for ReducedField<'_> {
    fn dim(&self) -> usize {
        self.mf.dim() - self.mf.num_classes()
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let full = self.expand(x);
        let mut dfull = vec![0.0; full.len()];
        self.mf.eval(&full, &mut dfull);
        dx.copy_from_slice(&self.reduce(&dfull));
    }
}

/// Central-difference Jacobian with steps `rel_step * max(1, |x_j|)`.
pub fn jacobian_fd<F: VectorField + ?Sized>(f: &F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>, StabilityError> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        f.eval(&xp, &mut fp);
        xp[j] = x[j] - h;
        f.eval(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(StabilityError::NonFinite(i, j));
            }
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Eigenvalues as `(re, im)` pairs, sorted by decreasing real part.
pub fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<(f64, f64)>, StabilityError> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m, f64::EPSILON, 100_000).ok_or(StabilityError::NoConvergence)?;
    let mut ev: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

pub fn classify(eigs: &[(f64, f64)], tol: f64) -> Classification {
    if eigs.iter().any(|e| e.0 > tol) {
        Classification::Unstable
    } else if eigs.iter().all(|e| e.0 < -tol) {
        Classification::Stable
    } else {
        Classification::Marginal
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub gamma: f64,
    pub solution: FpeSolution,
    pub occupancy: OccupancyState,
    /// In the scenario's time unit.
    pub eigenvalues: Vec<(f64, f64)>,
    pub classification: Classification,
}

/// Occupancy of every class at a stationary solution.
pub fn solution_occupancy(s: &Scenario, sol: &FpeSolution) -> Result<OccupancyState, FpeError> {
    let classes = (0..s.num_classes())
        .map(|i| equilibrium_occupancy(sol.class_gamma(i), &s.effective_class(i)))
        .collect::<Result<_, _>>()?;
    Ok(OccupancyState { classes })
}

/// Reduced Jacobian of the mean-field dynamics at `state`.
pub fn reduced_jacobian(s: &Scenario, state: &OccupancyState, rel_step: f64) -> Result<DMatrix<f64>, StabilityError> {
    let mf = MeanField::new(s);
    let red = ReducedField::new(&mf);
    jacobian_fd(&red, &red.reduce(&state.flatten()), rel_step)
}

pub fn classify_equilibria(s: &Scenario) -> Result<Vec<EquilibriumReport>, StabilityError> {
    classify_equilibria_with(s, FD_STEP)
}

pub fn classify_equilibria_with(s: &Scenario, rel_step: f64) -> Result<Vec<EquilibriumReport>, StabilityError> {
    let mut out = Vec::new();
    for sol in solve(s)? {
        let occupancy = solution_occupancy(s, &sol)?;
        let eigs = eigenvalues(reduced_jacobian(s, &occupancy, rel_step)?)?;
        out.push(EquilibriumReport {
            gamma: sol.gamma_c,
            classification: classify(&eigs, EIGEN_TOL),
            eigenvalues: eigs,
            occupancy,
            solution: sol,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub periodic: bool,
    /// Mean gap between the last (up to ten) peaks, in trajectory time units.
    pub period: f64,
    /// Mean peak-to-trough of the observed series.
    pub amplitude: f64,
    /// Number of trailing gaps consistent with the period within 2%.
    pub confidence: usize,
    /// `(max gap - min gap) / mean gap` over the gaps used for the period.
    pub jitter: f64,
    pub peaks: Vec<f64>,
}

const CYCLE_GAPS: usize = 10;
const CYCLE_MIN_GAPS: usize = 5;
const CYCLE_REL_TOL: f64 = 0.02;

/// Peak-based cycle detection on a sampled scalar series.
pub fn detect_cycle(times: &[f64], series: &[f64], burn_in_fraction: f64) -> Result<CycleReport, StabilityError> {
    let t_end = *times.last().unwrap_or(&0.0);
    let t0 = times.first().copied().unwrap_or(0.0);
    let cut = t0 + burn_in_fraction * (t_end - t0);
    let start = times.partition_point(|&t| t < cut);
    let (ts, ys) = (&times[start..], &series[start..]);
    if ys.len() < 3 {
        return Err(StabilityError::TooShort(ys.len()));
    }
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let scale = 1.0 + hi.abs().max(lo.abs());

    // Peak indices and parabolic-refined peak times.
    let mut idx = Vec::new();
    let mut peaks = Vec::new();
    if hi - lo > 1e-9 * scale {
        for i in 1..ys.len() - 1 {
            if ys[i] > mid && ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] {
                idx.push(i);
                peaks.push(refine_peak(&ts[i - 1..=i + 1], &ys[i - 1..=i + 1]));
            }
        }
    }
    let amplitudes: Vec<f64> = idx
        .windows(2)
        .map(|w| {
            let trough = ys[w[0]..w[1]].iter().copied().fold(f64::INFINITY, f64::min);
            ys[w[1]] - trough
        })
        .collect();
    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &gaps[gaps.len().saturating_sub(CYCLE_GAPS)..];
    if tail.is_empty() {
        return Ok(CycleReport {
            periodic: false,
            period: 0.0,
            amplitude: 0.0,
            confidence: 0,
            jitter: f64::INFINITY,
            peaks,
        });
    }
    let period = tail.iter().sum::<f64>() / tail.len() as f64;
    let gmax = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gmin = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let jitter = (gmax - gmin) / period;
    let confidence = gaps
        .iter()
        .rev()
        .take_while(|g| ((*g - period) / period).abs() <= CYCLE_REL_TOL)
        .count();
    let amp_tail = &amplitudes[amplitudes.len().saturating_sub(CYCLE_GAPS)..];
    let amplitude = amp_tail.iter().sum::<f64>() / amp_tail.len() as f64;
    // A decaying oscillation keeps its period; require a sustained amplitude too.
    let amp_spread = amp_tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - amp_tail.iter().copied().fold(f64::INFINITY, f64::min);
    let sustained = amplitude > 1e-6 * scale && amp_spread <= 0.1 * amplitude;
    Ok(CycleReport {
        periodic: tail.len() >= CYCLE_MIN_GAPS && jitter < CYCLE_REL_TOL && sustained,
        period,
        amplitude,
        confidence,
        jitter,
        peaks,
    })
}

/// Vertex time of the parabola through three samples.
fn refine_peak(t: &[f64], y: &[f64]) -> f64 {
    let (t0, t1, t2) = (t[0], t[1], t[2]);
    let d1 = (y[1] - y[0]) / (t1 - t0);
    let d2 = (y[2] - y[1]) / (t2 - t1);
    let curv = (d2 - d1) / (t2 - t0);
    if curv >= 0.0 || !curv.is_finite() {
        return t1;
    }
    // y = y1 + d1 (x - t0) ... rewritten around the middle sample.
    let slope_mid = d1 + curv * (t1 - t0);
    let v = t1 - slope_mid / (2.0 * curv);
    v.clamp(t0, t2)
}

/// Runs [`detect_cycle`] on the class-H (or only) average attempt rate.
pub fn detect_limit_cycle(traj: &Trajectory, burn_in_fraction: f64) -> Result<CycleReport, StabilityError> {
    detect_cycle(&traj.times, &traj.qbar_series(), burn_in_fraction)
}

/// Sample autocorrelation for lags `0..=max_lag` (mean removed, lag 0 = 1).
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            if c0 == 0.0 {
                return 0.0;
            }
            c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect()
}

/// First local maximum of an autocorrelation after it first turns negative.
pub fn first_acf_peak(acf: &[f64]) -> Option<usize> {
    let neg = acf.iter().position(|&v| v < 0.0)?;
    (neg.max(1)..acf.len().saturating_sub(1)).find(|&i| acf[i] > acf[i - 1] && acf[i] >= acf[i + 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinLabel {
    /// Index into the equilibrium list.
    Equilibrium(usize),
    NonConvergent,
}

/// Distance in average attempt rate for basin assignment.
pub const BASIN_TOL: f64 = 1e-4;

/// Integrates from every start and labels it by the stable equilibrium it
/// ends near.
pub fn basin_map(
    s: &Scenario,
    equilibria: &[EquilibriumReport],
    initial_points: &[OccupancyState],
    horizon: f64,
    controls: &Controls,
) -> Result<Vec<BasinLabel>, StabilityError> {
    let mf = MeanField::new(s);
    let mut labels = Vec::with_capacity(initial_points.len());
    for x0 in initial_points {
        let traj = integrate(&mf, s, x0, horizon, controls)?;
        let end = &traj.observables.last().expect("non-empty").qbar;
        let label = equilibria
            .iter()
            .enumerate()
            .filter(|(_, e)| e.classification == Classification::Stable)
            .find(|(_, e)| e.solution.qbar.iter().zip(end).all(|(a, b)| (a - b).abs() <= BASIN_TOL))
            .map_or(BasinLabel::NonConvergent, |(i, _)| BasinLabel::Equilibrium(i));
        labels.push(label);
    }
    Ok(labels)
}
