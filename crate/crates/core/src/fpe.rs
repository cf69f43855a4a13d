//! Fixed-point equations of the stationary regime.
//!
//! The homogeneous system couples the average attempt rate and the collision
//! probability through `qbar = sum g^k / sum (g^k / q_k)` and
//! `g = 1 - exp(-qbar)`; all of its solutions are found by scanning the
//! scalar residual in `g`. The two-class AIFS system adds the slot-type
//! weights `(pi_R, pi_C)` and is solved on the `(qbar_H, qbar_L)` plane.

use serde::Serialize;
use thiserror::Error;

use crate::model::{collision_mfl, ClassParams, Delta, Scenario};

/// Upper end of the collision-probability scan interval.
pub const GAMMA_SUP: f64 = 1.0 - 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpeError {
    #[error("stage {stage} has zero rate; equilibrium occupancy undefined")]
    ZeroRate { stage: usize },
    #[error("scenario has {0} classes; this solver needs {1}")]
    ClassCount(usize, usize),
    #[error("no fixed point found; the solver failed")]
    NoRoot,
}

/// Stationary average rate implied by collision probability `gamma`:
/// `sum_k gamma^k / sum_k (gamma^k / r_k)`.
///
/// Sums are taken term by term (no closed form), so `gamma = 1` is fine. A
/// zero rate in a stage that carries weight sends the denominator to
/// infinity and the result to zero.
pub fn stationary_rate(gamma: f64, rates: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut g = 1.0;
    for &r in rates {
        if g > 0.0 {
            if r == 0.0 {
                return 0.0;
            }
            den += g / r;
        }
        num += g;
        g *= gamma;
    }
    num / den
}

/// Finite-population form of the homogeneous equation.
#[derive(Debug, Clone, Copy)]
pub struct FiniteForm<'a> {
    pub n: u64,
    pub p: &'a [f64],
}

/// Residual of the homogeneous fixed-point equation in `gamma`.
///
/// Mean-field form: `1 - exp(-Q(gamma)) - gamma` with the class rates.
/// Finite form: `1 - exp(-N * B(gamma)) - gamma` with per-slot
/// probabilities.
pub fn homogeneous_residual(gamma: f64, c: &ClassParams, finite: Option<FiniteForm<'_>>) -> f64 {
    let rate = match finite {
        Some(f) => f.n as f64 * stationary_rate(gamma, f.p),
        None => stationary_rate(gamma, c.q()),
    };
    collision_mfl(rate) - gamma
}

/// Residual for a two-class scenario without AIFS (`delta = 0`), where every
/// class sees the same collision probability.
pub fn combined_residual(gamma: f64, s: &Scenario) -> f64 {
    let rate: f64 = (0..s.num_classes())
        .map(|i| s.class(i).sigma() * stationary_rate(gamma, &s.effective_rates(i)))
        .sum();
    collision_mfl(rate) - gamma
}

#[derive(Debug, Clone, Copy)]
pub struct ScanConfig {
    /// Number of uniformly spaced grid points.
    pub points: usize,
    /// Bracket width at which bisection stops.
    pub bisect_tol: f64,
    /// Grid minima of `|f|` below this without a sign change are reported
    /// as tangencies.
    pub tangency_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            points: 20_000,
            bisect_tol: 1e-12,
            tangency_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RootScan {
    /// Transversal roots, sorted.
    pub roots: Vec<f64>,
    /// Near-zero local minima of `|f|` without a sign change.
    pub tangencies: Vec<f64>,
}

/// Finds every sign change of `f` on a uniform grid over `[lo, hi]`, refines
/// each by bisection and a finite-difference Newton polish.
pub fn enumerate_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &ScanConfig) -> RootScan {
    let m = cfg.points.max(2);
    let step = (hi - lo) / (m - 1) as f64;
    let xs: Vec<f64> = (0..m).map(|i| if i + 1 == m { hi } else { lo + step * i as f64 }).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut roots = Vec::new();
    let mut tangencies = Vec::new();
    for i in 0..m {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < m && fs[i + 1] != 0.0 && fs[i].signum() != fs[i + 1].signum() {
            let r = bisect(&f, xs[i], xs[i + 1], fs[i], cfg.bisect_tol);
            roots.push(newton_polish(&f, r, xs[i], xs[i + 1]));
            continue;
        }
        if i > 0 && i + 1 < m {
            let a = fs[i].abs();
            let same_sign = fs[i - 1].signum() == fs[i].signum() && fs[i + 1].signum() == fs[i].signum();
            if same_sign && a < fs[i - 1].abs() && a < fs[i + 1].abs() && a < cfg.tangency_tol {
                log::warn!("near-tangential residual minimum |f| = {a:.3e} at {:.6}", xs[i]);
                tangencies.push(xs[i]);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-6);
    RootScan { roots, tangencies }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// One Newton step with a central-difference slope, kept only if it stays in
/// the bracket and lowers `|f|`.
fn newton_polish<F: Fn(f64) -> f64>(f: &F, x: f64, lo: f64, hi: f64) -> f64 {
    let h = 1e-7 * x.abs().max(1e-3);
    let slope = (f(x + h) - f(x - h)) / (2.0 * h);
    let fx = f(x);
    if slope == 0.0 || !slope.is_finite() {
        return x;
    }
    let y = x - fx / slope;
    if y >= lo && y <= hi && f(y).abs() < fx.abs() {
        y
    } else {
        x
    }
}

/// One stationary solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpeSolution {
    /// Average attempt rate of each class (effective rates in raw mode).
    pub qbar: Vec<f64>,
    /// Collision probability of class H (the only class when homogeneous).
    pub gamma: f64,
    /// Collision probability in common slots.
    pub gamma_c: f64,
    /// Collision probability in reserved slots.
    pub gamma_r: f64,
    pub pi_r: f64,
    pub pi_c: f64,
    pub residual_norm: f64,
    pub multiplicity_index: usize,
}

impl FpeSolution {
    /// Collision probability governing class `i`'s stage distribution.
    pub fn class_gamma(&self, i: usize) -> f64 {
        if i == 0 {
            self.gamma
        } else {
            self.gamma_c
        }
    }
}

/// Stage distribution at collision probability `gamma`, scaled to the
/// class share: `phi_k = sigma * (gamma^k / q_k) / sum_j (gamma^j / q_j)`.
pub fn equilibrium_occupancy(gamma: f64, c: &ClassParams) -> Result<Vec<f64>, FpeError> {
    if let Some(k) = c.q().iter().position(|&v| v == 0.0) {
        return Err(FpeError::ZeroRate { stage: k });
    }
    let mut g = 1.0;
    let mut w: Vec<f64> = c
        .q()
        .iter()
        .map(|&q| {
            let v = g / q;
            g *= gamma;
            v
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v *= c.sigma() / total;
    }
    Ok(w)
}

/// Quasi-stationary weights of reserved and common slots.
///
/// With `S = sum_{i<delta} (1 - gamma_r)^i` and
/// `T = (1 - gamma_r)^delta / gamma_c`, returns `(S / (S+T), T / (S+T))`.
pub fn pi_coeffs(gamma_r: f64, gamma_c: f64, delta: Delta) -> (f64, f64) {
    let d = match delta {
        Delta::Finite(0) => return (0.0, 1.0),
        Delta::Infinite => return (1.0, 0.0),
        Delta::Finite(d) => d as f64,
    };
    let log_idle = (-gamma_r).ln_1p();
    let idle_run = (d * log_idle).exp();
    let s = if gamma_r == 0.0 {
        d
    } else {
        -(d * log_idle).exp_m1() / gamma_r
    };
    let pi_r = if gamma_c <= 1e-14 {
        if idle_run > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        s * gamma_c / (s * gamma_c + idle_run)
    };
    (pi_r, 1.0 - pi_r)
}

/// Slot-level quantities at a point `(qbar_H, qbar_L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotMix {
    pub gamma_r: f64,
    pub gamma_c: f64,
    pub pi_r: f64,
    pub pi_c: f64,
    /// `pi_r * gamma_r + pi_c * gamma_c`.
    pub gamma_h: f64,
}

pub fn slot_mix(qbar_h: f64, qbar_l: f64, delta: Delta) -> SlotMix {
    let gamma_r = collision_mfl(qbar_h);
    let gamma_c = collision_mfl(qbar_h + qbar_l);
    let (pi_r, pi_c) = pi_coeffs(gamma_r, gamma_c, delta);
    SlotMix {
        gamma_r,
        gamma_c,
        pi_r,
        pi_c,
        gamma_h: pi_r * gamma_r + pi_c * gamma_c,
    }
}

/// Right-hand sides of the two-class stationary equations at
/// `(qbar_H, qbar_L)`, using effective rates.
fn extended_map(qh: f64, ql: f64, h: &[f64], l: &[f64], sig: (f64, f64), delta: Delta) -> (f64, f64) {
    let mix = slot_mix(qh, ql, delta);
    (
        sig.0 * stationary_rate(mix.gamma_h, h),
        sig.1 * stationary_rate(mix.gamma_c, l),
    )
}

/// Residual of the two-class stationary equations.
pub fn extended_residual(qbar_h: f64, qbar_l: f64, s: &Scenario) -> (f64, f64) {
    let h = s.effective_rates(0);
    let l = s.effective_rates(1);
    let (a, b) = extended_map(
        qbar_h,
        qbar_l,
        &h,
        &l,
        (s.class(0).sigma(), s.class(1).sigma()),
        s.delta(),
    );
    (a - qbar_h, b - qbar_l)
}

/// Compact closed form of `gamma_H` via
/// `h = (e^{qH * delta} - 1)(1 - e^{-qH-qL}) / (1 - e^{-qH})`.
pub fn gamma_h_compact(qbar_h: f64, qbar_l: f64, delta: Delta) -> f64 {
    let total = qbar_h + qbar_l;
    let gamma_c = collision_mfl(total);
    let h = match delta {
        Delta::Infinite => f64::INFINITY,
        Delta::Finite(d) if qbar_h == 0.0 => d as f64 * gamma_c,
        Delta::Finite(d) => (qbar_h * d as f64).exp_m1() * gamma_c / collision_mfl(qbar_h),
    };
    if h.is_infinite() {
        return collision_mfl(qbar_h);
    }
    if h == 0.0 {
        return gamma_c;
    }
    let w_idle_h = h / (h + 1.0);
    let w_idle_c = 1.0 / (h + 1.0);
    1.0 - ((-qbar_h).exp() * w_idle_h + (-total).exp() * w_idle_c)
}

#[derive(Debug, Clone, Copy)]
pub struct ExtendedConfig {
    /// Cells per axis of the sign-structure grid.
    pub grid: usize,
    /// Seed damped iteration from every `fp_stride`-th grid node per axis.
    pub fp_stride: usize,
    pub damping: f64,
    pub fp_max_iter: usize,
    /// Distance below which two solutions are merged.
    pub dedup_tol: f64,
    /// Residual bound for an accepted solution.
    pub residual_tol: f64,
}

impl Default for ExtendedConfig {
    fn default() -> Self {
        Self {
            grid: 200,
            fp_stride: 10,
            damping: 0.5,
            fp_max_iter: 500,
            dedup_tol: 1e-6,
            residual_tol: 1e-10,
        }
    }
}

/// All stationary solutions of a one- or two-class scenario.
pub fn solve(s: &Scenario) -> Result<Vec<FpeSolution>, FpeError> {
    if s.is_heterogeneous() {
        solve_extended(s, &ExtendedConfig::default())
    } else {
        solve_homogeneous(s, &ScanConfig::default())
    }
}

pub fn solve_homogeneous(s: &Scenario, cfg: &ScanConfig) -> Result<Vec<FpeSolution>, FpeError> {
    if s.num_classes() != 1 {
        return Err(FpeError::ClassCount(s.num_classes(), 1));
    }
    let c = s.effective_class(0);
    let scan = enumerate_roots(|g| homogeneous_residual(g, &c, None), 0.0, GAMMA_SUP, cfg);
    if scan.roots.is_empty() {
        return Err(FpeError::NoRoot);
    }
    Ok(scan
        .roots
        .iter()
        .enumerate()
        .map(|(i, &g)| FpeSolution {
            qbar: vec![stationary_rate(g, c.q())],
            gamma: g,
            gamma_c: g,
            gamma_r: g,
            pi_r: 1.0,
            pi_c: 0.0,
            residual_norm: homogeneous_residual(g, &c, None).abs(),
            multiplicity_index: i,
        })
        .collect())
}

struct Extended {
    h: Vec<f64>,
    l: Vec<f64>,
    sig: (f64, f64),
    delta: Delta,
}

impl Extended {
    fn map(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = extended_map(x[0], x[1], &self.h, &self.l, self.sig, self.delta);
        [a, b]
    }

    fn residual(&self, x: [f64; 2]) -> [f64; 2] {
        let m = self.map(x);
        [m[0] - x[0], m[1] - x[1]]
    }

    fn solution(&self, x: [f64; 2]) -> FpeSolution {
        let mix = slot_mix(x[0], x[1], self.delta);
        let r = self.residual(x);
        FpeSolution {
            qbar: x.to_vec(),
            gamma: mix.gamma_h,
            gamma_c: mix.gamma_c,
            gamma_r: mix.gamma_r,
            pi_r: mix.pi_r,
            pi_c: mix.pi_c,
            residual_norm: r[0].abs().max(r[1].abs()),
            multiplicity_index: 0,
        }
    }

    /// Damped Newton with a finite-difference Jacobian, confined to the
    /// nonnegative quadrant.
    fn newton(&self, mut x: [f64; 2], tol: f64) -> Option<[f64; 2]> {
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut r = self.residual(x);
        for _ in 0..100 {
            if norm(r) <= tol * 1e-3 {
                break;
            }
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let h = 1e-7 * x[j].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] = (xm[j] - h).max(0.0);
                let (rp, rm) = (self.residual(xp), self.residual(xm));
                let span = xp[j] - xm[j];
                for i in 0..2 {
                    jac[i][j] = (rp[i] - rm[i]) / span;
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dx = [
                (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                (jac[0][0] * r[1] - jac[1][0] * r[0]) / det,
            ];
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = [(x[0] - lambda * dx[0]).max(0.0), (x[1] - lambda * dx[1]).max(0.0)];
                let rc = self.residual(cand);
                if norm(rc) < norm(r) {
                    x = cand;
                    r = rc;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (norm(r) <= tol).then_some(x)
    }

    fn damped_iteration(&self, mut x: [f64; 2], cfg: &ExtendedConfig) -> Option<[f64; 2]> {
        for _ in 0..cfg.fp_max_iter {
            let m = self.map(x);
            let next = [
                x[0] + cfg.damping * (m[0] - x[0]),
                x[1] + cfg.damping * (m[1] - x[1]),
            ];
            let moved = (next[0] - x[0]).abs().max((next[1] - x[1]).abs());
            x = next;
            if moved < 1e-13 {
                return Some(x);
            }
        }
        None
    }
}

fn sign_mixed(vals: [f64; 4]) -> bool {
    let pos = vals.iter().any(|&v| v >= 0.0);
    let neg = vals.iter().any(|&v| v <= 0.0);
    pos && neg
}

/// All stationary solutions of a two-class scenario.
///
/// Candidate cells of a grid over `[0, sigma_H max q^H] x [0, sigma_L max
/// q^L]` where both residual components change sign are refined by Newton;
/// damped fixed-point iteration from a lattice of grid nodes supplies
/// further seeds. Results are merged and sorted by `qbar_H`.
pub fn solve_extended(s: &Scenario, cfg: &ExtendedConfig) -> Result<Vec<FpeSolution>, FpeError> {
    if s.num_classes() != 2 {
        return Err(FpeError::ClassCount(s.num_classes(), 2));
    }
    let sys = Extended {
        h: s.effective_rates(0),
        l: s.effective_rates(1),
        sig: (s.class(0).sigma(), s.class(1).sigma()),
        delta: s.delta(),
    };
    let hi = [
        sys.sig.0 * s.effective_class(0).max_rate(),
        sys.sig.1 * s.effective_class(1).max_rate(),
    ];
    let mut found: Vec<[f64; 2]> = Vec::new();
    let push = |x: [f64; 2], found: &mut Vec<[f64; 2]>| {
        if !found
            .iter()
            .any(|y| (y[0] - x[0]).abs().max((y[1] - x[1]).abs()) <= cfg.dedup_tol)
        {
            found.push(x);
        }
    };

    if hi[0] == 0.0 || hi[1] == 0.0 {
        // One class is empty: its rate is pinned at zero and the other
        // coordinate is a scalar root search.
        let free = usize::from(hi[0] == 0.0);
        let upper = hi[free] * (1.0 + 1e-3) + 1e-12;
        let f = |v: f64| {
            let mut x = [0.0; 2];
            x[free] = v;
            sys.residual(x)[free]
        };
        for r in enumerate_roots(f, 0.0, upper, &ScanConfig::default()).roots {
            let mut x = [0.0; 2];
            x[free] = r;
            let x = sys.newton(x, cfg.residual_tol).unwrap_or(x);
            if sys.residual(x)[free].abs() <= cfg.residual_tol {
                push(x, &mut found);
            }
        }
    } else {
        let g = cfg.grid.max(2);
        let span = [hi[0] * (1.0 + 1e-3), hi[1] * (1.0 + 1e-3)];
        let node = |i: usize, j: usize| [span[0] * i as f64 / g as f64, span[1] * j as f64 / g as f64];
        let mut res = vec![[0.0; 2]; (g + 1) * (g + 1)];
        for i in 0..=g {
            for j in 0..=g {
                res[i * (g + 1) + j] = sys.residual(node(i, j));
            }
        }
        let at = |i: usize, j: usize| res[i * (g + 1) + j];
        for i in 0..g {
            for j in 0..g {
                let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
                let c0 = corners.map(|r| r[0]);
                let c1 = corners.map(|r| r[1]);
                if sign_mixed(c0) && sign_mixed(c1) {
                    let a = node(i, j);
                    let b = node(i + 1, j + 1);
                    let centre = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    if let Some(x) = sys.newton(centre, cfg.residual_tol) {
                        push(x, &mut found);
                    }
                }
            }
        }
        let stride = cfg.fp_stride.max(1);
        for i in (0..=g).step_by(stride) {
            for j in (0..=g).step_by(stride) {
                if let Some(x) = sys.damped_iteration(node(i, j), cfg) {
                    if let Some(x) = sys.newton(x, cfg.residual_tol) {
                        push(x, &mut found);
                    }
                }
            }
        }
    }

    if found.is_empty() {
        return Err(FpeError::NoRoot);
    }
    found.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(i, x)| FpeSolution {
            multiplicity_index: i,
            ..sys.solution(x)
        })
        .collect())
}

/// Residual curve `(gamma, f(gamma))` for plotting: the homogeneous residual
/// for one class, the shared-gamma residual for two classes with
/// `delta = 0`. `None` when no scalar form exists.
pub fn residual_curve(s: &Scenario, points: usize) -> Option<Vec<(f64, f64)>> {
    let f: Box<dyn Fn(f64) -> f64> = if !s.is_heterogeneous() {
        let c = s.effective_class(0);
        Box::new(move |g| homogeneous_residual(g, &c, None))
    } else if s.delta() == Delta::Finite(0) {
        Box::new(|g| combined_residual(g, s))
    } else {
        return None;
    };
    let points = points.max(2);
    Some(
        (0..points)
            .map(|i| {
                let g = GAMMA_SUP * i as f64 / (points - 1) as f64;
                (g, f(g))
            })
            .collect(),
    )
}
