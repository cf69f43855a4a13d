//! Mean-field vector fields and a fixed-step RK4 integrator.
//!
//! The full `(K+1)`-dimensional degenerate system is integrated; conservation
//! of each class's mass is checked at every step instead of being imposed.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::fpe::slot_mix;
use crate::model::{collision_mfl, dot, ClassParams, Mode, OccupancyState, Scenario, OCCUPANCY_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invariant violated at t = {time}: class {class}, {detail}")]
    Invariant {
        time: f64,
        class: usize,
        detail: String,
    },
    #[error("non-finite derivative at t = {time}")]
    NonFinite { time: f64 },
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("initial state: {0}")]
    BadInitial(String),
}

/// Autonomous vector field on `R^dim`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], dx: &mut [f64]);
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (self.f)(x, dx)
    }
}

/// Scratch space for classic fourth-order Runge-Kutta steps.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` by `h`. Returns the sup-norm of the field at the start
    /// of the step.
    pub fn step<F: VectorField + ?Sized>(&mut self, f: &F, x: &mut [f64], h: f64) -> f64 {
        let n = x.len();
        f.eval(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f.eval(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f.eval(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f.eval(&self.tmp, &mut self.k4);
        let mut norm = 0.0f64;
        for i in 0..n {
            norm = norm.max(self.k1[i].abs());
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        norm
    }
}

/// Integrates `f` from `x0` over `[0, horizon]` with `steps` equal steps.
pub fn integrate_fixed<F: VectorField + ?Sized>(f: &F, x0: &[f64], horizon: f64, steps: usize) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut rk = Rk4::new(x.len());
    let h = horizon / steps as f64;
    for _ in 0..steps {
        rk.step(f, &mut x, h);
    }
    x
}

/// Birth-death stencil of one class: collisions push mass from stage
/// `k-1` to `k` (and from `K` back to 0), any attempt at stage `k` leaves it,
/// successes return to stage 0.
fn class_stencil(phi: &[f64], rates: &[f64], qbar: f64, gamma: f64, scale: f64, out: &mut [f64]) {
    let last = rates.len() - 1;
    out[0] = scale * (qbar * (1.0 - gamma) - rates[0] * phi[0] + rates[last] * phi[last] * gamma);
    for k in 1..=last {
        out[k] = scale * (rates[k - 1] * phi[k - 1] * gamma - rates[k] * phi[k]);
    }
}

/// Homogeneous field. `c` carries scaled rates in [`Mode::Scaled`] (time in
/// mean-field units) or per-slot probabilities in [`Mode::Raw`] (time in
/// slots, collision probability `1 - exp(-N pbar)`).
pub fn rhs_homogeneous(phi: &[f64], c: &ClassParams, mode: Mode, n: u64) -> Vec<f64> {
    let mut out = vec![0.0; phi.len()];
    let avg = dot(c.q(), phi);
    let gamma = match mode {
        Mode::Scaled => collision_mfl(avg),
        Mode::Raw => collision_mfl(n as f64 * avg),
    };
    class_stencil(phi, c.q(), avg, gamma, 1.0, &mut out);
    out
}

/// Two-class AIFS field, per class.
pub fn rhs_extended(state: &OccupancyState, s: &Scenario) -> Vec<Vec<f64>> {
    let mf = MeanField::new(s);
    let x = state.flatten();
    let mut dx = vec![0.0; x.len()];
    mf.eval(&x, &mut dx);
    OccupancyState::from_flat(&dx, s).classes
}

/// Derived quantities at one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    /// Per-class average attempt rate (effective rates in raw mode).
    pub qbar: Vec<f64>,
    /// Collision probability of class H, or the only class.
    pub gamma: f64,
    pub gamma_c: f64,
    pub pi_r: f64,
}

/// The mean-field vector field of a scenario, on the flat concatenation of
/// class occupancy vectors, in the scenario's own time unit.
#[derive(Debug, Clone)]
pub struct MeanField {
    rates: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
    offsets: Vec<usize>,
    delta: crate::model::Delta,
    time_scale: f64,
    dim: usize,
}

impl MeanField {
    pub fn new(s: &Scenario) -> Self {
        let rates: Vec<Vec<f64>> = (0..s.num_classes()).map(|i| s.effective_rates(i)).collect();
        let mut offsets = Vec::with_capacity(rates.len());
        let mut dim = 0;
        for r in &rates {
            offsets.push(dim);
            dim += r.len();
        }
        Self {
            sigmas: s.classes().iter().map(|c| c.sigma()).collect(),
            rates,
            offsets,
            delta: s.delta(),
            time_scale: s.time_scale(),
            dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.rates.len()
    }

    pub fn stages(&self, class: usize) -> usize {
        self.rates[class].len()
    }

    pub fn offset(&self, class: usize) -> usize {
        self.offsets[class]
    }

    pub fn sigma(&self, class: usize) -> f64 {
        self.sigmas[class]
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    fn slice<'a>(&self, x: &'a [f64], class: usize) -> &'a [f64] {
        &x[self.offsets[class]..self.offsets[class] + self.rates[class].len()]
    }

    /// Largest per-unit-time transition rate in the trajectory's own unit.
    pub fn max_rate(&self) -> f64 {
        self.rates
            .iter()
            .flatten()
            .fold(0.0f64, |m, &r| m.max(r))
            * self.time_scale
    }

    pub fn observe(&self, x: &[f64]) -> Observables {
        let qbar: Vec<f64> = (0..self.num_classes())
            .map(|c| dot(&self.rates[c], self.slice(x, c)))
            .collect();
        if qbar.len() == 1 {
            let g = collision_mfl(qbar[0]);
            Observables {
                qbar,
                gamma: g,
                gamma_c: g,
                pi_r: 1.0,
            }
        } else {
            let mix = slot_mix(qbar[0], qbar[1], self.delta);
            Observables {
                qbar,
                gamma: mix.gamma_h,
                gamma_c: mix.gamma_c,
                pi_r: mix.pi_r,
            }
        }
    }
}

impl VectorField for MeanField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let ts = self.time_scale;
        if self.num_classes() == 1 {
            let avg = dot(&self.rates[0], x);
            class_stencil(x, &self.rates[0], avg, collision_mfl(avg), ts, dx);
            return;
        }
        let (h, l) = (self.slice(x, 0), self.slice(x, 1));
        let qh = dot(&self.rates[0], h);
        let ql = dot(&self.rates[1], l);
        let mix = slot_mix(qh, ql, self.delta);
        let (dh, dl) = dx.split_at_mut(self.offsets[1]);
        class_stencil(h, &self.rates[0], qh, mix.gamma_h, ts, dh);
        class_stencil(l, &self.rates[1], ql, mix.gamma_c, ts * mix.pi_c, dl);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Controls {
    /// Fixed step; defaults to `min(0.01 / rho, horizon / 1000)`.
    pub step: Option<f64>,
    /// Horizons at or beyond this record a decimated output.
    pub full_output_below: f64,
    pub max_samples: usize,
    /// Stop once the field's sup-norm drops below this value.
    pub stationary_tol: Option<f64>,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            step: None,
            full_output_below: 1e4,
            max_samples: 100_000,
            stationary_tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub unit: &'static str,
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<OccupancyState>,
    pub observables: Vec<Observables>,
    /// Time at which integration stopped on a stationary state, if it did.
    pub stationary_at: Option<f64>,
}

impl Trajectory {
    pub fn last_state(&self) -> &OccupancyState {
        self.states.last().expect("trajectory has samples")
    }

    /// Series of class-H (or the only class's) average attempt rate.
    pub fn qbar_series(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.qbar[0]).collect()
    }

    /// Largest `|sum phi - sigma|` over all samples and classes.
    pub fn max_mass_drift(&self, s: &Scenario) -> f64 {
        self.states
            .iter()
            .flat_map(|st| {
                st.classes
                    .iter()
                    .zip(s.classes())
                    .map(|(phi, c)| (phi.iter().sum::<f64>() - c.sigma()).abs())
            })
            .fold(0.0, f64::max)
    }

    /// CSV with header `t, phi_H_0.., [phi_L_0..,] qbar_H, [qbar_L,] gamma[, gammaC, piR]`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let two = self.states.first().map_or(false, |s| s.classes.len() == 2);
        let labels = ["H", "L"];
        let mut header = vec!["t".to_string()];
        if let Some(first) = self.states.first() {
            for (c, phi) in first.classes.iter().enumerate() {
                header.extend((0..phi.len()).map(|k| format!("phi_{}_{k}", labels[c])));
            }
            header.extend((0..first.classes.len()).map(|c| format!("qbar_{}", labels[c])));
        }
        header.push("gamma".into());
        if two {
            header.push("gammaC".into());
            header.push("piR".into());
        }
        out.write_record(&header)?;
        for ((t, st), ob) in self.times.iter().zip(&self.states).zip(&self.observables) {
            let mut row = vec![t.to_string()];
            row.extend(st.classes.iter().flatten().map(|v| v.to_string()));
            row.extend(ob.qbar.iter().map(|v| v.to_string()));
            row.push(ob.gamma.to_string());
            if two {
                row.push(ob.gamma_c.to_string());
                row.push(ob.pi_r.to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Default step `min(0.01 / rho, horizon / 1000)`.
pub fn default_step(mf: &MeanField, horizon: f64) -> f64 {
    let rho = mf.max_rate();
    let h = if rho > 0.0 { 0.01 / rho } else { f64::INFINITY };
    h.min(horizon / 1000.0)
}

fn check_invariants(mf: &MeanField, x: &[f64], t: f64) -> Result<(), OdeError> {
    for c in 0..mf.num_classes() {
        let phi = mf.slice(x, c);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { time: t });
        }
        if let Some((k, v)) = phi.iter().enumerate().find(|(_, &v)| v < -OCCUPANCY_TOL) {
            return Err(OdeError::Invariant {
                time: t,
                class: c,
                detail: format!("phi[{k}] = {v:e}"),
            });
        }
        let drift = phi.iter().sum::<f64>() - mf.sigma(c);
        if drift.abs() > OCCUPANCY_TOL {
            return Err(OdeError::Invariant {
                time: t,
                class: c,
                detail: format!("mass drift {drift:e}"),
            });
        }
    }
    Ok(())
}

/// Integrates the mean-field ODE from `x0` over `[0, horizon]`.
pub fn integrate(
    mf: &MeanField,
    s: &Scenario,
    x0: &OccupancyState,
    horizon: f64,
    controls: &Controls,
) -> Result<Trajectory, OdeError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(OdeError::BadHorizon(horizon));
    }
    x0.check(s).map_err(|e| OdeError::BadInitial(e.to_string()))?;
    let h_max = controls.step.unwrap_or_else(|| default_step(mf, horizon));
    let steps = (horizon / h_max).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let stride = if horizon < controls.full_output_below {
        1
    } else {
        steps.div_ceil(controls.max_samples.max(1)).max(1)
    };

    let mut x = x0.flatten();
    let mut rk = Rk4::new(x.len());
    let cap = steps / stride + 2;
    let mut traj = Trajectory {
        unit: s.time_unit(),
        step: h,
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        observables: Vec::with_capacity(cap),
        stationary_at: None,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        traj.times.push(t);
        traj.states.push(OccupancyState::from_flat(x, s));
        traj.observables.push(mf.observe(x));
    };
    record(&mut traj, 0.0, &x);
    for i in 1..=steps {
        let t = i as f64 * h;
        let norm = rk.step(mf, &mut x, h);
        check_invariants(mf, &x, t)?;
        if let Some(tol) = controls.stationary_tol {
            if norm < tol {
                record(&mut traj, t, &x);
                traj.stationary_at = Some(t);
                break;
            }
        }
        if i % stride == 0 || i == steps {
            record(&mut traj, t, &x);
        }
    }
    Ok(traj)
}
