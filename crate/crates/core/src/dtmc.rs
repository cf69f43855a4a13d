//! Exact finite-N simulation of the backoff chain on stage counts.
//!
//! Nodes sharing a class and a stage are exchangeable, so the number of
//! attempters per stage is a binomial draw and the chain on counts is exact.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use thiserror::Error;

use crate::model::{Delta, OccupancyError, OccupancyState, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtmcError {
    #[error("class {0} share does not correspond to a whole number of nodes")]
    ClassPopulation(usize),
    #[error("initial occupancy: {0}")]
    Occupancy(#[from] OccupancyError),
    #[error("window length {window} must be in 1..={total}")]
    Window { window: u64, total: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlotType {
    R,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Idle,
    Success,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot_type: SlotType,
    /// Attempters per class and stage.
    pub attempts: Vec<Vec<u64>>,
    pub outcome: Outcome,
}

/// Per-slot probabilities and layout, precomputed from a scenario.
#[derive(Debug, Clone)]
pub struct Kernel {
    p: Vec<f64>,
    offsets: Vec<usize>,
    stages: Vec<usize>,
    populations: Vec<u64>,
    delta: Delta,
}

impl Kernel {
    pub fn new(s: &Scenario) -> Result<Self, DtmcError> {
        let mut p = Vec::new();
        let mut offsets = Vec::new();
        let mut stages = Vec::new();
        let mut populations = Vec::new();
        for i in 0..s.num_classes() {
            offsets.push(p.len());
            let pi = s.slot_probabilities(i);
            stages.push(pi.len());
            p.extend(pi);
            populations.push(s.class_population(i).ok_or(DtmcError::ClassPopulation(i))?);
        }
        Ok(Self {
            p,
            offsets,
            stages,
            populations,
            delta: s.delta(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.stages.len()
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn total_population(&self) -> u64 {
        self.populations.iter().sum()
    }

    /// A slot is reserved iff fewer than `delta` idle slots have passed since
    /// the last non-idle one. A single class never sees reserved slots; two
    /// classes with an infinite gap see nothing else.
    fn reserved(&self, counter: u32) -> bool {
        match self.delta {
            Delta::Finite(d) => counter < d,
            Delta::Infinite => self.num_classes() == 2,
        }
    }

    fn counter_cap(&self) -> u32 {
        match self.delta {
            Delta::Finite(d) => d,
            Delta::Infinite => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    /// Flat per-stage counts, classes concatenated.
    counts: Vec<u64>,
    pub aifs_counter: u32,
    pub slot_index: u64,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn counts(&self, k: &Kernel, class: usize) -> &[u64] {
        &self.counts[k.offsets[class]..k.offsets[class] + k.stages[class]]
    }

    pub fn flat_counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Largest-remainder rounding of `fractions` (summing to 1) to `total`;
/// ties go to the lower index.
pub fn round_counts(fractions: &[f64], total: u64) -> Vec<u64> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut out: Vec<u64> = exact.iter().map(|v| v.floor().max(0.0) as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    let missing = total.saturating_sub(assigned) as usize;
    for &i in order.iter().cycle().take(missing) {
        out[i] += 1;
    }
    out
}

/// Initial state: everyone in stage 0, or `initial` rounded to whole nodes.
pub fn init_state(s: &Scenario, initial: Option<&OccupancyState>, seed: u64) -> Result<SimState, DtmcError> {
    let kernel = Kernel::new(s)?;
    let mut counts = vec![0u64; kernel.dim()];
    match initial {
        None => {
            for c in 0..kernel.num_classes() {
                counts[kernel.offsets[c]] = kernel.populations[c];
            }
        }
        Some(occ) => {
            occ.check(s)?;
            for c in 0..kernel.num_classes() {
                let sigma = s.class(c).sigma();
                let fr: Vec<f64> = if sigma > 0.0 {
                    occ.classes[c].iter().map(|v| v.max(0.0) / sigma).collect()
                } else {
                    vec![0.0; kernel.stages[c]]
                };
                let o = kernel.offsets[c];
                counts[o..o + kernel.stages[c]].copy_from_slice(&round_counts(&fr, kernel.populations[c]));
            }
        }
    }
    Ok(SimState {
        counts,
        aifs_counter: kernel.counter_cap(),
        slot_index: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

/// Summary of one slot without per-stage detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSummary {
    pub slot_type: SlotType,
    pub attempts: u64,
    pub outcome: Outcome,
}

fn draw(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
    }
}

/// Advances one slot, leaving per-stage attempters in `att`.
pub fn advance(state: &mut SimState, k: &Kernel, att: &mut [u64]) -> SlotSummary {
    let reserved = k.reserved(state.aifs_counter);
    let eligible = if reserved { 1 } else { k.num_classes() };
    let mut total = 0u64;
    att.fill(0);
    for c in 0..eligible {
        let o = k.offsets[c];
        for j in o..o + k.stages[c] {
            let a = draw(&mut state.rng, state.counts[j], k.p[j]);
            att[j] = a;
            total += a;
        }
    }
    let outcome = match total {
        0 => {
            state.aifs_counter = state.aifs_counter.saturating_add(1).min(k.counter_cap());
            Outcome::Idle
        }
        1 => {
            let j = att.iter().position(|&a| a == 1).expect("one attempter");
            let c = (0..k.num_classes()).rev().find(|&c| k.offsets[c] <= j).expect("class");
            state.counts[j] -= 1;
            state.counts[k.offsets[c]] += 1;
            state.aifs_counter = 0;
            Outcome::Success
        }
        _ => {
            for c in 0..eligible {
                let o = k.offsets[c];
                let n = k.stages[c];
                for i in 0..n {
                    state.counts[o + i] -= att[o + i];
                }
                for i in 0..n {
                    state.counts[o + (i + 1) % n] += att[o + i];
                }
            }
            state.aifs_counter = 0;
            Outcome::Collision
        }
    };
    state.slot_index += 1;
    SlotSummary {
        slot_type: if reserved { SlotType::R } else { SlotType::C },
        attempts: total,
        outcome,
    }
}

/// One slot with a full record. Rebuilds the kernel; use [`advance`] in loops.
pub fn step(state: &mut SimState, s: &Scenario) -> Result<SlotRecord, DtmcError> {
    let k = Kernel::new(s)?;
    let mut att = vec![0u64; k.dim()];
    let sum = advance(state, &k, &mut att);
    let attempts = (0..k.num_classes())
        .map(|c| att[k.offsets[c]..k.offsets[c] + k.stages[c]].to_vec())
        .collect();
    Ok(SlotRecord {
        slot_type: sum.slot_type,
        attempts,
        outcome: sum.outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub slot_start: u64,
    pub slots: u64,
    pub attempts: u64,
    pub collided: u64,
    pub successes: u64,
    /// Per-attempt collision fraction; `None` when nobody attempted.
    pub gamma_hat: Option<f64>,
    /// Time-averaged fraction of all nodes in each stage, classes concatenated.
    pub mean_occupancy: Vec<f64>,
}

impl WindowStats {
    fn new(slot_start: u64, dim: usize) -> Self {
        Self {
            slot_start,
            slots: 0,
            attempts: 0,
            collided: 0,
            successes: 0,
            gamma_hat: None,
            mean_occupancy: vec![0.0; dim],
        }
    }

    fn finish(&mut self, n: f64) {
        self.gamma_hat = (self.attempts > 0).then(|| self.collided as f64 / self.attempts as f64);
        let norm = n * self.slots.max(1) as f64;
        for v in &mut self.mean_occupancy {
            *v /= norm;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimStats {
    pub window: u64,
    pub seed: u64,
    pub windows: Vec<WindowStats>,
    pub totals: WindowStats,
    /// Stage counts per class after the last slot.
    pub final_counts: Vec<Vec<u64>>,
}

/// Runs `total_slots` slots from `initial` (all stage 0 when `None`) and
/// aggregates disjoint windows of `window` slots. A trailing partial window
/// only enters the totals.
pub fn run_from(
    s: &Scenario,
    initial: Option<&OccupancyState>,
    total_slots: u64,
    seed: u64,
    window: u64,
) -> Result<SimStats, DtmcError> {
    if window == 0 || window > total_slots {
        return Err(DtmcError::Window {
            window,
            total: total_slots,
        });
    }
    let k = Kernel::new(s)?;
    let state = init_state(s, initial, seed)?;
    Ok(run_kernel(&k, state, total_slots, seed, window))
}

fn run_kernel(k: &Kernel, mut state: SimState, total_slots: u64, seed: u64, window: u64) -> SimStats {
    let dim = k.dim();
    let n = k.total_population() as f64;
    let mut att = vec![0u64; dim];
    let mut occ = vec![0u64; dim];
    let mut windows = Vec::with_capacity((total_slots / window) as usize);
    let mut totals = WindowStats::new(0, dim);
    let mut cur = WindowStats::new(0, dim);
    for slot in 0..total_slots {
        for (o, c) in occ.iter_mut().zip(&state.counts) {
            *o += c;
        }
        let sum = advance(&mut state, k, &mut att);
        cur.slots += 1;
        cur.attempts += sum.attempts;
        match sum.outcome {
            Outcome::Success => cur.successes += 1,
            Outcome::Collision => cur.collided += sum.attempts,
            Outcome::Idle => {}
        }
        if cur.slots == window || slot + 1 == total_slots {
            totals.slots += cur.slots;
            totals.attempts += cur.attempts;
            totals.collided += cur.collided;
            totals.successes += cur.successes;
            for (t, o) in totals.mean_occupancy.iter_mut().zip(&occ) {
                *t += *o as f64;
            }
            for (m, o) in cur.mean_occupancy.iter_mut().zip(occ.iter_mut()) {
                *m = *o as f64;
                *o = 0;
            }
            if cur.slots == window {
                cur.finish(n);
                windows.push(cur);
            }
            cur = WindowStats::new(slot + 1, dim);
        }
    }
    totals.finish(n);
    let final_counts = (0..k.num_classes()).map(|c| state.counts(k, c).to_vec()).collect();
    SimStats {
        window,
        seed,
        windows,
        totals,
        final_counts,
    }
}

pub fn run(s: &Scenario, total_slots: u64, seed: u64, window: u64) -> Result<SimStats, DtmcError> {
    run_from(s, None, total_slots, seed, window)
}

impl SimStats {
    /// `(slot_start, gamma_hat)` of windows starting at or after `from_slot`
    /// with at least `min_attempts` attempts.
    pub fn gamma_series(&self, from_slot: u64, min_attempts: u64) -> Vec<(u64, f64)> {
        self.windows
            .iter()
            .filter(|w| w.slot_start >= from_slot && w.attempts >= min_attempts)
            .filter_map(|w| w.gamma_hat.map(|g| (w.slot_start, g)))
            .collect()
    }

    /// CSV: `window_start, attempts, collided, successes, gamma_hat, occ_H_0..[, occ_L_0..]`.
    /// Undefined `gamma_hat` is written as `NA`.
    pub fn write_csv<W: Write>(&self, w: W, s: &Scenario) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let labels = ["H", "L"];
        let mut header: Vec<String> = ["window_start", "attempts", "collided", "successes", "gamma_hat"]
            .iter()
            .map(|v| v.to_string())
            .collect();
        for (c, class) in s.classes().iter().enumerate() {
            header.extend((0..class.stages()).map(|k| format!("occ_{}_{k}", labels[c])));
        }
        out.write_record(&header)?;
        for win in &self.windows {
            let mut row = vec![
                win.slot_start.to_string(),
                win.attempts.to_string(),
                win.collided.to_string(),
                win.successes.to_string(),
                win.gamma_hat.map_or("NA".to_string(), |g| g.to_string()),
            ];
            row.extend(win.mean_occupancy.iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassParams, Mode};

    fn raw(p: Vec<f64>, n: u64) -> Scenario {
        Scenario::homogeneous(ClassParams::homogeneous(p).unwrap(), n, Mode::Raw).unwrap()
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_counts(&[0.5, 0.5], 10), vec![5, 5]);
        assert_eq!(round_counts(&[0.55, 0.45], 10), vec![6, 4]);
        assert_eq!(round_counts(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(round_counts(&[0.0, 1.0], 7), vec![0, 7]);
    }

    #[test]
    fn initial_states() {
        let s = raw(vec![0.001; 13], 1200);
        let st = init_state(&s, None, 1).unwrap();
        let k = Kernel::new(&s).unwrap();
        assert_eq!(st.counts(&k, 0)[0], 1200);
        assert_eq!(st.counts(&k, 0)[1..].iter().sum::<u64>(), 0);
        let s2 = raw(vec![0.1, 0.1], 10);
        let occ = OccupancyState {
            classes: vec![vec![0.55, 0.45]],
        };
        assert_eq!(init_state(&s2, Some(&occ), 1).unwrap().flat_counts(), &[6, 4]);
    }

    #[test]
    fn silent_nodes_stay_idle() {
        // Scenarios reject all-zero rates, so silence the kernel directly.
        let s = raw(vec![0.2, 0.1], 5);
        let mut k = Kernel::new(&s).unwrap();
        k.p.fill(0.0);
        let stats = run_kernel(&k, init_state(&s, None, 3).unwrap(), 1000, 3, 100);
        assert_eq!(stats.windows.len(), 10);
        assert!(stats.windows.iter().all(|w| w.attempts == 0 && w.gamma_hat.is_none()));
        assert_eq!(stats.final_counts, vec![vec![5, 0]]);
    }

    #[test]
    fn certain_attempts_always_collide() {
        let s = raw(vec![1.0], 2);
        let mut st = init_state(&s, None, 9).unwrap();
        for _ in 0..20 {
            let rec = step(&mut st, &s).unwrap();
            assert_eq!(rec.outcome, Outcome::Collision);
            assert_eq!(rec.attempts, vec![vec![2]]);
            assert_eq!(st.flat_counts(), &[2]);
        }
    }

    #[test]
    fn pair_collision_fraction_is_half() {
        let s = raw(vec![0.5], 2);
        let stats = run(&s, 1_000_000, 42, 1000).unwrap();
        let g = stats.totals.gamma_hat.unwrap();
        // Attempts per slot: 1 w.p. 1/2, 2 w.p. 1/4; collided fraction of attempts = 0.5.
        // Per-slot collided count has mean 0.5 and sd sqrt(0.75); attempts sd sqrt(0.5).
        let se = 0.0015;
        assert!((g - 0.5).abs() < 3.0 * se, "{g}");
    }

    #[test]
    fn deterministic_for_seed() {
        let s = raw(vec![0.05, 0.02, 0.01], 50);
        let a = run(&s, 20_000, 7, 1000).unwrap();
        let b = run(&s, 20_000, 7, 1000).unwrap();
        let c = run(&s, 20_000, 8, 1000).unwrap();
        assert_eq!(a.windows, b.windows);
        assert_ne!(a.windows, c.windows);
    }

    #[test]
    fn counts_are_conserved_with_two_classes() {
        let h = ClassParams::new(vec![0.2, 0.1], 1, 0.5).unwrap();
        let l = ClassParams::new(vec![0.3, 0.2, 0.1], 2, 0.5).unwrap();
        let s = Scenario::new(vec![h, l], Delta::Finite(2), 8, Mode::Raw).unwrap();
        let k = Kernel::new(&s).unwrap();
        let mut st = init_state(&s, None, 5).unwrap();
        let mut att = vec![0; k.dim()];
        let mut saw_reserved_low = false;
        for _ in 0..10_000 {
            let before = st.aifs_counter;
            let sum = advance(&mut st, &k, &mut att);
            assert_eq!(st.counts(&k, 0).iter().sum::<u64>(), 4);
            assert_eq!(st.counts(&k, 1).iter().sum::<u64>(), 4);
            assert_eq!(sum.slot_type == SlotType::R, before < 2);
            if sum.slot_type == SlotType::R {
                saw_reserved_low |= att[2..].iter().any(|&a| a > 0);
            }
            assert!(st.aifs_counter <= 2);
            if sum.outcome != Outcome::Idle {
                assert_eq!(st.aifs_counter, 0);
            }
        }
        assert!(!saw_reserved_low);
    }

    #[test]
    fn window_accounting() {
        let s = raw(vec![0.3, 0.1], 6);
        let stats = run(&s, 10_500, 1, 1000).unwrap();
        assert_eq!(stats.windows.len(), 10);
        assert_eq!(stats.totals.slots, 10_500);
        let sum: u64 = stats.windows.iter().map(|w| w.attempts).sum();
        assert!(stats.totals.attempts >= sum);
        for w in &stats.windows {
            assert!((w.mean_occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(run(&s, 10, 1, 11), Err(DtmcError::Window { .. })));
    }

    #[test]
    fn csv_layout() {
        let s = raw(vec![0.3, 0.1], 6);
        let stats = run(&s, 300, 1, 100).unwrap();
        let mut buf = Vec::new();
        stats.write_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "window_start,attempts,collided,successes,gamma_hat,occ_H_0,occ_H_1"
        );
        assert_eq!(text.lines().count(), 4);
    }
}
