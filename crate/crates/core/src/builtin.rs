//! Built-in example scenarios, both in raw (per-slot probability) mode.

use crate::model::{ClassParams, Delta, Mode, Scenario};

pub const EXAMPLE_IDS: [&str; 2] = ["example1", "example2"];

/// One class, N = 1200, K = 12: `p_0 = 1/3200`, `p_k = 1.2^(k-1)/160` for
/// `k = 1..=12`. The attempt rate grows with the stage (MONO fails), giving
/// three stationary points.
pub fn example1() -> Scenario {
    let mut p = vec![1.0 / 3200.0];
    p.extend((1..=12).map(|k| 1.2f64.powi(k - 1) / 160.0));
    let class = ClassParams::homogeneous(p).expect("valid example");
    Scenario::homogeneous(class, 1200, Mode::Raw).expect("valid example")
}

/// Two classes of 640 nodes each, K = 20, no AIFS gap.
///
/// Class H: `p_0 = 1/2400`, `p_1 = 1/480`, `p_k = 0.8^(k-1)/40` for `k = 2..=20`.
/// The printed tuple `(1/2400, 1/480, m/40, ..., m^19/40)` has one entry
/// too many for K = 20; the exponent is read as `k - 1`.
/// Class L: `p_0 = 1/3840`, `p_k = 1/64` for `k = 1..=20`.
pub fn example2() -> Scenario {
    let mut ph = vec![1.0 / 2400.0, 1.0 / 480.0];
    ph.extend((2..=20).map(|k| 0.8f64.powi(k - 1) / 40.0));
    let mut pl = vec![1.0 / 3840.0];
    pl.extend(std::iter::repeat(1.0 / 64.0).take(20));
    let h = ClassParams::new(ph, 20, 0.5).expect("valid example");
    let l = ClassParams::new(pl, 20, 0.5).expect("valid example");
    Scenario::new(vec![h, l], Delta::Finite(0), 1280, Mode::Raw).expect("valid example")
}

pub fn by_id(id: &str) -> Option<Scenario> {
    match id {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        _ => None,
    }
}
