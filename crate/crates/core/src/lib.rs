//! Numerical laboratory for lift forces on convex obstacles in a steady,
//! viscous channel flow.
//!
//! The pipeline: a body ([`geometry`]) and an inflow/outflow pair
//! ([`flowshape`]) are meshed ([`mesh`]), the steady Navier–Stokes problem is
//! solved with Taylor–Hood elements ([`ns_solver`]), the lift is extracted
//! ([`lift`]) and the zero-lift and instability machinery ([`stability`]) is
//! built on top.

pub mod flowshape;
pub mod geometry;
pub mod lift;
pub mod mesh;
pub mod ns_solver;
pub mod optim;
pub mod plot;
pub mod stability;
pub mod validation;

use sha2::{Digest, Sha256};

/// Short stable hex digest of a stream of floats (bit patterns).
pub fn fingerprint_f64s(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of any serializable value through its JSON form.
pub fn fingerprint_json<T: serde::Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("value serializes");
    let h = Sha256::digest(text.as_bytes());
    h[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Map over independent work items, in parallel when the `parallel` feature
/// is on. Output order always follows the input.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(&f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Size the global worker pool. Returns false when the pool was already
/// started or the `parallel` feature is off.
pub fn set_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

/// Seconds since the call, as a closure. Always zero on targets without a
/// monotonic clock (`wasm32-unknown-unknown`).
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    {
        let start = std::time::Instant::now();
        move || start.elapsed().as_secs_f64()
    }
    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    {
        || 0.0
    }
}
