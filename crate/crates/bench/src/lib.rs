//! Shared workloads for the benchmarks.

use forge_core::jumpkernel::JumpSite;
use forge_core::random;
use forge_core::scalar::Scalar;
use forge_core::scenario::Scenario;

/// `n` random sites of dimension at most `max_d`, alternating accessible and inaccessible.
pub fn sites<S: Scalar>(seed: u64, n: usize, max_d: usize) -> Vec<JumpSite<S>> {
    let mut g = random::rng(seed);
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                JumpSite::Accessible(random::accessible_site(&mut g, max_d))
            } else {
                JumpSite::Inaccessible(random::inaccessible_site(&mut g, max_d))
            }
        })
        .collect()
}

/// A scenario from the repository's `scenarios/` directory.
pub fn scenario<S: Scalar>(name: &str) -> Scenario<S> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Scenario::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
