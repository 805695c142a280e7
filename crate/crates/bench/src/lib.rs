//! Benchmark fixtures shared by the criterion benches.

use rtlab_core::pipeline::Dataset;
use rtlab_core::screening::{screen, ScreeningConfig};
use rtlab_core::synthgen::{generate_cohort, SyntheticSpec};

/// A screened synthetic cohort of roughly `n` records.
pub fn dataset(n: usize, seed: u64) -> Dataset {
    let spec = SyntheticSpec { n_records: n, insomnia_prevalence: 0.2, ..SyntheticSpec::default() };
    let (cohort, _) = generate_cohort(&spec, seed).expect("valid spec");
    let (kept, _) = screen(&cohort, &ScreeningConfig::default());
    Dataset::from_cohort(&kept, 7).expect("screened records are complete")
}
