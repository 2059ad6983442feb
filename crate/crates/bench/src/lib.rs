//! Shared fixtures for the criterion benches.

use causens_core::bayesnet::BayesNet;
use causens_core::cvae::CvaeArchitecture;
use causens_core::data::Dataset;
use causens_core::seqdata::{c_max, generate, SyntheticScm};

pub const ASIA_CONDITIONING: [&str; 5] = ["either", "smoke", "bronc", "lung", "tub"];

pub fn asia(n: usize) -> (Dataset, CvaeArchitecture) {
    let data = BayesNet::asia().ancestral_sample(n, 1).expect("asia samples").into();
    (data, CvaeArchitecture::binary("dysp", &ASIA_CONDITIONING))
}

pub fn trajectories(n_records: usize) -> (Dataset, CvaeArchitecture) {
    let (train, _) = generate(&SyntheticScm::default(), n_records).expect("synthetic data");
    let c = c_max(&train.targets()).expect("targets");
    let arch = CvaeArchitecture::sequence(&["ls", "smin"], c, train.max_len());
    (train.into(), arch)
}
