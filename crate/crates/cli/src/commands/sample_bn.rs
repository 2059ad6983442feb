use std::path::Path;

use crate::data::read_network;
use crate::error::{CliResult, StageExt};

/// CSV of `n` ancestral samples; header = node names in declaration order.
pub fn sample_csv(network: Option<&Path>, n: usize, seed: u64) -> CliResult<String> {
    let net = read_network(network)?;
    Ok(net.ancestral_sample(n, seed).stage("sampling")?.to_csv())
}

pub fn cmd_sample_bn(network: Option<&Path>, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let text = sample_csv(network, n, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if let Err(e) = std::fs::write(out, text) {
        let _ = std::fs::remove_file(out);
        return Err(e.into());
    }
    Ok(())
}
