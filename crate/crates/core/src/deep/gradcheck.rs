//! Central-difference verification of the analytic gradients.

use super::layers::softmax_xent;
use super::net::{NetParams, NetSpec, Network};
use super::tensor::{Real, Tensor4};
use crate::error::Result;
use crate::numerics::Rng;

/// Finite-difference step suited to the working precision.
pub fn default_eps<T: Real>() -> f64 {
    if T::epsilon().f64() > 1e-10 {
        1e-3
    } else {
        1e-6
    }
}

/// `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub checked: usize,
    /// Entries whose probes straddled a ReLU or pooling switch.
    pub skipped: usize,
    pub max_rel_error: f64,
}

fn loss<T: Real>(spec: &NetSpec, params: &NetParams<T>, x: &Tensor4<T>, labels: &[u8]) -> Result<(f64, Vec<u32>)> {
    let pass = Network::new(spec, params)?.forward(x)?;
    Ok((softmax_xent(&pass.logits, labels)?.0.f64(), pass.kink_pattern()))
}

/// Compares the network's backward pass against central differences of the
/// mean loss. At most `samples` entries per block are perturbed (all of
/// them when the block is smaller). Entries where either probe changes a
/// ReLU sign or a pooling winner are skipped, since the difference
/// quotient there does not estimate a derivative.
pub fn grad_check<T: Real>(
    spec: &NetSpec,
    params: &NetParams<T>,
    x: &Tensor4<T>,
    labels: &[u8],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<BlockError>> {
    grad_check_with(spec, params, x, labels, eps, samples, seed, |net, x, labels| {
        Ok(net.loss_and_grads(x, labels)?.1)
    })
}

/// Like [`grad_check`] with the analytic gradients supplied by `analytic`.
#[allow(clippy::too_many_arguments)]
pub fn grad_check_with<T: Real>(
    spec: &NetSpec,
    params: &NetParams<T>,
    x: &Tensor4<T>,
    labels: &[u8],
    eps: f64,
    samples: usize,
    seed: u64,
    analytic: impl Fn(&Network<'_, T>, &Tensor4<T>, &[u8]) -> Result<Vec<Vec<T>>>,
) -> Result<Vec<BlockError>> {
    let grads = analytic(&Network::new(spec, params)?, x, labels)?;
    let mut rng = Rng::derive(seed, "grad-check");
    let base = loss(spec, params, x, labels)?.1;
    let mut probe = params.clone();
    let mut report = Vec::with_capacity(params.blocks.len());
    for (bi, block) in params.blocks.iter().enumerate() {
        let len = block.data.len();
        let entries = if len <= samples { (0..len).collect() } else { rng.sample_indices(len, samples) };
        let (mut worst, mut skipped) = (0.0f64, 0);
        for &i in &entries {
            let orig = block.data[i];
            probe.blocks[bi].data[i] = T::of(orig.f64() + eps);
            let (up, up_pattern) = loss(spec, &probe, x, labels)?;
            probe.blocks[bi].data[i] = T::of(orig.f64() - eps);
            let (down, down_pattern) = loss(spec, &probe, x, labels)?;
            probe.blocks[bi].data[i] = orig;
            if up_pattern != base || down_pattern != base {
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(grads[bi][i].f64(), numeric));
        }
        report.push(BlockError {
            name: block.name.clone(),
            checked: entries.len() - skipped,
            skipped,
            max_rel_error: worst,
        });
    }
    Ok(report)
}
