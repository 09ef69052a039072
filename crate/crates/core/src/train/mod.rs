//! Augmentations, contrastive and variance-invariance-covariance losses, and
//! the self-supervised pre-training loop.

mod augment;
mod loss;
mod optim;
mod pretrain;

pub use augment::{augment, AugmentSpec, AugmentStrategy, Augmented};
pub use loss::{nt_xent, total_loss, vicreg, TotalLoss, VicregForm, VicregTerms, VicregWeights};
pub use optim::Adam;
pub use pretrain::{pretrain, pretrain_from, write_loss_trace, EpochStats, TrainConfig, TrainResult, ViewPairing};

/// Mixes a root seed with a path of integers (SplitMix64 finalizer per step),
/// giving independent streams per (epoch, graph, view).
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut x = root;
    for &p in path {
        x = splitmix(x ^ splitmix(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
