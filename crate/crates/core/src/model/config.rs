use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::HopNormalization;

/// Architecture of the two-branch encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Message-passing layers per branch.
    pub layers: usize,
    /// Largest walk length `K` used by the closed-walk and k-hop terms.
    pub hops: usize,
    pub hidden_dim: usize,
    /// Laplacian eigenvectors fed to the positional branch.
    pub pe_dim: usize,
    /// Linear layers per node MLP; 1 means a single linear map.
    pub mlp_depth: usize,
    /// Width of the input node features.
    pub node_feature_dim: usize,
    /// Width of raw edge features (0 when the data has none).
    pub edge_feature_dim: usize,
    pub use_structural: bool,
    pub use_closed_walks: bool,
    pub use_high_order: bool,
    pub use_positional: bool,
    pub use_edge_centrality: bool,
    pub use_raw_edge_features: bool,
    /// Multiply by raw `A^k_vv` instead of `log(1 + A^k_vv)`.
    pub raw_closed_walks: bool,
    pub hop_normalization: HopNormalization,
    pub batch_norm_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 3,
            hops: 3,
            hidden_dim: 32,
            pe_dim: 6,
            mlp_depth: 2,
            node_feature_dim: 1,
            edge_feature_dim: 0,
            use_structural: true,
            use_closed_walks: true,
            use_high_order: true,
            use_positional: true,
            use_edge_centrality: true,
            use_raw_edge_features: true,
            raw_closed_walks: false,
            hop_normalization: HopNormalization::KHop,
            batch_norm_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.pe_dim == 0 || self.mlp_depth == 0 {
            return invalid("layers, hidden_dim, pe_dim and mlp_depth must be positive");
        }
        if self.node_feature_dim == 0 {
            return invalid("node_feature_dim must be positive");
        }
        if (self.use_closed_walks || self.use_high_order) && self.hops < 2 {
            return invalid("hops must be at least 2 when a k-hop term is enabled");
        }
        if !self.use_structural && !self.use_positional {
            return invalid("at least one of the structural and positional branches is required");
        }
        if !(self.batch_norm_eps > 0.0) {
            return invalid("batch_norm_eps must be positive");
        }
        Ok(())
    }

    /// Whether walk powers need computing at all.
    pub fn needs_walks(&self) -> bool {
        self.use_structural && (self.use_closed_walks || self.use_high_order)
    }

    pub fn uses_raw_edges(&self) -> bool {
        self.use_raw_edge_features && self.edge_feature_dim > 0
    }

    /// Width of the graph embedding `z`.
    pub fn embedding_dim(&self) -> usize {
        self.hidden_dim * (usize::from(self.use_structural) + usize::from(self.use_positional))
    }
}
