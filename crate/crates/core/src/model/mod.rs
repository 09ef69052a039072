//! Two-branch graph encoder: a structural branch whose layers mix neighbor,
//! closed-walk and normalized k-hop messages, and a positional branch driven
//! by Laplacian eigenvectors. Each branch has its own readout and node head.

mod checkpoint;
mod config;
mod forward;
mod params;
mod tables;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER};
pub use config::ModelConfig;
pub use forward::{bind_params, forward_embed, forward_tables, Encoder, ForwardVars, GraphEmbeddingOutput, Mode};
pub use params::{
    init_params, BatchNormSpec, Branch, BranchLayer, Layout, Linear, Mlp, ModelParams, ParamId, ParamStore,
    RunningStats, BATCH_NORM_MOMENTUM,
};
pub use tables::{Batch, GraphTables};
