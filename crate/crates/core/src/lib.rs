//! GenHop: k-hop message passing with closed-walk, edge-centrality and
//! Laplacian positional features, a structural/positional self-supervised
//! trainer, and the exact graph invariants used to check what the model can
//! and cannot tell apart.

pub mod autodiff;
pub mod centrality;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod iso;
pub mod model;
pub mod spectral;
pub mod tensor;
pub mod train;
pub mod wl;

pub use error::{Error, Result};
pub use graph::Graph;
pub use tensor::Tensor;
