//! The fusion network: chunk-wise projectors, cross-modal connectors, the
//! text-feature enhancer and the ensemble regression head.

mod config;
mod connector;
mod enhancer;
mod head;
mod linear;
mod model;
mod projector;

pub use config::{
    AblationMode, ChunkProjectorConfig, ConnectorConfig, EnhancerConfig, GateMode, ModelConfig, ModelDims,
};
pub use connector::{ConnectorCache, CrossModalConnector};
pub use enhancer::{EnhancerCache, TextEnhancer};
pub use head::{EnsembleHead, HeadCache, SubNet};
pub use linear::{Linear, Norm};
pub use model::{FusionModel, ModalityBatch, ModelCache};
pub use projector::{ChunkProjector, ChunkProjectorCache};
