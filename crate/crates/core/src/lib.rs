//! Drug–target interaction prediction from two entity modalities.
//!
//! Structural features come from association networks (Jaccard similarity,
//! random walk with restart, diffusion component analysis); text features
//! arrive as precomputed embedding matrices. A shared dual cross-attention
//! block aligns the two modalities, a shared sigmoid gate fuses them, and a
//! two-layer head scores drug–protein pairs.

pub mod data_io;
pub mod entity;
pub mod error;
pub mod evaluation;
pub mod fusion_net;
pub mod graph_features;
pub mod numkit;
pub mod synthetic;
pub mod training;

pub use entity::{EntityIndex, Side};
pub use error::{Error, Result};
