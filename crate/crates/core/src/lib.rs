//! Latent-space PCA manipulation toolkit for black-box face-matcher experiments.
//!
//! The pipeline: render labeled synthetic faces ([`synthface`]), learn a
//! 64-wide latent code ([`autoencoder`]), organize it with PCA
//! ([`latent_pca`]), edit principal-component coordinates ([`manipulate`]),
//! decode candidates and score them against an enrolled gallery
//! ([`recognition`]), then classify dodging/impersonation outcomes behind a
//! quality gate ([`attack`]). [`workspace`] wires the steps to an on-disk
//! layout.

pub mod attack;
pub mod autoencoder;
pub mod imaging;
pub mod latent_pca;
pub mod linalg;
pub mod manipulate;
pub mod recognition;
pub mod synthface;
pub mod workspace;
