//! Feature-geometry diagnostics: clustering, projection, the circle map,
//! and the sphere uniformity descent experiment.

mod kmeans;
mod pca;
mod sphere;

pub use kmeans::{kmeans, KmeansResult};
pub use pca::{pca_project, symmetric_eigen};
pub use sphere::{
    sincos_map, sphere_uniformity_experiment, SphereExperimentConfig, SphereExperimentReport,
};
