use thiserror::Error;

use crate::fespace::FeSpaceError;
use crate::geometry::GeometryError;
use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::nn::NnError;
use crate::training::TrainError;
use crate::weakforms::AssemblyError;

/// Crate-wide error, one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    FeSpace(#[from] FeSpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, Error>;
