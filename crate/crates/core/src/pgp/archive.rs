//! Model archives: `model.json` plus text matrices for the basepoint basis
//! and the `k x (nr-r)` coordinate matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::model::PgpModel;
use crate::dataset::{read_matrix, write_matrix};
use crate::error::{Error, Result};
use crate::pde::{ParameterPoint, Standardization};
use crate::pod::StiefelBasis;

pub const MODEL_FILE: &str = "model.json";
const BASEPOINT_FILE: &str = "basepoint.txt";
const COORDS_FILE: &str = "coords.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub kernel: KernelSpec,
    pub sigma_k: f64,
    pub standardization: Standardization,
    pub r: usize,
    pub n: usize,
    pub k: usize,
    pub thetas: Vec<ParameterPoint>,
    pub basepoint_file: String,
    pub coords_file: String,
    pub seed: Option<u64>,
}

pub fn save_model(dir: &Path, model: &PgpModel, seed: Option<u64>) -> Result<ModelMetadata> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join(BASEPOINT_FILE), model.basepoint().matrix())?;
    write_matrix(&dir.join(COORDS_FILE), model.coords())?;
    let meta = ModelMetadata {
        kernel: model.kernel().clone(),
        sigma_k: model.sigma_k(),
        standardization: model.standardization().clone(),
        r: model.r(),
        n: model.n(),
        k: model.k(),
        thetas: model.thetas().to_vec(),
        basepoint_file: BASEPOINT_FILE.into(),
        coords_file: COORDS_FILE.into(),
        seed,
    };
    fs::write(dir.join(MODEL_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

pub fn load_model(dir: &Path) -> Result<(PgpModel, ModelMetadata)> {
    let path = dir.join(MODEL_FILE);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::SchemaMismatch(format!("no model at {}", path.display())),
        _ => Error::Io(e),
    })?;
    let meta: ModelMetadata = serde_json::from_str(&text)?;
    let schema = |e: Error| Error::SchemaMismatch(e.to_string());
    let basepoint = StiefelBasis::new(read_matrix(&dir.join(&meta.basepoint_file))?).map_err(schema)?;
    let coords = read_matrix(&dir.join(&meta.coords_file))?;
    if basepoint.n() != meta.n || basepoint.r() != meta.r || coords.nrows() != meta.k || meta.thetas.len() != meta.k {
        return Err(Error::SchemaMismatch("model dimensions disagree with its matrix files".into()));
    }
    let model = PgpModel::from_coordinates(basepoint, meta.thetas.clone(), coords, meta.kernel.clone(), Some(meta.sigma_k))
        .map_err(|e| match e {
            Error::IllConditionedKernel { .. } => e,
            other => schema(other),
        })?;
    if model.standardization() != &meta.standardization {
        return Err(Error::SchemaMismatch("stored standardization does not match the training parameters".into()));
    }
    Ok((model, meta))
}
