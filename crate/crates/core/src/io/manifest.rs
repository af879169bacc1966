use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix_market::{read_matrix_market, write_matrix_market};
use crate::error::{Error, Result};
use crate::model::{Horizon, StateSpaceModel};

/// JSON file naming the `A`, `B`, `C` matrix files of a model. Relative paths
/// are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub name: String,
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Horizon>,
}

impl ModelManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Loads the referenced matrices; `base` is the manifest's directory.
    pub fn load(&self, base: &Path) -> Result<StateSpaceModel> {
        let a = read_matrix_market(&base.join(&self.a))?;
        let b = read_matrix_market(&base.join(&self.b))?;
        let c = read_matrix_market(&base.join(&self.c))?;
        StateSpaceModel::new(a, b, c)
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// Reads a manifest and the model it references.
pub fn load_model(manifest: &Path) -> Result<(ModelManifest, StateSpaceModel)> {
    let m = ModelManifest::read(manifest)?;
    let model = m.load(parent(manifest))?;
    Ok((m, model))
}

/// Writes `<name>.A.mtx`, `<name>.B.mtx`, `<name>.C.mtx` and `<name>.json`
/// into `dir` and returns the manifest path.
pub fn save_model(model: &StateSpaceModel, dir: &Path, name: &str, tau: Option<Horizon>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = |part: &str| PathBuf::from(format!("{name}.{part}.mtx"));
    let manifest = ModelManifest {
        name: name.to_string(),
        a: file("A"),
        b: file("B"),
        c: file("C"),
        tau,
    };
    write_matrix_market(&dir.join(&manifest.a), model.a())?;
    write_matrix_market(&dir.join(&manifest.b), model.b())?;
    write_matrix_market(&dir.join(&manifest.c), model.c())?;
    let path = dir.join(format!("{name}.json"));
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
