use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "MANIFEST.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub file: String,
    pub id: u64,
    pub entries: u64,
}

/// Store layout on disk: run files per level (index 0 is L1, newest run first),
/// counters, and an echo of the public parameters. Never holds secret key material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest<P> {
    pub version: u32,
    pub levels: Vec<Vec<ManifestRun>>,
    pub next_sequence: u64,
    pub next_run_id: u64,
    pub params: P,
}

impl<P: Serialize + for<'de> Deserialize<'de>> Manifest<P> {
    pub fn new(params: P) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            levels: Vec::new(),
            next_sequence: 0,
            next_run_id: 1,
            params,
        }
    }

    /// Returns `Ok(None)` when the directory holds no manifest.
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let m: Manifest<P> = serde_json::from_slice(&bytes).map_err(|e| Error::OpenFailed {
            path: path.clone(),
            reason: format!("malformed manifest: {e}"),
        })?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::OpenFailed {
                path,
                reason: format!("unsupported manifest version {}", m.version),
            });
        }
        Ok(Some(m))
    }

    /// Atomic replace: write a temp file, sync, rename over the manifest.
    pub fn store(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(self)?)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}
