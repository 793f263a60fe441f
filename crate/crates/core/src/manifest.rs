//! TOML manifests: global hyperparameters plus a list of stream files.
//!
//! ```toml
//! [params]
//! lambda = 0.001
//! sigma = 6.0
//!
//! [[streams]]
//! id = "s000"
//! phi = "s000_phi.csv"
//! psi = "s000_psi.csv"
//! annotation = "s000_gt.csv"
//! supervised = false
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::io::{read_annotations, read_matrix, write_annotations, write_matrix, write_text};
use crate::pipeline::{Dataset, Hyperparameters, StreamInput};
use crate::synth::SynthSuite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRecord {
    pub id: String,
    pub phi: PathBuf,
    pub psi: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<PathBuf>,
    #[serde(default)]
    pub supervised: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub params: Hyperparameters,
    pub streams: Vec<StreamRecord>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| AlignError::Manifest(e.to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.check_ids()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| AlignError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            AlignError::Manifest(msg) => AlignError::Manifest(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn check_ids(&self) -> Result<()> {
        if self.streams.is_empty() {
            return Err(AlignError::Manifest("no [[streams]] entries".into()));
        }
        let mut ids: Vec<&str> = self.streams.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(AlignError::Manifest(format!("duplicate stream id '{}'", w[0])));
        }
        if let Some(bad) = ids.iter().find(|id| id.is_empty() || id.contains(['/', '\\'])) {
            return Err(AlignError::Manifest(format!("invalid stream id '{bad}'")));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Reads every referenced file and checks that feature dimensions agree
    /// across streams and annotations fit their streams.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let mut streams = Vec::with_capacity(self.streams.len());
        for rec in &self.streams {
            let load = || -> Result<StreamInput> {
                let phi = read_matrix(&self.resolve(&rec.phi))?;
                let psi_raw = read_matrix(&self.resolve(&rec.psi))?;
                let annotation = match &rec.annotation {
                    Some(p) => {
                        let ann = read_annotations(&self.resolve(p))?;
                        ann.validate(2 * psi_raw.cols() + 1, phi.cols())?;
                        Some(ann)
                    }
                    None => None,
                };
                Ok(StreamInput {
                    id: rec.id.clone(),
                    phi,
                    psi_raw,
                    annotation,
                    supervised: rec.supervised,
                })
            };
            streams.push(load().map_err(|e| e.in_stream(&rec.id))?);
        }
        let (d, e) = (streams[0].phi.rows(), streams[0].psi_raw.rows());
        for s in &streams[1..] {
            if s.phi.rows() != d {
                return Err(AlignError::shape("video feature dimension", d, s.phi.rows()).in_stream(&s.id));
            }
            if s.psi_raw.rows() != e {
                return Err(AlignError::shape("text feature dimension", e, s.psi_raw.rows()).in_stream(&s.id));
            }
        }
        Ok(Dataset { streams })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Writes a synthetic suite as matrix and annotation files plus
/// `manifest.toml` into `dir`, returning the manifest path.
pub fn write_suite(suite: &SynthSuite, dir: &Path, params: &Hyperparameters) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| AlignError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut records = Vec::with_capacity(suite.streams.len());
    for s in &suite.streams {
        let rec = StreamRecord {
            id: s.id.clone(),
            phi: format!("{}_phi.csv", s.id).into(),
            psi: format!("{}_psi.csv", s.id).into(),
            annotation: Some(format!("{}_gt.csv", s.id).into()),
            supervised: s.supervised,
        };
        write_matrix(&dir.join(&rec.phi), &s.phi)?;
        write_matrix(&dir.join(&rec.psi), &s.psi_raw)?;
        write_annotations(&dir.join(rec.annotation.as_ref().unwrap()), &s.ground_truth)?;
        records.push(rec);
    }
    let manifest = Manifest {
        params: params.clone(),
        streams: records,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.toml");
    write_text(&path, &manifest.to_toml())?;
    Ok(path)
}
