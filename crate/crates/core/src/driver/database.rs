use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::hdm::{HdmModel, HdmSample};
use crate::{Error, Result};

pub const INDEX_FILE: &str = "snapshots.json";
pub const DATA_FILE: &str = "snapshots.bin";

/// Every full-model solution computed during a run, in sampling order.
#[derive(Debug, Clone, Default)]
pub struct SnapshotDatabase {
    samples: Vec<HdmSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    mu: Vec<f64>,
    objective_value: f64,
    residual_norm: f64,
    /// Byte offset of the state in the data file.
    state_offset: u64,
    /// Byte offset of the column-major N×n_p sensitivity block.
    sensitivity_offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Index {
    format: String,
    state_dim: usize,
    param_dim: usize,
    data_file: String,
    samples: Vec<IndexEntry>,
}

const FORMAT_TAG: &str = "progrom-snapshots-v1";

impl SnapshotDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[HdmSample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> Option<&HdmSample> {
        self.samples.get(i)
    }

    pub fn last(&self) -> Option<&HdmSample> {
        self.samples.last()
    }

    /// Index of a stored parameter equal to `mu` within `1e-14` relative.
    pub fn find(&self, mu: &DVector<f64>) -> Option<usize> {
        self.samples.iter().position(|s| {
            s.mu.len() == mu.len() && (&s.mu - mu).norm() <= 1e-14 * mu.norm().max(s.mu.norm())
        })
    }

    /// Adds a sample. Duplicated parameters and shape mismatches are rejected.
    pub fn push(&mut self, sample: HdmSample) -> Result<usize> {
        if let Some(first) = self.samples.first() {
            if sample.state.len() != first.state.len() || sample.mu.len() != first.mu.len() {
                return Err(Error::invalid("sample dimensions differ from the database"));
            }
        }
        if sample.sensitivities.shape() != (sample.state.len(), sample.mu.len()) {
            return Err(Error::invalid("sensitivity block has the wrong shape"));
        }
        if let Some(i) = self.find(&sample.mu) {
            return Err(Error::invalid(format!("parameter already sampled as entry {i}")));
        }
        self.samples.push(sample);
        Ok(self.samples.len() - 1)
    }

    /// Stored states as columns.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let n = self.samples.first().map_or(0, |s| s.state.len());
        DMatrix::from_fn(n, self.samples.len(), |i, j| self.samples[j].state[i])
    }

    /// All sensitivity blocks side by side.
    pub fn sensitivity_matrix(&self) -> DMatrix<f64> {
        let Some(first) = self.samples.first() else {
            return DMatrix::zeros(0, 0);
        };
        let (n, np) = first.sensitivities.shape();
        DMatrix::from_fn(n, np * self.samples.len(), |i, j| {
            self.samples[j / np].sensitivities[(i, j % np)]
        })
    }

    /// Sample with the lowest objective value; ties go to the earliest.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.samples.iter().enumerate() {
            match best {
                Some(b) if self.samples[b].objective_value <= s.objective_value => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Stored state minimizing `‖R(w, μ)‖`; ties go to the earliest.
    pub fn closest_state<M: HdmModel + ?Sized>(&self, model: &M, mu: &DVector<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.samples.iter().enumerate() {
            let norm = model.residual(&s.state, mu).norm();
            match best {
                Some((_, b)) if b <= norm => {}
                _ => best = Some((i, norm)),
            }
        }
        best
    }

    /// Writes `snapshots.json` and `snapshots.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut bytes: Vec<u8> = Vec::new();
        let mut entries = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let state_offset = bytes.len() as u64;
            for v in s.state.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let sensitivity_offset = bytes.len() as u64;
            for v in s.sensitivities.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            entries.push(IndexEntry {
                mu: s.mu.as_slice().to_vec(),
                objective_value: s.objective_value,
                residual_norm: s.residual_norm_at_solve,
                state_offset,
                sensitivity_offset,
            });
        }
        let first = self.samples.first();
        let index = Index {
            format: FORMAT_TAG.into(),
            state_dim: first.map_or(0, |s| s.state.len()),
            param_dim: first.map_or(0, |s| s.mu.len()),
            data_file: DATA_FILE.into(),
            samples: entries,
        };
        let data_path = dir.join(DATA_FILE);
        let mut file = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(&data_path, e))?;
        let index_path = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&index).map_err(|source| Error::Json {
            context: "serializing snapshot index".into(),
            source,
        })?;
        fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: Index = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: index_path.display().to_string(),
            source,
        })?;
        if index.format != FORMAT_TAG {
            return Err(Error::invalid(format!("unknown snapshot format `{}`", index.format)));
        }
        let data_path = dir.join(&index.data_file);
        let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let read_block = |offset: u64, count: usize| -> Result<Vec<f64>> {
            let start = offset as usize;
            let end = start + 8 * count;
            if end > bytes.len() {
                return Err(Error::invalid(format!(
                    "{} is truncated: need bytes {start}..{end}, have {}",
                    data_path.display(),
                    bytes.len()
                )));
            }
            Ok(bytes[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let (n, np) = (index.state_dim, index.param_dim);
        let mut db = Self::new();
        for entry in index.samples {
            if entry.mu.len() != np {
                return Err(Error::invalid("parameter length disagrees with the index header"));
            }
            let state = DVector::from_vec(read_block(entry.state_offset, n)?);
            let sensitivities = DMatrix::from_vec(n, np, read_block(entry.sensitivity_offset, n * np)?);
            db.push(HdmSample {
                mu: DVector::from_vec(entry.mu),
                state,
                sensitivities,
                objective_value: entry.objective_value,
                residual_norm_at_solve: entry.residual_norm,
            })?;
        }
        Ok(db)
    }
}
