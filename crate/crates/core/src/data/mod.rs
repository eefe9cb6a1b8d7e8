//! Dataset ingestion from `root/<class>/<file>` trees, the seeded train/val
//! split, per-epoch batching, image preprocessing and a synthetic dataset
//! generator.

mod batch;
mod image;
mod scan;
mod split;
mod synth;

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use self::image::{load_image, resize_bilinear};
pub use batch::make_batches;
pub use scan::{scan_dataset, ScannedDataset, EXTENSIONS};
pub use split::{split_dataset, DatasetSplit};
pub use synth::{synth_dataset, SYNTH_CLASSES};

/// Class names in code-point order; a class's position is its label id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    names: Vec<String>,
}

impl ClassIndex {
    /// Sorts and deduplicates `names`. At least two classes are required.
    pub fn new(mut names: Vec<String>) -> Result<Self> {
        names.sort();
        names.dedup();
        if names.len() < 2 {
            return Err(Error::config(format!(
                "need at least 2 classes, found {}",
                names.len()
            )));
        }
        Ok(ClassIndex { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A file on disk and its label, before decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub label: usize,
}

/// A decoded image with its label. Pixels lie in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub label: usize,
    pub path: PathBuf,
}

/// Decodes entries in listing order, resizing to `size × size × 3`.
pub fn load_samples(entries: &[Entry], size: usize) -> Result<Vec<Sample>> {
    entries
        .iter()
        .map(|e| {
            Ok(Sample {
                image: load_image(&e.path, size)?,
                label: e.label,
                path: e.path.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_ids_follow_code_point_order() {
        let idx = ClassIndex::new(
            ["squamous", "normal", "adenocarcinoma", "large.cell"].map(String::from).to_vec(),
        )
        .unwrap();
        assert_eq!(idx.names(), ["adenocarcinoma", "large.cell", "normal", "squamous"]);
        assert_eq!(idx.id("normal"), Some(2));
        assert_eq!(idx.name(3), Some("squamous"));
        // Uppercase sorts before lowercase by code point.
        let idx = ClassIndex::new(["b", "B", "a"].map(String::from).to_vec()).unwrap();
        assert_eq!(idx.names(), ["B", "a", "b"]);
        assert!(ClassIndex::new(vec!["only".into()]).is_err());
    }
}
