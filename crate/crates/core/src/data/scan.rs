use std::fs::{self, File};
use std::path::{Path, PathBuf};

use super::{ClassIndex, Entry};
use crate::error::{Error, Result};

/// Recognized sample extensions, matched case-insensitively.
pub const EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "ctt"];

#[derive(Debug, Clone)]
pub struct ScannedDataset {
    pub classes: ClassIndex,
    /// Classes in id order, files sorted by name within each class.
    pub entries: Vec<Entry>,
    /// Classes whose folder held no recognized files. They keep their ids.
    pub empty_classes: Vec<String>,
}

fn sorted_children(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for item in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let item = item.map_err(|e| Error::io(dir, e))?;
        out.push((item.file_name().to_string_lossy().into_owned(), item.path()));
    }
    out.sort();
    Ok(out)
}

fn is_sample(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Folder names that mark a pre-split tree (`root/<split>/<class>/<file>`).
const SPLIT_DIRS: [&str; 5] = ["test", "train", "val", "valid", "validation"];

fn subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    Ok(sorted_children(dir)?.into_iter().filter(|(_, p)| p.is_dir()).collect())
}

/// `(class name, folder)` pairs, sorted. When every subdirectory of `root`
/// is a split name the tree is pooled: second-level folders are classes,
/// named up to their first `_` so that annotated names such as
/// `adenocarcinoma_left.lower.lobe_T2_N0_M0_Ib` merge with `adenocarcinoma`.
fn class_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let top = subdirs(root)?;
    let pooled = !top.is_empty()
        && top
            .iter()
            .all(|(n, _)| SPLIT_DIRS.contains(&n.to_ascii_lowercase().as_str()));
    if !pooled {
        return Ok(top);
    }
    let mut out = Vec::new();
    for (_, split) in &top {
        for (name, dir) in subdirs(split)? {
            let class = name.split('_').next().unwrap_or(&name).to_string();
            out.push((class, dir));
        }
    }
    out.sort();
    Ok(out)
}

/// Lists `root/<class>/<file>` deterministically. Every immediate
/// subdirectory is a class; other files at the root are ignored. A tree
/// split into `train`/`test`/`valid` folders is read as a single pool.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<ScannedDataset> {
    let root = root.as_ref();
    let dirs = class_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no class subdirectories",
            root.display()
        )));
    }
    let classes = ClassIndex::new(dirs.iter().map(|(n, _)| n.clone()).collect())?;

    let mut entries = Vec::new();
    let mut empty_classes = Vec::new();
    for (label, name) in classes.names().iter().enumerate() {
        let mut files = Vec::new();
        for (_, dir) in dirs.iter().filter(|(n, _)| n == name) {
            for (_, path) in sorted_children(dir)? {
                if path.is_file() && is_sample(&path) {
                    File::open(&path).map_err(|e| Error::io(&path, e))?;
                    files.push(path);
                }
            }
        }
        if files.is_empty() {
            empty_classes.push(name.clone());
        }
        files.sort();
        entries.extend(files.into_iter().map(|path| Entry { path, label }));
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} contains no sample files",
            root.display()
        )));
    }
    Ok(ScannedDataset {
        classes,
        entries,
        empty_classes,
    })
}

