//! Project tree helpers: production-file selection, content digests and
//! workspace copies.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("invalid glob {pattern:?}: {source}")]
    Glob {
        pattern: String,
        #[source]
        source: globset::Error,
    },
    #[error("no source globs configured")]
    NoSources,
    #[error("project root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("walking {path}: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0} is not valid UTF-8")]
    NotUtf8(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Decides which files are production code.
///
/// A file is production code when it matches a source glob and no excluded
/// glob; exclusion wins, so the mutated set and the test-code set never
/// overlap.
#[derive(Debug, Clone)]
pub struct SourceSelector {
    include: GlobSet,
    exclude: GlobSet,
}

fn build_set(patterns: &[String]) -> Result<GlobSet, ProjectError> {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = Glob::new(pattern).map_err(|source| ProjectError::Glob {
            pattern: pattern.clone(),
            source,
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| ProjectError::Glob {
        pattern: patterns.join(","),
        source,
    })
}

impl SourceSelector {
    pub fn new(source_globs: &[String], excluded_globs: &[String]) -> Result<Self, ProjectError> {
        if source_globs.is_empty() {
            return Err(ProjectError::NoSources);
        }
        Ok(SourceSelector {
            include: build_set(source_globs)?,
            exclude: build_set(excluded_globs)?,
        })
    }

    pub fn is_production(&self, rel_path: &str) -> bool {
        self.include.is_match(rel_path) && !self.exclude.is_match(rel_path)
    }

    pub fn is_excluded(&self, rel_path: &str) -> bool {
        self.exclude.is_match(rel_path)
    }

    /// Production files under `root`, as sorted `/`-separated relative paths.
    pub fn select(&self, root: &Path) -> Result<Vec<String>, ProjectError> {
        Ok(relative_files(root)?
            .into_iter()
            .filter(|rel| self.is_production(rel))
            .collect())
    }
}

/// Every regular file under `root` except VCS metadata, sorted.
pub fn relative_files(root: &Path) -> Result<Vec<String>, ProjectError> {
    if !root.is_dir() {
        return Err(ProjectError::MissingRoot(root.to_path_buf()));
    }
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(|source| ProjectError::Walk {
            path: root.to_path_buf(),
            source,
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        files.push(to_slash(rel));
    }
    files.sort();
    Ok(files)
}

pub fn to_slash(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// SHA-256 over `(path, length, bytes)` for each file, in the given order.
pub fn digest_files(root: &Path, rel_paths: &[String]) -> Result<String, ProjectError> {
    let mut hasher = Sha256::new();
    for rel in rel_paths {
        let path = root.join(rel);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(format!("sha256:{}", hex::encode(hasher.finalize())))
}

/// Digest of the production code only. Edits to excluded (test) files never
/// change it.
pub fn production_digest(root: &Path, selector: &SourceSelector) -> Result<String, ProjectError> {
    let files = selector.select(root)?;
    digest_files(root, &files)
}

/// Digest of every file in the tree.
pub fn tree_digest(root: &Path) -> Result<String, ProjectError> {
    let files = relative_files(root)?;
    digest_files(root, &files)
}

pub fn read_source(root: &Path, rel: &str) -> Result<String, ProjectError> {
    let path = root.join(rel);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    String::from_utf8(bytes).map_err(|_| ProjectError::NotUtf8(path))
}

/// Recursively copy `src` into `dst` (created if missing), skipping `.git`.
pub fn copy_tree(src: &Path, dst: &Path) -> Result<(), ProjectError> {
    let walker = WalkDir::new(src)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(|source| ProjectError::Walk {
            path: src.to_path_buf(),
            source,
        })?;
        let rel = entry.path().strip_prefix(src).expect("under src");
        let target = dst.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            fs::create_dir_all(&target).map_err(io_err(&target))?;
        } else if ft.is_symlink() {
            copy_symlink(entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), &target).map_err(io_err(&target))?;
        }
    }
    Ok(())
}

#[cfg(unix)]
fn copy_symlink(src: &Path, dst: &Path) -> Result<(), ProjectError> {
    let link = fs::read_link(src).map_err(io_err(src))?;
    std::os::unix::fs::symlink(link, dst).map_err(io_err(dst))
}

#[cfg(not(unix))]
fn copy_symlink(src: &Path, dst: &Path) -> Result<(), ProjectError> {
    fs::copy(src, dst).map(|_| ()).map_err(io_err(dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(root: &Path, rel: &str, content: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, content).unwrap();
    }

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/a.c", "int a(int x) { return x + 1; }\n");
        write(dir.path(), "src/b.c", "int b(int x) { return x - 1; }\n");
        write(dir.path(), "src/test/helper.c", "int h;\n");
        write(dir.path(), "test/test_a.c", "assert(a(1) == 2);\n");
        write(dir.path(), "build.sh", "cc src/*.c\n");
        dir
    }

    fn selector() -> SourceSelector {
        SourceSelector::new(
            &["src/**/*.c".into()],
            &["src/test/**".into(), "test/**".into()],
        )
        .unwrap()
    }

    #[test]
    fn selection_respects_exclusion() {
        let dir = fixture();
        assert_eq!(
            selector().select(dir.path()).unwrap(),
            vec!["src/a.c", "src/b.c"]
        );
        assert!(selector().is_excluded("test/test_a.c"));
    }

    #[test]
    fn production_digest_ignores_test_edits() {
        let dir = fixture();
        let before = production_digest(dir.path(), &selector()).unwrap();
        write(dir.path(), "test/test_a.c", "assert(a(1) == 3);\n");
        write(dir.path(), "src/test/helper.c", "int changed;\n");
        write(dir.path(), "test/new_test.c", "\n");
        assert_eq!(production_digest(dir.path(), &selector()).unwrap(), before);
        write(dir.path(), "src/b.c", "int b(int x) { return x + 1; }\n");
        assert_ne!(production_digest(dir.path(), &selector()).unwrap(), before);
    }

    #[test]
    fn digest_covers_paths_not_just_content() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "x.c", "same");
        write(dir.path(), "y.c", "same");
        let dx = digest_files(dir.path(), &["x.c".into()]).unwrap();
        let dy = digest_files(dir.path(), &["y.c".into()]).unwrap();
        assert_ne!(dx, dy);
        assert!(dx.starts_with("sha256:") && dx.len() == 7 + 64);
    }

    #[test]
    fn copy_tree_is_faithful() {
        let dir = fixture();
        fs::create_dir_all(dir.path().join(".git")).unwrap();
        write(dir.path(), ".git/HEAD", "ref");
        let out = tempfile::tempdir().unwrap();
        let dst = out.path().join("copy");
        copy_tree(dir.path(), &dst).unwrap();
        assert!(!dst.join(".git").exists());
        assert_eq!(tree_digest(dir.path()).unwrap(), tree_digest(&dst).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            SourceSelector::new(&[], &[]),
            Err(ProjectError::NoSources)
        ));
        assert!(matches!(
            SourceSelector::new(&["src/[".into()], &[]),
            Err(ProjectError::Glob { .. })
        ));
        assert!(matches!(
            selector().select(Path::new("/definitely/not/here")),
            Err(ProjectError::MissingRoot(_))
        ));
    }
}
