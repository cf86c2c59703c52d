use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::Serialize;

/// A command error with its exit code: 2 for usage and configuration
/// problems, 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(message: impl std::fmt::Display) -> Self {
        Failure::Usage(anyhow!("{message}"))
    }

    pub fn runtime(message: impl std::fmt::Display) -> Self {
        Failure::Runtime(anyhow!("{message}"))
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<stargaze::Error> for Failure {
    fn from(e: stargaze::Error) -> Self {
        use stargaze::Error as E;
        let usage = match &e {
            E::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            E::InvalidParameter(_) | E::UnknownArchitecture(_) | E::Checkpoint(_) => true,
            _ => false,
        };
        if usage {
            Failure::Usage(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

/// The output directory of one run.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Creates `root` if needed; refuses a non-empty directory unless forced.
    pub fn prepare(root: &Path, force: bool) -> Result<Self, Failure> {
        if root.exists() {
            if !root.is_dir() {
                return Err(Failure::usage(format!(
                    "{} is not a directory",
                    root.display()
                )));
            }
            let mut entries = std::fs::read_dir(root)
                .map_err(|e| Failure::runtime(format!("cannot list {}: {e}", root.display())))?;
            if !force && entries.next().is_some() {
                return Err(Failure::usage(format!(
                    "output directory {} is not empty (use --force to overwrite)",
                    root.display()
                )));
            }
        } else {
            std::fs::create_dir_all(root)
                .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", root.display())))?;
        }
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Streams into `name` through a buffered writer.
    pub fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> stargaze::Result<()>,
    ) -> Result<(), Failure> {
        let path = self.path(name);
        let file = File::create(&path)
            .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| {
            Failure::Runtime(anyhow::Error::from(e).context(format!("writing {}", path.display())))
        })?;
        w.flush()
            .map_err(|e| Failure::runtime(format!("writing {}: {e}", path.display())))
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::runtime(format!("serialising {name}: {e}")))?;
        text.push('\n');
        let path = self.path(name);
        std::fs::write(&path, text)
            .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
    }
}
