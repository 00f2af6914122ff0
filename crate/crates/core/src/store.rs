//! Content-addressed image storage.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::address::ContentAddress;

/// Metadata of an image held in an [`ImageStore`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratedImage {
    pub content_address: ContentAddress,
    pub bytes_len: u64,
    pub mime: String,
}

/// Best-effort MIME type from magic bytes.
pub fn sniff_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        "image/png"
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        "image/jpeg"
    } else if bytes.starts_with(b"GIF8") {
        "image/gif"
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "image/webp"
    } else {
        "application/octet-stream"
    }
}

#[derive(Debug, Clone)]
enum Backing {
    Memory(Arc<RwLock<HashMap<ContentAddress, Arc<Vec<u8>>>>>),
    Dir(PathBuf),
}

/// Image bytes keyed by their content address. Cloning shares the storage.
#[derive(Debug, Clone)]
pub struct ImageStore {
    backing: Backing,
}

impl ImageStore {
    pub fn in_memory() -> Self {
        ImageStore { backing: Backing::Memory(Arc::default()) }
    }

    /// A store rooted at `dir`, one file per address. The directory is created
    /// if missing.
    pub fn open_dir(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ImageStore { backing: Backing::Dir(dir) })
    }

    pub fn put(&self, bytes: &[u8]) -> io::Result<GeneratedImage> {
        let addr = ContentAddress::of(bytes);
        match &self.backing {
            Backing::Memory(map) => {
                map.write()
                    .expect("image store lock poisoned")
                    .entry(addr.clone())
                    .or_insert_with(|| Arc::new(bytes.to_vec()));
            }
            Backing::Dir(dir) => {
                let path = dir.join(addr.as_str());
                if !path.exists() {
                    let tmp = dir.join(format!(".{}.{}.tmp", addr, std::process::id()));
                    fs::write(&tmp, bytes)?;
                    fs::rename(&tmp, &path)?;
                }
            }
        }
        Ok(GeneratedImage {
            content_address: addr,
            bytes_len: bytes.len() as u64,
            mime: sniff_mime(bytes).to_owned(),
        })
    }

    pub fn get(&self, addr: &ContentAddress) -> io::Result<Option<Vec<u8>>> {
        match &self.backing {
            Backing::Memory(map) => Ok(map
                .read()
                .expect("image store lock poisoned")
                .get(addr)
                .map(|b| b.as_ref().clone())),
            Backing::Dir(dir) => match fs::read(dir.join(addr.as_str())) {
                Ok(b) => Ok(Some(b)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(e),
            },
        }
    }

    pub fn contains(&self, addr: &ContentAddress) -> bool {
        match &self.backing {
            Backing::Memory(map) => map.read().expect("image store lock poisoned").contains_key(addr),
            Backing::Dir(dir) => dir.join(addr.as_str()).is_file(),
        }
    }

    /// Copy every regular, non-hidden file in `dir` into the store and
    /// return how many were read. Addresses are recomputed from the bytes.
    pub fn import_dir(&self, dir: impl AsRef<Path>) -> io::Result<usize> {
        let mut n = 0;
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let hidden = entry.file_name().to_string_lossy().starts_with('.');
            if hidden || !entry.file_type()?.is_file() {
                continue;
            }
            self.put(&fs::read(entry.path())?)?;
            n += 1;
        }
        Ok(n)
    }

    pub fn dir(&self) -> Option<&Path> {
        match &self.backing {
            Backing::Dir(d) => Some(d),
            Backing::Memory(_) => None,
        }
    }
}
