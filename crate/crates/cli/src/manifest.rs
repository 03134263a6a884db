use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vorticity_bsde::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";
pub const MAX_MANIFEST_LEN: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, or as given for inputs.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of_bytes(path: impl Into<String>, data: &[u8]) -> FileEntry {
        FileEntry {
            path: path.into(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub config_path: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileEntry>,
    /// Content hash over every input (see [`content_hash`]).
    pub input_hash: String,
    pub timings: Vec<Phase>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Git-style object hash: `sha256("blob <len>\0" || data)` per input, then
/// `sha256` over the sorted `"<hash> <path>\n"` lines.
pub fn content_hash(inputs: &[(String, Vec<u8>)]) -> String {
    let mut lines: Vec<String> = inputs
        .iter()
        .map(|(path, data)| {
            let mut h = Sha256::new();
            h.update(format!("blob {}\0", data.len()).as_bytes());
            h.update(data);
            format!("{} {path}\n", hex::encode(h.finalize()))
        })
        .collect();
    lines.sort();
    sha256_hex(lines.concat().as_bytes())
}

fn is_digest(s: &str) -> bool {
    s.len() == 64
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        if text.len() > MAX_MANIFEST_LEN {
            return Err(Error::Format("manifest too large".into()));
        }
        let m: Manifest =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest schema version {}",
                m.schema_version
            )));
        }
        for f in m.files.iter().chain(&m.inputs) {
            if !is_digest(&f.sha256) {
                return Err(Error::Format(format!("bad checksum for `{}`", f.path)));
            }
        }
        if !is_digest(&m.input_hash) {
            return Err(Error::Format("bad input hash".into()));
        }
        Ok(m)
    }

    /// Files whose bytes no longer match their recorded checksum.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let data = std::fs::read(dir.join(&f.path))?;
            if FileEntry::of_bytes(f.path.clone(), &data) != *f {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: "vbsde 0.1.0".into(),
            command: "oracle".into(),
            status: "ok".into(),
            exit_code: 0,
            error: None,
            config_path: "run.cfg".into(),
            config: [("psi".to_string(), "0".to_string())].into(),
            inputs: vec![FileEntry::of_bytes("run.cfg", b"psi = 0\n")],
            input_hash: content_hash(&[("run.cfg".into(), b"psi = 0\n".to_vec())]),
            timings: vec![Phase {
                name: "total".into(),
                seconds: 0.5,
            }],
            files: vec![FileEntry::of_bytes("a.csv", b"x\n")],
        }
    }

    #[test]
    fn known_digests() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        // no inputs: digest of the empty string
        assert_eq!(
            content_hash(&[]),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        let a = content_hash(&[("x".into(), b"1".to_vec()), ("y".into(), b"2".to_vec())]);
        let b = content_hash(&[("y".into(), b"2".to_vec()), ("x".into(), b"1".to_vec())]);
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = sample();
        assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
        let mut bad = m.clone();
        bad.files[0].sha256 = "xyz".into();
        assert!(Manifest::from_json(&bad.to_json()).is_err());
        let mut bad = m;
        bad.schema_version = 99;
        assert!(Manifest::from_json(&bad.to_json()).is_err());
        assert!(Manifest::from_json("{").is_err());
    }

    #[test]
    fn verify_detects_modified_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::write(dir.join("a.csv"), b"x\n").unwrap();
        let m = sample();
        assert!(m.verify(dir).unwrap().is_empty());
        std::fs::write(dir.join("a.csv"), b"y\n").unwrap();
        assert_eq!(m.verify(dir).unwrap(), vec!["a.csv".to_string()]);
    }
}
