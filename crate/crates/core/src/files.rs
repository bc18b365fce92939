//! On-disk workspace layout and JSON file formats.
//!
//! ```text
//! <workspace>/bulletin.json        public
//! <workspace>/instance.json        dealer-private ground truth
//! <workspace>/shares/P<j>.json     one per participant
//! <workspace>/transcript.json      appended by every protocol run
//! <workspace>/attack_report.json
//! ```
//!
//! Big integers are written as decimal strings. Output is pretty-printed
//! with a trailing newline and is byte-identical for identical inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::{Matrix, Vector};
use crate::dealer::{Bulletin, Deal, Instance, Share};
use crate::error::{Error, Result};
use crate::transport::{ParticipantId, Transcript};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BulletinFile {
    version: u32,
    r: usize,
    k: usize,
    n: usize,
    matrices: Vec<Matrix>,
    u_prime: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    dealer_private: bool,
    sigma: Vec<usize>,
    secret: Matrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceCounts {
    pub multiset: String,
    pub ordered_distinct: String,
    pub ordered_rep: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioHitRecord {
    pub position: usize,
    pub matrix_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: String,
    pub space: SpaceCounts,
    pub solutions: Vec<Vec<usize>>,
    pub ratio_hits: Vec<RatioHitRecord>,
    pub enumerated: bool,
    pub nodes_explored: u64,
    pub elapsed_ms: u64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn bulletin_path(&self) -> PathBuf {
        self.root.join("bulletin.json")
    }

    pub fn instance_path(&self) -> PathBuf {
        self.root.join("instance.json")
    }

    pub fn shares_dir(&self) -> PathBuf {
        self.root.join("shares")
    }

    pub fn share_path(&self, p: ParticipantId) -> PathBuf {
        self.shares_dir().join(format!("{p}.json"))
    }

    pub fn transcript_path(&self) -> PathBuf {
        self.root.join("transcript.json")
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join("attack_report.json")
    }

    fn read(&self, path: &Path) -> Result<String> {
        fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read {}: {e}", path.display()),
            ))
        })
    }

    /// Writes the bulletin, the dealer-private instance and every share.
    pub fn write_deal(&self, deal: &Deal) -> Result<()> {
        fs::create_dir_all(self.shares_dir())?;
        fs::write(self.bulletin_path(), bulletin_to_json(&deal.bulletin)?)?;
        fs::write(
            self.instance_path(),
            to_json(&InstanceFile {
                dealer_private: true,
                sigma: deal.instance.sigma.clone(),
                secret: deal.instance.secret.clone(),
            })?,
        )?;
        for share in &deal.shares {
            fs::write(self.share_path(share.participant), to_json(share)?)?;
        }
        Ok(())
    }

    pub fn read_bulletin(&self) -> Result<Bulletin> {
        bulletin_from_json(&self.read(&self.bulletin_path())?)
    }

    /// Reads `shares/P1.json … shares/Pn.json`.
    pub fn read_shares(&self, n: usize) -> Result<Vec<Share>> {
        (1..=n)
            .map(|j| {
                let p = ParticipantId(j);
                let share: Share = serde_json::from_str(&self.read(&self.share_path(p))?)?;
                if share.participant != p {
                    return Err(Error::Format(format!(
                        "{} holds the share of {}",
                        self.share_path(p).display(),
                        share.participant
                    )));
                }
                Ok(share)
            })
            .collect()
    }

    /// The dealer-private instance, if present.
    pub fn read_instance(&self, bulletin: &Bulletin) -> Result<Option<Instance>> {
        let path = self.instance_path();
        if !path.exists() {
            return Ok(None);
        }
        let file: InstanceFile = serde_json::from_str(&self.read(&path)?)?;
        let instance = Instance::new(bulletin.matrices.clone(), file.sigma)?;
        if instance.secret != file.secret {
            return Err(Error::Format(
                "instance.json secret does not match its selection".into(),
            ));
        }
        Ok(Some(instance))
    }

    /// The transcript so far; empty if none was written yet.
    pub fn read_transcript(&self) -> Result<Transcript> {
        let path = self.transcript_path();
        if !path.exists() {
            return Ok(Transcript::default());
        }
        Transcript::from_json(&self.read(&path)?)
    }

    pub fn write_transcript(&self, transcript: &Transcript) -> Result<()> {
        fs::write(self.transcript_path(), to_json(transcript)?)?;
        Ok(())
    }

    pub fn write_report(&self, report: &AttackReport) -> Result<()> {
        fs::write(self.report_path(), to_json(report)?)?;
        Ok(())
    }

    pub fn read_report(&self) -> Result<AttackReport> {
        Ok(serde_json::from_str(&self.read(&self.report_path())?)?)
    }
}

pub fn bulletin_to_json(b: &Bulletin) -> Result<String> {
    to_json(&BulletinFile {
        version: FORMAT_VERSION,
        r: b.r,
        k: b.k,
        n: b.n,
        matrices: b.matrices.clone(),
        u_prime: b.u_prime.clone(),
    })
}

pub fn bulletin_from_json(s: &str) -> Result<Bulletin> {
    let f: BulletinFile = serde_json::from_str(s)?;
    if f.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported bulletin version {}", f.version)));
    }
    if f.matrices.len() != f.k || f.u_prime.len() != f.n {
        return Err(Error::Format("bulletin counts disagree with k and n".into()));
    }
    if f.matrices.iter().any(|m| m.dim() != f.r) || f.u_prime.iter().any(|v| v.dim() != f.r) {
        return Err(Error::Format(format!("bulletin entries must have dimension {}", f.r)));
    }
    Ok(Bulletin {
        r: f.r,
        k: f.k,
        n: f.n,
        matrices: f.matrices,
        u_prime: f.u_prime,
        reveals: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{generate_instance, DealerParams};

    #[test]
    fn workspace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let deal = generate_instance(&DealerParams::new(4, 5, 3, 1)).unwrap();
        ws.write_deal(&deal).unwrap();
        let b = ws.read_bulletin().unwrap();
        assert_eq!(b, deal.bulletin);
        assert_eq!(ws.read_shares(3).unwrap(), deal.shares);
        assert_eq!(ws.read_instance(&b).unwrap().unwrap(), deal.instance);
        assert_eq!(ws.read_transcript().unwrap(), Transcript::default());
    }

    #[test]
    fn bulletin_has_no_selection_fields() {
        let deal = generate_instance(&DealerParams::new(4, 5, 3, 1)).unwrap();
        let json = bulletin_to_json(&deal.bulletin).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, vec!["k", "matrices", "n", "r", "u_prime", "version"]);
        assert!(v["matrices"][0][0][0].is_string());
    }

    #[test]
    fn malformed_bulletins_are_rejected() {
        assert!(bulletin_from_json(r#"{"version":2,"r":1,"k":0,"n":0,"matrices":[],"u_prime":[]}"#).is_err());
        assert!(bulletin_from_json(r#"{"version":1,"r":2,"k":1,"n":0,"matrices":[[["1"]]],"u_prime":[]}"#).is_err());
        assert!(bulletin_from_json(r#"{"version":1,"r":1,"k":1,"n":0,"matrices":[[["1"]]],"u_prime":[]}"#).is_ok());
    }

    #[test]
    fn missing_workspace_is_an_io_error() {
        let ws = Workspace::new("/nonexistent/matshare/ws");
        assert!(matches!(ws.read_bulletin(), Err(Error::Io(_))));
    }
}
