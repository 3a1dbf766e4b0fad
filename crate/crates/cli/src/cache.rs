//! Content-addressed, write-once cache under `<out>/cache/<sha256>/`.
//!
//! An entry is a directory holding `meta.json` and optional little-endian f64
//! blobs. Entries are assembled in a scratch directory and renamed into place,
//! so a reader never sees a partial entry. Existing entries are never rewritten.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use quasilocal_core::embedding::{EmbeddedSurface, EmbeddingRecord};
use quasilocal_core::flows::{Certificate, USolution, VectorWSolution, WSolution};
use quasilocal_core::foliation::Schedule;
use quasilocal_core::grid::LatLonGrid;
use quasilocal_core::{Error, Result};

/// Incremental key builder; every field is length-prefixed.
#[derive(Clone)]
pub struct Key(Sha256);

impl Key {
    pub fn new(tag: &str) -> Self {
        let mut k = Key(Sha256::new());
        k.str(tag);
        k
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn usize(&mut self, v: usize) -> &mut Self {
        self.0.update((v as u64).to_le_bytes());
        self
    }

    pub fn finish(&self) -> String {
        hex::encode(self.0.clone().finalize())
    }
}

pub struct Cache {
    root: Option<PathBuf>,
}

fn write_f64s(path: &Path, data: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = data.flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn split_rows(flat: Vec<f64>, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
    if flat.len() != rows * cols {
        return Err(Error::Parse(format!("blob has {} values, expected {}", flat.len(), rows * cols)));
    }
    Ok(flat.chunks_exact(cols).map(|c| c.to_vec()).collect())
}

#[derive(Serialize, Deserialize)]
struct EmbeddingMeta {
    key: String,
    record: EmbeddingRecord,
}

#[derive(Serialize, Deserialize)]
struct UMeta {
    key: String,
    ntheta: usize,
    npsi: usize,
    kappa: f64,
    r: Vec<f64>,
    s: Vec<f64>,
    pcg_iterations: usize,
    certificate: Option<Certificate>,
}

#[derive(Serialize, Deserialize)]
struct WMeta {
    key: String,
    limited_nodes: [usize; 4],
    correction_iterations: [usize; 4],
}

fn read_meta<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?).map_err(|e| Error::Parse(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Outcome of a lookup, reported on stderr only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Hit,
    Miss,
    Disabled,
}

impl Cache {
    pub fn new(out: &Path, enabled: bool) -> Self {
        Cache { root: enabled.then(|| out.join("cache")) }
    }

    fn entry(&self, key: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(key))
    }

    /// Build the entry in a scratch directory, then rename it into place. A
    /// concurrent writer that got there first wins.
    fn publish(&self, key: &str, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let Some(dest) = self.entry(key) else { return Ok(()) };
        if dest.exists() {
            return Ok(());
        }
        let root = self.root.as_ref().unwrap();
        fs::create_dir_all(root)?;
        let tmp = root.join(format!(".{key}.{}.tmp", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        if let Err(e) = fill(&tmp) {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }
        if fs::rename(&tmp, &dest).is_err() {
            let _ = fs::remove_dir_all(&tmp);
            if !dest.exists() {
                return Err(Error::Io(std::io::Error::other(format!(
                    "could not publish cache entry {}",
                    dest.display()
                ))));
            }
        }
        Ok(())
    }

    pub fn load_embedding(&self, key: &str) -> Option<EmbeddedSurface> {
        let dir = self.entry(key)?;
        let text = fs::read_to_string(dir.join("meta.json")).ok()?;
        let meta: EmbeddingMeta = serde_json::from_str(&text).ok()?;
        if meta.key != key {
            return None;
        }
        EmbeddedSurface::from_record(&meta.record).ok()
    }

    pub fn store_embedding(&self, key: &str, es: &EmbeddedSurface) -> Result<()> {
        let meta = EmbeddingMeta { key: key.to_string(), record: es.to_record() };
        let json = to_json(&meta)?;
        self.publish(key, |dir| Ok(fs::write(dir.join("meta.json"), json)?))
    }

    pub fn load_u(&self, key: &str) -> Option<USolution> {
        let dir = self.entry(key)?;
        read_u(&dir, key).ok()
    }

    pub fn store_u(&self, key: &str, u: &USolution) -> Result<()> {
        let meta = UMeta {
            key: key.to_string(),
            ntheta: u.grid.ntheta,
            npsi: u.grid.npsi,
            kappa: u.kappa,
            r: u.schedule.r.clone(),
            s: u.schedule.s.clone(),
            pcg_iterations: u.pcg_iterations,
            certificate: u.certificate,
        };
        let json = to_json(&meta)?;
        self.publish(key, |dir| {
            write_f64s(&dir.join("v.bin"), u.v.iter().flatten().copied())?;
            write_f64s(&dir.join("calh0.bin"), u.calh0.iter().copied())?;
            Ok(fs::write(dir.join("meta.json"), json)?)
        })
    }

    /// The W components; grid and schedule are taken from `u`.
    pub fn load_w(&self, key: &str, u: &USolution) -> Option<VectorWSolution> {
        let dir = self.entry(key)?;
        read_w(&dir, key, u).ok()
    }

    pub fn store_w(&self, key: &str, w: &VectorWSolution) -> Result<()> {
        let c = &w.components;
        let meta = WMeta {
            key: key.to_string(),
            limited_nodes: [0, 1, 2, 3].map(|i| c[i].limited_nodes),
            correction_iterations: [0, 1, 2, 3].map(|i| c[i].correction_iterations),
        };
        let json = to_json(&meta)?;
        self.publish(key, |dir| {
            write_f64s(&dir.join("w_tilde.bin"), c.iter().flat_map(|x| x.w_tilde.iter().flatten()).copied())?;
            write_f64s(&dir.join("terminal.bin"), c.iter().flat_map(|x| x.terminal.iter()).copied())?;
            Ok(fs::write(dir.join("meta.json"), json)?)
        })
    }

    pub fn status(&self, hit: bool) -> Status {
        match (self.root.is_some(), hit) {
            (false, _) => Status::Disabled,
            (true, true) => Status::Hit,
            (true, false) => Status::Miss,
        }
    }
}

fn read_u(dir: &Path, key: &str) -> Result<USolution> {
    let meta: UMeta = read_meta(dir)?;
    if meta.key != key {
        return Err(Error::Parse("cache key mismatch".into()));
    }
    let grid = LatLonGrid::new(meta.ntheta, meta.npsi)?;
    let n = grid.len();
    let rows = meta.r.len();
    Ok(USolution {
        grid,
        kappa: meta.kappa,
        schedule: Schedule { kappa: meta.kappa, r: meta.r, s: meta.s },
        v: split_rows(read_f64s(&dir.join("v.bin"))?, rows, n)?,
        calh0: split_rows(read_f64s(&dir.join("calh0.bin"))?, 1, n)?.remove(0),
        pcg_iterations: meta.pcg_iterations,
        certificate: meta.certificate,
    })
}

fn read_w(dir: &Path, key: &str, u: &USolution) -> Result<VectorWSolution> {
    let meta: WMeta = read_meta(dir)?;
    if meta.key != key {
        return Err(Error::Parse("cache key mismatch".into()));
    }
    let n = u.grid.len();
    let rows = u.schedule.len();
    let mut w_tilde = split_rows(read_f64s(&dir.join("w_tilde.bin"))?, 4 * rows, n)?.into_iter();
    let mut terminal = split_rows(read_f64s(&dir.join("terminal.bin"))?, 4, n)?.into_iter();
    let mut comp = |c: usize| WSolution {
        grid: u.grid,
        kappa: u.kappa,
        schedule: u.schedule.clone(),
        w_tilde: w_tilde.by_ref().take(rows).collect(),
        terminal: terminal.next().unwrap(),
        limited_nodes: meta.limited_nodes[c],
        correction_iterations: meta.correction_iterations[c],
    };
    let components = [comp(0), comp(1), comp(2), comp(3)];
    Ok(VectorWSolution { components })
}
