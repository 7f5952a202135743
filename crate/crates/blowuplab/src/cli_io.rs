//! Configuration parsing (flat key=value), CSV schema enforcement, run
//! manifests, and the per-directory writer lock.

use crate::exponents::ModelParams;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("output directory is locked by {0}")]
    Locked(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// 12 significant digits, scientific; parsing and re-emitting reproduces the
/// same bytes (round-trip property).
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn fmt15(x: f64) -> String {
    format!("{x:.14e}")
}

#[derive(Debug, Clone)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(IoError::Schema(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Header plus rows, every row newline-terminated.
    pub fn to_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let p = path.display().to_string();
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| IoError::Parse {
            path: p.clone(),
            line: 1,
            msg: "empty file".into(),
        })?;
        let header: Vec<String> = head.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(IoError::Parse {
                    path: p.clone(),
                    line: i + 1,
                    msg: format!("expected {} cells, got {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Csv { header, rows })
    }
}

/// Parsed flat key=value run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub eps_list: Vec<f64>,
    pub dr_list: Vec<f64>,
    pub cfl: f64,
    pub tmax: Option<f64>,
    pub threshold: f64,
    /// raw bytes of the config file, hashed into the manifest
    pub raw: Vec<u8>,
}

const KNOWN_KEYS: [&str; 13] = [
    "mu", "nu", "p", "q", "N", "R", "a", "b", "eps", "dr", "cfl", "threshold", "tmax",
];

/// Flat key=value config with # comments; unknown keys rejected with line
/// numbers; all ModelParams invariants enforced.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let raw = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&raw).into_owned();
    let p = path.display().to_string();
    let mut kv: Vec<(usize, String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Parse {
            path: p.clone(),
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let k = k.trim().to_string();
        if !KNOWN_KEYS.contains(&k.as_str()) {
            return Err(IoError::Parse {
                path: p.clone(),
                line: i + 1,
                msg: format!("unknown key {k:?}"),
            });
        }
        if kv.iter().any(|(_, ek, _)| *ek == k) {
            return Err(IoError::Parse {
                path: p.clone(),
                line: i + 1,
                msg: format!("duplicate key {k:?}"),
            });
        }
        kv.push((i + 1, k, v.trim().to_string()));
    }
    let get = |key: &str| kv.iter().find(|(_, k, _)| k == key);
    let num = |key: &str, default: Option<f64>| -> Result<f64> {
        match get(key) {
            Some((line, _, v)) => v.parse::<f64>().map_err(|_| IoError::Parse {
                path: p.clone(),
                line: *line,
                msg: format!("{key}: not a number: {v:?}"),
            }),
            None => default.ok_or_else(|| IoError::Config(format!("missing key {key:?}"))),
        }
    };
    let list = |key: &str, default: Option<Vec<f64>>| -> Result<Vec<f64>> {
        match get(key) {
            Some((line, _, v)) => v
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| IoError::Parse {
                        path: p.clone(),
                        line: *line,
                        msg: format!("{key}: not a number: {tok:?}"),
                    })
                })
                .collect(),
            None => default.ok_or_else(|| IoError::Config(format!("missing key {key:?}"))),
        }
    };
    let eps_list = list("eps", None)?;
    let dr_list = list("dr", Some(vec![0.01, 0.005]))?;
    let dim = num("N", None)?;
    if dim < 1.0 || dim.fract() != 0.0 {
        return Err(IoError::Config(format!("N must be a positive integer, got {dim}")));
    }
    let int01 = |key: &str, default: f64| -> Result<u8> {
        let v = num(key, Some(default))?;
        if v == 0.0 || v == 1.0 {
            Ok(v as u8)
        } else {
            Err(IoError::Config(format!("{key} must be 0 or 1, got {v}")))
        }
    };
    let params = ModelParams {
        mu: num("mu", None)?,
        nu: num("nu", None)?,
        p: num("p", None)?,
        q: num("q", None)?,
        dim: dim as u32,
        radius: num("R", Some(1.0))?,
        a: int01("a", 1.0)?,
        b: int01("b", 0.0)?,
        eps: eps_list[0],
    };
    params.validate().map_err(|e| IoError::Config(e.to_string()))?;
    Ok(RunConfig {
        params,
        eps_list,
        dr_list,
        cfl: num("cfl", Some(crate::wavesolver::DEFAULT_CFL))?,
        tmax: get("tmax").map(|_| num("tmax", None)).transpose()?,
        threshold: num("threshold", Some(crate::wavesolver::DEFAULT_THRESHOLD))?,
        raw,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub params: Vec<(String, String)>,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub outputs: Vec<String>,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            params: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now_unix(),
            finished_unix: 0,
            config_sha256: None,
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// key=value lines, one output per `output=` line.
    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = now_unix();
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "tool_version={}", self.tool_version);
        let _ = writeln!(s, "started_unix={}", self.started_unix);
        let _ = writeln!(s, "finished_unix={}", self.finished_unix);
        let _ = writeln!(s, "seed={}", self.seed);
        if let Some(h) = &self.config_sha256 {
            let _ = writeln!(s, "config_sha256={h}");
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k}={v}");
        }
        for o in &self.outputs {
            let _ = writeln!(s, "output={o}");
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Exclusive writer lock on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".blowuplab.lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "pid={}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(IoError::Locked(path.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("blowuplab-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let d = tmpdir("csv");
        let mut csv = Csv::new(&["t", "value"]);
        for i in 0..10 {
            let t = i as f64 * 0.1;
            csv.push(vec![fmt12(t), fmt12((t * 1.7).sin() * 1e-5)]).unwrap();
        }
        let p = d.join("a.csv");
        csv.write(&p).unwrap();
        let bytes1 = std::fs::read(&p).unwrap();
        let back = Csv::read(&p).unwrap();
        // re-parse every numeric cell and re-emit
        let mut again = Csv::new(&["t", "value"]);
        for row in &back.rows {
            again
                .push(row.iter().map(|c| fmt12(c.parse::<f64>().unwrap())).collect())
                .unwrap();
        }
        let p2 = d.join("b.csv");
        again.write(&p2).unwrap();
        assert_eq!(bytes1, std::fs::read(&p2).unwrap());
        assert!(String::from_utf8(bytes1).unwrap().ends_with('\n'));
    }

    #[test]
    fn csv_schema_enforced() {
        let mut csv = Csv::new(&["a", "b"]);
        assert!(csv.push(vec!["1".into()]).is_err());
        assert!(csv.push(vec!["1".into(), "2".into(), "3".into()]).is_err());
        // empty rows produce a header-only file
        let d = tmpdir("schema");
        let p = d.join("empty.csv");
        csv.write(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n");
    }

    #[test]
    fn config_parsing_and_rejection() {
        let d = tmpdir("cfg");
        let ok = d.join("plan.cfg");
        std::fs::write(
            &ok,
            "mu=2\nnu=0.4\np=1.5\nq=2\nN=1\nR=1\na=1\nb=0\neps=0.4,0.28,0.2\ndr=0.02,0.01\ncfl=0.45\nthreshold=1e8\n",
        )
        .unwrap();
        let cfg = parse_config(&ok).unwrap();
        assert_eq!(cfg.eps_list, vec![0.4, 0.28, 0.2]);
        assert_eq!(cfg.dr_list, vec![0.02, 0.01]);
        assert_eq!(cfg.params.dim, 1);

        let unknown = d.join("unknown.cfg");
        std::fs::write(&unknown, "mu=2\nbogus=1\n").unwrap();
        let err = parse_config(&unknown).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("bogus"), "{err}");

        // p = 1 violates the hypothesis p > 1
        let bad_p = d.join("badp.cfg");
        std::fs::write(&bad_p, "mu=2\nnu=0\np=1\nq=2\nN=1\neps=0.1\n").unwrap();
        let err = parse_config(&bad_p).unwrap_err().to_string();
        assert!(err.contains("p, q must be > 1"), "{err}");

        // Sobolev cap 2N/(N-2) for N = 3: q = 5 accepted, q = 7 rejected
        let q5 = d.join("q5.cfg");
        std::fs::write(&q5, "mu=2\nnu=0\np=2\nq=5\nN=3\neps=0.1\n").unwrap();
        assert!(parse_config(&q5).is_ok());
        let q7 = d.join("q7.cfg");
        std::fs::write(&q7, "mu=2\nnu=0\np=2\nq=7\nN=3\neps=0.1\n").unwrap();
        let err = parse_config(&q7).unwrap_err().to_string();
        assert!(err.contains("2N/(N-2)"), "{err}");
    }

    #[test]
    fn manifest_lists_outputs_and_hash() {
        let d = tmpdir("manifest");
        let mut m = RunManifest::new("sweep", 42);
        m.config_sha256 = Some(sha256_hex(b"mu=2\n"));
        m.param("mu", 2.0);
        let out = d.join("sweep.csv");
        std::fs::write(&out, "eps,T_est\n").unwrap();
        m.output(&out);
        let mp = d.join("manifest.txt");
        m.write(&mp).unwrap();
        let text = std::fs::read_to_string(&mp).unwrap();
        assert!(text.contains("command=sweep"));
        assert!(text.contains("seed=42"));
        assert!(text.contains(&format!("output={}", out.display())));
        assert!(text.contains("config_sha256="));
        // hash matches the config bytes
        assert!(text.contains(&sha256_hex(b"mu=2\n")));
    }

    #[test]
    fn dir_lock_excludes_second_writer() {
        let d = tmpdir("lock");
        let l1 = DirLock::acquire(&d).unwrap();
        assert!(matches!(DirLock::acquire(&d), Err(IoError::Locked(_))));
        drop(l1);
        let l2 = DirLock::acquire(&d);
        assert!(l2.is_ok());
    }

    #[test]
    fn fmt12_round_trip() {
        for &x in &[0.0, 1.0, -3.25e-17, 9.999999999995e11, std::f64::consts::PI] {
            let s = fmt12(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(s, fmt12(y));
            assert!((x - y).abs() <= 5e-12 * x.abs());
        }
    }
}
