//! Closed-loop datasets `{(rⁿ, uⁿ, yⁿ)}` and their on-disk form: a
//! directory with `meta.json` and one `traj_<n>.csv` per trajectory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::closed_loop::{closed_loop_run, ClosedLoopSystem};
use crate::error::{IciError, Result};
use crate::plants::NoiseSpec;
use crate::seqops::Sequence;

pub const DATASET_FORMAT: &str = "ici-dataset/1";

const EXCITATION_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Independent generator for one signal of one trajectory.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `r_t ~ N(0, σ² I)` i.i.d.
pub fn sample_excitation(seed: u64, horizon: usize, dim: usize, sigma_r: f64) -> Sequence {
    let mut r = Sequence::zeros(horizon, dim);
    if sigma_r > 0.0 {
        let mut rng = trajectory_rng(seed, EXCITATION_STREAM);
        let n = Normal::new(0.0, sigma_r).expect("validated sigma");
        for x in r.as_flat_mut() {
            *x = n.sample(&mut rng);
        }
    }
    r
}

pub fn sample_disturbance(noise: &NoiseSpec, seed: u64, horizon: usize, dim: usize) -> Sequence {
    noise.sample(horizon, dim, &mut trajectory_rng(seed, NOISE_STREAM))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub r: Sequence,
    pub u: Sequence,
    pub y: Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format: String,
    pub n_trajectories: usize,
    pub horizon: usize,
    pub u_dim: usize,
    pub y_dim: usize,
    pub sigma_r: f64,
    pub noise: NoiseSpec,
    pub base_seed: u64,
    pub trajectory_seeds: Vec<u64>,
    pub plant: String,
    pub controller: String,
}

impl DatasetMeta {
    pub fn from_json(s: &str) -> Result<Self> {
        let meta: DatasetMeta =
            serde_json::from_str(s).map_err(|e| IciError::Parse(format!("meta.json: {e}")))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(IciError::Parse(format!(
                "unknown dataset format {:?}",
                self.format
            )));
        }
        if self.n_trajectories == 0 || self.horizon == 0 || self.u_dim == 0 || self.y_dim == 0 {
            return Err(IciError::Parse("dataset sizes must be positive".into()));
        }
        if self.trajectory_seeds.len() != self.n_trajectories {
            return Err(IciError::Parse("one seed per trajectory expected".into()));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_r.is_finite()) {
            return Err(IciError::Parse(
                "sigma_r must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub trajectories: Vec<Trajectory>,
}

/// Runs `n` closed-loop trajectories of length `horizon`. Trajectory `i`
/// uses seed `base_seed + i`, so the result does not depend on scheduling.
pub fn collect_dataset(
    cl: &ClosedLoopSystem,
    n: usize,
    horizon: usize,
    sigma_r: f64,
    base_seed: u64,
) -> Result<Dataset> {
    if n == 0 || horizon == 0 {
        return Err(IciError::Config("N and T must be at least 1".into()));
    }
    if !(sigma_r >= 0.0 && sigma_r.is_finite()) {
        return Err(IciError::Config(
            "sigma_r must be finite and nonnegative".into(),
        ));
    }
    cl.noise.validate()?;
    let seeds: Vec<u64> = (0..n as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let trajectories = seeds
        .par_iter()
        .map(|&seed| {
            let mut sys = cl.clone();
            let r = sample_excitation(seed, horizon, sys.u_dim(), sigma_r);
            let v = sample_disturbance(&sys.noise, seed, horizon, sys.y_dim());
            let (u, y) = closed_loop_run(&mut sys, &r, &v)?;
            Ok(Trajectory { r, u, y })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            format: DATASET_FORMAT.into(),
            n_trajectories: n,
            horizon,
            u_dim: cl.u_dim(),
            y_dim: cl.y_dim(),
            sigma_r,
            noise: cl.noise.clone(),
            base_seed,
            trajectory_seeds: seeds,
            plant: cl.plant_id.clone(),
            controller: cl.controller_id.clone(),
        },
        trajectories,
    })
}

fn csv_header(du: usize, dy: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (name, d) in [("r", du), ("u", du), ("y", dy)] {
        h.extend((0..d).map(|i| format!("{name}[{i}]")));
    }
    h
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.y.horizon()
    }

    /// Header `t,r[0],…,u[0],…,y[0],…`; values in `{:.16e}`.
    pub fn to_csv(&self) -> String {
        let (du, dy) = (self.r.dim(), self.y.dim());
        let mut s = csv_header(du, dy).join(",");
        s.push('\n');
        for t in 0..self.horizon() {
            write!(s, "{t}").unwrap();
            for v in self
                .r
                .step(t)
                .iter()
                .chain(self.u.step(t))
                .chain(self.y.step(t))
            {
                write!(s, ",{v:.16e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, du: usize, dy: usize) -> Result<Self> {
        let bad = |m: String| IciError::Parse(format!("trajectory csv: {m}"));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let expected = csv_header(du, dy);
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let (mut r, mut u, mut y) = (Sequence::new(du), Sequence::new(du), Sequence::new(dy));
        let mut row = Vec::with_capacity(1 + 2 * du + dy);
        for (t, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            row.clear();
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("row {t}: bad number {field:?}")))?;
                row.push(v);
            }
            if row.len() != expected.len() {
                return Err(bad(format!("row {t}: {} fields", row.len())));
            }
            if row[0] != t as f64 {
                return Err(bad(format!("row {t}: time index {}", row[0])));
            }
            r.push(&row[1..1 + du])?;
            u.push(&row[1 + du..1 + 2 * du])?;
            y.push(&row[1 + 2 * du..])?;
        }
        if y.is_empty() {
            return Err(bad("no rows".into()));
        }
        Ok(Trajectory { r, u, y })
    }
}

impl Dataset {
    pub fn horizon(&self) -> usize {
        self.meta.horizon
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// File name and contents, in hashing order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        meta.push('\n');
        let mut out = vec![("meta.json".to_string(), meta)];
        for (i, tr) in self.trajectories.iter().enumerate() {
            out.push((format!("traj_{i}.csv"), tr.to_csv()));
        }
        out
    }

    /// SHA-256 over the file names and bytes of the on-disk form.
    pub fn hash(&self) -> String {
        hash_files(&self.files())
    }

    pub fn save(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir).map_err(|e| IciError::io(dir, e))?;
        let files = self.files();
        for (name, body) in &files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| IciError::io(p, e))?;
        }
        Ok(hash_files(&files))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| IciError::io(p, e))
        };
        let meta = DatasetMeta::from_json(&read("meta.json")?)?;
        let mut trajectories = Vec::with_capacity(meta.n_trajectories);
        for i in 0..meta.n_trajectories {
            let tr =
                Trajectory::from_csv(&read(&format!("traj_{i}.csv"))?, meta.u_dim, meta.y_dim)?;
            if tr.horizon() != meta.horizon {
                return Err(IciError::Parse(format!(
                    "traj_{i}.csv has {} rows, meta says {}",
                    tr.horizon(),
                    meta.horizon
                )));
            }
            trajectories.push(tr);
        }
        Ok(Dataset { meta, trajectories })
    }
}

/// Hash of a saved dataset computed from the bytes on disk; equals
/// [`Dataset::hash`] of the dataset that was saved there.
pub fn hash_dataset_dir(dir: &Path) -> Result<String> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| IciError::io(p, e))
    };
    let meta_text = read("meta.json")?;
    let meta = DatasetMeta::from_json(&meta_text)?;
    let mut files = vec![("meta.json".to_string(), meta_text)];
    for i in 0..meta.n_trajectories {
        let name = format!("traj_{i}.csv");
        let body = read(&name)?;
        files.push((name, body));
    }
    Ok(hash_files(&files))
}

fn hash_files(files: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (name, body) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}
