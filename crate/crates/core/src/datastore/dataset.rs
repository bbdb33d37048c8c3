use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::keyvalue::{parse_key_values, write_key_values};
use crate::error::{Error, Result};
use crate::imaging::{pnm, GrayImage};
use crate::pose::Pose;

pub const INDEX_FILE: &str = "index.csv";
pub const META_FILE: &str = "meta.txt";
const INDEX_HEADER: [&str; 5] = ["filename", "timestamp_s", "x_mm", "y_mm", "z_mm"];

/// One captured frame with its ground-truth pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub pose: Pose,
    /// Capture time in seconds.
    pub timestamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub width: usize,
    pub height: usize,
    pub rate_hz: f64,
    pub seed: u64,
    /// Digest of the generator configuration, free-form.
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.samples.iter().map(|s| s.pose).collect()
    }

    /// Checks shared dimensions, finite poses, `z >= 0` and strictly
    /// increasing timestamps.
    pub fn validate(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            if s.image.width() != self.meta.width || s.image.height() != self.meta.height {
                return Err(Error::Dimension(format!(
                    "sample {i} is {}x{}, dataset is {}x{}",
                    s.image.width(),
                    s.image.height(),
                    self.meta.width,
                    self.meta.height
                )));
            }
            if !s.pose.is_finite() || s.pose.z < 0.0 {
                return Err(Error::Dataset(format!("sample {i} has invalid pose {:?}", s.pose)));
            }
            if !(s.timestamp > last) {
                return Err(Error::Dataset(format!(
                    "timestamps not strictly increasing at sample {i}"
                )));
            }
            last = s.timestamp;
        }
        Ok(())
    }
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.pgm")
}

/// Writes frames, `index.csv` and `meta.txt` into `dir` (created if needed).
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let mut index = csv::Writer::from_path(dir.join(INDEX_FILE))?;
    index.write_record(INDEX_HEADER)?;
    for (i, s) in ds.samples.iter().enumerate() {
        let name = frame_name(i);
        pnm::write_pgm(&dir.join(&name), &s.image)?;
        index.write_record([
            name,
            format!("{:.6}", s.timestamp),
            format!("{:.6}", s.pose.x),
            format!("{:.6}", s.pose.y),
            format!("{:.6}", s.pose.z),
        ])?;
    }
    index.flush()?;
    fs::write(dir.join(META_FILE), meta_text(&ds.meta, ds.len()))?;
    Ok(())
}

fn meta_text(meta: &DatasetMeta, count: usize) -> String {
    write_key_values([
        ("width", meta.width.to_string()),
        ("height", meta.height.to_string()),
        ("rate_hz", meta.rate_hz.to_string()),
        ("seed", meta.seed.to_string()),
        ("config_hash", meta.config_hash.clone()),
        ("count", count.to_string()),
    ])
}

fn parse_meta(text: &str) -> Result<(DatasetMeta, Option<usize>)> {
    let mut width = None;
    let mut height = None;
    let mut rate = None;
    let mut seed = None;
    let mut config_hash = String::new();
    let mut count = None;
    let bad = |k: &str, v: &str| Error::Format(format!("meta: bad value {v:?} for {k}"));
    for (k, v) in parse_key_values(text)? {
        match k.as_str() {
            "width" => width = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "height" => height = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "rate_hz" => rate = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "seed" => seed = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "config_hash" => config_hash = v,
            "count" => count = Some(v.parse().map_err(|_| bad(&k, &v))?),
            other => return Err(Error::Format(format!("meta: unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("meta: missing {k}"));
    Ok((
        DatasetMeta {
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            rate_hz: rate.ok_or_else(|| missing("rate_hz"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            config_hash,
        },
        count,
    ))
}

/// Loads and validates a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let index_path = dir.join(INDEX_FILE);
    if !index_path.is_file() {
        return Err(Error::MissingFile(index_path));
    }
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(Error::MissingFile(meta_path));
    }
    let (meta, count) = parse_meta(&fs::read_to_string(&meta_path)?)?;
    let mut reader = csv::Reader::from_path(&index_path)?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != INDEX_HEADER {
        return Err(Error::Format(format!("unexpected index header {header:?}")));
    }
    let mut samples = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != INDEX_HEADER.len() {
            return Err(Error::Format(format!("index row {} has {} fields", row + 1, rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| {
                Error::Format(format!("index row {}: bad number {:?}", row + 1, &rec[i]))
            })
        };
        let path = dir.join(&rec[0]);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        samples.push(Sample {
            image: pnm::read_pgm(&path)?,
            pose: Pose::new(num(2)?, num(3)?, num(4)?),
            timestamp: num(1)?,
        });
    }
    if let Some(c) = count {
        if c != samples.len() {
            return Err(Error::Dataset(format!(
                "meta declares {c} samples, index has {}",
                samples.len()
            )));
        }
    }
    let ds = Dataset { samples, meta };
    ds.validate()?;
    Ok(ds)
}

/// SHA-256 over the canonical on-disk content (meta, index rows, pixels).
pub fn dataset_hash(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(meta_text(&ds.meta, ds.len()).as_bytes());
    for s in &ds.samples {
        h.update(
            format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                s.timestamp, s.pose.x, s.pose.y, s.pose.z
            )
            .as_bytes(),
        );
        h.update(s.image.data());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Seeded random split; each part keeps the original sample order.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * n as f64).round() as usize;
    let (a, b) = idx.split_at(n_train);
    let take = |part: &[usize]| {
        let mut part = part.to_vec();
        part.sort_unstable();
        Dataset {
            samples: part.iter().map(|&i| ds.samples[i].clone()).collect(),
            meta: ds.meta.clone(),
        }
    };
    Ok((take(a), take(b)))
}
