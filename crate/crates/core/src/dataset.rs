//! Labeled feature datasets and snapshot dumps.
//!
//! Binary dataset layout (little-endian): magic `CSILOCDS`, format version
//! (u32), feature-ordering version (u32), antenna count N (u32), feature
//! dimension M (u32), record count (u64), master seed (u64), config hash
//! (u64); then per record M feature values (f64), position x and y (f64) and
//! a split tag (u8: 0 = train, 1 = test).
//!
//! The CSV layout carries the same header as `# key=value` comment lines
//! followed by a `split,x_m,y_m,f0,…` table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::features::{feature_dim, normalize_and_vectorize, restrict_features, FeatureVector, SampleCovariance, ORDERING_VERSION};
use crate::learners::Provenance;
use crate::scene::{ArrayGeometry, ChannelSnapshot};
use crate::{Error, Position2D, Result};

const MAGIC: &[u8; 8] = b"CSILOCDS";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            _ => Err(Error::Format(format!("bad split tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Format(format!("unknown split '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    pub position: Position2D,
    pub split: Split,
}

/// Column-major sample block: one feature vector per column of `features`.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub features: DMatrix<f64>,
    pub positions: Vec<Position2D>,
}

impl Samples {
    pub fn new(features: DMatrix<f64>, positions: Vec<Position2D>) -> Result<Self> {
        if features.ncols() != positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns but {} positions",
                features.ncols(),
                positions.len()
            )));
        }
        Ok(Self { features, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    antennas: usize,
    feature_dim: usize,
    ordering_version: u32,
    provenance: Provenance,
    records: Vec<Record>,
}

impl LabeledDataset {
    pub fn new(antennas: usize, provenance: Provenance) -> Self {
        Self {
            antennas,
            feature_dim: feature_dim(antennas),
            ordering_version: ORDERING_VERSION,
            provenance,
            records: Vec::new(),
        }
    }

    pub fn from_features(antennas: usize, provenance: Provenance, features: Vec<FeatureVector>, splits: &[Split]) -> Result<Self> {
        if features.len() != splits.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature vectors but {} split tags",
                features.len(),
                splits.len()
            )));
        }
        let mut ds = Self::new(antennas, provenance);
        for (f, &split) in features.into_iter().zip(splits) {
            ds.push(Record {
                features: f.values,
                position: f.ue_position,
                split,
            })?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        if record.features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "record with {} features in a dataset of dimension {}",
                record.features.len(),
                self.feature_dim
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn ordering_version(&self) -> u32 {
        self.ordering_version
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    /// Samples of one split, or all records when `split` is `None`.
    pub fn samples(&self, split: Option<Split>) -> Samples {
        let chosen: Vec<&Record> = self
            .records
            .iter()
            .filter(|r| split.is_none_or(|s| r.split == s))
            .collect();
        let mut features = DMatrix::zeros(self.feature_dim, chosen.len());
        for (j, r) in chosen.iter().enumerate() {
            features.column_mut(j).copy_from_slice(&r.features);
        }
        Samples {
            features,
            positions: chosen.iter().map(|r| r.position).collect(),
        }
    }

    /// Concatenation with `new`; both must share the antenna count, feature
    /// dimension and ordering version. Split tags are kept as they are.
    pub fn append(&self, new: &LabeledDataset) -> Result<LabeledDataset> {
        if new.ordering_version != self.ordering_version {
            return Err(Error::VersionMismatch {
                what: "feature ordering",
                expected: self.ordering_version,
                found: new.ordering_version,
            });
        }
        if new.feature_dim != self.feature_dim || new.antennas != self.antennas {
            return Err(Error::DimensionMismatch(format!(
                "cannot append N={} (M={}) records to N={} (M={})",
                new.antennas, new.feature_dim, self.antennas, self.feature_dim
            )));
        }
        let mut out = self.clone();
        out.records.extend(new.records.iter().cloned());
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC)
            .u32(DATASET_FORMAT_VERSION)
            .u32(self.ordering_version)
            .u32(self.antennas as u32)
            .u32(self.feature_dim as u32)
            .u64(self.records.len() as u64)
            .u64(self.provenance.master_seed)
            .u64(self.provenance.config_hash);
        for r in &self.records {
            w.f64s(r.features.iter().copied())
                .f64(r.position.x)
                .f64(r.position.y)
                .u8(r.split.tag());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "dataset file");
        r.expect_magic(MAGIC)?;
        r.expect_version("dataset format", DATASET_FORMAT_VERSION)?;
        r.expect_version("feature ordering", ORDERING_VERSION)?;
        let antennas = r.u32()? as usize;
        let m = r.u32()? as usize;
        if m != feature_dim(antennas) {
            return Err(Error::Format(format!("feature dimension {m} does not match N={antennas}")));
        }
        let count = r.len(8 * (m + 2) + 1)?;
        let provenance = Provenance {
            master_seed: r.u64()?,
            config_hash: r.u64()?,
        };
        let mut ds = Self::new(antennas, provenance);
        ds.records.reserve(count);
        for _ in 0..count {
            let features = r.f64s(m)?;
            let x = r.f64()?;
            let y = r.f64()?;
            let split = Split::from_tag(r.u8()?)?;
            ds.records.push(Record {
                features,
                position: Position2D::new(x, y),
                split,
            });
        }
        r.finish()?;
        Ok(ds)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# csiloc dataset");
        let _ = writeln!(s, "# format_version={DATASET_FORMAT_VERSION}");
        let _ = writeln!(s, "# ordering_version={}", self.ordering_version);
        let _ = writeln!(s, "# antennas={}", self.antennas);
        let _ = writeln!(s, "# feature_dim={}", self.feature_dim);
        let _ = writeln!(s, "# count={}", self.records.len());
        let _ = writeln!(s, "# master_seed={}", self.provenance.master_seed);
        let _ = writeln!(s, "# config_hash={:016x}", self.provenance.config_hash);
        s.push_str("split,x_m,y_m");
        for i in 0..self.feature_dim {
            let _ = write!(s, ",f{i}");
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{},{},{}", r.split.name(), r.position.x, r.position.y);
            for v in &r.features {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.next_if(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| -> Result<&String> {
            meta.get(k).ok_or_else(|| Error::Format(format!("dataset CSV missing header key '{k}'")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse::<u64>().map_err(|e| Error::Format(format!("header key '{k}': {e}")))
        };
        let version = num("format_version")? as u32;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                what: "dataset format",
                expected: DATASET_FORMAT_VERSION,
                found: version,
            });
        }
        let ordering = num("ordering_version")? as u32;
        if ordering != ORDERING_VERSION {
            return Err(Error::VersionMismatch {
                what: "feature ordering",
                expected: ORDERING_VERSION,
                found: ordering,
            });
        }
        let antennas = num("antennas")? as usize;
        let m = num("feature_dim")? as usize;
        if m != feature_dim(antennas) {
            return Err(Error::Format(format!("feature dimension {m} does not match N={antennas}")));
        }
        let count = num("count")? as usize;
        let config_hash = u64::from_str_radix(get("config_hash")?, 16)
            .map_err(|e| Error::Format(format!("config_hash: {e}")))?;
        let provenance = Provenance {
            master_seed: num("master_seed")?,
            config_hash,
        };
        lines.next().ok_or_else(|| Error::Format("dataset CSV missing column header".into()))?;
        let mut ds = Self::new(antennas, provenance);
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut cells = line.split(',');
            let bad = |what: &str| Error::Format(format!("dataset CSV row {}: {what}", lineno + 1));
            let split: Split = cells.next().ok_or_else(|| bad("empty row"))?.parse()?;
            let vals: Vec<f64> = cells
                .map(|c| c.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
                .collect::<Result<_>>()?;
            if vals.len() != m + 2 {
                return Err(bad(&format!("expected {} numeric cells, got {}", m + 2, vals.len())));
            }
            ds.push(Record {
                features: vals[2..].to_vec(),
                position: Position2D::new(vals[0], vals[1]),
                split,
            })?;
        }
        if ds.len() != count {
            return Err(Error::Truncated(format!("dataset CSV declares {count} records, found {}", ds.len())));
        }
        Ok(ds)
    }

    /// Writes CSV when the extension is `.csv`, the binary layout otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        if is_csv(path) {
            fs::write(path, self.to_csv())?;
        } else {
            fs::write(path, self.to_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if is_csv(path) {
            Self::from_csv(&fs::read_to_string(path)?)
        } else {
            Self::from_bytes(&fs::read(path)?)
        }
    }
}

/// Window covariances with their split tags, kept so that features can be
/// rebuilt for any antenna subset.
#[derive(Clone, Debug)]
pub struct CovarianceSet {
    pub geometry: ArrayGeometry,
    pub covariances: Vec<SampleCovariance>,
    pub splits: Vec<Split>,
    pub provenance: Provenance,
}

impl CovarianceSet {
    /// Features over the full array.
    pub fn dataset(&self) -> Result<LabeledDataset> {
        let feats = self
            .covariances
            .iter()
            .map(normalize_and_vectorize)
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::from_features(self.geometry.len(), self.provenance, feats, &self.splits)
    }

    /// Features of the sub-array `indices`.
    pub fn restricted(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let feats = self
            .covariances
            .iter()
            .map(|c| normalize_and_vectorize(&restrict_features(c, indices)?))
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::from_features(indices.len(), self.provenance, feats, &self.splits)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// One snapshot per row: timestamp, position, then interleaved real and
/// imaginary parts of the N channel coefficients.
pub fn write_snapshots_csv<W: std::io::Write>(mut out: W, snapshots: &[ChannelSnapshot]) -> Result<()> {
    let n = snapshots.first().map_or(0, |s| s.h.len());
    write!(out, "timestamp_s,x_m,y_m")?;
    for k in 0..n {
        write!(out, ",re{k},im{k}")?;
    }
    writeln!(out)?;
    for s in snapshots {
        write!(out, "{},{},{}", s.timestamp_s, s.ue_position.x, s.ue_position.y)?;
        for v in s.h.iter() {
            write!(out, ",{},{}", v.re, v.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Binary snapshot stream: N (u32) then per snapshot `3 + 2N` f64 values in
/// the CSV column order.
pub fn snapshots_to_bytes(snapshots: &[ChannelSnapshot]) -> Vec<u8> {
    let n = snapshots.first().map_or(0, |s| s.h.len());
    let mut w = Writer::new();
    w.u32(n as u32);
    for s in snapshots {
        w.f64(s.timestamp_s).f64(s.ue_position.x).f64(s.ue_position.y);
        for v in s.h.iter() {
            w.f64(v.re).f64(v.im);
        }
    }
    w.finish()
}
