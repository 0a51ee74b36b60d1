//! Reproducible RGB/depth dataset manifests.
//!
//! Sampling uses a [`SplitMix64`] stream driving a partial Fisher–Yates
//! shuffle, so a `(sources, counts, seed)` triple always yields the same
//! manifest bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthio::load_depth;
use crate::rng::SplitMix64;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("capacity error: requested {requested} {tag} entries but only {available} available")]
    Capacity {
        tag: SourceTag,
        requested: usize,
        available: usize,
    },
    #[error("conflict error: duplicate entry id {0:?}")]
    Conflict(String),
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Origin of a sample. Declaration order is the concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Nyu,
    Ue,
    Gan,
    Other,
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceTag::Nyu => "nyu",
            SourceTag::Ue => "ue",
            SourceTag::Gan => "gan",
            SourceTag::Other => "other",
        })
    }
}

impl FromStr for SourceTag {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nyu" => Ok(SourceTag::Nyu),
            "ue" => Ok(SourceTag::Ue),
            "gan" => Ok(SourceTag::Gan),
            "other" => Ok(SourceTag::Other),
            _ => Err(DatasetError::Invalid(format!("unknown source tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub rgb: String,
    pub depth: String,
    pub tag: SourceTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawManifest")]
pub struct DatasetManifest {
    pub seed: u64,
    pub created_from: String,
    pub entries: Vec<DatasetEntry>,
}

#[derive(Deserialize)]
struct RawManifest {
    seed: u64,
    created_from: String,
    entries: Vec<DatasetEntry>,
}

impl TryFrom<RawManifest> for DatasetManifest {
    type Error = DatasetError;

    fn try_from(raw: RawManifest) -> Result<Self, Self::Error> {
        DatasetManifest::new(raw.seed, raw.created_from, raw.entries)
    }
}

impl DatasetManifest {
    pub fn new(
        seed: u64,
        created_from: String,
        entries: Vec<DatasetEntry>,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.rgb.is_empty() || e.depth.is_empty() {
                return Err(DatasetError::Invalid(format!(
                    "entry {:?} has an empty path",
                    e.id
                )));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(DatasetError::Conflict(e.id.clone()));
            }
        }
        Ok(Self {
            seed,
            created_from,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pretty JSON with lexicographically sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        // serde_json's Value map is a BTreeMap, which sorts keys
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Invalid(e.to_string()))
    }
}

/// Draws `counts[tag]` entries without replacement from each tag's pool and
/// concatenates them in tag order. Sources sharing a tag are pooled in the
/// order given; each sampled entry is stamped with its source tag.
pub fn compose_manifest(
    sources: &[(SourceTag, Vec<DatasetEntry>)],
    counts: &BTreeMap<SourceTag, usize>,
    seed: u64,
    created_from: &str,
) -> Result<DatasetManifest, DatasetError> {
    let mut seen = HashSet::new();
    let mut pools: BTreeMap<SourceTag, Vec<&DatasetEntry>> = BTreeMap::new();
    for (tag, entries) in sources {
        for e in entries {
            if !seen.insert(e.id.as_str()) {
                return Err(DatasetError::Conflict(e.id.clone()));
            }
            pools.entry(*tag).or_default().push(e);
        }
    }

    let mut rng = SplitMix64::new(seed);
    let mut picked = Vec::new();
    for (&tag, &requested) in counts {
        let pool = pools.get(&tag).map(Vec::as_slice).unwrap_or(&[]);
        if requested > pool.len() {
            return Err(DatasetError::Capacity {
                tag,
                requested,
                available: pool.len(),
            });
        }
        for i in partial_shuffle(&mut rng, pool.len(), requested) {
            picked.push(DatasetEntry {
                tag,
                ..pool[i].clone()
            });
        }
    }
    DatasetManifest::new(seed, created_from.to_string(), picked)
}

/// First `k` positions of a Fisher–Yates shuffle of `0..n`.
fn partial_shuffle(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Splits into `(train, validation)` with `round(val_fraction · n)`
/// validation entries. Both halves keep the input's relative order.
pub fn split_manifest(
    m: &DatasetManifest,
    val_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest), DatasetError> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(DatasetError::Invalid(format!(
            "validation fraction {val_fraction} must lie in [0, 1)"
        )));
    }
    let n = m.entries.len();
    let k = (val_fraction * n as f64).round() as usize;
    let mut rng = SplitMix64::new(seed);
    let mut is_val = vec![false; n];
    for i in partial_shuffle(&mut rng, n, k) {
        is_val[i] = true;
    }
    let (val, train): (Vec<_>, Vec<_>) =
        m.entries.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    let note = |part: &str| {
        format!(
            "{} | {part} split (fraction {val_fraction}, seed {seed})",
            m.created_from
        )
    };
    Ok((
        DatasetManifest::new(
            m.seed,
            note("train"),
            train.into_iter().map(|(e, _)| e).collect(),
        )?,
        DatasetManifest::new(
            m.seed,
            note("validation"),
            val.into_iter().map(|(e, _)| e).collect(),
        )?,
    ))
}

/// Lists `dir/rgb/*` and `dir/depth/*`, pairing files by stem. Ids are
/// `"<tag>/<stem>"`; stems present on only one side are returned separately.
pub fn scan_source_dir(
    tag: SourceTag,
    dir: &Path,
) -> Result<(Vec<DatasetEntry>, Vec<String>), DatasetError> {
    let list = |sub: &str| -> Result<BTreeMap<String, String>, DatasetError> {
        let mut out = BTreeMap::new();
        for entry in std::fs::read_dir(dir.join(sub))? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.to_string_lossy().into_owned());
            }
        }
        Ok(out)
    };
    let rgb = list("rgb")?;
    let mut depth = list("depth")?;
    let mut entries = Vec::new();
    let mut unmatched = Vec::new();
    for (stem, rgb_path) in rgb {
        match depth.remove(&stem) {
            Some(depth_path) => entries.push(DatasetEntry {
                id: format!("{tag}/{stem}"),
                rgb: rgb_path,
                depth: depth_path,
                tag,
            }),
            None => unmatched.push(rgb_path),
        }
    }
    unmatched.extend(depth.into_values());
    Ok((entries, unmatched))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Missing,
    Unreadable {
        message: String,
    },
    Dimensions {
        expected: Dimensions,
        actual: Dimensions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryIssue {
    pub id: String,
    pub path: String,
    pub problem: Problem,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub issues: Vec<EntryIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

fn check_file(
    id: &str,
    path: &str,
    dims: impl FnOnce(&Path) -> Result<Dimensions, String>,
    expected: Option<Dimensions>,
) -> Option<EntryIssue> {
    let issue = |problem| {
        Some(EntryIssue {
            id: id.to_string(),
            path: path.to_string(),
            problem,
        })
    };
    let p = Path::new(path);
    if !p.is_file() {
        return issue(Problem::Missing);
    }
    match dims(p) {
        Err(message) => issue(Problem::Unreadable { message }),
        Ok(actual) => match expected {
            Some(expected) if expected != actual => issue(Problem::Dimensions { expected, actual }),
            _ => None,
        },
    }
}

/// Checks every entry's files for existence, parseability and (optionally)
/// size. Problems are collected, never raised; the report is in entry order.
pub fn validate_manifest(m: &DatasetManifest, expected: Option<Dimensions>) -> ValidationReport {
    let issues = m
        .entries
        .par_iter()
        .map(|e| {
            let rgb = check_file(
                &e.id,
                &e.rgb,
                |p| {
                    image::image_dimensions(p)
                        .map(|(width, height)| Dimensions { width, height })
                        .map_err(|err| err.to_string())
                },
                expected,
            );
            let depth = check_file(
                &e.id,
                &e.depth,
                |p| {
                    load_depth(p)
                        .map(|d| Dimensions {
                            width: d.value.width() as u32,
                            height: d.value.height() as u32,
                        })
                        .map_err(|err| err.to_string())
                },
                expected,
            );
            [rgb, depth]
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .flatten()
        .collect();
    ValidationReport {
        checked: m.entries.len(),
        issues,
    }
}
