use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::rng::SeedStreams;
use crate::schema::{AnswerSchema, VoteVector};

use super::galaxy::{generate_galaxy, GalaxyParams};
use super::votes::SyntheticCampaignTruth;

pub const CATALOG_FILE: &str = "catalog.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SCHEMA_FILE: &str = "schema.toml";
pub const IMAGE_DIR: &str = "images";

/// Upper bound on generated records.
pub const MAX_RECORDS: usize = 2_000_000;

const FIXED_COLUMNS: [&str; 5] = ["id", "image_path", "campaign", "split", "ring"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    Unlabelled,
    RingTrain,
    RingTest,
}

impl Split {
    pub const ALL: [Split; 6] = [
        Split::Train,
        Split::Val,
        Split::Test,
        Split::Unlabelled,
        Split::RingTrain,
        Split::RingTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unlabelled => "unlabelled",
            Split::RingTrain => "ring_train",
            Split::RingTest => "ring_test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Catalog(format!("unknown split `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GalaxyRecord {
    pub id: String,
    /// Relative to the dataset's image root.
    pub image_path: String,
    pub campaign: Option<String>,
    pub split: Split,
    pub votes: Option<VoteVector>,
    pub ring: Option<bool>,
    /// Generator truth; absent for loaded catalogs.
    pub params: Option<GalaxyParams>,
}

#[derive(Clone, Debug)]
enum ImageStore {
    /// Interleaved 8-bit RGB per record.
    Memory { size: Vec<(usize, usize)>, rgb: Vec<Vec<u8>> },
    Disk { root: PathBuf },
}

#[derive(Clone, Debug)]
pub struct Dataset {
    schema: AnswerSchema,
    records: Vec<GalaxyRecord>,
    images: ImageStore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub labelled: usize,
    pub unlabelled: usize,
    pub rings: usize,
    pub image_size: usize,
    pub votes_per_question: (u32, u32),
    /// Probability that a single ring rater answers correctly.
    pub ring_rater_accuracy: f64,
    /// Ring frequency in the pretraining pools.
    pub ring_prevalence: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            labelled: 2000,
            unlabelled: 5000,
            rings: 1000,
            image_size: 64,
            votes_per_question: (5, 40),
            ring_rater_accuracy: 0.9,
            ring_prevalence: 0.3,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let total = self.labelled + self.unlabelled + self.rings;
        if total > MAX_RECORDS {
            return Err(Error::Config(format!(
                "{total} records requested; generator capacity is {MAX_RECORDS}"
            )));
        }
        if !(8..=512).contains(&self.image_size) {
            return Err(Error::Config(format!("image size {} outside [8, 512]", self.image_size)));
        }
        if !(0.0..=1.0).contains(&self.ring_rater_accuracy) || !(0.0..=1.0).contains(&self.ring_prevalence) {
            return Err(Error::Config("ring probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    config: DatasetConfig,
    splits: BTreeMap<String, Vec<String>>,
}

/// Majority of ten raters, each right with probability `accuracy`; ties are a coin flip.
pub fn ring_label<R: Rng + ?Sized>(has_ring: bool, accuracy: f64, rng: &mut R) -> bool {
    let yes = (0..10)
        .filter(|_| (rng.random::<f64>() < accuracy) == has_ring)
        .count();
    match yes.cmp(&5) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => rng.random::<bool>(),
    }
}

fn split_sizes(n: usize) -> (usize, usize) {
    let train = (n as f64 * 0.7).round() as usize;
    let val = (n as f64 * 0.1).round() as usize;
    (train, val)
}

/// Deterministic procedural dataset.
///
/// Record order is labelled, unlabelled, rings. Labelled records alternate
/// across campaigns.
pub fn make_dataset(schema: &AnswerSchema, config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    if config.labelled > 0 && schema.campaigns().is_empty() {
        return Err(Error::Config("labelled records need at least one campaign".into()));
    }
    let streams = SeedStreams::new(seed).child("data");
    let truth = SyntheticCampaignTruth::new(schema.clone(), config.votes_per_question)?;
    let total = config.labelled + config.unlabelled + config.rings;

    enum Pool {
        Labelled(usize),
        Unlabelled,
        Ring,
    }
    let pool = |i: usize| {
        if i < config.labelled {
            Pool::Labelled(i % schema.campaigns().len().max(1))
        } else if i < config.labelled + config.unlabelled {
            Pool::Unlabelled
        } else {
            Pool::Ring
        }
    };

    let generated = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng("galaxy", 0, i as u64);
            let id = format!("g{i:07}");
            let is_ring_task = matches!(pool(i), Pool::Ring);
            let params = if is_ring_task {
                let has = rng.random::<bool>();
                GalaxyParams::sample(&mut rng, Some(has), 0.0)
            } else {
                GalaxyParams::sample(&mut rng, None, config.ring_prevalence)
            };
            let image = generate_galaxy(&params, config.image_size, &mut rng)?;
            let (campaign, votes) = match pool(i) {
                Pool::Labelled(c) => {
                    let name = schema.campaigns()[c].name.clone();
                    let rec = truth.simulate_votes(&id, &name, &params, &mut rng)?;
                    (Some(name), Some(schema.encode_votes(&rec)?))
                }
                _ => (None, None),
            };
            let ring = is_ring_task.then(|| ring_label(params.has_ring, config.ring_rater_accuracy, &mut rng));
            let record = GalaxyRecord {
                image_path: format!("{IMAGE_DIR}/{id}.png"),
                id,
                campaign,
                split: Split::Unlabelled,
                votes,
                ring,
                params: Some(params),
            };
            Ok((record, image.to_rgb8()))
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut records, rgb): (Vec<_>, Vec<_>) = generated.into_iter().unzip();

    let mut split_rng = streams.rng("split", 0, 0);
    let mut labelled: Vec<usize> = (0..config.labelled).collect();
    labelled.shuffle(&mut split_rng);
    let (n_train, n_val) = split_sizes(labelled.len());
    for (rank, &i) in labelled.iter().enumerate() {
        records[i].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    let ring_start = config.labelled + config.unlabelled;
    let mut rings: Vec<usize> = (ring_start..total).collect();
    rings.shuffle(&mut split_rng);
    let half = rings.len() / 2;
    for (rank, &i) in rings.iter().enumerate() {
        records[i].split = if rank < half { Split::RingTrain } else { Split::RingTest };
    }

    let size = vec![(config.image_size, config.image_size); total];
    Ok(Dataset {
        schema: schema.clone(),
        records,
        images: ImageStore::Memory { size, rgb },
    })
}

impl Dataset {
    pub fn schema(&self) -> &AnswerSchema {
        &self.schema
    }

    pub fn records(&self) -> &[GalaxyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices in `split`, in catalog order.
    pub fn split(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn ids(&self, split: Split) -> Vec<&str> {
        self.split(split).into_iter().map(|i| self.records[i].id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    /// Image of record `index`; disk-backed datasets read it on demand.
    pub fn image(&self, index: usize) -> Result<Image> {
        let record = &self.records[index];
        match &self.images {
            ImageStore::Memory { size, rgb } => {
                let (h, w) = size[index];
                Image::from_rgb8(h, w, &rgb[index])
            }
            ImageStore::Disk { root } => {
                let path = root.join(&record.image_path);
                Image::load_png(&path).map_err(|reason| Error::MissingImage {
                    id: record.id.clone(),
                    path,
                    reason,
                })
            }
        }
    }

    /// Reads every image into memory.
    pub fn preload(&mut self) -> Result<()> {
        if matches!(self.images, ImageStore::Memory { .. }) {
            return Ok(());
        }
        let images = (0..self.len())
            .into_par_iter()
            .map(|i| self.image(i))
            .collect::<Result<Vec<_>>>()?;
        let size = images.iter().map(|im| (im.height(), im.width())).collect();
        let rgb = images.iter().map(Image::to_rgb8).collect();
        self.images = ImageStore::Memory { size, rgb };
        Ok(())
    }

    /// Writes catalog, manifest, schema and PNG images under `dir`.
    pub fn write(&self, dir: &Path, seed: u64, config: &DatasetConfig) -> Result<()> {
        std::fs::create_dir_all(dir.join(IMAGE_DIR))?;
        (0..self.len()).into_par_iter().try_for_each(|i| {
            let path = dir.join(&self.records[i].image_path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            self.image(i)?.save_png(&path)
        })?;
        self.write_catalog(&dir.join(CATALOG_FILE))?;
        let mut splits = BTreeMap::new();
        for s in Split::ALL {
            splits.insert(
                s.as_str().to_string(),
                self.ids(s).into_iter().map(String::from).collect(),
            );
        }
        let manifest = Manifest {
            seed,
            config: config.clone(),
            splits,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Dataset(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        std::fs::write(dir.join(SCHEMA_FILE), self.schema.to_toml())?;
        Ok(())
    }

    pub fn write_catalog(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
        header.extend(self.schema.answer_ids().iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.id.clone(),
                r.image_path.clone(),
                r.campaign.clone().unwrap_or_default(),
                r.split.to_string(),
                r.ring.map(|b| u8::from(b).to_string()).unwrap_or_default(),
            ];
            let in_campaign = self.campaign_mask(r.campaign.as_deref());
            for (pos, inside) in in_campaign.iter().enumerate() {
                row.push(match &r.votes {
                    Some(v) if *inside => v.counts()[pos].to_string(),
                    _ => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn campaign_mask(&self, campaign: Option<&str>) -> Vec<bool> {
        let ci = campaign.and_then(|c| self.schema.campaign_index(c));
        (0..self.schema.answer_count())
            .map(|pos| Some(self.schema.question_of(pos).campaign) == ci)
            .collect()
    }
}

/// Reads a catalog whose image paths are relative to `image_root`.
pub fn load_catalog(catalog: &Path, image_root: &Path, schema: &AnswerSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(catalog)
        .map_err(|e| Error::Catalog(format!("{}: {e}", catalog.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Catalog(format!(
            "header must start with {}",
            FIXED_COLUMNS.join(",")
        )));
    }
    let answer_columns = &header[FIXED_COLUMNS.len()..];
    let unknown: Vec<&str> = answer_columns
        .iter()
        .filter(|c| schema.answer_position(c).is_none())
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Catalog(format!("unknown answer columns: {}", unknown.join(", "))));
    }
    let positions: Vec<usize> = answer_columns
        .iter()
        .map(|c| schema.answer_position(c).expect("checked above"))
        .collect();

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let at = |i: usize| row.get(i).unwrap_or("").trim();
        let id = at(0).to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(Error::Catalog(format!("row {}: missing or duplicate id `{id}`", line + 2)));
        }
        let campaign = Some(at(2)).filter(|c| !c.is_empty()).map(String::from);
        let ci = match &campaign {
            Some(c) => Some(
                schema
                    .campaign_index(c)
                    .ok_or_else(|| Error::Catalog(format!("galaxy `{id}`: unknown campaign `{c}`")))?,
            ),
            None => None,
        };
        let split: Split = at(3).parse()?;
        let ring = match at(4) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(Error::Catalog(format!("galaxy `{id}`: ring value `{other}`"))),
        };
        let mut counts = vec![0u32; schema.answer_count()];
        let mut any = false;
        let mut outside = Vec::new();
        for (col, &pos) in positions.iter().enumerate() {
            let cell = at(FIXED_COLUMNS.len() + col);
            if cell.is_empty() {
                continue;
            }
            let k: u32 = cell.parse().map_err(|_| {
                Error::Catalog(format!("galaxy `{id}`: count `{cell}` in `{}`", answer_columns[col]))
            })?;
            if Some(schema.question_of(pos).campaign) != ci {
                if k != 0 {
                    outside.push(answer_columns[col].as_str());
                }
                continue;
            }
            any = true;
            counts[pos] = k;
        }
        if !outside.is_empty() {
            return Err(Error::Catalog(format!(
                "galaxy `{id}`: counts outside its campaign in {}",
                outside.join(", ")
            )));
        }
        let votes = any.then(|| VoteVector::from_counts(counts, schema));
        records.push(GalaxyRecord {
            id,
            image_path: at(1).to_string(),
            campaign,
            split,
            votes,
            ring,
            params: None,
        });
    }
    Ok(Dataset {
        schema: schema.clone(),
        records,
        images: ImageStore::Disk {
            root: image_root.to_path_buf(),
        },
    })
}

/// Loads a directory written by [`Dataset::write`].
pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    let schema = AnswerSchema::load(&dir.join(SCHEMA_FILE))?;
    load_catalog(&dir.join(CATALOG_FILE), dir, &schema)
}
