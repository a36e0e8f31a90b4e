//! Procedural galaxies, simulated volunteer votes and catalog I/O.

mod dataset;
mod galaxy;
mod votes;

pub use dataset::{
    load_catalog, load_dataset_dir, make_dataset, ring_label, Dataset, DatasetConfig, GalaxyRecord, Split,
    CATALOG_FILE, IMAGE_DIR, MANIFEST_FILE, MAX_RECORDS, SCHEMA_FILE,
};
pub use galaxy::{generate_galaxy, GalaxyParams};
pub use votes::SyntheticCampaignTruth;
