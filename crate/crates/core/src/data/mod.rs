//! Feature schemas, datasets, CSV ingestion, the synthetic two-domain
//! generator and chronological splitting.

mod csv_io;
mod dataset;
mod schema;
pub(crate) mod split;
mod synthetic;

pub use csv_io::{load_csv, write_csv, CsvOptions};
pub use dataset::{Dataset, Domain, Example, FieldValue};
pub use schema::{FieldKind, FieldSpec, Schema};
pub use split::{batches, chronological_split, subsample_train, Splits};
pub use synthetic::{generate_synthetic, Correspondence, SyntheticConfig, SyntheticData, World};
