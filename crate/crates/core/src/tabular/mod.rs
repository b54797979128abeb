//! Dataset representation, CSV ingestion, seeded splitting, missing-value
//! profiling and synthetic data generation.

mod csv_io;
mod dataset;
mod schema;
mod split;
mod synth;

pub use csv_io::{
    apply_encoding, parse_csv, parse_csv_reader, write_csv, write_csv_writer, CsvOptions, RawTable,
};
pub use dataset::{class_name, missing_profile, Dataset, CONTENT, DISCONTENT, SYNTHETIC_ROW_BIT};
pub use schema::{ColumnKind, ColumnMeta, ItemGroup, Schema};
pub use split::{shuffle_split, train_size, SplitPair};
pub use synth::{generate_synthetic, lifewell_fixture, SynthSpec};
