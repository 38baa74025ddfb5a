//! Run configuration, binary snapshot and position formats, CSV and report output.

mod binary;
mod config;
mod text;

pub use binary::{
    decode_field, decode_positions, encode_field, encode_positions, PositionsSnapshot, FIELD_MAGIC, FORMAT_VERSION,
    POSITIONS_MAGIC,
};
pub use config::{
    ConstantsSection, MixtureSpec, ModelSection, OutputSection, ParticleSection, PdeSection, RunConfig, SweepSpec,
};
pub use text::{csv_document, parse_reports, reports_to_json};
