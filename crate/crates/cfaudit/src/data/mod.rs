//! Tabular ingestion and encoding.
//!
//! The flow is: parse a delimited file into a [`RawTable`], optionally
//! relabel categories, [`encode`] it under a [`FeatureSchema`] into a
//! [`Dataset`] (one-hot categoricals, {0,1} sensitive and target bits,
//! per-column MAD), then screen proxies with [`correlation_filter`] and
//! split with [`stratified_split`].

pub mod encode;
pub mod schema;
pub mod split;
pub mod stats;
pub mod table;

pub use encode::{column_mads, decode_row, encode, median, Dataset};
pub use schema::{
    infer_schema, EncodedColumn, EncodedLayout, FeatureBlock, FeatureKind, FeatureSchema,
    FeatureSpec, SensitiveSpec, TargetSpec,
};
pub use split::{stratified_split, Side, SplitPair};
pub use stats::{correlation_filter, ex_ante_sp, pearson};
pub use table::{condense_categories, load_csv, load_csv_from, load_csv_raw, LoadReport, ParseOptions, RawTable};
