//! graph6 and JSON dataset formats, CSL and SR25 datasets, fixture pairs.

mod dataset;
mod generators;
mod graph6;

pub use dataset::{dataset_from_json, dataset_to_json, load_dataset_json, save_dataset_json, Dataset};
pub use generators::{
    builtin_fixture, csl_dataset, enumerate_csl_classes, generate_csl, is_strongly_regular, load_sr25, parse_sr25,
    permuted_copies, FIXTURE_NAMES,
};
pub use graph6::{parse_graph6, parse_graph6_lines, write_graph6};
