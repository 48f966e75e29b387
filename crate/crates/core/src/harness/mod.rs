//! Data files, synthetic generators and the benchmark runner.

pub mod bench;
pub mod io;
pub mod standardize;
pub mod synth;

pub use bench::{run_benchmark, BenchConfig, BenchOutput, DataSource, Method};
pub use io::{load_dataset, read_results, write_dataset, write_results, BenchResult, Manifest};
pub use standardize::Standardizer;
pub use synth::{gen_simpsons, gen_sparse_transfer, GroundTruth, SimpsonData, SparseTransferSpec};
