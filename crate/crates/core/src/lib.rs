//! Random sample partitions (RSP) of datasets.
//!
//! A dataset is stored as a set of disjoint blocks described by a text
//! manifest. [`partitioner::two_stage_partition`] turns an ordinary
//! sequentially-chunked dataset into an RSP, whose blocks can each be used as
//! a random sample of the whole. On top of that the crate provides block-level
//! sampling without replacement ([`sampler`]), distribution comparison and
//! batchwise estimation ([`stats`]), and asymptotic ensemble learning over
//! sampled blocks ([`ensemble`]).

pub mod bench;
pub mod block_store;
pub mod ensemble;
mod error;
pub mod partitioner;
pub mod sampler;
mod seed;
pub mod stats;
pub mod synth;
pub mod verify;

pub use block_store::{create_dataset, BlockMeta, Dataset, DatasetKind, Manifest, Record, Schema};
pub use error::{Error, Result};
pub use partitioner::{two_stage_partition, PartitionOptions, PartitionParams};
pub use sampler::SamplingLedger;
pub use seed::derive_seed;

/// Runs `f` on a rayon pool with `workers` threads, or on the global pool when
/// `workers` is `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
