//! Synthetic datasets for experiments and tests.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::block_store::{create_dataset, Dataset, Record, Schema};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Each class is an equal mixture of two unit-variance Gaussians whose
    /// means are drawn uniformly from `[-1.5, 1.5]^M`. Labels are uniform.
    GaussianMixture,
    /// Features uniform on `[0, 1)`, labels uniform and independent.
    Uniform,
    /// Gaussian-mixture records sorted by label, then by the first feature:
    /// the worst case for sequential chunking. Built in memory.
    SortedAdversarial,
}

impl Generator {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "gaussian_mixture" => Some(Self::GaussianMixture),
            "uniform" => Some(Self::Uniform),
            "sorted_adversarial" => Some(Self::SortedAdversarial),
            _ => None,
        }
    }
}

const COMPONENTS: usize = 2;
const MEAN_RANGE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub records: u64,
    pub features: usize,
    /// 0 produces unlabeled records.
    pub classes: u32,
    pub generator: Generator,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(records: u64, features: usize, classes: u32, generator: Generator, seed: u64) -> Self {
        Self {
            records,
            features,
            classes,
            generator,
            seed,
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::numbered(self.features, (self.classes > 0).then_some(self.classes))
    }

    fn check(&self) -> Result<()> {
        if self.records == 0 || self.features == 0 {
            return Err(Error::InvalidParams("records and features must be at least 1".into()));
        }
        Ok(())
    }

    /// Component means, indexed `[class][component][feature]`.
    fn means(&self) -> Vec<Vec<Vec<f64>>> {
        let mut rng = stream_rng(self.seed, "synth/means", 0);
        (0..self.classes.max(1))
            .map(|_| {
                (0..COMPONENTS)
                    .map(|_| {
                        (0..self.features)
                            .map(|_| rng.random_range(-MEAN_RANGE..MEAN_RANGE))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Record stream. Deterministic given the `SynthSpec`; `SortedAdversarial`
    /// materializes every record before yielding the first.
    pub fn records(&self) -> Result<Box<dyn Iterator<Item = Record>>> {
        self.check()?;
        let spec = *self;
        let mut rng = stream_rng(spec.seed, "synth/records", 0);
        match spec.generator {
            Generator::Uniform => Ok(Box::new((0..spec.records).map(move |_| {
                let features = (0..spec.features).map(|_| rng.random::<f64>()).collect();
                let label = (spec.classes > 0).then(|| rng.random_range(0..spec.classes));
                Record::new(features, label)
            }))),
            Generator::GaussianMixture => {
                let means = spec.means();
                Ok(Box::new((0..spec.records).map(move |_| {
                    let class = rng.random_range(0..spec.classes.max(1));
                    let comp = rng.random_range(0..COMPONENTS);
                    let mu = &means[class as usize][comp];
                    let features = mu
                        .iter()
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            m + z
                        })
                        .collect();
                    Record::new(features, (spec.classes > 0).then_some(class))
                })))
            }
            Generator::SortedAdversarial => {
                let mut all: Vec<Record> = SynthSpec {
                    generator: Generator::GaussianMixture,
                    ..spec
                }
                .records()?
                .collect();
                all.sort_by(|a, b| a.label.cmp(&b.label).then(a.features[0].total_cmp(&b.features[0])));
                Ok(Box::new(all.into_iter()))
            }
        }
    }

    /// Writes the records as an original dataset with `block_size`-record
    /// blocks.
    pub fn write(&self, dir: impl AsRef<Path>, block_size: usize) -> Result<Dataset> {
        create_dataset(dir, self.schema()?, self.records()?, block_size)
    }
}
