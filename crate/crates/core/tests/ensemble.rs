use proptest::prelude::*;
use rsp_core::ensemble::{run_asymptotic, train_base, DecisionTree, Ensemble, LearnerConfig, TreeParams};
use rsp_core::synth::{Generator, SynthSpec};
use rsp_core::{two_stage_partition, Dataset, Error, PartitionParams, Record, SamplingLedger, Schema};

fn rec(x: &[f64], y: u32) -> Record {
    Record::new(x.to_vec(), Some(y))
}

fn xor8() -> Vec<Record> {
    [
        ([0.0, 0.0], 0),
        ([0.0, 1.0], 1),
        ([1.0, 0.0], 1),
        ([1.0, 1.0], 0),
    ]
    .iter()
    .cycle()
    .take(8)
    .map(|(x, y)| rec(x, *y))
    .collect()
}

fn accuracy(t: &DecisionTree, data: &[Record]) -> f64 {
    data.iter().filter(|r| Some(t.predict(&r.features)) == r.label).count() as f64 / data.len() as f64
}

/// Best training accuracy over every axis-aligned stump with majority leaves.
fn best_stump_accuracy(data: &[Record]) -> f64 {
    let mut best: f64 = 0.0;
    for f in 0..data[0].features.len() {
        for cut in data.iter().map(|r| r.features[f]) {
            let mut counts = [[0usize; 2]; 2];
            for r in data {
                counts[usize::from(r.features[f] > cut)][r.label.unwrap() as usize] += 1;
            }
            let correct: usize = counts.iter().map(|c| c[0].max(c[1])).sum();
            best = best.max(correct as f64 / data.len() as f64);
        }
    }
    best
}

#[test]
fn xor_needs_two_levels() {
    let data = xor8();
    let oracle = best_stump_accuracy(&data);
    assert!(oracle <= 0.75);
    let stump = DecisionTree::fit(&data, &[0, 1], TreeParams { max_depth: 1, min_leaf: 1 });
    assert!(accuracy(&stump, &data) <= oracle);
    let tree = DecisionTree::fit(&data, &[0, 1], TreeParams { max_depth: 2, min_leaf: 1 });
    assert_eq!(accuracy(&tree, &data), 1.0);
    assert!(tree.depth() <= 2);
}

/// Model `m` predicts class 1 exactly when feature `m` is set.
fn indicator_model(m: usize, schema: &Schema) -> rsp_core::ensemble::BaseModel {
    let train: Vec<Record> = (0..2)
        .map(|v| {
            let mut x = vec![0.5; 3];
            x[m] = f64::from(v);
            rec(&x, v as u32)
        })
        .collect();
    train_base(&train, schema, &LearnerConfig::tree(1, 1), m as u32 + 1).unwrap()
}

#[test]
fn three_independent_voters_at_eighty_percent() {
    let schema = Schema::numbered(3, Some(2)).unwrap();
    let members: Vec<_> = (0..3).map(|m| indicator_model(m, &schema)).collect();
    // Every correctness pattern appears in proportion p^k (1-p)^(3-k), p = 4/5.
    let mut test = Vec::new();
    for pattern in 0..8u32 {
        let correct = pattern.count_ones();
        let copies = 4u32.pow(correct);
        let x: Vec<f64> = (0..3).map(|m| f64::from((pattern >> m) & 1)).collect();
        for _ in 0..copies {
            test.push(rec(&x, 1));
        }
    }
    assert_eq!(test.len(), 125);
    for m in &members {
        let single = Ensemble::from_members(&schema, vec![m.clone()]).unwrap();
        assert!((single.evaluate(&test).unwrap() - 0.8).abs() < 1e-12);
    }
    let p: f64 = 0.8;
    let analytic = 3.0 * p * p * (1.0 - p) + p.powi(3);
    let ens = Ensemble::from_members(&schema, members).unwrap();
    assert!((ens.evaluate(&test).unwrap() - analytic).abs() < 1e-12);
    assert!((analytic - 0.896).abs() < 1e-12);
}

fn rsp_dataset(dir: &std::path::Path, generator: Generator, k: usize) -> (Dataset, Vec<Record>) {
    let spec = SynthSpec::new((k * 200 + 2000) as u64, 3, 2, generator, 4);
    let mut all: Vec<Record> = spec.records().unwrap().collect();
    let test = all.split_off(k * 200);
    let src = rsp_core::create_dataset(dir.join("o"), spec.schema().unwrap(), all, 200).unwrap();
    let rsp = two_stage_partition(&src, &PartitionParams::even(k, k, 200 / k, 1), dir.join("r"), &Default::default())
        .unwrap();
    (rsp, test)
}

#[test]
fn stopping_rule_and_exhaustion() {
    let dir = tempfile::tempdir().unwrap();
    let (rsp, test) = rsp_dataset(dir.path(), Generator::GaussianMixture, 10);
    let config = LearnerConfig::tree(4, 1);

    let mut ledger = SamplingLedger::for_dataset(&rsp, 1, "a");
    let one = run_asymptotic(&rsp, &mut ledger, &config, 3, 1.0, &test).unwrap();
    assert_eq!(one.trajectory.len(), 1);
    assert_eq!(one.members.len(), 3);
    assert_eq!(ledger.remaining(), 7);

    let mut ledger = SamplingLedger::for_dataset(&rsp, 1, "a");
    let all = run_asymptotic(&rsp, &mut ledger, &config, 3, -1.0, &test).unwrap();
    assert_eq!(all.trajectory.len(), 4);
    assert_eq!(
        all.trajectory.iter().map(|b| b.blocks_used).collect::<Vec<_>>(),
        vec![3, 6, 9, 10]
    );
    assert!((all.trajectory[3].percent_data - 100.0).abs() < 1e-9);
    assert_eq!(ledger.remaining(), 0);
    // Members are only appended: the first batch is a prefix of the full run.
    assert_eq!(all.members[..3], one.members[..]);
    assert!((all.evaluate(&test).unwrap() - all.trajectory[3].accuracy).abs() < 1e-12);
    let mut ids: Vec<u32> = all.members.iter().map(|m| m.source_block_id).collect();
    ids.sort_unstable();
    assert_eq!(ids, (1..=10).collect::<Vec<_>>());
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (rsp, test) = rsp_dataset(dir.path(), Generator::GaussianMixture, 10);
    let run = || {
        let mut ledger = SamplingLedger::for_dataset(&rsp, 7, "a");
        run_asymptotic(&rsp, &mut ledger, &LearnerConfig::tree(5, 2), 2, -1.0, &test).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.members, b.members);
    let strip = |e: &Ensemble| e.trajectory.iter().map(|t| (t.blocks_used, t.accuracy)).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn label_free_features_give_chance_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let (rsp, test) = rsp_dataset(dir.path(), Generator::Uniform, 10);
    let mut ledger = SamplingLedger::for_dataset(&rsp, 2, "a");
    let e = run_asymptotic(&rsp, &mut ledger, &LearnerConfig::tree(3, 5), 5, -1.0, &test).unwrap();
    let acc = e.trajectory.last().unwrap().accuracy;
    // 2000 test records: 4 binomial standard deviations around 0.5.
    assert!((acc - 0.5).abs() < 4.0 * (0.25f64 / 2000.0).sqrt(), "{acc}");
}

#[test]
fn run_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let (rsp, test) = rsp_dataset(dir.path(), Generator::GaussianMixture, 4);
    let config = LearnerConfig::tree(3, 1);
    let mut ledger = SamplingLedger::for_dataset(&rsp, 1, "a");
    assert!(run_asymptotic(&rsp, &mut ledger, &config, 0, 0.0, &test).is_err());
    assert!(run_asymptotic(&rsp, &mut ledger, &config, 2, 0.0, &[]).is_err());
    let unlabeled = vec![Record::new(vec![0.0; 3], None)];
    assert!(matches!(run_asymptotic(&rsp, &mut ledger, &config, 2, 0.0, &unlabeled), Err(Error::Unlabeled)));
    let original = Dataset::open(dir.path().join("o")).unwrap();
    let mut other = SamplingLedger::for_dataset(&original, 1, "a");
    assert!(run_asymptotic(&original, &mut other, &config, 2, 0.0, &test).is_err());
    let mut stale = SamplingLedger::new("not-this-manifest", 4, 1, "a");
    assert!(run_asymptotic(&rsp, &mut stale, &config, 2, 0.0, &test).is_err());
    assert_eq!(ledger.remaining(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trees_stay_within_depth(
        points in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 2), 0u32..3), 1..60),
        depth in 1usize..6,
        min_leaf in 1usize..4,
    ) {
        let data: Vec<Record> = points.into_iter().map(|(x, y)| Record::new(x, Some(y))).collect();
        let t = DecisionTree::fit(&data, &[0, 1, 2], TreeParams { max_depth: depth, min_leaf });
        prop_assert!(t.is_well_formed(2));
        prop_assert!(t.depth() <= depth);
        for r in &data {
            let proba = t.predict_proba(&r.features);
            prop_assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!([0, 1, 2].contains(&t.predict(&r.features)));
        }
    }
}
