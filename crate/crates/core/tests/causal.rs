use causens_core::bayesnet::BayesNet;
use causens_core::causal::{
    apply_alteration, counterfactual_analysis, gcsp, identify_sensitivity, latent_divergence, AlterationContext,
    AlterationRule, CfTarget, CounterfactualOptions, DecisionRule, GcspCandidate, GcspOptions, IdentifyOptions,
    InterventionSpec, Split,
};
use causens_core::cvae::{CvaeArchitecture, CvaeModel, LatentBatch, LatentMode, LatentProvenance, TrainConfig};
use causens_core::data::{Dataset, TabularData};
use causens_core::ndcompute::Tensor;
use causens_core::seqdata::{c_max, generate, SyntheticScm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        batch_size: 0,
        ..Default::default()
    }
}

fn asia(n: usize, seed: u64) -> Dataset {
    BayesNet::asia().ancestral_sample(n, seed).unwrap().into()
}

#[test]
fn unused_feature_intervention_gives_exactly_zero_delta() {
    let (train, test) = (asia(600, 1), asia(300, 2));
    let arch = CvaeArchitecture::binary("dysp", &["either", "bronc"]);
    let spec = InterventionSpec::set_constant("smoke", 1, Split::Train);
    let out = identify_sensitivity(&train, &test, &arch, &config(30, 3), &spec, &IdentifyOptions::default()).unwrap();
    assert_eq!(out.verdict.delta_acc, 0.0);
    assert!(!out.verdict.is_sensitive);
    assert_eq!(out.factual.params(), out.interventional.params());
}

#[test]
fn asia_intervention_verdict_is_consistent() {
    let net = BayesNet::asia();
    let (train, test) = (asia(2000, 10), asia(1000, 11));
    let arch = CvaeArchitecture::binary("dysp", &["either", "bronc"]);
    let spec = InterventionSpec::new("either", AlterationRule::MutilateBnNode { value: 1 }, Split::Train);
    let options = IdentifyOptions {
        context: AlterationContext {
            network: Some((&net, 10)),
            ..Default::default()
        },
        ..Default::default()
    };
    let out = identify_sensitivity(&train, &test, &arch, &config(200, 0), &spec, &options).unwrap();
    let v = &out.verdict;
    assert!((v.delta_acc - (v.acc_interventional - v.acc_factual)).abs() <= 1e-12);
    assert_eq!(v.is_sensitive, v.delta_acc > 0.02);
    assert_eq!(v.conditioning_set, vec!["either", "bronc"]);
    // Identification rejects test-split specs.
    let wrong = InterventionSpec::set_constant("either", 1, Split::Test);
    assert!(identify_sensitivity(&train, &test, &arch, &config(1, 0), &wrong, &options).is_err());
}

#[test]
fn counterfactual_on_a_direct_parent_degrades_accuracy() {
    let (train, test) = (asia(3000, 20), asia(1000, 21));
    let arch = CvaeArchitecture::binary("dysp", &["either", "smoke", "bronc"]);
    let gp_f = CvaeModel::train(&train, &arch, &config(400, 0)).unwrap();
    let bronc = InterventionSpec::set_constant("bronc", 1, Split::Test);
    let out = counterfactual_analysis(&gp_f, &test, &bronc, &CounterfactualOptions::default()).unwrap();
    assert!(out.verdict.delta_acc < -0.15, "delta {}", out.verdict.delta_acc);
    assert!(out.verdict.causal_path_inferred);
    assert_eq!(out.counterfactual.latent.provenance, LatentProvenance::Counterfactual);
    assert_eq!(out.counterfactual.len(), test.len());
    assert!(out.latent_jsd >= 0.0 && out.latent_jsd <= 1.0);

    // A feature outside the conditioning set changes nothing.
    let tub = InterventionSpec::set_constant("tub", 1, Split::Test);
    let out = counterfactual_analysis(&gp_f, &test, &tub, &CounterfactualOptions::default()).unwrap();
    assert_eq!(out.verdict.delta_acc, 0.0);
    assert_eq!(out.factual.probs, out.counterfactual.probs);
    assert_eq!(out.latent_jsd, 0.0);
}

#[test]
fn counterfactual_target_modes() {
    let net = BayesNet::asia();
    let (train, test) = (asia(1000, 30), asia(500, 31));
    let arch = CvaeArchitecture::binary("dysp", &["either", "bronc"]);
    let gp_f = CvaeModel::train(&train, &arch, &config(50, 0)).unwrap();
    let spec = InterventionSpec::new("bronc", AlterationRule::MutilateBnNode { value: 1 }, Split::Test);
    let ctx = AlterationContext {
        network: Some((&net, 31)),
        ..Default::default()
    };
    let factual = CounterfactualOptions {
        context: ctx,
        ..Default::default()
    };
    let altered = CounterfactualOptions {
        target: CfTarget::Altered,
        context: ctx,
        ..Default::default()
    };
    let a = counterfactual_analysis(&gp_f, &test, &spec, &factual).unwrap();
    let b = counterfactual_analysis(&gp_f, &test, &spec, &altered).unwrap();
    assert_eq!(a.counterfactual.targets, a.factual.targets);
    assert_ne!(b.counterfactual.targets, b.factual.targets);
    // Pure function of its inputs.
    let again = counterfactual_analysis(&gp_f, &test, &spec, &factual).unwrap();
    assert_eq!(again.counterfactual, a.counterfactual);
    // The target itself cannot be altered.
    let dysp = InterventionSpec::set_constant("dysp", 1, Split::Test);
    assert!(counterfactual_analysis(&gp_f, &test, &dysp, &factual).is_err());
}

#[test]
fn planted_confounder_is_flagged_on_sequences() {
    let scm = SyntheticScm {
        seed: 3,
        ..Default::default()
    };
    let (train, test) = generate(&scm, 2000).unwrap();
    let arch = CvaeArchitecture::sequence(&["ls"], c_max(&train.targets()).unwrap(), train.max_len());
    let cfg = TrainConfig {
        epochs: 60,
        seed: 3,
        ..Default::default()
    };
    let (train, test): (Dataset, Dataset) = (train.into(), test.into());
    let ls1 = InterventionSpec::new("ls", AlterationRule::ReplaceMostFrequentWithKth { k: 3 }, Split::Train);
    let verdict = |feature: &str| {
        let options = IdentifyOptions {
            interventional_conditioning: Some(vec!["ls".into(), feature.into()]),
            ..Default::default()
        };
        identify_sensitivity(&train, &test, &arch, &cfg, &ls1, &options).unwrap().verdict
    };
    let smin = verdict("smin");
    assert!(smin.is_sensitive, "smin delta {}", smin.delta_acc);
    let ds = verdict("ds");
    assert!(!ds.is_sensitive, "ds delta {}", ds.delta_acc);
}

#[test]
fn gcsp_falls_back_to_the_baseline() {
    let (train, test) = (asia(500, 40), asia(200, 41));
    let arch = CvaeArchitecture::binary("dysp", &["bronc"]);
    let cfg = config(20, 2);
    let candidates = vec![GcspCandidate {
        feature: "either".into(),
        intervention: InterventionSpec::set_constant("either", 1, Split::Train),
    }];
    let never = GcspOptions {
        decision: DecisionRule::Margin { threshold: 1.0 },
        ks: vec![1],
        ..Default::default()
    };
    let out = gcsp(&train, &test, &arch, &cfg, &candidates, &never).unwrap();
    assert!(out.fallback);
    assert!(out.selected.is_empty());
    assert_eq!(out.conditioning_used, vec!["bronc"]);
    let baseline = CvaeModel::train(&train, &arch, &cfg).unwrap();
    let expected = baseline.predict(&test, &LatentMode::EncodeWithTarget).unwrap();
    assert_eq!(out.predictions, expected);
    assert_eq!(out.verdicts.len(), 1);

    let empty = gcsp(&train, &test, &arch, &cfg, &[], &never).unwrap();
    assert!(empty.fallback);
    assert_eq!(empty.predictions, expected);
}

fn gaussian_batch(n: usize, mean: f64, seed: u64) -> LatentBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, 1.0).unwrap();
    let z = Tensor::matrix(n, 1, (0..n).map(|_| d.sample(&mut rng)).collect()).unwrap();
    LatentBatch::new(z, LatentProvenance::Factual).unwrap()
}

#[test]
fn latent_divergence_properties() {
    let a = gaussian_batch(1000, 0.0, 1);
    let b = gaussian_batch(1000, 10.0, 2);
    assert_eq!(latent_divergence(&a, &a).unwrap(), 0.0);
    assert_eq!(latent_divergence(&a, &b).unwrap(), latent_divergence(&b, &a).unwrap());
    // Smoothing keeps small samples below 1; large ones converge to it.
    let d = latent_divergence(&a, &b).unwrap();
    assert!(d > 0.85 && d <= 1.0, "{d}");
    let big = latent_divergence(&gaussian_batch(100_000, 0.0, 3), &gaussian_batch(100_000, 10.0, 4)).unwrap();
    assert!(big > 0.99, "{big}");
    let empty = LatentBatch::zeros(0, 1);
    assert!(latent_divergence(&a, &empty).is_err());
    assert!(latent_divergence(&a, &LatentBatch::zeros(5, 2)).is_err());
}

proptest! {
    #[test]
    fn alteration_touches_only_the_target_column(
        cols in prop::collection::vec(prop::collection::vec(0u32..5, 12), 3),
        which in 0usize..3,
        rule in 0usize..3,
        value in 0u32..5,
    ) {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let data: Dataset = TabularData::new(names.clone(), cols).unwrap().into();
        let rule = match rule {
            0 => AlterationRule::SetConstant { value },
            1 => AlterationRule::ReplaceMostFrequentWithValue { value },
            _ => AlterationRule::ReplaceMostFrequentWithKth { k: 2 },
        };
        let spec = InterventionSpec::new(&names[which], rule, Split::Train);
        match apply_alteration(&data, &spec, &AlterationContext::default()) {
            Ok(out) => {
                let (a, b) = (data.as_tabular().unwrap(), out.as_tabular().unwrap());
                prop_assert_eq!(a.len(), b.len());
                for (j, n) in names.iter().enumerate() {
                    if j != which {
                        prop_assert_eq!(a.column(n), b.column(n));
                    }
                }
            }
            // Only the k-th rule can fail, and only for lack of distinct values.
            Err(_) => {
                let col = data.as_tabular().unwrap().column(&names[which]).unwrap();
                let distinct: std::collections::BTreeSet<_> = col.iter().collect();
                let is_kth = matches!(rule, AlterationRule::ReplaceMostFrequentWithKth { .. });
                prop_assert!(is_kth);
                prop_assert!(distinct.len() < 2);
            }
        }
    }
}
