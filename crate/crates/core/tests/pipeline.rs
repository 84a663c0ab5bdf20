use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swn_core::distances::{log_likelihood_divergence, restricted_emd, truncated_emd};
use swn_core::eventlog::{log_language, parse_csv, parse_xes, CsvColumns};
use swn_core::net::pnml::parse_pnml;
use swn_core::net::{validate_workflow, StochasticWorkflowNet};
use swn_core::optimizer::{optimized_weights, Measure, ObjectiveSpec, OptimizerConfig};
use swn_core::semantics::{annotate, build_rg, DEFAULT_STATE_CAP};
use swn_core::simulation::sample_language;
use swn_core::unfolding::{trace_probabilities, unfold_language, LanguageBudget, PrefixIndex, UnfoldLimits};
use swn_core::fixtures;

fn data(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn load_net(name: &str) -> StochasticWorkflowNet {
    let parsed = parse_pnml(&data(name)).unwrap();
    let weights = parsed.weights_or_default();
    let wn = validate_workflow(parsed.net, parsed.source.unwrap(), parsed.sink.unwrap()).unwrap();
    StochasticWorkflowNet::new(wn, weights).unwrap()
}

#[test]
fn shipped_logs_agree_across_formats() {
    for stem in ["parallel_choice", "nested_loop"] {
        let xes = parse_xes(&data(&format!("{stem}.xes"))).unwrap();
        let csv = parse_csv(&data(&format!("{stem}.csv")), &CsvColumns::default()).unwrap();
        assert_eq!(xes, csv, "{stem}");
    }
    assert_eq!(parse_xes(&data("parallel_choice.xes")).unwrap(), fixtures::parallel_choice_log());
    assert_eq!(parse_xes(&data("nested_loop.xes")).unwrap(), fixtures::nested_loop_log());
}

#[test]
fn weighted_net_reproduces_its_log() {
    let swn = load_net("parallel_choice.pnml");
    let target = log_language(&parse_csv(&data("parallel_choice.csv"), &CsvColumns::default()).unwrap()).unwrap();
    let rg = build_rg(swn.workflow(), DEFAULT_STATE_CAP).unwrap();
    let arg = annotate(&rg, swn.weights());
    let index = PrefixIndex::from_traces(target.support());
    let probs = trace_probabilities(&arg, &index, UnfoldLimits::default());

    assert!((log_likelihood_divergence(&target, &probs) - target.entropy()).abs() < 1e-12);
    assert!(restricted_emd(&target, &probs).unwrap().value.abs() < 1e-12);
    let temd = truncated_emd(&target, &arg, LanguageBudget::with_coverage(0.8)).unwrap();
    assert!(temd.value.abs() < 1e-12);
    assert!(!temd.partial);
}

#[test]
fn uniform_nested_loop_matches_simulation() {
    let swn = load_net("nested_loop.pnml");
    let rg = build_rg(swn.workflow(), DEFAULT_STATE_CAP).unwrap();
    let arg = annotate(&rg, swn.weights());
    let language = unfold_language(&arg, LanguageBudget::with_coverage(0.99));
    assert!(language.coverage_reached);

    let runs = 200_000;
    let counts = sample_language(&swn, &mut ChaCha8Rng::seed_from_u64(11), runs, 10_000);
    assert_eq!(counts.deadlocked, 0);
    for (trace, &p) in language.language.probs().iter().filter(|(_, &p)| p > 0.01) {
        let freq = counts.completed.get(trace).copied().unwrap_or(0) as f64 / runs as f64;
        let sigma = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sigma, "{trace}: model {p}, sampled {freq}");
    }
}

#[test]
fn maximum_likelihood_on_the_nested_loop() {
    let wn = fixtures::nested_loop_net();
    let target = log_language(&fixtures::nested_loop_log()).unwrap();
    let spec = ObjectiveSpec::new(Measure::Lh, &wn, target.clone(), UnfoldLimits::default(), DEFAULT_STATE_CAP).unwrap();
    let result = optimized_weights(&spec, &OptimizerConfig { seed: 5, ..OptimizerConfig::default() }).unwrap();
    assert!(result.final_value <= result.start_value);
    assert!(result.final_value >= target.entropy() - 1e-12);

    let probs = spec.unfold(&result.weights);
    for trace in target.support() {
        assert!(probs.prob(trace) > 0.0, "{trace}");
    }
    // the language is infinite, so the log's traces cannot carry all the mass
    assert!(probs.mass() < 1.0);
}
