use super::*;
use crate::dag::enumerate_dags;
use crate::design::utility;

fn fig2(strategy: Strategy, steps: usize, seed: u64) -> EpisodeConfig {
    let mut c = EpisodeConfig::new(GroundTruthScm::bivariate_tanh(0.1f64.sqrt()).unwrap(), 5, steps);
    c.strategy = strategy;
    c.seed = seed;
    c.design.mc_samples = 8;
    c.design.bo_budget = 4;
    c
}

#[test]
fn metrics_examples() {
    let u = enumerate_dags(2).unwrap();
    let truth = &u[2];
    let m = metrics(&[0.0, 0.0, 1.0], truth, &u).unwrap();
    assert_eq!((m.p_true, m.entropy, m.expected_shd), (1.0, 0.0, 0.0));
    let third = 1.0 / 3.0;
    let m = metrics(&[third; 3], truth, &u).unwrap();
    assert_eq!(m.p_true, third);
    // empty graph: one missing edge; reversal: one pair differs
    assert!((m.expected_shd - 2.0 / 3.0).abs() < 1e-15);
    assert!((m.entropy - 3f64.ln()).abs() < 1e-15);
    let other = Dag::empty(3);
    assert!(matches!(metrics(&[third; 3], &other, &u), Err(Error::GraphNotInUniverse)));
}

#[test]
fn strategy_names() {
    for s in Strategy::ALL {
        assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
    }
    let e = "greedy".parse::<Strategy>().unwrap_err().to_string();
    assert!(e.contains("bo, random, round_robin, grid_eig"), "{e}");
}

#[test]
fn round_robin_alternates_targets() {
    let ep = run_episode(&EpisodeConfig { confidence_stop: 1.0, ..fig2(Strategy::RoundRobin, 6, 3) }).unwrap();
    let targets: Vec<usize> = ep.steps.iter().map(|s| s.chosen.target().unwrap()).collect();
    assert_eq!(targets, vec![0, 1, 0, 1, 0, 1]);
    assert!(ep.steps.iter().all(|s| s.eig.is_none()));
}

#[test]
fn random_stays_in_domain() {
    let ep = run_episode(&EpisodeConfig { confidence_stop: 1.0, ..fig2(Strategy::Random, 8, 1) }).unwrap();
    let b0 = BeliefState::initialize(&ep.initial.observations, &BeliefConfig::default()).unwrap().0;
    for s in &ep.steps {
        let iv = s.chosen.get().unwrap();
        assert!(ep.belief.d() > iv.target);
        let dom = DesignConfig::default().domain(iv.target, &b0).unwrap();
        assert!(dom.contains(iv.value));
        assert_eq!(s.outcome.values[iv.target], iv.value);
    }
}

#[test]
fn step_bounds() {
    assert!(matches!(run_episode(&fig2(Strategy::Random, 0, 0)), Err(Error::InvalidEpisode(_))));
    let ep = run_episode(&EpisodeConfig { confidence_stop: 1.0, ..fig2(Strategy::Bo, 1, 0) }).unwrap();
    assert_eq!(ep.steps.len(), 1);
    assert_eq!(ep.diagnostics[0].len(), 8);
    assert!(ep.steps[0].eig.is_some());
}

#[test]
fn recorded_entropy_matches_recorded_posterior() {
    let ep = run_episode(&fig2(Strategy::Bo, 4, 2)).unwrap();
    for s in &ep.steps {
        let logs: Vec<f64> = s.posterior.iter().map(|p| p.ln()).collect();
        assert!((s.entropy + utility(&logs).unwrap()).abs() < 1e-12);
        assert!((s.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nothing_is_recorded_after_stopping() {
    let c = EpisodeConfig { confidence_stop: 0.6, ..fig2(Strategy::RoundRobin, 30, 4) };
    let ep = run_episode(&c).unwrap();
    let first = ep.steps.iter().position(|s| s.posterior.iter().cloned().fold(0.0, f64::max) >= 0.6);
    match first {
        Some(k) => assert_eq!(k + 1, ep.steps.len()),
        None => assert!(ep.steps.len() == 30 || max_prob(&ep.initial.posterior) >= 0.6),
    }
    assert_eq!(ep.converged, ep.steps.len() < 30);
}

#[test]
fn traces_are_reproducible() {
    let c = fig2(Strategy::Bo, 3, 9);
    let dump = |ep: &Episode| {
        let mut t = Vec::new();
        write_trace_jsonl(&mut t, &ep.steps).unwrap();
        let mut s = Vec::new();
        write_summary_csv(&mut s, ep).unwrap();
        (t, s)
    };
    let a = dump(&run_episode(&c).unwrap());
    let b = dump(&run_episode(&c).unwrap());
    assert_eq!(a, b);
    let back = read_trace_jsonl(&a.0[..]).unwrap();
    assert_eq!(back, run_episode(&c).unwrap().steps);
    let csv = String::from_utf8(a.1).unwrap();
    assert!(csv.starts_with(SUMMARY_HEADER));
    assert_eq!(csv.lines().count(), 2 + back.len());
}

#[test]
fn initialization_failure_reports_step_minus_one() {
    let mut oracle = ExternalOracle::new(2, |_| Err(Error::Io("instrument offline".into())));
    let c = EpisodeConfig { scm: None, ..fig2(Strategy::Random, 2, 0) };
    match run_episode_with(&c, &mut oracle) {
        Err(Error::Initialization { step: -1, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(run_episode(&c).is_err());
}

#[test]
fn external_oracle_has_no_truth_metrics() {
    let scm = GroundTruthScm::bivariate_tanh(0.3).unwrap();
    let mut k = 0;
    let mut oracle = ExternalOracle::new(2, |spec| {
        k += 1;
        sample_truth(&scm, spec, 1000 + k)
    });
    let c = EpisodeConfig { scm: None, confidence_stop: 1.0, ..fig2(Strategy::RoundRobin, 3, 0) };
    let ep = run_episode_with(&c, &mut oracle).unwrap();
    assert_eq!(ep.steps.len(), 3);
    assert!(ep.steps.iter().all(|s| s.p_true.is_none() && s.expected_shd.is_none()));
    assert!(ep.initial.p_true.is_none());
}

#[test]
fn extra_outcomes_per_step() {
    let c = EpisodeConfig { samples_per_step: 3, confidence_stop: 1.0, ..fig2(Strategy::RoundRobin, 2, 0) };
    let ep = run_episode(&c).unwrap();
    assert!(ep.steps.iter().all(|s| s.extra_outcomes.len() == 2));
    assert_eq!(ep.belief.data().len(), 5 + 6);
}

#[test]
fn config_json_defaults() {
    let c: EpisodeConfig = serde_json::from_str(r#"{"n_obs": 5, "max_steps": 3}"#).unwrap();
    assert_eq!(c.confidence_stop, 0.99);
    assert_eq!(c.strategy, Strategy::Bo);
    assert_eq!(c.samples_per_step, 1);
    assert!(c.scm.is_none());
    assert!(EpisodeConfig { n_obs: 2, ..c }.validate().is_err());
}

#[test]
fn sweep_matches_individual_runs() {
    let c = fig2(Strategy::RoundRobin, 3, 0);
    let eps = sweep(&c, &[5, 6]);
    let solo = run_episode(&EpisodeConfig { seed: 6, ..c }).unwrap();
    assert_eq!(eps[1].as_ref().unwrap().steps, solo.steps);
}
