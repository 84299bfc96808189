use tracecast::classifier::{NetConfig, TraceClassifier};
use tracecast::features::{build_dataset, DatasetConfig};
use tracecast::ldp::{
    episode_seed, run_episode, run_experiment, truncate_record, LdpConfig, Predictor, Terminal, Workbench,
};
use tracecast::planner::Strategy;
use tracecast::synth::{generate_corpus, inject_faults, GenConfig};

fn small() -> GenConfig {
    GenConfig {
        n_classes: 20,
        tests_per_class: 3,
        ..GenConfig::default()
    }
}

#[test]
fn truncated_records_equal_separate_runs() {
    let (project, traces) = generate_corpus(&small()).unwrap();
    let faults = inject_faults(&traces, 1, 6, 1).unwrap();
    let bench = Workbench {
        project: &project,
        traces: &traces,
        predictor: None,
    };
    for (i, fault) in faults.iter().enumerate() {
        for planner in [Strategy::Oracle, Strategy::Random] {
            let full = run_episode(
                &bench,
                i,
                fault,
                planner,
                &LdpConfig {
                    test_budget: 40,
                    ..LdpConfig::default()
                },
                episode_seed(1, i),
            )
            .unwrap();
            for budget in [0, 1, 3, 10, 40] {
                let direct = run_episode(
                    &bench,
                    i,
                    fault,
                    planner,
                    &LdpConfig {
                        test_budget: budget,
                        ..LdpConfig::default()
                    },
                    episode_seed(1, i),
                )
                .unwrap();
                assert_eq!(truncate_record(&full, budget).unwrap(), direct, "fault {i} {planner} B={budget}");
            }
        }
    }
}

#[test]
fn steps_never_exceed_budget_and_oracle_beats_random() {
    let (project, traces) = generate_corpus(&small()).unwrap();
    let ds = build_dataset(&project, &traces, &DatasetConfig::default(), 2).unwrap();
    let model = TraceClassifier::train(
        &ds,
        &NetConfig {
            max_iterations: 300,
            ..NetConfig::nn()
        },
    )
    .unwrap();
    let predictor = Predictor::new(model, &project).unwrap();
    let bench = Workbench {
        project: &project,
        traces: &traces,
        predictor: Some(&predictor),
    };
    let faults = inject_faults(&traces, 1, 12, 2).unwrap();
    let budgets = [5, 20, 60];
    let planners = [Strategy::Predicted, Strategy::Oracle, Strategy::Random];
    let report = run_experiment(&bench, &faults, &planners, &budgets, &LdpConfig::default(), 2).unwrap();
    assert_eq!(report.records.len(), 12 * 3 * 3);
    for r in &report.records {
        assert!(r.steps <= r.budget);
        if r.terminal == Terminal::Converged {
            let d = r.converged_diagnosis.as_ref().unwrap();
            assert!(d.score >= 0.7);
        }
    }
    // More budget never converges fewer episodes.
    for p in planners {
        let counts: Vec<usize> = budgets.iter().map(|&b| report.converged(p, b)).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{p}: {counts:?}");
    }
    let (means, n) = report.paired_mean_steps(60);
    if n > 0 {
        assert!(means[&Strategy::Oracle] <= means[&Strategy::Random]);
    }
    assert!(report.converged(Strategy::Oracle, 60) >= report.converged(Strategy::Random, 60));
}

#[test]
fn retraining_is_logged_and_deterministic() {
    let (project, traces) = generate_corpus(&small()).unwrap();
    let ds = build_dataset(&project, &traces, &DatasetConfig::default(), 5).unwrap();
    let net = NetConfig {
        max_iterations: 50,
        ..NetConfig::nn()
    };
    let model = TraceClassifier::train(&ds, &net).unwrap();
    let predictor = Predictor::new(model, &project).unwrap().with_training(ds);
    let bench = Workbench {
        project: &project,
        traces: &traces,
        predictor: Some(&predictor),
    };
    let fault = inject_faults(&traces, 1, 1, 5).unwrap().remove(0);
    let cfg = LdpConfig {
        test_budget: 6,
        score_threshold: 0.999,
        online_retraining: tracecast::ldp::Retraining::Every(3),
        ..LdpConfig::default()
    };
    let a = run_episode(&bench, 0, &fault, Strategy::Predicted, &cfg, 9).unwrap();
    let b = run_episode(&bench, 0, &fault, Strategy::Predicted, &cfg, 9).unwrap();
    assert_eq!(a, b);
    let retrains = a
        .events
        .iter()
        .filter(|e| matches!(e, tracecast::ldp::Event::Retrain { .. }))
        .count();
    assert_eq!(retrains, a.steps / 3);
}
