use motifpool::data::{gen_gc_synthetic, gen_syn2, karate_club, load_tu_dataset, write_tu_dataset, GcParams, Syn2Params};
use motifpool::graph::{write_edge_list, write_features_csv, write_labels};
use motifpool::pipeline::{run_experiment, DatasetSource, ExperimentConfig, Mode, Pooler};

fn small_gc() -> GcParams {
    GcParams {
        graphs: 20,
        seed: 5,
        ..GcParams::default()
    }
}

#[test]
fn tu_files_round_trip_into_classification() {
    let dir = tempfile::tempdir().unwrap();
    let set = gen_gc_synthetic(&small_gc()).unwrap();
    write_tu_dataset(&set, dir.path(), "GC").unwrap();
    let back = load_tu_dataset(dir.path(), 0).unwrap();
    assert_eq!(back.graphs.len(), set.graphs.len());
    assert_eq!(back.labels(), set.labels());
    for (a, b) in set.graphs.iter().zip(&back.graphs) {
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
        let (xa, xb) = (a.features.as_ref().unwrap(), b.features.as_ref().unwrap());
        assert!(xa.iter().zip(xb.iter()).all(|(p, q)| (p - q).abs() <= 1e-12 * p.abs().max(1.0)));
    }

    let mut cfg = ExperimentConfig::defaults(Mode::Classify);
    cfg.dataset = DatasetSource::Tu { dir: dir.path().to_path_buf() };
    cfg.max_epochs = 3;
    cfg.seeds = vec![0];
    for pooler in [Pooler::Hosc, Pooler::MinCutLoss, Pooler::Random, Pooler::NoPool] {
        cfg.pooler = pooler;
        let rec = run_experiment(&cfg, 1).unwrap().remove(0).unwrap();
        assert_eq!(rec.trace.len(), 3, "{pooler:?}");
        let acc = rec.test_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn edge_list_source_matches_in_memory_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = karate_club(0).unwrap();
    let (edges, features, labels) = (dir.path().join("e.txt"), dir.path().join("x.csv"), dir.path().join("y.txt"));
    write_edge_list(&g, &edges).unwrap();
    write_features_csv(g.features.as_ref().unwrap(), &features).unwrap();
    write_labels(g.node_labels.as_ref().unwrap(), &labels).unwrap();

    let mut cfg = ExperimentConfig::defaults(Mode::Cluster);
    cfg.max_epochs = 20;
    cfg.seeds = vec![1];
    let from_memory = run_experiment(&cfg, 1).unwrap().remove(0).unwrap();
    cfg.dataset = DatasetSource::EdgeList {
        edges,
        features: Some(features),
        labels,
    };
    let from_files = run_experiment(&cfg, 1).unwrap().remove(0).unwrap();
    assert_eq!(from_memory.trace, from_files.trace);
    assert_eq!(from_memory.assignment, from_files.assignment);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut cfg = ExperimentConfig::defaults(Mode::Cluster);
    cfg.dataset = DatasetSource::Syn2(Syn2Params {
        nodes: 120,
        ..Syn2Params::default()
    });
    cfg.max_epochs = 25;
    cfg.seeds = vec![4, 0, 9];
    let serial = run_experiment(&cfg, 1).unwrap();
    let parallel = run_experiment(&cfg, 3).unwrap();
    for ((a, b), seed) in serial.iter().zip(&parallel).zip(&cfg.seeds) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        assert_eq!(a.seed, *seed);
        assert!(a.same_outcome(b));
    }
}

#[test]
fn config_hash_tracks_everything_but_seeds() {
    let a = ExperimentConfig::resolve(Mode::Cluster, None, &["mu=0.1".into()]).unwrap();
    let b = ExperimentConfig::resolve(Mode::Cluster, None, &["mu=0.1".into(), "seeds=[7]".into()]).unwrap();
    let c = ExperimentConfig::resolve(Mode::Cluster, None, &["mu=1.0".into()]).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    let json = serde_json::to_value(&a).unwrap();
    let back = ExperimentConfig::resolve(Mode::Cluster, Some(&json), &[]).unwrap();
    assert_eq!(back, a);
}

#[test]
fn two_layer_runs_from_edge_list_files() {
    let g = gen_syn2(&Syn2Params {
        nodes: 80,
        ..Syn2Params::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (edges, features, labels) = (dir.path().join("e.txt"), dir.path().join("x.csv"), dir.path().join("y.txt"));
    write_edge_list(&g, &edges).unwrap();
    write_features_csv(g.features.as_ref().unwrap(), &features).unwrap();
    write_labels(g.node_labels.as_ref().unwrap(), &labels).unwrap();
    let mut cfg = ExperimentConfig::defaults(Mode::Cluster2Layer);
    cfg.dataset = DatasetSource::EdgeList {
        edges,
        features: Some(features),
        labels,
    };
    cfg.max_epochs = 10;
    cfg.seeds = vec![0];
    let rec = run_experiment(&cfg, 1).unwrap().remove(0).unwrap();
    let assignment = rec.assignment.unwrap();
    assert_eq!(assignment.len(), 80);
    assert!(assignment.iter().all(|&c| c < 2));
}
