use ncmimo::constellation::PowerMode;
use ncmimo::experiment::{
    config_to_string, parse_config, read_results, run_experiment, write_results, Budget,
    ConstellationSpec, DetectorSpec, ExperimentConfig, ExperimentKind, PowerSpec, Seeds, Sweep,
};
use proptest::prelude::*;

fn small_ser(draws: usize, trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::SerDistance);
    c.array.n_h = 4;
    c.array.n_v = 4;
    c.sweep = Some(Sweep::Distance { values: vec![2.0, 20.0] });
    c.budget = Some(Budget { draws, trials_per_draw: trials });
    c.resolve().unwrap()
}

fn csv_bytes(config: &ExperimentConfig, workers: usize) -> Vec<u8> {
    let rows = run_experiment(config, workers).unwrap();
    let mut out = Vec::new();
    write_results(config, &rows, &mut out).unwrap();
    out
}

#[test]
fn csv_is_byte_identical_across_runs_and_workers() {
    let config = small_ser(3, 400);
    let reference = csv_bytes(&config, 1);
    for workers in [1, 2, 5] {
        assert_eq!(csv_bytes(&config, workers), reference, "workers = {workers}");
    }
    let rows = read_results(reference.as_slice()).unwrap();
    assert_eq!(rows, run_experiment(&config, 3).unwrap());
    assert!(!reference.contains(&b'\r'));
}

#[test]
fn per_draw_rows_reproduce_standalone() {
    let config = small_ser(3, 300);
    let rows = run_experiment(&config, 1).unwrap();
    let d = 2;
    let mut single = config.clone();
    single.seeds = Seeds {
        scatterer: config.seeds.scatterer + d,
        symbol: config.seeds.symbol,
    };
    single.budget = Some(Budget { draws: 1, trials_per_draw: 300 });
    let standalone = run_experiment(&single, 1).unwrap();
    let seed = config.seeds.scatterer + d;
    let from_pooled: Vec<_> = rows.iter().filter(|r| r.draws == 1 && r.seed == seed).collect();
    assert!(!from_pooled.is_empty());
    for row in from_pooled {
        let twin = standalone
            .iter()
            .find(|s| {
                s.sweep_value == row.sweep_value
                    && s.detector == row.detector
                    && s.model == row.model
                    && s.metric == row.metric
                    && s.seed == seed
            })
            .expect("standalone row");
        assert_eq!(twin.value, row.value);
    }
}

fn constellation() -> impl Strategy<Value = ConstellationSpec> {
    prop_oneof![
        (2usize..6).prop_map(|order| ConstellationSpec::Pam { order }),
        (2usize..6, 1.5f64..10.0).prop_map(|(order, ratio)| ConstellationSpec::GeometricEnergy { order, ratio }),
        prop::collection::vec(0.1f64..5.0, 1..4).prop_map(|mut tail| {
            tail.sort_by(|a, b| a.total_cmp(b));
            tail.dedup();
            let mut levels = vec![0.0];
            levels.extend(tail);
            ConstellationSpec::Levels { levels }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn config_round_trips(
        c in constellation(),
        target in -10.0f64..40.0,
        equal_sinr in any::<bool>(),
        scatterer in any::<u64>(),
        symbol in any::<u64>(),
        draws in 1usize..50,
        trials in 1usize..100_000,
        radius in 0.1f64..2.0,
        points in prop::collection::vec(2.5f64..200.0, 1..6),
    ) {
        let mut points = points;
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup();
        let mut cfg = ExperimentConfig::new(ExperimentKind::SerDistance);
        cfg.constellation = c;
        cfg.power = PowerSpec {
            mode: if equal_sinr { PowerMode::EqualSinr } else { PowerMode::EqualSnr },
            target_db: target,
        };
        cfg.seeds = Seeds { scatterer, symbol };
        cfg.budget = Some(Budget { draws, trials_per_draw: trials });
        cfg.cluster_radius = Some(radius);
        cfg.sweep = Some(Sweep::Distance { values: points });
        cfg.detectors = vec![DetectorSpec::SingleUserExact];
        let cfg = cfg.resolve().unwrap();
        let text = config_to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
