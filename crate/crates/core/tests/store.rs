use kgacc::kg::{generate_synthetic, load_tsv, parse_tsv, true_accuracy, SyntheticSpec};
use proptest::prelude::*;

#[test]
fn tsv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let kg = generate_synthetic(&SyntheticSpec::new(300, 3.0, 0.7, 1)).unwrap();
    let path = dir.path().join("kg.tsv");
    kg.save_tsv(&path).unwrap();
    assert_eq!(load_tsv(&path).unwrap(), kg);

    let tsv = "# comment\nalice\tknows\tbob\t1\n\nbob\tage\t42\t0\nalice\tage\t30\n";
    let kg = parse_tsv(tsv.as_bytes()).unwrap();
    let mut buf = Vec::new();
    kg.write_tsv(&mut buf).unwrap();
    assert_eq!(parse_tsv(buf.as_slice()).unwrap(), kg);
}

#[test]
fn missing_file_reports_path() {
    let err = load_tsv("/nonexistent/kg.tsv").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/kg.tsv"));
}

#[test]
fn synthetic_accuracy_concentrates() {
    let mu = 0.3;
    let trials = 300;
    let mut inside = 0;
    for seed in 0..trials {
        let kg = generate_synthetic(&SyntheticSpec::new(400, 2.5, mu, seed)).unwrap();
        let se = (mu * (1.0 - mu) / kg.len() as f64).sqrt();
        if (true_accuracy(&kg).unwrap() - mu).abs() <= 4.0 * se {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.99 * trials as f64, "{inside}/{trials}");
}

#[test]
fn synthetic_seeds_matter() {
    let a = generate_synthetic(&SyntheticSpec::new(100, 3.0, 0.5, 1)).unwrap();
    let b = generate_synthetic(&SyntheticSpec::new(100, 3.0, 0.5, 1)).unwrap();
    let c = generate_synthetic(&SyntheticSpec::new(100, 3.0, 0.5, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn rank_lookup_finds_owning_cluster(seed in 0u64..500, clusters in 1usize..60, r in 0.0f64..1.0) {
        let kg = generate_synthetic(&SyntheticSpec::new(clusters, 4.0, 0.5, seed)).unwrap();
        let rank = ((r * kg.len() as f64) as usize).min(kg.len() - 1);
        let id = kg.cluster_at_rank(rank) as usize;
        let sums = kg.cluster_size_prefix_sums();
        let start = if id == 0 { 0 } else { sums[id - 1] };
        prop_assert!(start <= rank && rank < sums[id]);
        let cluster = kg.cluster(id as u32);
        prop_assert_eq!(cluster.size(), sums[id] - start);
        for &t in cluster.triple_refs {
            prop_assert_eq!(kg.triple(t as usize).subject as usize, id);
        }
    }
}
