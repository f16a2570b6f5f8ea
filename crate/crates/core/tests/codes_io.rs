use std::path::PathBuf;

use asbound::absorbing::{fixtures, AbsorbingSetGraph};
use asbound::codes::{array_code, eg_63, find_weight_w_codewords, regular_random, tanner_155, ParityCheckMatrix};
use asbound::Error;
use proptest::prelude::*;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Walks all `2^n` words of a code with at most 32 bits via a Gray code and
/// returns the codeword count per weight.
fn weight_distribution(h: &ParityCheckMatrix) -> Vec<u64> {
    let n = h.n();
    assert!(n <= 32 && h.m() <= 64);
    let cols: Vec<u64> = h
        .columns()
        .iter()
        .map(|c| c.iter().fold(0u64, |acc, &r| acc | 1 << r))
        .collect();
    let mut counts = vec![0u64; n + 1];
    let (mut syndrome, mut word) = (0u64, 0u32);
    counts[0] = 1;
    for i in 1u64..(1 << n) {
        let bit = i.trailing_zeros() as usize;
        word ^= 1 << bit;
        syndrome ^= cols[bit];
        if syndrome == 0 {
            counts[word.count_ones() as usize] += 1;
        }
    }
    counts
}

#[test]
fn array_3_5_dimension_and_weight_six_count_by_exhaustion() {
    let h = array_code(3, 5).unwrap();
    let dist = weight_distribution(&h);
    assert_eq!(dist.iter().sum::<u64>(), 1 << (h.n() - h.rank()));
    assert!((h.rate() - 0.48).abs() < 1e-12);
    assert_eq!(dist[6], find_weight_w_codewords(&h, 6, None).unwrap().len() as u64);
    assert!(dist[1..6].iter().all(|&c| c == 0));
}

#[test]
fn array_code_rates() {
    assert!((array_code(3, 23).unwrap().rate() - 0.8733).abs() < 5e-5);
    assert!((array_code(3, 61).unwrap().rate() - 0.9514).abs() < 5e-5);
}

#[test]
fn alist_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let codes = [
        array_code(3, 7).unwrap(),
        tanner_155(),
        eg_63(),
        regular_random(96, 3, 6, 4).unwrap(),
    ];
    for (i, h) in codes.iter().enumerate() {
        let path = dir.path().join(format!("{i}.alist"));
        h.store_alist(&path).unwrap();
        assert_eq!(&ParityCheckMatrix::load_alist(&path).unwrap(), h);
    }
}

#[test]
fn malformed_alist_is_a_parse_error() {
    let text = array_code(3, 5).unwrap().to_alist();
    let lines: Vec<&str> = text.lines().collect();
    for keep in [0, 1, 3, lines.len() / 2, lines.len() - 1] {
        let cut = lines[..keep].join("\n");
        assert!(
            matches!(ParityCheckMatrix::from_alist(&cut, "cut"), Err(Error::Parse { .. })),
            "keep {keep}"
        );
    }
    let garbled = text.replacen('3', "x", 1);
    assert!(matches!(
        ParityCheckMatrix::from_alist(&garbled, "g"),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn bundled_stand_in_code_is_3_6_regular() {
    let h = ParityCheckMatrix::load_alist(&configs_dir().join("codes/mackay_standin_4000.alist")).unwrap();
    assert_eq!((h.n(), h.m()), (4000, 2000));
    assert!(h.column_degrees().iter().all(|&d| d == 3));
    assert!(h.row_degrees().iter().all(|&d| d == 6));
    assert_eq!(h, regular_random(4000, 3, 6, 2003).unwrap());
}

#[test]
fn fixtures_round_trip_as_text() {
    for name in fixtures::NAMES {
        let g = fixtures::load(name).unwrap();
        assert_eq!(AbsorbingSetGraph::from_text(&g.to_text(), name).unwrap(), g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_matrices_round_trip(n in 2usize..40, m in 1usize..20, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<u32>> = (0..m)
            .map(|_| {
                let mut r: Vec<u32> = (0..n as u32).filter(|_| rng.random_bool(0.3)).collect();
                if r.is_empty() {
                    r.push(rng.random_range(0..n as u32));
                }
                r
            })
            .collect();
        let Ok(h) = ParityCheckMatrix::from_rows(n, rows) else { return Ok(()) };
        prop_assert_eq!(ParityCheckMatrix::from_alist(&h.to_alist(), "p").unwrap(), h);
    }
}
