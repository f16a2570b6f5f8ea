mod common;

use std::collections::BTreeSet;

use asbound::absorbing::{fixtures, AbsorbingSetGraph, AuxPolicy, DecoderGraphDA};
use asbound::bound::{
    build_w_max, compute_failure_set, compute_nested_failure_sets, exact_lambda_oracle, failure_set_key, lambda_hat,
    lambda_hat_explicit, AsDecoder, EnumerationOptions, FailureSet, Overrun, RowMatrix, RowSet,
};
use asbound::decoder::{Algorithm, DecoderConfig};
use asbound::quantizer::{ChannelModel, LevelIndex, QuantizerSpec};
use asbound::Error;
use common::ref_decode_with_aux;
use proptest::prelude::*;

fn triangle() -> DecoderGraphDA {
    let g = AbsorbingSetGraph::from_checks(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
    DecoderGraphDA::build(g, &AuxPolicy::AllChecks).unwrap()
}

fn fixture(name: &str) -> DecoderGraphDA {
    DecoderGraphDA::build(fixtures::load(name).unwrap(), &AuxPolicy::AllChecks).unwrap()
}

fn decoder(g: &DecoderGraphDA, alg: Algorithm, spec: QuantizerSpec, phi_zero: f64, iters: usize) -> AsDecoder {
    AsDecoder::new(
        g,
        &DecoderConfig::new(alg, spec, phi_zero, iters).unwrap(),
        Overrun::Clamp,
    )
    .unwrap()
}

fn read_array(text: &str) -> Vec<Vec<bool>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.chars().map(|c| c == '1').collect())
        .collect()
}

fn explicit_set(fs: &FailureSet) -> BTreeSet<Vec<LevelIndex>> {
    fs.explicit.clone().unwrap().into_iter().collect()
}

fn probabilities(spec: &QuantizerSpec, sigma: f64) -> Vec<f64> {
    spec.build()
        .unwrap()
        .level_probabilities(&ChannelModel::new(sigma).unwrap())
}

fn reference_fails(dec: &AsDecoder, x: &[LevelIndex], w: &RowMatrix) -> bool {
    let q = dec.kernel().quantizer();
    let levels = q.levels();
    let spa = (dec.config().algorithm == Algorithm::Spa).then_some(dec.config().phi_zero);
    let base = dec.graph().base();
    let channel: Vec<f64> = x.iter().map(|&k| levels[k as usize]).collect();
    let aux = |mu: usize, j: usize| {
        dec.graph()
            .aux_row(j)
            .map(|r| levels[w.get(r as usize, mu.min(w.p()) - 1) as usize])
    };
    let (_, _, bits) = ref_decode_with_aux(
        levels,
        spa,
        base.a(),
        base.checks(),
        &channel,
        dec.config().max_iterations,
        aux,
    );
    bits.iter().any(|&b| b != 0)
}

#[test]
fn triangle_oracles_match_frozen_arrays() {
    let cases = [
        (0, Algorithm::Msa, include_str!("fixtures/oracle_triangle_t2_msa.txt")),
        (0, Algorithm::Spa, include_str!("fixtures/oracle_triangle_t2_spa.txt")),
        (1, Algorithm::Msa, include_str!("fixtures/oracle_triangle_t4_msa.txt")),
        (1, Algorithm::Spa, include_str!("fixtures/oracle_triangle_t4_spa.txt")),
    ];
    for (q1, alg, frozen) in cases {
        let dec = decoder(&triangle(), alg, QuantizerSpec::uniform(q1, 0), 1.0, 200);
        let oracle = exact_lambda_oracle(&dec, 1).unwrap();
        assert_eq!(oracle.array, read_array(frozen), "q1 = {q1}, {alg:?}");
    }
}

#[test]
fn triangle_oracle_rows_agree_with_reference_decoder() {
    for alg in [Algorithm::Msa, Algorithm::Spa] {
        let dec = decoder(&triangle(), alg, QuantizerSpec::uniform(1, 0), 1.0, 200);
        let q = dec.kernel().quantizer().clone();
        let oracle = exact_lambda_oracle(&dec, 1).unwrap();
        for (k, row) in oracle.array.iter().enumerate() {
            let entries = vec![(k / 16) as LevelIndex, (k / 4 % 4) as LevelIndex, (k % 4) as LevelIndex];
            let w = RowMatrix::new(3, 1, entries, &q).unwrap();
            for (x, &fails) in oracle.columns.iter().zip(row) {
                assert_eq!(reference_fails(&dec, x, &w), fails);
            }
        }
    }
}

#[test]
fn exact_failures_are_contained_in_the_w_max_set() {
    for alg in [Algorithm::Msa, Algorithm::Spa] {
        let spec = QuantizerSpec::uniform(1, 0);
        let dec = decoder(&triangle(), alg, spec.clone(), 1.0, 200);
        let q = dec.kernel().quantizer().clone();
        let oracle = exact_lambda_oracle(&dec, 1).unwrap();
        let fs = compute_failure_set(&dec, &[build_w_max(3, 1, &q).unwrap()], &EnumerationOptions::default()).unwrap();
        let hat = explicit_set(&fs);
        assert!(oracle.failing.iter().all(|x| hat.contains(x)));
        for sigma in [0.4, 0.7, 1.0, 1.5, 2.5] {
            let p = probabilities(&spec, sigma);
            assert!(oracle.lambda(&p) <= lambda_hat(&fs, &p).unwrap() + 1e-15);
        }
    }
}

#[test]
fn orbit_reduction_does_not_change_the_set() {
    let cases = [
        ("as_4_2_g6", QuantizerSpec::uniform(1, 1), Algorithm::Spa, 1.5),
        ("as_3_3", QuantizerSpec::uniform(2, 1), Algorithm::Msa, 1.0),
        ("as_3_3", QuantizerSpec::quasi_uniform(1, 1), Algorithm::Spa, 1.5),
    ];
    for (name, spec, alg, z) in cases {
        let g = fixture(name);
        let dec = decoder(&g, alg, spec, z, 60);
        let q = dec.kernel().quantizer().clone();
        let rows = RowSet::III.build(g.kappa(), 1, 30, &q).unwrap();
        let on = compute_failure_set(&dec, &rows, &EnumerationOptions::default()).unwrap();
        let off = compute_failure_set(
            &dec,
            &rows,
            &EnumerationOptions {
                orbit_reduction: false,
                ..EnumerationOptions::default()
            },
        )
        .unwrap();
        assert_eq!(on, off, "{name}");
    }
}

#[test]
fn nested_sets_refine_and_match_separate_runs() {
    let g = fixture("as_4_2_g6");
    let spec = QuantizerSpec::uniform(1, 1);
    let dec = decoder(&g, Algorithm::Msa, spec.clone(), 1.0, 60);
    let q = dec.kernel().quantizer().clone();
    let rows = RowSet::III.build(g.kappa(), 2, 30, &q).unwrap();
    let opts = EnumerationOptions::default();
    let (nested, _) = compute_nested_failure_sets(&dec, &rows, &opts).unwrap();
    assert_eq!(nested.len(), 2);
    assert_eq!(nested[0], compute_failure_set(&dec, &rows[..1], &opts).unwrap());
    assert_eq!(nested[1], compute_failure_set(&dec, &rows, &opts).unwrap());
    let (coarse, fine) = (explicit_set(&nested[0]), explicit_set(&nested[1]));
    assert!(fine.is_subset(&coarse));
    for sigma in [0.5, 0.8, 1.2] {
        let p = probabilities(&spec, sigma);
        assert!(lambda_hat(&nested[1], &p).unwrap() <= lambda_hat(&nested[0], &p).unwrap());
    }
}

#[test]
fn histogram_and_explicit_sums_agree() {
    let g = fixture("as_3_3");
    let spec = QuantizerSpec::uniform(3, 2);
    let dec = decoder(&g, Algorithm::Spa, spec.clone(), 4.25, 200);
    let q = dec.kernel().quantizer().clone();
    let fs = compute_failure_set(
        &dec,
        &[build_w_max(6, 200, &q).unwrap()],
        &EnumerationOptions::default(),
    )
    .unwrap();
    assert_eq!(fs.total() as usize, fs.explicit.as_ref().unwrap().len());
    for sigma in [0.3, 0.6, 1.0, 1.4] {
        let p = probabilities(&spec, sigma);
        let h = lambda_hat(&fs, &p).unwrap();
        let e = lambda_hat_explicit(&fs, &p).unwrap();
        assert!((h - e).abs() <= 1e-13 * h.max(1e-300), "{h} vs {e}");
    }
}

#[test]
fn guard_rejects_oversized_enumerations() {
    let g = fixture("as_6_0_g8");
    let dec = decoder(&g, Algorithm::Msa, QuantizerSpec::quasi_uniform(2, 1), 1.0, 200);
    let q = dec.kernel().quantizer().clone();
    let rows = vec![build_w_max(g.kappa(), 1, &q).unwrap()];
    let opts = EnumerationOptions {
        guard: 1000,
        ..EnumerationOptions::default()
    };
    assert!(matches!(compute_failure_set(&dec, &rows, &opts), Err(Error::Guard(_))));
}

#[test]
fn failure_set_records_its_inputs() {
    let g = fixture("as_3_3");
    let dec = decoder(&g, Algorithm::Msa, QuantizerSpec::uniform(2, 1), 1.0, 50);
    let q = dec.kernel().quantizer().clone();
    let rows = RowSet::I.build(6, 1, 10, &q).unwrap();
    let fs = compute_failure_set(&dec, &rows, &EnumerationOptions::default()).unwrap();
    assert!(fs.matches(&dec, &rows));
    let other_rows = RowSet::I.build(6, 1, 11, &q).unwrap();
    assert!(!fs.matches(&dec, &other_rows));
    assert_ne!(failure_set_key(&dec, &rows), failure_set_key(&dec, &other_rows));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.fs");
    fs.store(&path).unwrap();
    assert_eq!(FailureSet::load(&path).unwrap(), fs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn as_decoder_matches_reference(
        which in 0usize..4,
        x in proptest::collection::vec(0u16..64, 4),
        w in proptest::collection::vec(0u16..64, 21),
        p in 1usize..4,
    ) {
        let (name, alg, spec, z) = [
            ("as_4_2_g6", Algorithm::Spa, QuantizerSpec::uniform(3, 2), 4.25),
            ("as_4_2_g6", Algorithm::Msa, QuantizerSpec::quasi_uniform(2, 1), 1.0),
            ("as_3_3", Algorithm::Spa, QuantizerSpec::uniform(2, 1), 2.0),
            ("as_3_3", Algorithm::Msa, QuantizerSpec::uniform(3, 2), 1.0),
        ][which].clone();
        let g = fixture(name);
        let dec = decoder(&g, alg, spec, z, 40);
        let q = dec.kernel().quantizer().clone();
        let t = q.len() as u16;
        let a = g.base().a();
        let x: Vec<LevelIndex> = x[..a].iter().map(|k| k % t).collect();
        let entries: Vec<LevelIndex> = w.iter().cycle().take(g.kappa() * p).map(|k| k % t).collect();
        let w = RowMatrix::new(g.kappa(), p, entries, &q).unwrap();
        prop_assert_eq!(dec.decode(&x, &w).unwrap(), reference_fails(&dec, &x, &w));
    }
}
