mod common;

use asbound::codes::array_code;
use asbound::decoder::{Algorithm, Decoder, DecoderConfig, TannerGraph};
use asbound::quantizer::{ChannelModel, LevelIndex, QuantizerSpec};
use common::ref_decode;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn array_graph() -> TannerGraph {
    array_code(3, 5).unwrap().tanner_graph().unwrap()
}

fn configs() -> Vec<DecoderConfig> {
    vec![
        DecoderConfig::new(Algorithm::Msa, QuantizerSpec::quasi_uniform(2, 1), 1.0, 40).unwrap(),
        DecoderConfig::new(Algorithm::Spa, QuantizerSpec::uniform(3, 2), 4.25, 40).unwrap(),
        DecoderConfig::new(Algorithm::Msa, QuantizerSpec::uniform(2, 1), 1.0, 40).unwrap(),
    ]
}

fn compare(graph: &TannerGraph, cfg: &DecoderConfig, channel: &[LevelIndex]) {
    let q = cfg.quantizer.build().unwrap();
    let levels = q.levels();
    let values: Vec<f64> = channel.iter().map(|&k| levels[k as usize]).collect();
    let spa = (cfg.algorithm == Algorithm::Spa).then_some(cfg.phi_zero);
    let (ok, iters, bits) = ref_decode(levels, spa, graph.n(), graph.checks(), &values, cfg.max_iterations);
    let got = Decoder::new(graph, cfg).unwrap().decode(channel).unwrap();
    assert_eq!(got.converged, ok);
    assert_eq!(got.iterations, iters);
    assert_eq!(got.hard_decisions, bits);
}

#[test]
fn matches_naive_decoder_on_noisy_frames() {
    let graph = array_graph();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for cfg in configs() {
        let q = cfg.quantizer.build().unwrap();
        for ebn0 in [0.0, 2.0, 4.0] {
            let ch = ChannelModel::from_ebn0(ebn0, 0.48).unwrap();
            let noise = Normal::new(0.0, ch.sigma()).unwrap();
            for _ in 0..150 {
                let channel: Vec<LevelIndex> = (0..graph.n())
                    .map(|_| q.quantize(2.0 * (1.0 + noise.sample(&mut rng)) / (ch.sigma() * ch.sigma())))
                    .collect();
                compare(&graph, &cfg, &channel);
            }
        }
    }
}

#[test]
fn codeword_input_stops_after_one_iteration() {
    let graph = array_graph();
    for cfg in configs() {
        let q = cfg.quantizer.build().unwrap();
        let channel = vec![q.max_index(); graph.n()];
        let r = Decoder::new(&graph, &cfg).unwrap().decode(&channel).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.hard_decisions.iter().all(|&b| b == 0));
    }
}

#[test]
fn traced_and_untraced_runs_agree() {
    let graph = array_graph();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for cfg in configs() {
        let q = cfg.quantizer.build().unwrap();
        let dec = Decoder::new(&graph, &cfg).unwrap();
        for _ in 0..50 {
            let channel: Vec<LevelIndex> = (0..graph.n())
                .map(|_| rand::Rng::random_range(&mut rng, 0..q.len() as LevelIndex))
                .collect();
            let a = dec.decode(&channel).unwrap();
            let b = dec.decode_traced(&channel).unwrap();
            assert_eq!(
                (a.converged, a.iterations, &a.hard_decisions),
                (b.converged, b.iterations, &b.hard_decisions)
            );
            assert_eq!(b.per_iteration.unwrap().len(), b.iterations);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arbitrary_inputs_match_naive_decoder(which in 0usize..3, raw in proptest::collection::vec(0u16..64, 25)) {
        let cfg = &configs()[which];
        let t = cfg.quantizer.build().unwrap().len() as u16;
        let channel: Vec<LevelIndex> = raw.iter().map(|r| r % t).collect();
        compare(&array_graph(), cfg, &channel);
    }

    #[test]
    fn converged_output_is_a_codeword(which in 0usize..3, raw in proptest::collection::vec(0u16..64, 25)) {
        let graph = array_graph();
        let cfg = &configs()[which];
        let t = cfg.quantizer.build().unwrap().len() as u16;
        let channel: Vec<LevelIndex> = raw.iter().map(|r| r % t).collect();
        let r = Decoder::new(&graph, cfg).unwrap().decode(&channel).unwrap();
        prop_assert_eq!(r.converged, graph.syndrome_ok(&r.hard_decisions));
    }
}
