use std::collections::BTreeSet;
use std::path::Path;

use genrefuse::data::{split, SplitRatios};
use genrefuse::dsp::{decode_mel, encode_mel, mel_spectrogram, stft_magnitude, AudioClip, MelConfig, MelSpectrogram};
use genrefuse::encoders::{pool_embedding, AudioEncoder, AudioEncoderConfig, LyricsEncoder};
use genrefuse::fusion::CrossModalAttention;
use genrefuse::graph::{
    combine, conditional_probability_matrix, count_cooccurrence, normalize_adjacency, similarity_matrix,
    DenominatorMode,
};
use genrefuse::losses::{bce_loss, contrastive_loss_fixed, directional_losses};
use genrefuse::nn::ParamInit;
use genrefuse::tensor::LrSchedule;
use genrefuse::text::FrozenEmbedder;
use genrefuse::train::{jaccard, sample_f1, MetricsReport};
use genrefuse::Tensor;
use proptest::prelude::*;

fn rows_f64(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_rows, 1..=max_cols)
        .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, c), r))
}

fn label_sets(max_genres: usize, max_samples: usize) -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
    (1..=max_genres).prop_flat_map(move |g| {
        let set = prop::collection::vec(0..g, 0..=g + 1);
        (Just(g), prop::collection::vec(set, 0..max_samples))
    })
}

fn tensor(rows: &[Vec<f64>]) -> Tensor<f64> {
    Tensor::from_rows(rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_rows_are_distributions_and_shift_invariant(rows in rows_f64(6, 9), shift in -50.0..50.0f64) {
        let base = tensor(&rows).softmax_rows().unwrap().to_vec();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let moved = tensor(&shifted).softmax_rows().unwrap().to_vec();
        let cols = rows[0].len();
        for row in base.chunks(cols) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_attention_rows_sum_to_one_and_ignore_key_order(
        seed in any::<u64>(),
        heads in prop::sample::select(vec![1usize, 2]),
        m in 1usize..5,
        n in 2usize..6,
        values in prop::collection::vec(-2.0..2.0f64, 5 * 3 + 6 * 4),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let attn = CrossModalAttention::<f64>::new(&ParamInit::new(seed), "x", 3, 4, 4, heads).unwrap();
        let q = Tensor::from_vec(values[..m * 3].to_vec(), &[m, 3]).unwrap();
        let kv_rows: Vec<Vec<f64>> = values[15..15 + n * 4].chunks(4).map(<[f64]>::to_vec).collect();
        let kv = tensor(&kv_rows);
        let weights = attn.weights(&q, &kv).unwrap().to_vec();
        for row in weights.chunks(n) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let order: Vec<usize> = perm.into_iter().filter(|&i| i < n).collect();
        let permuted = tensor(&order.iter().map(|&i| kv_rows[i].clone()).collect::<Vec<_>>());
        let out = attn.forward(&q, &kv).unwrap().to_vec();
        let out_perm = attn.forward(&q, &permuted).unwrap().to_vec();
        // Same terms, different summation order: equal up to rounding.
        for (a, b) in out.iter().zip(&out_perm) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_pooling_ignores_token_order(
        tokens in prop::collection::vec(1u32..50, 1..20).prop_flat_map(|t| (Just(t.clone()), Just(t).prop_shuffle())),
        seed in any::<u64>(),
    ) {
        let (original, shuffled) = tokens;
        let encoder = LyricsEncoder::<f64>::new(FrozenEmbedder::new(seed, 8, 50).unwrap(), 4, &ParamInit::new(seed)).unwrap();
        let a = pool_embedding(&encoder.embed_frozen(&[original]).unwrap()).unwrap().to_vec();
        let b = pool_embedding(&encoder.embed_frozen(&[shuffled]).unwrap()).unwrap().to_vec();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn contrastive_loss_is_non_negative(rows in rows_f64(6, 4), other in rows_f64(6, 4), tau in 0.01..1.0f64) {
        let b = rows.len().min(other.len());
        let d = rows[0].len().min(other[0].len());
        let cut = |m: &[Vec<f64>]| m[..b].iter().map(|r| r[..d].to_vec()).collect::<Vec<_>>();
        let ea = tensor(&cut(&rows)).l2_normalize().unwrap();
        let el = tensor(&cut(&other)).l2_normalize().unwrap();
        let loss = contrastive_loss_fixed(&ea, &el, tau).unwrap().item().unwrap();
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn row_constant_leaves_that_direction_unchanged(rows in rows_f64(6, 6), row in 0usize..6, c in -20.0..20.0f64) {
        let b = rows.len().min(rows[0].len());
        let square: Vec<Vec<f64>> = rows[..b].iter().map(|r| r[..b].to_vec()).collect();
        let mut shifted = square.clone();
        let row = row % b;
        shifted[row].iter_mut().for_each(|v| *v += c);
        let (before, _) = directional_losses(&tensor(&square)).unwrap();
        let (after, _) = directional_losses(&tensor(&shifted)).unwrap();
        prop_assert!((before.item().unwrap() - after.item().unwrap()).abs() < 1e-6);
    }

    #[test]
    fn bce_ignores_sample_and_genre_order(
        logits in rows_f64(5, 5),
        bits in prop::collection::vec(any::<bool>(), 25),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (n, g) = (logits.len(), logits[0].len());
        let targets: Vec<Vec<f64>> = (0..n).map(|i| (0..g).map(|k| bits[i * 5 + k] as u8 as f64).collect()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..g).collect();
        rows.shuffle(&mut rng);
        cols.shuffle(&mut rng);
        let permute = |m: &[Vec<f64>]| rows.iter().map(|&i| cols.iter().map(|&k| m[i][k]).collect()).collect::<Vec<Vec<f64>>>();
        let a = bce_loss(&tensor(&logits), &tensor(&targets)).unwrap().item().unwrap();
        let b = bce_loss(&tensor(&permute(&logits)), &tensor(&permute(&targets))).unwrap().item().unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn audio_encoder_shape_depends_only_on_input_shape(
        batch in 1usize..3,
        mels in 4usize..12,
        blocks in 1usize..4,
        extra in 0usize..20,
        seed in any::<u64>(),
    ) {
        let config = AudioEncoderConfig { channels: (0..blocks).map(|i| 2 + i).collect() };
        let frames = config.min_frames() + extra;
        let encoder = AudioEncoder::<f32>::new(&config, &ParamInit::new(seed)).unwrap();
        let mel = Tensor::<f32>::zeros(&[batch, 1, mels, frames]);
        let out = encoder.forward(&mel).unwrap();
        prop_assert_eq!(out.shape(), &[batch, config.out_steps(frames), config.out_dim()][..]);
        prop_assert_eq!(config.out_steps(frames), frames.div_ceil(1 << blocks));
    }

    #[test]
    fn spectrogram_shape_is_a_function_of_length_fft_and_hop(
        len in 1usize..6000,
        log_fft in 6u32..11,
        hop_frac in 0.05..1.0f64,
        seed in any::<u64>(),
    ) {
        let n_fft = 1usize << log_fft;
        let hop = ((n_fft as f64 * hop_frac) as usize).max(1);
        let samples: Vec<f32> = (0..len).map(|i| ((i as u64 ^ seed) % 200) as f32 / 100.0 - 1.0).collect();
        let clip = AudioClip::new(samples, 22050);
        let spec = stft_magnitude(&clip, n_fft, hop).unwrap();
        prop_assert_eq!((spec.bins, spec.frames), (n_fft / 2 + 1, 1 + len / hop));
        let config = MelConfig { n_fft, hop, n_mels: 16, ..MelConfig::default() };
        let mel = mel_spectrogram(&clip, &config).unwrap();
        prop_assert_eq!((mel.rows, mel.cols), (16, 1 + len / hop));
        prop_assert!(mel.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive(n in 0usize..400, a in 0.0..1.0f64, b in 0.0..1.0f64, seed in any::<u64>()) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ratios = SplitRatios { train: lo, val: hi - lo, test: 1.0 - hi };
        prop_assume!(ratios.validate().is_ok());
        let ids: Vec<usize> = (0..n).collect();
        let s = split(&ids, ratios, seed).unwrap();
        let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        prop_assert_eq!(all, ids.into_iter().collect::<BTreeSet<_>>());
        prop_assert_eq!(s.train.len(), (n as f64 * lo).floor() as usize);
    }

    #[test]
    fn metrics_stay_in_unit_interval((g, truth) in label_sets(6, 30), pred_seed in prop::collection::vec(prop::collection::vec(0usize..64, 0..6), 30)) {
        prop_assume!(!truth.is_empty());
        let pred: Vec<Vec<usize>> = (0..truth.len()).map(|i| pred_seed[i].iter().map(|k| k % g).collect()).collect();
        for (t, p) in truth.iter().zip(&pred) {
            prop_assert!((0.0..=1.0).contains(&jaccard(t, p)));
            prop_assert!((0.0..=1.0).contains(&sample_f1(t, p)));
        }
        let genres: Vec<String> = (0..g).map(|k| format!("g{k}")).collect();
        let report = MetricsReport::compute(&truth, &pred, &genres, 0.5).unwrap();
        for v in [report.accuracy, report.f_measure, report.micro_f1, report.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for gm in &report.per_genre {
            prop_assert!((0.0..=1.0).contains(&gm.precision) && (0.0..=1.0).contains(&gm.recall));
        }
    }

    #[test]
    fn lr_schedule_halves_on_the_boundary(epoch in 0usize..10_000) {
        let lr = LrSchedule::default().lr_at(epoch);
        prop_assert_eq!(lr, 1e-4 * 0.5f64.powi((epoch / 50) as i32));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mel_cache_round_trip_is_bit_exact(
        (rows, cols, values) in (1usize..6, 1usize..10).prop_flat_map(|(r, c)| {
            let finite = prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO;
            (Just(r), Just(c), prop::collection::vec(finite, r * c))
        })
    ) {
        let mel = MelSpectrogram::new(rows, cols, values).unwrap();
        let back = decode_mel(&encode_mel(&mel), Path::new("memory")).unwrap();
        prop_assert_eq!((back.rows, back.cols), (rows, cols));
        prop_assert!(back.values.iter().zip(&mel.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn correlation_matrices_keep_their_invariants(
        (g, sets) in label_sets(8, 40),
        features in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 5), 8),
        scale in 0.01..100.0f64,
    ) {
        let counts = count_cooccurrence(&sets, g).unwrap();
        for i in 0..g {
            prop_assert_eq!(counts.joint[i][i], counts.occurrences[i]);
            for j in 0..g {
                prop_assert_eq!(counts.joint[i][j], counts.joint[j][i]);
            }
        }
        let a1 = conditional_probability_matrix(&counts, DenominatorMode::Row);
        for i in 0..g {
            prop_assert!(a1[i].iter().all(|v| (0.0..=1.0).contains(v)));
            if counts.occurrences[i] > 0 {
                prop_assert_eq!(a1[i][i], 1.0);
            }
        }
        let feats = &features[..g];
        prop_assume!(feats.iter().all(|r| r.iter().any(|v| v.abs() > 1e-3)));
        let a2 = similarity_matrix(feats).unwrap();
        let scaled: Vec<Vec<f64>> = feats.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let a2_scaled = similarity_matrix(&scaled).unwrap();
        for i in 0..g {
            prop_assert!((a2[i][i] - 1.0).abs() < 1e-6);
            for j in 0..g {
                prop_assert_eq!(a2[i][j], a2[j][i]);
                prop_assert!((a2[i][j] - a2_scaled[i][j]).abs() < 1e-6);
            }
        }
        let a_hat = normalize_adjacency(&combine(&a1, &a2).unwrap());
        for row in &a_hat {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
