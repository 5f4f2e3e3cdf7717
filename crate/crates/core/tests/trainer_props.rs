use polyseg::dataset::{synth_generate, SynthSpec};
use polyseg::predictor::{Optimizer, OptimizerKind, Regressor, Tensor};
use polyseg::trainer::{input_image, train, ErrorHistogram, TrainConfig, TrainLoss};
use proptest::prelude::*;

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

#[test]
fn single_small_step_does_not_increase_loss() {
    let samples = synth_generate(&SynthSpec { count: 50, size: 32, n_v: 16, seed: 3, lumen_radius_frac: 0.17, ..SynthSpec::default() }).unwrap();
    let config = TrainConfig { n_v: 16, channels: vec![4, 8], hidden: vec![16], ..TrainConfig::default() };
    let desc = config.descriptor(32);
    let mut held = 0;
    for (seed, sample) in samples.iter().enumerate() {
        let mut model = Regressor::<f32>::init(desc.clone(), seed as u64).unwrap();
        let img = input_image(sample, true);
        let x = Tensor::new(vec![1, img.height, img.width, img.channels], img.data.clone()).unwrap();
        let loss_of = |m: &Regressor<f32>| {
            let (out, cache) = m.forward(&x).unwrap();
            let row: Vec<f64> = out.data().iter().map(|&r| r as f64).collect();
            let (pl, pm) = row.split_at(16);
            (TrainLoss::JmExact.evaluate(pl, pm, sample).unwrap(), cache)
        };
        let (before, cache) = loss_of(&model);
        let d = Tensor::new(vec![1, 32], before.grad.iter().map(|&g| g as f32).collect()).unwrap();
        let grads = model.backward(&cache, &d).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 1e-4, &model);
        opt.step(&mut model, &grads).unwrap();
        let (after, _) = loss_of(&model);
        if after.value <= before.value {
            held += 1;
        }
    }
    assert!(held >= 48, "descent held on {held} of 50 seeds");
}

#[test]
fn validation_loss_and_jm_move_together() {
    let data = synth_generate(&SynthSpec { count: 80, size: 32, n_v: 16, seed: 5, lumen_radius_frac: 0.17, ..SynthSpec::default() }).unwrap();
    let config = TrainConfig {
        n_v: 16,
        epochs: 30,
        batch: 16,
        channels: vec![8, 16],
        hidden: vec![32],
        eval_every: 2,
        eval_resolution: 256,
        split_fraction: 0.75,
        ..TrainConfig::default()
    };
    let out = train(&config, &data, None).unwrap();
    let vals: Vec<_> = out.log.iter().filter_map(|r| r.val.clone()).collect();
    assert_eq!(vals.len(), 15);
    let loss: Vec<f64> = vals.iter().map(|v| v.jm_loss).collect();
    let jm: Vec<f64> = vals.iter().map(|v| (v.jm_lumen + v.jm_media) / 2.0).collect();
    let rho = spearman(&loss, &jm);
    assert!(rho <= -0.8, "spearman {rho}");
}

proptest! {
    #[test]
    fn histogram_conserves_counts(errors in prop::collection::vec(-20.0f64..20.0, 0..500), w in 0.05f64..3.0) {
        let h = ErrorHistogram::from_errors(&errors, w);
        prop_assert_eq!(h.counts.iter().sum::<usize>(), errors.len());
        prop_assert_eq!(h.total, errors.len());
        for (l, &c) in h.bin_left.iter().zip(&h.counts) {
            let inside = errors.iter().filter(|&&e| e >= *l - 1e-9 && e < l + w + 1e-9).count();
            prop_assert!(c <= inside);
        }
    }
}
