use polyseg::predictor::{model_gradcheck, tiny_descriptor, Descriptor, ForwardCache, Regressor, Tensor};
use proptest::prelude::*;

fn small() -> Descriptor {
    Descriptor { channels: vec![4, 8], hidden: vec![16], ..Descriptor::reference(16, 8) }
}

fn input(d: &Descriptor, batch: usize, values: Vec<f32>) -> Tensor<f32> {
    let n = batch * d.input_size * d.input_size * d.input_channels;
    let data = values.iter().cycle().take(n).copied().collect();
    Tensor::new(vec![batch, d.input_size, d.input_size, d.input_channels], data).unwrap()
}

#[test]
fn tiny_model_gradients_match_finite_differences() {
    for seed in [0, 7, 28] {
        let r = model_gradcheck(tiny_descriptor(), seed, 100, 1e-6).unwrap();
        assert_eq!(r.checked, 100);
        assert!(r.failures == 0 && r.max_rel_err < 1e-6, "seed {seed}: {r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_is_pure(seed in 0u64..1000, values in prop::collection::vec(-3.0f32..3.0, 1..64)) {
        let d = small();
        let model = Regressor::<f32>::init(d.clone(), seed).unwrap();
        let x = input(&d, 2, values);
        let a = model.predict(&x).unwrap();
        let mut cache = ForwardCache::default();
        let _ = model.forward_into(&input(&d, 2, vec![0.5]), &mut cache).unwrap();
        let b = model.forward_into(&x, &mut cache).unwrap();
        let c = model.clone().predict(&x).unwrap();
        prop_assert_eq!(a.data(), b.data());
        prop_assert_eq!(a.data(), c.data());
    }

    #[test]
    fn outputs_stay_inside_radius_range(
        seed in 0u64..1000,
        scale in prop::sample::select(vec![0.0f32, 1.0, 1e3, 1e6, -1e6]),
        values in prop::collection::vec(-1.0f32..1.0, 1..32),
    ) {
        let d = small();
        let model = Regressor::<f32>::init(d.clone(), seed).unwrap();
        let out = model.predict(&input(&d, 1, values.iter().map(|v| v * scale).collect())).unwrap();
        let r_max = d.r_max as f32;
        prop_assert!(out.data().iter().all(|&r| r > 0.0 && r < r_max), "{:?}", out.data());
    }
}
