use std::collections::BTreeMap;

use posit_quant::fixed::FixedFormat;
use posit_quant::nn::{Layer, Model, Tensor};
use posit_quant::posit::PositFormat;
use posit_quant::quantizer::{quantize_model, quantize_tensor, Codec};
use proptest::prelude::*;

fn codec() -> impl Strategy<Value = Codec> {
    prop_oneof![
        Just(Codec::Identity),
        (2u32..=8).prop_map(|n| Codec::NormalizedPosit(PositFormat::new(n, 0).unwrap())),
        (2u32..=16, 0u32..=2)
            .prop_filter("es fits", |&(n, es)| es <= n - 2)
            .prop_map(|(n, es)| Codec::Posit(PositFormat::new(n, es).unwrap())),
        (0u32..=15).prop_map(|f| Codec::Fixed(FixedFormat::new(f).unwrap())),
    ]
}

fn tensor() -> impl Strategy<Value = Tensor> {
    (1usize..5, 1usize..20).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(-2.0f64..2.0, rows * cols)
            .prop_map(move |data| Tensor::new(vec![rows, cols], data).unwrap())
    })
}

proptest! {
    #[test]
    fn quantization_is_idempotent(t in tensor(), c in codec()) {
        let (once, report) = quantize_tensor(&t, c).unwrap();
        let (twice, again) = quantize_tensor(&once, c).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(again.max_abs_error, 0.0);
        prop_assert_eq!(once.shape(), t.shape());
        prop_assert_eq!(report.weight_count, t.len());
        prop_assert!(report.max_abs_error >= 0.0 && report.mean_abs_error >= 0.0);
        prop_assert!(report.mean_abs_error <= report.max_abs_error);
    }

    #[test]
    fn fixed_error_is_half_a_step(f in 0u32..=15, data in prop::collection::vec(-1.0f64..=1.0, 1..64)) {
        let fmt = FixedFormat::new(f).unwrap();
        let data: Vec<f64> = data.into_iter().map(|x| x.min(fmt.max_value())).collect();
        let (_, report) = quantize_tensor(&Tensor::vector(data), Codec::Fixed(fmt)).unwrap();
        prop_assert!(report.max_abs_error <= fmt.step() / 2.0);
    }

    #[test]
    fn normalized_posit_error_within_local_step(n in 2u32..=8, x in -1.0f64..=1.0) {
        let fmt = PositFormat::new(n, 0).unwrap();
        let mut values: Vec<f64> = fmt.codes().map(|c| c.decode_normalized().unwrap()).collect();
        values.sort_by(f64::total_cmp);
        let q = Codec::NormalizedPosit(fmt).round_trip(x).unwrap();
        prop_assert!(values.contains(&q));
        let minpos = fmt.minpos() / fmt.maxpos();
        if x.abs() < minpos {
            prop_assert!((q - x).abs() <= minpos);
        } else {
            let i = values.partition_point(|&v| v < x);
            let gap = if values[i] == x { 0.0 } else { values[i] - values[i - 1] };
            prop_assert!((q - x).abs() <= gap / 2.0, "x = {}, q = {}, gap = {}", x, q, gap);
        }
    }
}

#[test]
fn posit_steps_taper_toward_one() {
    for n in 4..=8 {
        let fmt = PositFormat::new(n, 0).unwrap();
        let mut values: Vec<f64> = fmt
            .codes()
            .map(|c| c.decode_normalized().unwrap())
            .collect();
        values.sort_by(f64::total_cmp);
        let positive: Vec<f64> = values.into_iter().filter(|&v| v > 0.0).collect();
        let near_zero = positive[1] - positive[0];
        let near_one = positive[positive.len() - 1] - positive[positive.len() - 2];
        assert!(near_one > near_zero, "n = {n}");

        // Fixed point with the same width has one uniform step.
        let fixed = FixedFormat::with_total_bits(n).unwrap();
        assert!(near_zero < fixed.step(), "n = {n}");
    }
}

#[test]
fn skip_bias_keeps_biases() {
    let params = BTreeMap::from([
        (
            "w".to_string(),
            Tensor::new(vec![2, 2], vec![0.3, -0.7, 0.11, 0.9]).unwrap(),
        ),
        ("b".to_string(), Tensor::vector(vec![0.123, -0.456])),
    ]);
    let layers = vec![
        Layer::Dense {
            weight: "w".into(),
            bias: Some("b".into()),
        },
        Layer::Softmax,
    ];
    let model = Model::new("m", vec![2], 2, layers, params).unwrap();
    let codec = Codec::Fixed(FixedFormat::new(2).unwrap());

    let (q, report) = quantize_model(&model, codec, true).unwrap();
    assert_eq!(q.param("b"), model.param("b"));
    assert_eq!(q.param("w").unwrap().data(), &[0.25, -0.75, 0.0, 0.75]);
    assert_eq!(report.weight_count, 4);

    let (q, report) = quantize_model(&model, codec, false).unwrap();
    assert_eq!(q.param("b").unwrap().data(), &[0.0, -0.5]);
    assert_eq!(report.weight_count, 6);

    let (q, report) = quantize_model(&model, Codec::Identity, false).unwrap();
    assert_eq!(q, model);
    assert_eq!(report.max_abs_error, 0.0);
}
