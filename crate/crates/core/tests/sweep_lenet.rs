//! Sweep behaviour on the LeNet fixture, using a subset of the test images.

mod common;

use posit_quant::io::{load_manifest, load_mnist};
use posit_quant::quantizer::Codec;
use posit_quant::sweep::{sweep_model, CodecList, SweepRecord};

use common::data_dir;

const IMAGES: usize = 1000;
const TREND_TOLERANCE: f64 = 0.02;

fn lenet_sweep(list: &str) -> Vec<SweepRecord> {
    let data = data_dir();
    let model = load_manifest(data.join("lenet/lenet.json")).unwrap();
    let set = load_mnist(
        data.join("mnist/t10k-images-idx3-ubyte.gz"),
        data.join("mnist/t10k-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    let codecs: CodecList = list.parse().unwrap();
    sweep_model(&model, &set, IMAGES, &codecs.0, false).unwrap()
}

#[test]
fn accuracy_trend_is_monotone_within_tolerance() {
    let records = lenet_sweep("posit:es=0:normalized:bits=2..8,fixed:bits=1..9");
    for pair in records[1..].windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.family() != b.family() {
            continue;
        }
        let (ra, rb) = (a.relative_accuracy().unwrap(), b.relative_accuracy().unwrap());
        assert!(
            rb >= ra - TREND_TOLERANCE,
            "{} at {} bits: {rb} after {ra}",
            b.family(),
            b.bits
        );
        assert!((0.0..=1.0).contains(&b.top1().unwrap()));
    }

    // Two-bit normalized posits leave only {-1, 0, 1}.
    let p2 = records
        .iter()
        .find(|r| r.family() == "nposit_es0" && r.bits == 2)
        .unwrap();
    assert!(p2.relative_accuracy().unwrap() < 0.95, "{p2:?}");
}

#[test]
fn identity_only_is_one_row() {
    let records = lenet_sweep("identity");
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].codec, Codec::Identity);
    assert_eq!(records[0].relative_accuracy(), Some(1.0));
}
