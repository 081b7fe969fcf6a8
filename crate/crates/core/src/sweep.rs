//! Accuracy sweep over codecs and bit widths.
//!
//! For every requested codec the model's parameters are quantized, the
//! network is evaluated on the dataset, and the top-1 accuracy is recorded
//! next to the full-precision baseline. Results are written as CSV with the
//! columns `codec,bits,top1,relative_accuracy,max_abs_error`, sorted by codec
//! family and width so identical configurations give identical files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed::{FixedFormat, MAX_FRACTION_BITS};
use crate::io::{load_manifest, load_mnist};
use crate::nn::{evaluate_top1, ImageSet, Model};
use crate::posit::{PositFormat, MAX_BITS, MAX_ES};
use crate::quantizer::{memory_reduction, quantize_model, Codec};

/// Relative accuracy at or above this counts as "less than 1% degradation".
pub const RELATIVE_ACCURACY_THRESHOLD: f64 = 0.99;

/// Pixel scaling applied by [`load_mnist`].
const MNIST_PIXEL_DIVISOR: f64 = 255.0;

/// A list of codecs parsed from a comma-separated specification such as
/// `posit:es=0:normalized:bits=2..8,fixed:f=0..15,identity`.
///
/// Items:
/// * `identity`
/// * `posit[:es=E][:normalized]:bits=A..B` (or `bits=N`); `es` defaults to 0
/// * `fixed:f=A..B` (fraction bits) or `fixed:bits=A..B` (total bits)
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodecList(pub Vec<Codec>);

impl FromStr for CodecList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut codecs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            codecs.extend(parse_item(item)?);
        }
        if codecs.is_empty() {
            return Err(Error::Config(format!("no codecs in `{s}`")));
        }
        sort_codecs(&mut codecs);
        Ok(Self(codecs))
    }
}

/// Orders codecs by family label, then width, and drops duplicates.
pub fn sort_codecs(codecs: &mut Vec<Codec>) {
    codecs.sort_by_key(|c| (c.family(), c.bits()));
    codecs.dedup();
}

fn parse_range(value: &str, item: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let bad = || Error::Config(format!("bad range `{value}` in `{item}`"));
    let (lo, hi) = match value.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => (value, value),
    };
    let lo: u32 = lo.parse().map_err(|_| bad())?;
    let hi: u32 = hi.parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn parse_item(item: &str) -> Result<Vec<Codec>> {
    let mut parts = item.split(':');
    let kind = parts.next().unwrap_or_default();
    let mut es = 0;
    let mut normalized = false;
    let mut bits = None;
    let mut frac = None;
    for part in parts {
        match part.split_once('=') {
            None if part == "normalized" => normalized = true,
            Some(("es", v)) => {
                es = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad es `{v}` in `{item}`")))?;
            }
            Some(("bits", v)) => bits = Some(parse_range(v, item)?),
            Some(("f", v)) => frac = Some(parse_range(v, item)?),
            _ => {
                return Err(Error::Config(format!(
                    "unknown option `{part}` in `{item}`"
                )))
            }
        }
    }
    let format_err = |e: Error| Error::Config(format!("`{item}`: {e}"));
    match kind {
        "identity" if bits.is_none() && frac.is_none() && !normalized => Ok(vec![Codec::Identity]),
        "posit" if frac.is_none() => {
            if es > MAX_ES {
                return Err(Error::Config(format!(
                    "`{item}`: es must be at most {MAX_ES}"
                )));
            }
            let range = bits.ok_or_else(|| Error::Config(format!("`{item}` needs bits=")))?;
            if *range.end() > MAX_BITS {
                return Err(Error::Config(format!(
                    "`{item}`: posits have at most {MAX_BITS} bits"
                )));
            }
            range
                .map(|n| {
                    let format = PositFormat::new(n, es).map_err(format_err)?;
                    Ok(if normalized {
                        Codec::NormalizedPosit(format)
                    } else {
                        Codec::Posit(format)
                    })
                })
                .collect()
        }
        "fixed" if !normalized => {
            let fractions = match (frac, bits) {
                (Some(f), None) => f,
                (None, Some(b)) if *b.start() >= 1 => b.start() - 1..=b.end() - 1,
                _ => {
                    return Err(Error::Config(format!(
                        "`{item}` needs exactly one of f= or bits= (at least 1 bit)"
                    )))
                }
            };
            if *fractions.end() > MAX_FRACTION_BITS {
                return Err(Error::Config(format!(
                    "`{item}`: at most {MAX_FRACTION_BITS} fraction bits"
                )));
            }
            fractions
                .map(|f| Ok(Codec::Fixed(FixedFormat::new(f).map_err(format_err)?)))
                .collect()
        }
        _ => Err(Error::Config(format!("unrecognized codec `{item}`"))),
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub manifest: PathBuf,
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Evaluate the first `limit` images; `None` means the whole set.
    pub limit: Option<usize>,
    pub codecs: Vec<Codec>,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    /// Keep biases at full precision.
    pub skip_bias: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.limit == Some(0) {
            return Err(Error::Config("limit must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub codec: Codec,
    pub bits: u32,
    pub outcome: std::result::Result<PointResult, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResult {
    pub top1: f64,
    /// `top1 / baseline top1`.
    pub relative_accuracy: f64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl SweepRecord {
    pub fn family(&self) -> String {
        self.codec.family()
    }

    pub fn result(&self) -> Option<&PointResult> {
        self.outcome.as_ref().ok()
    }

    pub fn relative_accuracy(&self) -> Option<f64> {
        self.result().map(|r| r.relative_accuracy)
    }

    pub fn top1(&self) -> Option<f64> {
        self.result().map(|r| r.top1)
    }
}

#[derive(Serialize)]
struct CsvRow {
    codec: String,
    bits: u32,
    top1: String,
    relative_accuracy: String,
    max_abs_error: String,
}

/// CSV text for `records` in the order given.
pub fn records_to_csv(records: &[SweepRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        let row = match &r.outcome {
            Ok(p) => CsvRow {
                codec: r.family(),
                bits: r.bits,
                top1: format!("{:.6}", p.top1),
                relative_accuracy: format!("{:.6}", p.relative_accuracy),
                max_abs_error: format!("{:.6e}", p.max_abs_error),
            },
            Err(_) => CsvRow {
                codec: r.family(),
                bits: r.bits,
                top1: "failed".into(),
                relative_accuracy: "failed".into(),
                max_abs_error: "failed".into(),
            },
        };
        writer.serialize(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

/// Evaluates every codec (plus the identity baseline) on an already loaded
/// model and dataset. Records are sorted by codec.
pub fn sweep_model<D: ImageSet + ?Sized>(
    model: &Model,
    dataset: &D,
    limit: usize,
    codecs: &[Codec],
    skip_bias: bool,
) -> Result<Vec<SweepRecord>> {
    let baseline = evaluate_top1(model, dataset, limit)?;
    if baseline == 0.0 {
        return Err(Error::Data(
            "baseline accuracy is zero; relative accuracy is undefined".into(),
        ));
    }
    let mut codecs: Vec<Codec> = codecs
        .iter()
        .copied()
        .filter(|c| *c != Codec::Identity)
        .collect();
    sort_codecs(&mut codecs);

    let mut records: Vec<SweepRecord> = codecs
        .par_iter()
        .map(|&codec| {
            let outcome =
                quantize_model(model, codec, skip_bias).and_then(|(quantized, report)| {
                    let top1 = evaluate_top1(&quantized, dataset, limit)?;
                    Ok(PointResult {
                        top1,
                        relative_accuracy: top1 / baseline,
                        max_abs_error: report.max_abs_error,
                        mean_abs_error: report.mean_abs_error,
                    })
                });
            SweepRecord {
                codec,
                bits: codec.bits(),
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    records.insert(
        0,
        SweepRecord {
            codec: Codec::Identity,
            bits: Codec::Identity.bits(),
            outcome: Ok(PointResult {
                top1: baseline,
                relative_accuracy: 1.0,
                max_abs_error: 0.0,
                mean_abs_error: 0.0,
            }),
        },
    );
    Ok(records)
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub csv: Vec<u8>,
    /// Accuracy recorded in the manifest at export time, if any.
    pub recorded_baseline: Option<f64>,
    pub images: usize,
}

impl SweepOutcome {
    pub fn baseline_top1(&self) -> f64 {
        self.records[0].top1().expect("baseline row")
    }
}

/// Loads the model and dataset named in `config`, sweeps, and writes the CSV
/// to `config.out` when set.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let model = load_manifest(&config.manifest)?;
    if model.preprocessing.pixel_divisor != MNIST_PIXEL_DIVISOR {
        return Err(Error::Config(format!(
            "model expects pixels divided by {}, the MNIST loader divides by {MNIST_PIXEL_DIVISOR}",
            model.preprocessing.pixel_divisor
        )));
    }
    let dataset = load_mnist(&config.images, &config.labels)?;
    let limit = config.limit.unwrap_or(dataset.len());
    if limit > dataset.len() {
        return Err(Error::Config(format!(
            "limit {limit} exceeds the {} available images",
            dataset.len()
        )));
    }

    let run = || sweep_model(&model, &dataset, limit, &config.codecs, config.skip_bias);
    let records = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let csv = records_to_csv(&records)?;
    if let Some(out) = &config.out {
        write_file(out, &csv)?;
    }
    Ok(SweepOutcome {
        records,
        csv,
        recorded_baseline: model.baseline.as_ref().map(|b| b.top1),
        images: limit,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Smallest width in a codec family that keeps relative accuracy at or
/// above [`RELATIVE_ACCURACY_THRESHOLD`].
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyThreshold {
    pub family: String,
    pub min_bits: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub family: String,
    pub reference: String,
    pub bits: Option<u32>,
    pub reference_bits: Option<u32>,
    /// Percent memory saved by `family` relative to `reference`; negative
    /// when `family` needs more bits.
    pub reduction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub families: Vec<FamilyThreshold>,
    pub comparisons: Vec<Comparison>,
}

/// Finds the minimal width per codec family reaching the accuracy threshold
/// and compares each posit family against fixed point.
pub fn summarize(records: &[SweepRecord]) -> Summary {
    let mut families: Vec<FamilyThreshold> = Vec::new();
    for r in records.iter().filter(|r| r.codec != Codec::Identity) {
        let family = r.family();
        let passes = r
            .relative_accuracy()
            .is_some_and(|a| a >= RELATIVE_ACCURACY_THRESHOLD);
        let entry = match families.iter_mut().find(|f| f.family == family) {
            Some(entry) => entry,
            None => {
                families.push(FamilyThreshold {
                    family,
                    min_bits: None,
                });
                families.last_mut().expect("just pushed")
            }
        };
        if passes && entry.min_bits.is_none_or(|b| r.bits < b) {
            entry.min_bits = Some(r.bits);
        }
    }

    let fixed = families.iter().find(|f| f.family == "fixed");
    let comparisons = families
        .iter()
        .filter(|f| f.family != "fixed")
        .map(|f| {
            let reference_bits = fixed.and_then(|x| x.min_bits);
            let reduction = match (f.min_bits, reference_bits) {
                (Some(a), Some(b)) if a <= b => memory_reduction(a, b).ok(),
                (Some(a), Some(b)) => memory_reduction(b, a).ok().map(|r| -r),
                _ => None,
            };
            Comparison {
                family: f.family.clone(),
                reference: "fixed".into(),
                bits: f.min_bits,
                reference_bits,
                reduction,
            }
        })
        .collect();
    Summary {
        families,
        comparisons,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "minimal bits with relative accuracy >= {RELATIVE_ACCURACY_THRESHOLD}:"
        )?;
        for family in &self.families {
            match family.min_bits {
                Some(bits) => writeln!(f, "  {}: {bits} bits", family.family)?,
                None => writeln!(f, "  {}: not achieved", family.family)?,
            }
        }
        if self.comparisons.is_empty() {
            writeln!(
                f,
                "memory reduction: not achieved (no pair of codec families to compare)"
            )?;
        }
        for c in &self.comparisons {
            match (c.bits, c.reference_bits, c.reduction) {
                (Some(a), Some(b), Some(r)) if r >= 0.0 => writeln!(
                    f,
                    "memory reduction {} ({a} bits) vs {} ({b} bits): {r:.1}%",
                    c.family, c.reference
                )?,
                (Some(a), Some(b), Some(r)) => writeln!(
                    f,
                    "memory reduction {} ({a} bits) vs {} ({b} bits): {r:.1}% ({} needs {:.1}% more memory)",
                    c.family,
                    c.reference,
                    c.family,
                    -r
                )?,
                _ => writeln!(f, "memory reduction {} vs {}: not achieved", c.family, c.reference)?,
            }
        }
        Ok(())
    }
}
