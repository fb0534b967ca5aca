//! Dataset ingestion, serialization, synthetic generators and shuffling.
//!
//! Files use the common sparse text format, one example per line:
//!
//! ```text
//! +1 1:0.5 3:2.0
//! -1 2:1   # trailing comments are ignored
//! ```
//!
//! Indices are 1-based on disk and kept as-is in memory; index 0 is the
//! bias feature, inserted with value 1 on every example.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{Feature, Label, LabeledExample, BIAS_INDEX};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub examples: Vec<LabeledExample<T>>,
    /// One more than the largest feature index.
    pub dimension: usize,
    pub name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, examples: Vec<LabeledExample<T>>) -> Self {
        let dimension = examples.iter().filter_map(|e| e.max_index()).max().map_or(1, |m| m + 1);
        Dataset { examples, dimension, name: name.into() }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn l2_normalized(&self) -> Self {
        Dataset {
            examples: self.examples.iter().map(|e| e.l2_normalized()).collect(),
            dimension: self.dimension,
            name: self.name.clone(),
        }
    }

    /// Splits off the first `n` examples; both halves keep the full
    /// dimension.
    pub fn split(mut self, n: usize) -> (Self, Self) {
        let rest = self.examples.split_off(n.min(self.examples.len()));
        let tail = Dataset { examples: rest, dimension: self.dimension, name: format!("{}-test", self.name) };
        self.name = format!("{}-train", self.name);
        (self, tail)
    }

    pub fn total_features(&self) -> u64 {
        self.examples.iter().map(|e| e.len() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Read a `0` label as `-1` instead of rejecting it.
    pub map01: bool,
    /// Scale non-bias features of every example to unit norm.
    pub l2norm: bool,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_label(tok: &str, line: usize, map01: bool) -> Result<Label> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("malformed label {tok:?}")))?;
    if v == 1.0 {
        Ok(Label::Pos)
    } else if v == -1.0 {
        Ok(Label::Neg)
    } else if v == 0.0 && map01 {
        Ok(Label::Neg)
    } else if v == 0.0 {
        Err(parse_err(line, "label 0 is not accepted without 0/1 remapping"))
    } else {
        Err(parse_err(line, format!("label {tok:?} is not +1 or -1")))
    }
}

/// Parses one line. Returns `Ok(None)` for blank and comment-only lines.
pub fn parse_line<T: Scalar>(text: &str, line: usize, id: u64, opts: ParseOptions) -> Result<Option<LabeledExample<T>>> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let mut tokens = body.split_whitespace();
    let label = parse_label(tokens.next().unwrap_or(""), line, opts.map01)?;
    let mut features: Vec<Feature<T>> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("malformed feature {tok:?}")))?;
        let index: usize = idx.parse().map_err(|_| parse_err(line, format!("malformed index {idx:?}")))?;
        if index == BIAS_INDEX {
            return Err(parse_err(line, "feature indices are 1-based; found index 0"));
        }
        let value: T = val.parse().map_err(|_| parse_err(line, format!("malformed value {val:?}")))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite value {val:?}")));
        }
        if let Some(prev) = features.last() {
            if prev.index == index {
                return Err(parse_err(line, format!("duplicate index {index}")));
            }
            if prev.index > index {
                return Err(parse_err(line, format!("non-increasing index {index} after {}", prev.index)));
            }
        }
        features.push(Feature { index, value });
    }
    let ex = LabeledExample::with_bias(id, label, features).map_err(|e| parse_err(line, e.to_string()))?;
    Ok(Some(if opts.l2norm { ex.l2_normalized() } else { ex }))
}

/// Parses a single non-blank line with default options.
pub fn parse_sparse_line<T: Scalar>(text: &str) -> Result<LabeledExample<T>> {
    parse_line(text, 1, 0, ParseOptions::default())?.ok_or_else(|| parse_err(1, "empty line"))
}

pub fn read_dataset<T: Scalar, R: BufRead>(reader: R, name: &str, opts: ParseOptions) -> Result<Dataset<T>> {
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: name.into(), source: e })?;
        if let Some(ex) = parse_line(&line, i + 1, examples.len() as u64, opts)? {
            examples.push(ex);
        }
    }
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset::new(name, examples))
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Loads a sparse text file; `.gz` files are decompressed on the fly.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, opts: ParseOptions) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let io_err = |e: io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let file = File::open(path).map_err(io_err)?;
    let reader: Box<dyn Read> = if is_gz(path) { Box::new(MultiGzDecoder::new(file)) } else { Box::new(file) };
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().trim_end_matches(".gz").to_string())
        .unwrap_or_default();
    read_dataset(BufReader::new(reader), &name, opts)
}

/// Formats one example, eliding the bias feature.
pub fn format_example<T: Scalar>(example: &LabeledExample<T>) -> String {
    let mut out = String::from(if example.label() == Label::Pos { "+1" } else { "-1" });
    for f in example.features().iter().filter(|f| f.index != BIAS_INDEX) {
        out.push_str(&format!(" {}:{}", f.index, f.value));
    }
    out
}

pub fn write_dataset<T: Scalar, W: Write>(dataset: &Dataset<T>, mut writer: W) -> io::Result<()> {
    for ex in &dataset.examples {
        writeln!(writer, "{}", format_example(ex))?;
    }
    writer.flush()
}

pub fn save_dataset<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let file = File::create(path).map_err(io_err)?;
    if is_gz(path) {
        let enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_dataset(dataset, enc).map_err(io_err)
    } else {
        write_dataset(dataset, BufWriter::new(file)).map_err(io_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Gaussian features pushed away from a random teacher hyperplane.
    GaussianSeparable,
    /// As above, then each label flipped with `flip_prob`.
    GaussianNoisy,
    /// ±1 features with a random label; under all-ones weights the margin
    /// terms are i.i.d. ±1 steps.
    RandomWalkTerms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_examples: usize,
    pub n_features: usize,
    pub margin: f64,
    pub flip_prob: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_examples == 0 || self.n_features == 0 {
            return Err(Error::domain("synthetic data needs at least one example and one feature"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::domain(format!("margin must be positive, got {}", self.margin)));
        }
        if !(0.0..0.5).contains(&self.flip_prob) {
            return Err(Error::domain(format!("flip probability must lie in [0, 0.5), got {}", self.flip_prob)));
        }
        Ok(())
    }
}

fn draw_teacher(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return u.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Unit teacher vector used by the Gaussian generators (feature `j + 1`
/// has weight `u[j]`).
pub fn synthetic_teacher(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    draw_teacher(&mut rng, spec.n_features)
}

/// Deterministic synthetic dataset with features `1..=n_features`.
pub fn generate_synthetic<T: Scalar>(spec: &SynthSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let d = spec.n_features;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(spec.n_examples);
    let name = match spec.kind {
        SynthKind::GaussianSeparable => "gaussian-sep",
        SynthKind::GaussianNoisy => "gaussian-noisy",
        SynthKind::RandomWalkTerms => "walk",
    };
    let to_features = |xs: Vec<f64>| -> Vec<Feature<T>> {
        xs.into_iter().enumerate().map(|(j, v)| Feature { index: j + 1, value: T::lit(v) }).collect()
    };
    match spec.kind {
        SynthKind::GaussianSeparable | SynthKind::GaussianNoisy => {
            let u = draw_teacher(&mut rng, d);
            for id in 0..spec.n_examples as u64 {
                let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let s: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                let label = Label::of_score(s);
                let shift = spec.margin * label.sign::<f64>();
                for (xj, uj) in x.iter_mut().zip(&u) {
                    *xj += shift * uj;
                }
                let mut label = label;
                if spec.kind == SynthKind::GaussianNoisy && rng.random::<f64>() < spec.flip_prob {
                    label = label.flipped();
                }
                examples.push(LabeledExample::with_bias(id, label, to_features(x))?);
            }
        }
        SynthKind::RandomWalkTerms => {
            for id in 0..spec.n_examples as u64 {
                let label = if rng.random::<bool>() { Label::Pos } else { Label::Neg };
                let x: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                examples.push(LabeledExample::with_bias(id, label, to_features(x))?);
            }
        }
    }
    let mut ds = Dataset::new(name, examples);
    ds.dimension = d + 1;
    Ok(ds)
}

/// Fisher–Yates permutation of `0..n` driven by a seeded ChaCha stream.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

pub fn shuffle<T: Scalar>(dataset: &Dataset<T>, seed: u64) -> Dataset<T> {
    Dataset {
        examples: shuffled_indices(dataset.len(), seed).into_iter().map(|i| dataset.examples[i].clone()).collect(),
        dimension: dataset.dimension,
        name: dataset.name.clone(),
    }
}
