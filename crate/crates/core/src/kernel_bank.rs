//! Random convolution kernel banks for the three target models, plus
//! text serialization and deletion of pruned kernels.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::transform::convolve1d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    RocketPpvMax,
    RocketPpv,
    MiniRocket,
}

impl ModelKind {
    /// PPV+MAX for the full model, PPV only otherwise.
    pub fn features_per_kernel(self) -> usize {
        match self {
            ModelKind::RocketPpvMax => 2,
            ModelKind::RocketPpv | ModelKind::MiniRocket => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RocketPpvMax => "rocket-ppv-max",
            ModelKind::RocketPpv => "rocket-ppv",
            ModelKind::MiniRocket => "minirocket",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rocket-ppv-max" => Ok(ModelKind::RocketPpvMax),
            "rocket-ppv" => Ok(ModelKind::RocketPpv),
            "minirocket" => Ok(ModelKind::MiniRocket),
            other => Err(Error::InvalidParam(format!("unknown model kind `{other}`"))),
        }
    }
}

/// One random 1-D convolution kernel. `bias` is added to every convolution
/// output; `padding` is the symmetric zero-pad amount.
#[derive(Debug, Clone)]
pub struct RocketKernel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    pub padding: usize,
    pub group_id: usize,
}

impl RocketKernel {
    /// Span of the dilated kernel in input samples.
    pub fn effective_span(&self) -> usize {
        (self.weights.len() - 1) * self.dilation + 1
    }
}

/// An ordered bank of kernels. Iteration order is generation order, which is
/// also ascending `group_id` order for freshly generated banks; pruned banks
/// keep the original ids.
#[derive(Debug, Clone)]
pub struct KernelBank {
    pub kernels: Vec<RocketKernel>,
    pub model_kind: ModelKind,
    pub seed: u64,
    /// Series length the bank was generated for.
    pub series_len: usize,
}

impl KernelBank {
    pub fn num_groups(&self) -> usize {
        self.kernels.len()
    }

    pub fn features_per_kernel(&self) -> usize {
        self.model_kind.features_per_kernel()
    }

    /// H = G × features-per-kernel.
    pub fn num_features(&self) -> usize {
        self.num_groups() * self.features_per_kernel()
    }
}

const ROCKET_LENGTHS: [usize; 3] = [7, 9, 11];

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generate `g` random ROCKET kernels for series of length `series_len`.
///
/// Per kernel: length uniform on {7, 9, 11}; weights standard-normal then
/// mean-centered; bias uniform on [-1, 1]; dilation 2^a with a uniform on
/// [0, log2((L-1)/(l-1))], truncated to an integer; padding keeps the output
/// the input length with probability 1/2 and is zero otherwise.
pub fn generate_rocket(
    g: usize,
    series_len: usize,
    seed: u64,
    model_kind: ModelKind,
) -> Result<KernelBank> {
    if model_kind == ModelKind::MiniRocket {
        return Err(Error::InvalidParam(
            "generate_rocket handles rocket-ppv-max and rocket-ppv only".into(),
        ));
    }
    if g == 0 {
        return Err(Error::InvalidParam("need at least one kernel".into()));
    }
    let max_len = *ROCKET_LENGTHS.iter().max().unwrap();
    if series_len < max_len {
        return Err(Error::SeriesTooShort {
            len: series_len,
            min: max_len,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernels = Vec::with_capacity(g);
    for group_id in 0..g {
        let length = ROCKET_LENGTHS[rng.gen_range(0..ROCKET_LENGTHS.len())];
        let mut weights: Vec<f64> = (0..length).map(|_| sample_normal(&mut rng)).collect();
        let mean = weights.iter().sum::<f64>() / length as f64;
        for w in &mut weights {
            *w -= mean;
        }
        let bias = rng.gen_range(-1.0..1.0);
        let max_exp = ((series_len - 1) as f64 / (length - 1) as f64).log2();
        let dilation = (2f64.powf(rng.gen_range(0.0..=max_exp)) as usize).max(1);
        let padding = if rng.gen_range(0..2) == 1 {
            ((length - 1) * dilation) / 2
        } else {
            0
        };
        kernels.push(RocketKernel {
            weights,
            bias,
            dilation,
            padding,
            group_id,
        });
    }
    Ok(KernelBank {
        kernels,
        model_kind,
        seed,
        series_len,
    })
}

/// The 84 MINIROCKET base patterns: length 9, weights -1 except three
/// positions of +2, one pattern per 3-subset of {0..8}.
pub fn minirocket_patterns() -> Vec<[f64; 9]> {
    let mut patterns = Vec::with_capacity(84);
    for a in 0..9 {
        for b in a + 1..9 {
            for c in b + 1..9 {
                let mut w = [-1.0; 9];
                w[a] = 2.0;
                w[b] = 2.0;
                w[c] = 2.0;
                patterns.push(w);
            }
        }
    }
    patterns
}

/// Interpolated quantile of a sorted slice, NumPy-style.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Generate a MINIROCKET bank totalling `h` kernel/dilation/bias
/// combinations (one PPV feature each, so G = H).
///
/// Each of the 84 base patterns receives ⌊h/84⌋ combinations (+1 for the
/// first h mod 84 patterns), with dilations spread log-uniformly over the
/// valid range, alternating zero/same-length padding. Biases come from
/// quantiles of the pattern's convolution output on one uniformly chosen
/// training series per (dilation, padding) slot group.
pub fn generate_minirocket(h: usize, train: &TimeSeriesDataset, seed: u64) -> Result<KernelBank> {
    if h < 84 {
        return Err(Error::InvalidParam(format!(
            "minirocket needs at least 84 features, got {h}"
        )));
    }
    if train.num_samples() == 0 {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    let series_len = train.series_len();
    if series_len < 9 {
        return Err(Error::SeriesTooShort {
            len: series_len,
            min: 9,
        });
    }

    let patterns = minirocket_patterns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_exp = ((series_len - 1) as f64 / 8.0).log2();
    let n_train = train.num_samples();

    let mut kernels = Vec::with_capacity(h);
    let mut group_id = 0usize;
    for (p, pattern) in patterns.iter().enumerate() {
        let combos = h / 84 + usize::from(p < h % 84);
        // dilation/padding per slot, log-uniform over the valid range
        let slots: Vec<(usize, usize)> = (0..combos)
            .map(|j| {
                let exp = if combos > 1 {
                    max_exp * j as f64 / (combos - 1) as f64
                } else {
                    0.0
                };
                let dilation = (2f64.powf(exp) as usize).max(1);
                let padding = if j % 2 == 1 { 4 * dilation } else { 0 };
                (dilation, padding)
            })
            .collect();

        let mut s = 0;
        while s < combos {
            let (dilation, padding) = slots[s];
            let mut e = s;
            while e < combos && slots[e] == (dilation, padding) {
                e += 1;
            }
            let q_count = e - s;
            // biases from quantiles of the convolution of one random series
            let probe = RocketKernel {
                weights: pattern.to_vec(),
                bias: 0.0,
                dilation,
                padding,
                group_id: 0,
            };
            let sample_idx = rng.gen_range(0..n_train);
            let row = train.series.row(sample_idx);
            let mut conv = convolve1d(row.as_slice().expect("row-major"), &probe)?;
            conv.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for r in 0..q_count {
                let q = (r + 1) as f64 / (q_count + 1) as f64;
                let cut = quantile_sorted(&conv, q);
                kernels.push(RocketKernel {
                    weights: pattern.to_vec(),
                    bias: -cut,
                    dilation,
                    padding,
                    group_id,
                });
                group_id += 1;
            }
            s = e;
        }
    }
    debug_assert_eq!(kernels.len(), h);
    Ok(KernelBank {
        kernels,
        model_kind: ModelKind::MiniRocket,
        seed,
        series_len,
    })
}

/// Keep exactly the kernels whose `group_id` is in `keep`, in their original
/// relative order. Ids are preserved, so pruning composes by intersection.
pub fn prune_bank(bank: &KernelBank, keep: &BTreeSet<usize>) -> Result<KernelBank> {
    if keep.is_empty() {
        return Err(Error::EmptySelection);
    }
    let known: BTreeSet<usize> = bank.kernels.iter().map(|k| k.group_id).collect();
    for id in keep {
        if !known.contains(id) {
            return Err(Error::UnknownGroup(*id));
        }
    }
    let kernels: Vec<RocketKernel> = bank
        .kernels
        .iter()
        .filter(|k| keep.contains(&k.group_id))
        .cloned()
        .collect();
    Ok(KernelBank {
        kernels,
        model_kind: bank.model_kind,
        seed: bank.seed,
        series_len: bank.series_len,
    })
}

/// Text serialization: a header line, then one kernel per line
/// (`kind length weights... bias dilation padding group_id`).
pub fn save_bank(bank: &KernelBank, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#rocket-prune-bank seed={} series_len={} model={}",
        bank.seed, bank.series_len, bank.model_kind
    );
    for k in &bank.kernels {
        let _ = write!(out, "{} {}", bank.model_kind, k.weights.len());
        for w in &k.weights {
            let _ = write!(out, " {w}");
        }
        let _ = writeln!(out, " {} {} {} {}", k.bias, k.dilation, k.padding, k.group_id);
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bank(path: &Path) -> Result<KernelBank> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::BadBundle("empty bank file".into()))?;
    let mut seed = 0u64;
    let mut series_len = 0usize;
    let mut model_kind: Option<ModelKind> = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = field.strip_prefix("seed=") {
            seed = v
                .parse()
                .map_err(|_| Error::BadBundle("bad seed in bank header".into()))?;
        } else if let Some(v) = field.strip_prefix("series_len=") {
            series_len = v
                .parse()
                .map_err(|_| Error::BadBundle("bad series_len in bank header".into()))?;
        } else if let Some(v) = field.strip_prefix("model=") {
            model_kind = Some(v.parse()?);
        }
    }
    let model_kind = model_kind.ok_or_else(|| Error::BadBundle("bank header lacks model".into()))?;

    let mut kernels = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::BadBundle(format!("malformed kernel line: {line}"));
        if toks.len() < 6 {
            return Err(bad());
        }
        let length: usize = toks[1].parse().map_err(|_| bad())?;
        if toks.len() != length + 6 {
            return Err(bad());
        }
        let mut weights = Vec::with_capacity(length);
        for t in &toks[2..2 + length] {
            weights.push(t.parse::<f64>().map_err(|_| bad())?);
        }
        let bias: f64 = toks[2 + length].parse().map_err(|_| bad())?;
        let dilation: usize = toks[3 + length].parse().map_err(|_| bad())?;
        let padding: usize = toks[4 + length].parse().map_err(|_| bad())?;
        let group_id: usize = toks[5 + length].parse().map_err(|_| bad())?;
        kernels.push(RocketKernel {
            weights,
            bias,
            dilation,
            padding,
            group_id,
        });
    }
    if kernels.is_empty() {
        return Err(Error::BadBundle("bank file has no kernels".into()));
    }
    Ok(KernelBank {
        kernels,
        model_kind,
        seed,
        series_len,
    })
}
