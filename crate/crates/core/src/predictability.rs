//! Predictability limit of a POI visit sequence: a Lempel-Ziv entropy-rate
//! estimate inverted through Fano's inequality.

use serde::{Deserialize, Serialize};

use crate::baselines::NOISE;
use crate::error::{invalid, Result};
use crate::pctc::{PoiTree, Tier};
use crate::trajectory::Trajectory;

/// POI ids in visit order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiSequence {
    symbols: Vec<usize>,
    alphabet_size: usize,
}

impl PoiSequence {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(invalid("empty POI sequence"));
        }
        let mut distinct = symbols.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok(Self {
            alphabet_size: distinct.len(),
            symbols,
        })
    }

    /// Maps arbitrary tokens to ids by first occurrence.
    pub fn from_tokens<T: AsRef<str>>(tokens: &[T]) -> Result<Self> {
        let mut ids = std::collections::HashMap::new();
        let symbols = tokens
            .iter()
            .map(|t| {
                let next = ids.len();
                *ids.entry(t.as_ref().to_owned()).or_insert(next)
            })
            .collect();
        Self::new(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

fn collapse(ids: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for id in ids {
        if out.last() != Some(&id) {
            out.push(id);
        }
    }
    out
}

/// Visit sequence of the POIs at `tier`. Each fix maps to the POI holding
/// it, fixes outside every POI are dropped, and repeats of the same POI
/// collapse into one visit. The local tier uses every local POI plus the
/// global POIs without children.
pub fn sequence_from_tree(t: &Trajectory, tree: &PoiTree, tier: Tier) -> Result<PoiSequence> {
    let pois: Vec<&crate::pctc::Poi> = match tier {
        Tier::Global => tree.global_pois.iter().collect(),
        Tier::Local => tree.local_tier(),
    };
    if pois.is_empty() {
        return Err(invalid(format!("no POIs at the {tier:?} tier")));
    }
    let mut owner = vec![None; t.len()];
    for p in pois {
        for &i in &p.members {
            let slot = owner
                .get_mut(i)
                .ok_or_else(|| invalid(format!("POI {} member {i} out of range", p.id)))?;
            *slot = Some(p.id);
        }
    }
    PoiSequence::new(collapse(owner.into_iter().flatten()))
}

/// Visit sequence from per-stay-point cluster labels (already in time
/// order); noise is dropped.
pub fn sequence_from_labels(labels: &[i64]) -> Result<PoiSequence> {
    PoiSequence::new(collapse(labels.iter().filter(|&&l| l != NOISE).map(|&l| l as usize)))
}

/// `Λ_i`: one more than the longest substring starting at `i` that also
/// occurs entirely within `symbols[..i]`.
pub fn match_lengths(symbols: &[usize]) -> Vec<usize> {
    let n = symbols.len();
    let mut longest = vec![0usize; n];
    // diagonal d compares suffixes j and j + d
    for d in 1..n {
        let mut run = 0usize;
        for i in (d..n).rev() {
            run = if symbols[i] == symbols[i - d] { run + 1 } else { 0 };
            longest[i] = longest[i].max(run.min(d));
        }
    }
    longest.into_iter().map(|l| l + 1).collect()
}

/// Entropy-rate estimate in bits per symbol and the match lengths behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub entropy_bits: f64,
    pub match_lengths: Vec<usize>,
    /// Set for sequences shorter than two symbols, whose entropy is taken as 0.
    pub degenerate: bool,
}

pub fn lz_entropy_bits(seq: &PoiSequence) -> EntropyEstimate {
    let n = seq.len();
    let match_lengths = match_lengths(seq.symbols());
    if n < 2 {
        return EntropyEstimate {
            entropy_bits: 0.0,
            match_lengths,
            degenerate: true,
        };
    }
    let total: usize = match_lengths.iter().sum();
    EntropyEstimate {
        entropy_bits: n as f64 * (n as f64).log2() / total as f64,
        match_lengths,
        degenerate: false,
    }
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Right-hand side of Fano's relation, `H(Π) + (1 - Π) log2(N - 1)`.
pub fn fano_rhs(pi: f64, alphabet_size: usize) -> f64 {
    let tail = if alphabet_size > 1 {
        (1.0 - pi) * ((alphabet_size - 1) as f64).log2()
    } else {
        0.0
    };
    binary_entropy(pi) + tail
}

/// Largest `Π` in `[1/N, 1]` consistent with entropy `s` over `N` symbols.
pub fn solve_fano(s: f64, alphabet_size: usize) -> f64 {
    if alphabet_size <= 1 || s <= 0.0 {
        return 1.0;
    }
    let floor = 1.0 / alphabet_size as f64;
    if s >= (alphabet_size as f64).log2() {
        return floor;
    }
    let (mut lo, mut hi) = (floor, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if fano_rhs(mid, alphabet_size) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityResult {
    pub entropy_bits: f64,
    pub alphabet_size: usize,
    pub pi_max: f64,
    pub sequence_length: usize,
    pub match_lengths: Vec<usize>,
    pub degenerate: bool,
}

pub fn predictability_limit(seq: &PoiSequence) -> PredictabilityResult {
    let e = lz_entropy_bits(seq);
    let pi_max = if e.degenerate {
        1.0
    } else {
        solve_fano(e.entropy_bits, seq.alphabet_size())
    };
    PredictabilityResult {
        entropy_bits: e.entropy_bits,
        alphabet_size: seq.alphabet_size(),
        pi_max,
        sequence_length: seq.len(),
        match_lengths: e.match_lengths,
        degenerate: e.degenerate,
    }
}
