//! Truncated signatures of piecewise-linear paths.
//!
//! A linear segment with increment `v` has signature `exp(v) = (1, v, v⊗v/2!, ...)`
//! and the signature of a concatenation is the truncated tensor product of the
//! pieces. Level `l` is stored densely with row-major word index
//! `(i_1, ..., i_l)`, i.e. `i_1 d^{l-1} + ... + i_l`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::Path;

/// Element `(1, S^1, ..., S^M)` of the truncated tensor algebra over `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSig {
    dim: usize,
    order: usize,
    levels: Vec<Vec<f64>>,
}

/// Number of signature terms of levels `1..=order`, `(d^{M+1} - 1)/(d - 1) - 1`.
/// `None` on overflow.
pub fn flat_dim(dim: usize, order: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut width: usize = 1;
    for _ in 0..order {
        width = width.checked_mul(dim)?;
        total = total.checked_add(width)?;
    }
    Some(total)
}

fn reciprocal_factorials(order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut f = 1.0;
    out.push(1.0);
    for l in 1..=order {
        f /= l as f64;
        out.push(f);
    }
    out
}

/// `out[ia * b.len() + ib] += a[ia] * b[ib]`
#[inline]
fn add_outer(out: &mut [f64], a: &[f64], b: &[f64]) {
    let nb = b.len();
    for (ia, &av) in a.iter().enumerate() {
        let row = &mut out[ia * nb..(ia + 1) * nb];
        for (o, &bv) in row.iter_mut().zip(b) {
            *o += av * bv;
        }
    }
}

impl TruncatedSig {
    /// The unit `(1, 0, ..., 0)`.
    pub fn identity(dim: usize, order: usize) -> Self {
        assert!(dim > 0, "signature dimension must be at least 1");
        let levels = (0..=order).map(|l| {
            let mut v = vec![0.0; dim.pow(l as u32)];
            if l == 0 {
                v[0] = 1.0;
            }
            v
        });
        Self { dim, order, levels: levels.collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Entry for the word `(i_1, ..., i_l)`, letters zero-based.
    pub fn word(&self, word: &[usize]) -> f64 {
        let idx = word.iter().fold(0, |acc, &i| acc * self.dim + i);
        self.levels[word.len()][idx]
    }

    /// Levels `1..=M` concatenated, level 0 dropped.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(flat_dim(self.dim, self.order).unwrap_or(0));
        for level in &self.levels[1..] {
            out.extend_from_slice(level);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(|v| v.is_finite())
    }
}

/// Signature of a single linear segment, `increment^{⊗l} / l!` at level `l`.
pub fn segment_signature(increment: &[f64], order: usize) -> TruncatedSig {
    let dim = increment.len();
    let recip = reciprocal_factorials(order);
    let mut levels = Vec::with_capacity(order + 1);
    levels.push(vec![1.0]);
    let mut power = vec![1.0];
    for r in recip.iter().skip(1) {
        let mut next = vec![0.0; power.len() * dim];
        add_outer(&mut next, &power, increment);
        levels.push(next.iter().map(|v| v * r).collect());
        power = next;
    }
    TruncatedSig { dim, order, levels }
}

/// Truncated tensor product: level `l` is `Σ_{a+b=l} s1[a] ⊗ s2[b]`,
/// accumulated in increasing `a`.
pub fn chen_product(s1: &TruncatedSig, s2: &TruncatedSig) -> Result<TruncatedSig> {
    if s1.dim != s2.dim || s1.order != s2.order {
        return Err(Error::invalid(format!(
            "cannot multiply signatures of shape (d={}, M={}) and (d={}, M={})",
            s1.dim, s1.order, s2.dim, s2.order
        )));
    }
    let mut levels = Vec::with_capacity(s1.order + 1);
    for l in 0..=s1.order {
        let mut out = vec![0.0; s1.levels[l].len()];
        for a in 0..=l {
            add_outer(&mut out, &s1.levels[a], &s2.levels[l - a]);
        }
        levels.push(out);
    }
    Ok(TruncatedSig { dim: s1.dim, order: s1.order, levels })
}

/// Signatures of `x` on `[t_0, t_n]` for every grid index `n`.
pub fn signature_stream(x: &Path, order: usize) -> Vec<TruncatedSig> {
    let mut out = Vec::with_capacity(x.len());
    let mut current = TruncatedSig::identity(x.dim(), order);
    out.push(current.clone());
    for inc in x.increments() {
        current = chen_product(&current, &segment_signature(&inc, order)).expect("shapes agree");
        out.push(current.clone());
    }
    out
}

/// Running signature updated in place one segment at a time.
///
/// Produces bitwise the same values as folding [`chen_product`] over
/// [`segment_signature`]s, without keeping the whole stream in memory.
/// Optionally restricted to words whose first letter is fixed, which splits
/// the level-`l` storage by a factor `d`.
#[derive(Debug, Clone)]
pub struct SignatureAccumulator {
    dim: usize,
    order: usize,
    first_letter: Option<usize>,
    levels: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl SignatureAccumulator {
    pub fn new(dim: usize, order: usize) -> Self {
        Self::build(dim, order, None)
    }

    /// Tracks only words starting with `letter` (levels `>= 1`).
    pub fn restricted(dim: usize, order: usize, letter: usize) -> Result<Self> {
        if letter >= dim {
            return Err(Error::invalid(format!("letter {letter} out of range for dimension {dim}")));
        }
        Ok(Self::build(dim, order, Some(letter)))
    }

    fn build(dim: usize, order: usize, first_letter: Option<usize>) -> Self {
        assert!(dim > 0, "signature dimension must be at least 1");
        let width = |l: usize| match (l, first_letter) {
            (0, _) => 1,
            (l, Some(_)) => dim.pow(l as u32 - 1),
            (l, None) => dim.pow(l as u32),
        };
        let mut levels: Vec<Vec<f64>> = (0..=order).map(|l| vec![0.0; width(l)]).collect();
        levels[0][0] = 1.0;
        Self { dim, order, first_letter, levels, scratch: Vec::new() }
    }

    /// Length of [`SignatureAccumulator::flatten_into`]'s output.
    pub fn flat_len(&self) -> usize {
        self.levels[1..].iter().map(Vec::len).sum()
    }

    pub fn reset(&mut self) {
        for (l, level) in self.levels.iter_mut().enumerate() {
            level.fill(0.0);
            if l == 0 {
                level[0] = 1.0;
            }
        }
    }

    /// Multiplies the running signature by `exp(increment)` on the right.
    pub fn push_increment(&mut self, increment: &[f64]) {
        assert_eq!(increment.len(), self.dim, "increment dimension mismatch");
        let seg = segment_signature(increment, self.order);
        for l in (1..=self.order).rev() {
            let mut out = std::mem::take(&mut self.scratch);
            out.clear();
            out.resize(self.levels[l].len(), 0.0);
            let head = match self.first_letter {
                Some(c) => {
                    let w = self.levels[l].len();
                    &seg.levels[l][c * w..(c + 1) * w]
                }
                None => &seg.levels[l][..],
            };
            add_outer(&mut out, &self.levels[0], head);
            for a in 1..=l {
                add_outer(&mut out, &self.levels[a], &seg.levels[l - a]);
            }
            self.scratch = std::mem::replace(&mut self.levels[l], out);
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for level in &self.levels[1..] {
            out.extend_from_slice(level);
        }
    }

    pub fn to_signature(&self) -> Option<TruncatedSig> {
        match self.first_letter {
            Some(_) => None,
            None => Some(TruncatedSig { dim: self.dim, order: self.order, levels: self.levels.clone() }),
        }
    }
}

/// Flattened signature of `x` at every grid time as a feature path. With
/// `with_unit` the constant level-0 term is prepended as feature 0.
pub fn signature_features(x: &Path, order: usize, with_unit: bool) -> Result<Path> {
    let k = flat_dim(x.dim(), order).ok_or_else(|| Error::invalid("signature dimension overflows"))?
        + usize::from(with_unit);
    if k == 0 {
        return Err(Error::invalid("order-0 signature without unit has no features"));
    }
    let mut acc = SignatureAccumulator::new(x.dim(), order);
    let mut values = Vec::with_capacity(k * x.len());
    let mut inc = vec![0.0; x.dim()];
    for n in 0..x.len() {
        if n > 0 {
            x.increment_into(n - 1, &mut inc);
            acc.push_increment(&inc);
        }
        if with_unit {
            values.push(1.0);
        }
        acc.flatten_into(&mut values);
    }
    Path::new(Arc::clone(x.grid()), k, values)
}
