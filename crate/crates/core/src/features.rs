//! Feature maps turning a control path into per-time feature rows.

use crate::error::{Error, Result};
use crate::esn::Esn;
use crate::paths::Path;
use crate::rsig::Reservoir;
use crate::tsig::{flat_dim, signature_features};

pub trait FeatureMap {
    fn feature_dim(&self) -> usize;

    /// Required control dimension.
    fn input_dim(&self) -> usize;

    fn features(&self, x: &Path) -> Result<Path>;

    /// Features for several controls. Implementations may batch work.
    fn features_batch(&self, xs: &[&Path]) -> Result<Vec<Path>> {
        xs.iter().map(|x| self.features(x)).collect()
    }

    /// Leading rows per trajectory left out of training.
    fn washout(&self) -> usize {
        0
    }

    fn name(&self) -> &'static str;
}

impl FeatureMap for Reservoir {
    fn feature_dim(&self) -> usize {
        self.k()
    }

    fn input_dim(&self) -> usize {
        self.d()
    }

    fn features(&self, x: &Path) -> Result<Path> {
        self.evolve(x)
    }

    fn features_batch(&self, xs: &[&Path]) -> Result<Vec<Path>> {
        let mut out = Vec::with_capacity(xs.len());
        // Batch runs of equal length; keeps input order.
        let mut start = 0;
        while start < xs.len() {
            let len = xs[start].len();
            let end = xs[start..].iter().position(|x| x.len() != len).map_or(xs.len(), |p| start + p);
            out.extend(self.evolve_batch(&xs[start..end])?);
            start = end;
        }
        Ok(out)
    }

    fn name(&self) -> &'static str {
        "randomized_signature"
    }
}

impl FeatureMap for Esn {
    fn feature_dim(&self) -> usize {
        self.params().size
    }

    fn input_dim(&self) -> usize {
        Esn::input_dim(self)
    }

    fn features(&self, x: &Path) -> Result<Path> {
        self.evolve(x)
    }

    fn washout(&self) -> usize {
        self.params().washout
    }

    fn name(&self) -> &'static str {
        "esn"
    }
}

/// Flattened truncated signature, optionally with the constant level-0 term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureFeatures {
    dim: usize,
    order: usize,
    with_unit: bool,
}

impl SignatureFeatures {
    pub fn new(dim: usize, order: usize, with_unit: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("signature dimension must be at least 1"));
        }
        let k = flat_dim(dim, order).ok_or_else(|| Error::invalid("signature dimension overflows"))?;
        if k + usize::from(with_unit) == 0 {
            return Err(Error::invalid("signature feature map would be empty"));
        }
        Ok(Self { dim, order, with_unit })
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl FeatureMap for SignatureFeatures {
    fn feature_dim(&self) -> usize {
        flat_dim(self.dim, self.order).expect("checked on construction") + usize::from(self.with_unit)
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn features(&self, x: &Path) -> Result<Path> {
        if x.dim() != self.dim {
            return Err(Error::invalid(format!(
                "signature features built for dimension {}, got {}",
                self.dim,
                x.dim()
            )));
        }
        signature_features(x, self.order, self.with_unit)
    }

    fn name(&self) -> &'static str {
        "truncated_signature"
    }
}
