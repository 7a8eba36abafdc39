//! Projection and reflection onto products of nonnegative orthants and
//! Lorentz cones.

use nalgebra::DVector;

use crate::error::{Result, SolverError};
use crate::problem::{ConeKind, ConeSpec};

/// Cone operators for a fixed product cone `K`, optionally carrying the
/// per-block restriction of a diagonal scaling `O`.
///
/// Scales are one positive scalar per block, so `O⁻¹K = K` and projection
/// always runs against the unscaled cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeOps {
    spec: ConeSpec,
    block_scales: Option<Vec<f64>>,
}

impl ConeOps {
    pub fn new(spec: ConeSpec) -> Self {
        Self {
            spec,
            block_scales: None,
        }
    }

    /// Attaches per-block scale factors. For NonNeg blocks the scale is stored
    /// per coordinate, so `scales` has one entry per coordinate of a NonNeg block
    /// and one entry per Lorentz block (see [`ConeOps::expand_scales`]).
    pub fn with_scales(spec: ConeSpec, diag: &DVector<f64>) -> Result<Self> {
        check_block_constant(&spec, diag)?;
        let mut scales = Vec::new();
        for (kind, range) in spec.block_ranges() {
            match kind {
                ConeKind::NonNeg => scales.extend(range.map(|j| diag[j])),
                ConeKind::Lorentz => scales.push(diag[range.start]),
            }
        }
        Ok(Self {
            spec,
            block_scales: Some(scales),
        })
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.total_dim()
    }

    pub fn block_scales(&self) -> Option<&[f64]> {
        self.block_scales.as_deref()
    }

    /// Expands the stored scales back into a full diagonal, or all ones.
    pub fn expand_scales(&self) -> DVector<f64> {
        let n = self.dim();
        let Some(scales) = &self.block_scales else {
            return DVector::from_element(n, 1.0);
        };
        let mut out = DVector::zeros(n);
        let mut k = 0;
        for (kind, range) in self.spec.block_ranges() {
            match kind {
                ConeKind::NonNeg => {
                    for j in range {
                        out[j] = scales[k];
                        k += 1;
                    }
                }
                ConeKind::Lorentz => {
                    for j in range {
                        out[j] = scales[k];
                    }
                    k += 1;
                }
            }
        }
        out
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.project_in_place(out.as_mut_slice());
        out
    }

    pub fn project_in_place(&self, v: &mut [f64]) {
        for (kind, range) in self.spec.block_ranges() {
            let block = &mut v[range];
            match kind {
                ConeKind::NonNeg => block.iter_mut().for_each(|x| *x = x.max(0.0)),
                ConeKind::Lorentz => project_lorentz(block),
            }
        }
    }

    /// `2·proj_K(v) − v`.
    pub fn abs_cone(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.abs_in_place(out.as_mut_slice());
        out
    }

    pub fn abs_in_place(&self, v: &mut [f64]) {
        for (kind, range) in self.spec.block_ranges() {
            let block = &mut v[range];
            match kind {
                ConeKind::NonNeg => block.iter_mut().for_each(|x| *x = x.abs()),
                ConeKind::Lorentz => {
                    let orig: Vec<f64> = block.to_vec();
                    project_lorentz(block);
                    for (b, o) in block.iter_mut().zip(orig) {
                        *b = 2.0 * *b - o;
                    }
                }
            }
        }
    }

    /// Euclidean distance from `v` to `K`.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// The vector with `1` on every NonNeg coordinate and on the leading
    /// coordinate of each Lorentz block, `0` elsewhere. It lies in the interior of `K`.
    pub fn identity_element(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        for (kind, range) in self.spec.block_ranges() {
            match kind {
                ConeKind::NonNeg => range.for_each(|j| e[j] = 1.0),
                ConeKind::Lorentz => e[range.start] = 1.0,
            }
        }
        e
    }
}

/// Nearest point in `{w : w₁ ≥ ‖w₂..‖}`, written over `block`.
fn project_lorentz(block: &mut [f64]) {
    let head = block[0];
    let tail_norm = block[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if tail_norm <= head {
        return;
    }
    if tail_norm <= -head {
        block.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (head + tail_norm);
    block[0] = alpha;
    let ratio = alpha / tail_norm;
    block[1..].iter_mut().for_each(|x| *x *= ratio);
}

/// Rejects a diagonal that is not positive, or not constant on a Lorentz block.
pub fn check_block_constant(spec: &ConeSpec, diag: &DVector<f64>) -> Result<()> {
    if diag.len() != spec.total_dim() {
        return Err(SolverError::DimensionMismatch(format!(
            "scaling has length {} but cone dimension is {}",
            diag.len(),
            spec.total_dim()
        )));
    }
    if let Some(j) = diag.iter().position(|&o| !(o.is_finite() && o > 0.0)) {
        return Err(SolverError::InvalidOptions(format!(
            "scaling entry {j} is not a positive finite number"
        )));
    }
    for (kind, range) in spec.block_ranges() {
        if kind == ConeKind::Lorentz {
            let first = diag[range.start];
            if range.clone().any(|j| diag[j] != first) {
                return Err(SolverError::InvalidOptions(format!(
                    "scaling is not constant on the Lorentz block starting at {}",
                    range.start
                )));
            }
        }
    }
    Ok(())
}
