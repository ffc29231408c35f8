//! Fuzzy pattern matching over quantized density grids.
//!
//! A signature is the feature vector quantized to `Q` levels per cell. Two
//! signatures match when no more than `B` cells differ by more than `ε`
//! levels, which trades exactness for broader coverage of near-miss shapes.

use std::fmt::Write as _;

use crate::error::{EpicError, Result};
use crate::features::{CalibSample, FeatureVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmSignature {
    pub cells: Vec<u32>,
    pub source_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PmConfig {
    pub quant_levels: u32,
    pub match_tolerance: u32,
    pub mismatch_budget: usize,
}

impl Default for PmConfig {
    fn default() -> Self {
        PmConfig { quant_levels: 8, match_tolerance: 1, mismatch_budget: 4 }
    }
}

impl PmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quant_levels < 2 {
            return Err(EpicError::InvalidInput("pattern quantization needs at least 2 levels".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmLibrary {
    pub signatures: Vec<PmSignature>,
    pub quant_levels: u32,
    pub match_tolerance: u32,
    pub mismatch_budget: usize,
    pub dim: usize,
}

/// Cell `floor(v * Q)`, clamped into `[0, Q-1]`.
pub fn pm_signature(v: &FeatureVector, quant_levels: u32) -> PmSignature {
    PmSignature { cells: quantize_cells(&v.values, quant_levels), source_count: 1 }
}

fn quantize_cells(values: &[f64], q: u32) -> Vec<u32> {
    let top = f64::from(q - 1);
    values
        .iter()
        .map(|&v| (v * f64::from(q)).floor().clamp(0.0, top) as u32)
        .collect()
}

/// Whether at most `budget` cells deviate by more than `tolerance`.
pub fn cells_match(a: &[u32], b: &[u32], tolerance: u32, budget: usize) -> bool {
    let mut over = 0;
    for (x, y) in a.iter().zip(b) {
        if x.abs_diff(*y) > tolerance {
            over += 1;
            if over > budget {
                return false;
            }
        }
    }
    true
}

impl PmLibrary {
    pub fn empty(cfg: &PmConfig, dim: usize) -> Self {
        PmLibrary {
            signatures: Vec::new(),
            quant_levels: cfg.quant_levels,
            match_tolerance: cfg.match_tolerance,
            mismatch_budget: cfg.mismatch_budget,
            dim,
        }
    }

    fn matches_cells(&self, cells: &[u32]) -> bool {
        self.signatures
            .iter()
            .any(|s| cells_match(&s.cells, cells, self.match_tolerance, self.mismatch_budget))
    }

    /// CSV export, one signature per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("signature,source_count");
        for c in 0..self.dim {
            write!(out, ",c{c}").unwrap();
        }
        out.push('\n');
        for (i, s) in self.signatures.iter().enumerate() {
            write!(out, "{i},{}", s.source_count).unwrap();
            for c in &s.cells {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the library greedily in fragment-id order; a signature that
/// matches an existing entry is absorbed into it.
pub fn pm_build_library(hotspots: &[CalibSample], cfg: &PmConfig, dim: usize) -> Result<PmLibrary> {
    cfg.validate()?;
    let mut ordered: Vec<&CalibSample> = hotspots.iter().collect();
    ordered.sort_by_key(|s| s.features.fragment_id);
    let mut lib = PmLibrary::empty(cfg, dim);
    for s in ordered {
        if !s.is_hotspot() {
            return Err(EpicError::InvalidInput(format!(
                "fragment {} is not a hotspot and cannot enter the pattern library",
                s.features.fragment_id
            )));
        }
        if s.features.dim() != dim {
            return Err(EpicError::DimensionMismatch { expected: dim, actual: s.features.dim() });
        }
        let cells = quantize_cells(&s.features.values, cfg.quant_levels);
        let hit = lib
            .signatures
            .iter_mut()
            .find(|sig| cells_match(&sig.cells, &cells, cfg.match_tolerance, cfg.mismatch_budget));
        match hit {
            Some(sig) => sig.source_count += 1,
            None => lib.signatures.push(PmSignature { cells, source_count: 1 }),
        }
    }
    Ok(lib)
}

/// `+1` when some library signature matches `v`, otherwise `-1`.
pub fn pm_match(lib: &PmLibrary, v: &FeatureVector) -> Result<f64> {
    if v.dim() != lib.dim {
        return Err(EpicError::DimensionMismatch { expected: lib.dim, actual: v.dim() });
    }
    let cells = quantize_cells(&v.values, lib.quant_levels);
    Ok(if lib.matches_cells(&cells) { 1.0 } else { -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hot(id: u64, v: Vec<f64>) -> CalibSample {
        CalibSample { features: FeatureVector::new(id, v), t_litho: 1.0 }
    }

    fn cfg(eps: u32, budget: usize) -> PmConfig {
        PmConfig { quant_levels: 8, match_tolerance: eps, mismatch_budget: budget }
    }

    #[test]
    fn signature_cells() {
        let v = FeatureVector::new(0, vec![0.0, 1.0, 0.49, 0.25]);
        assert_eq!(pm_signature(&v, 4).cells, vec![0, 3, 1, 1]);
    }

    #[test]
    fn identical_hotspots_merge() {
        let lib = pm_build_library(&[hot(0, vec![0.5; 4]), hot(1, vec![0.5; 4])], &cfg(1, 0), 4).unwrap();
        assert_eq!(lib.signatures.len(), 1);
        assert_eq!(lib.signatures[0].source_count, 2);
    }

    #[test]
    fn one_far_cell_splits() {
        let lib = pm_build_library(
            &[hot(0, vec![0.0; 4]), hot(1, vec![0.0, 0.0, 0.0, 0.9])],
            &cfg(1, 0),
            4,
        )
        .unwrap();
        assert_eq!(lib.signatures.len(), 2);
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        // Base pattern at level 3 everywhere (value 0.4 with Q = 8).
        let lib = pm_build_library(&[hot(0, vec![0.4; 8])], &cfg(1, 2), 8).unwrap();
        let exact = FeatureVector::new(9, vec![0.4; 8]);
        assert_eq!(pm_match(&lib, &exact).unwrap(), 1.0);
        // Level 5 is a deviation of 2 = eps + 1.
        let mut v = vec![0.4; 8];
        v[0] = 0.65;
        v[1] = 0.65;
        assert_eq!(pm_match(&lib, &FeatureVector::new(9, v.clone())).unwrap(), 1.0);
        v[2] = 0.65;
        assert_eq!(pm_match(&lib, &FeatureVector::new(9, v)).unwrap(), -1.0);
    }

    #[test]
    fn empty_library_rejects_everything() {
        let lib = pm_build_library(&[], &PmConfig::default(), 3).unwrap();
        assert_eq!(pm_match(&lib, &FeatureVector::new(0, vec![0.1; 3])).unwrap(), -1.0);
        assert!(pm_match(&lib, &FeatureVector::new(0, vec![0.1; 2])).is_err());
    }

    #[test]
    fn non_hotspot_is_refused() {
        let bad = CalibSample { features: FeatureVector::new(0, vec![0.0]), t_litho: -1.0 };
        assert!(pm_build_library(&[bad], &PmConfig::default(), 1).is_err());
    }

    #[test]
    fn csv_has_one_row_per_signature() {
        let lib = pm_build_library(&[hot(0, vec![0.0, 0.99])], &PmConfig::default(), 2).unwrap();
        assert_eq!(lib.to_csv(), "signature,source_count,c0,c1\n0,1,0,7\n");
    }
}
