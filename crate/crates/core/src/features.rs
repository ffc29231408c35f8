//! Density-grid features around each fragment.
//!
//! A `window` x `window` box is centred on the fragment and rotated so that
//! the outward normal points along +x. The box is split into `grid` x `grid`
//! cells and each value is the exact fraction of the cell covered by layout
//! geometry. Row 0 is the lowest canonical y; values are row-major.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{EpicError, Result};
use crate::geom::{Fragment, Layout, RectIndex, Side};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub fragment_id: u64,
    pub values: Vec<f64>,
    /// Set once [`NormParams::apply`] has been used.
    pub normalized: bool,
}

impl FeatureVector {
    pub fn new(fragment_id: u64, values: Vec<f64>) -> Self {
        FeatureVector {
            fragment_id,
            values,
            normalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibSample {
    pub features: FeatureVector,
    pub t_litho: f64,
}

impl CalibSample {
    pub fn is_hotspot(&self) -> bool {
        self.t_litho > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub window: i64,
    pub grid: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 1200,
            grid: 8,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.grid * self.grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.window <= 0 || self.grid < 2 {
            return Err(EpicError::InvalidInput(format!(
                "feature window {} and grid {} must satisfy window > 0, grid >= 2",
                self.window, self.grid
            )));
        }
        Ok(())
    }
}

/// Rotation (in doubled relative coordinates) taking `side`'s normal to +x.
fn canonical(side: Side, dx: i64, dy: i64) -> (i64, i64) {
    match side {
        Side::Right => (dx, dy),
        Side::Top => (dy, -dx),
        Side::Left => (-dx, -dy),
        Side::Bottom => (-dy, dx),
    }
}

pub struct FeatureExtractor<'a> {
    layout: &'a Layout,
    index: RectIndex,
    cfg: FeatureConfig,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(layout: &'a Layout, cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FeatureExtractor {
            layout,
            index: RectIndex::build(layout, (2 * cfg.window).max(1)),
            cfg,
        })
    }

    pub fn extract(&self, fragment: &Fragment) -> FeatureVector {
        let g = self.cfg.grid as i64;
        let w = self.cfg.window;
        let (cx2, cy2) = fragment.center_x2();
        // window half-width in doubled units is exactly `w`
        let half = (w + 1) / 2 + 1;
        let (cx, cy) = (cx2.div_euclid(2), cy2.div_euclid(2));
        let candidates = self.index.query(cx - half, cy - half, cx + half + 1, cy + half + 1);

        // Scaled coordinates: s = grid * (2x - 2c); the window spans
        // [-w*g, w*g] and each cell is 2w wide.
        let lim = w * g;
        let cell = 2 * w;
        let mut covered = vec![0i64; (g * g) as usize];
        for i in candidates {
            let r = &self.layout.rects[i];
            let (ax, ay) = canonical(fragment.side, 2 * r.x1 - cx2, 2 * r.y1 - cy2);
            let (bx, by) = canonical(fragment.side, 2 * r.x2 - cx2, 2 * r.y2 - cy2);
            let x1 = (ax.min(bx) * g).max(-lim);
            let x2 = (ax.max(bx) * g).min(lim);
            let y1 = (ay.min(by) * g).max(-lim);
            let y2 = (ay.max(by) * g).min(lim);
            if x1 >= x2 || y1 >= y2 {
                continue;
            }
            let c0 = (x1 + lim) / cell;
            let c1 = ((x2 + lim - 1) / cell).min(g - 1);
            let r0 = (y1 + lim) / cell;
            let r1 = ((y2 + lim - 1) / cell).min(g - 1);
            for row in r0..=r1 {
                let lo_y = -lim + row * cell;
                let oy = y2.min(lo_y + cell) - y1.max(lo_y);
                if oy <= 0 {
                    continue;
                }
                for col in c0..=c1 {
                    let lo_x = -lim + col * cell;
                    let ox = x2.min(lo_x + cell) - x1.max(lo_x);
                    if ox > 0 {
                        covered[(row * g + col) as usize] += ox * oy;
                    }
                }
            }
        }
        let cell_area = (cell * cell) as f64;
        let values = covered
            .into_iter()
            .map(|a| (a as f64 / cell_area).min(1.0))
            .collect();
        FeatureVector::new(fragment.id, values)
    }

    pub fn extract_all(&self, fragments: &[Fragment]) -> Vec<FeatureVector> {
        fragments.par_iter().map(|f| self.extract(f)).collect()
    }
}

pub fn extract_features(
    layout: &Layout,
    fragment: &Fragment,
    cfg: FeatureConfig,
) -> Result<FeatureVector> {
    Ok(FeatureExtractor::new(layout, cfg)?.extract(fragment))
}

/// Per-dimension affine normalization fitted on a calibration set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormParams {
    /// Zero mean, unit (population) deviation per dimension; dimensions
    /// with zero variance keep scale 1.
    pub fn fit(vectors: &[&FeatureVector]) -> Result<Self> {
        let first = vectors.first().ok_or(EpicError::EmptyDataset)?;
        let dim = first.dim();
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            if v.dim() != dim {
                return Err(EpicError::DimensionMismatch { expected: dim, actual: v.dim() });
            }
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(NormParams { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        NormParams {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes raw values into `out`.
    pub fn apply_into(&self, raw: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(raw).zip(&self.mean).zip(&self.scale) {
            *o = (x - m) / s;
        }
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.normalized {
            return Err(EpicError::AlreadyNormalized);
        }
        if v.dim() != self.dim() {
            return Err(EpicError::DimensionMismatch { expected: self.dim(), actual: v.dim() });
        }
        let mut values = vec![0.0; v.dim()];
        self.apply_into(&v.values, &mut values);
        Ok(FeatureVector {
            fragment_id: v.fragment_id,
            values,
            normalized: true,
        })
    }
}

pub fn normalize_dataset(samples: &[CalibSample]) -> Result<(Vec<CalibSample>, NormParams)> {
    if samples.is_empty() {
        return Err(EpicError::EmptyDataset);
    }
    if samples.len() < 2 {
        return Err(EpicError::InvalidInput("normalization needs at least 2 samples".into()));
    }
    let refs: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
    let params = NormParams::fit(&refs)?;
    let out = samples
        .iter()
        .map(|s| {
            Ok(CalibSample {
                features: params.apply(&s.features)?,
                t_litho: s.t_litho,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, params))
}

pub fn samples_to_csv(samples: &[CalibSample], comments: &[String]) -> String {
    let dim = samples.first().map_or(0, |s| s.features.dim());
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("fragment_id,t_litho");
    for i in 0..dim {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    let mut sorted: Vec<&CalibSample> = samples.iter().collect();
    sorted.sort_by_key(|s| s.features.fragment_id);
    for s in sorted {
        let _ = write!(out, "{},{}", s.features.fragment_id, s.t_litho as i64);
        for v in &s.features.values {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn samples_from_csv(text: &str, path: &Path) -> Result<Vec<CalibSample>> {
    let mut dim = None;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some(dim) = dim else {
            if fields.len() < 2 || fields[0] != "fragment_id" || fields[1] != "t_litho" {
                return Err(EpicError::malformed(path, line_no, "expected samples header"));
            }
            for (i, name) in fields[2..].iter().enumerate() {
                if *name != format!("f{i}") {
                    return Err(EpicError::malformed(path, line_no, format!("bad column `{name}`")));
                }
            }
            dim = Some(fields.len() - 2);
            continue;
        };
        if fields.len() != dim + 2 {
            return Err(EpicError::malformed(
                path,
                line_no,
                format!("expected {} fields, found {}", dim + 2, fields.len()),
            ));
        }
        let bad = |what: &str| EpicError::malformed(path, line_no, format!("bad {what}"));
        let fragment_id = fields[0].parse().map_err(|_| bad("fragment_id"))?;
        let t_litho: f64 = fields[1].parse().map_err(|_| bad("t_litho"))?;
        if t_litho != 1.0 && t_litho != -1.0 {
            return Err(bad("t_litho (must be 1 or -1)"));
        }
        let values = fields[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad("feature value")))
            .collect::<Result<Vec<_>>>()?;
        out.push(CalibSample {
            features: FeatureVector::new(fragment_id, values),
            t_litho,
        });
    }
    if dim.is_none() {
        return Err(EpicError::malformed(path, 1, "missing samples header"));
    }
    Ok(out)
}
