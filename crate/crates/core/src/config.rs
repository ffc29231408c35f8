//! The single configuration block behind every run.
//!
//! Configuration files are `key=value` lines; `#` starts a comment. The
//! canonical rendering of the full block is echoed into every output file
//! and hashed to identify a run.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{EpicError, Result};
use crate::features::FeatureConfig;
use crate::geom::GenConfig;
use crate::oracle::{HotspotClass, OracleConfig};
use crate::pipeline::CalibConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct EpicConfig {
    pub gen: GenConfig,
    pub frag_len: i64,
    pub oracle: OracleConfig,
    pub features: FeatureConfig,
    pub target: HotspotClass,
    pub calib: CalibConfig,
    /// Share of the benchmark fragments used for calibration.
    pub calib_fraction: f64,
}

impl Default for EpicConfig {
    fn default() -> Self {
        EpicConfig {
            gen: GenConfig::default(),
            frag_len: 100,
            oracle: OracleConfig::default(),
            features: FeatureConfig::default(),
            target: HotspotClass::C0,
            calib: CalibConfig::default(),
            calib_fraction: 0.6,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| EpicError::InvalidInput(format!("cannot parse value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl EpicConfig {
    /// Canonical `key=value` lines in a fixed order.
    pub fn to_lines(&self) -> Vec<String> {
        let g = &self.gen;
        let o = &self.oracle;
        let c = &self.calib;
        let levels: Vec<String> = c.levels_per_base.iter().map(ToString::to_string).collect();
        let gamma = c.svm.gamma.map_or_else(|| "auto".to_string(), |v| format!("{v:?}"));
        vec![
            format!("gen.width={}", g.width),
            format!("gen.height={}", g.height),
            format!("gen.rect_count={}", g.rect_count),
            format!("gen.min_dim={}", g.min_dim),
            format!("gen.max_dim={}", g.max_dim),
            format!("gen.dim_step={}", g.dim_step),
            format!("gen.min_spacing={}", g.min_spacing),
            format!("gen.cluster_rate={:?}", g.cluster_rate),
            format!("gen.motif_rate={:?}", g.motif_rate),
            format!("gen.narrow_min={}", g.narrow_min),
            format!("gen.narrow_max={}", g.narrow_max),
            format!("gen.max_attempts={}", g.max_attempts),
            format!("frag_len={}", self.frag_len),
            format!("oracle.sigma={:?}", o.sigma),
            format!("oracle.intensity_threshold={:?}", o.intensity_threshold),
            format!("oracle.epe_c0={:?}", o.epe_c0),
            format!("oracle.epe_c1={:?}", o.epe_c1),
            format!("oracle.sample_step={:?}", o.sample_step),
            format!("features.window={}", self.features.window),
            format!("features.grid={}", self.features.grid),
            format!("target={}", self.target.as_str()),
            format!("calib.fraction={:?}", self.calib_fraction),
            format!("calib.lambda0_init={:?}", c.lambda0_init),
            format!("calib.levels={}", levels.join(",")),
            format!("calib.psi_alpha={:?}", c.psi.alpha),
            format!("calib.psi_beta={:?}", c.psi.beta),
            format!("calib.theta_grid={}", c.theta_grid_size),
            format!("calib.stack_folds={}", c.stack_folds),
            format!("qp.tol={:?}", c.qp_tol),
            format!("qp.max_iter={}", c.qp_max_iter),
            format!("ann.hidden={}", c.ann.hidden),
            format!("ann.learning_rate={:?}", c.ann.learning_rate),
            format!("ann.epochs={}", c.ann.epochs),
            format!("ann.init_scale={:?}", c.ann.init_scale),
            format!("svm.c={:?}", c.svm.c_bound),
            format!("svm.gamma={gamma}"),
            format!("svm.kkt_tol={:?}", c.svm.kkt_tol),
            format!("svm.max_passes={}", c.svm.max_passes),
            format!("pm.quant_levels={}", c.pm.quant_levels),
            format!("pm.match_tolerance={}", c.pm.match_tolerance),
            format!("pm.mismatch_budget={}", c.pm.mismatch_budget),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.gen;
        let o = &mut self.oracle;
        let c = &mut self.calib;
        match key {
            "gen.width" => g.width = parse(key, value)?,
            "gen.height" => g.height = parse(key, value)?,
            "gen.rect_count" => g.rect_count = parse(key, value)?,
            "gen.min_dim" => g.min_dim = parse(key, value)?,
            "gen.max_dim" => g.max_dim = parse(key, value)?,
            "gen.dim_step" => g.dim_step = parse(key, value)?,
            "gen.min_spacing" => g.min_spacing = parse(key, value)?,
            "gen.cluster_rate" => g.cluster_rate = parse(key, value)?,
            "gen.motif_rate" => g.motif_rate = parse(key, value)?,
            "gen.narrow_min" => g.narrow_min = parse(key, value)?,
            "gen.narrow_max" => g.narrow_max = parse(key, value)?,
            "gen.max_attempts" => g.max_attempts = parse(key, value)?,
            "frag_len" => self.frag_len = parse(key, value)?,
            "oracle.sigma" => o.sigma = parse(key, value)?,
            "oracle.intensity_threshold" => o.intensity_threshold = parse(key, value)?,
            "oracle.epe_c0" => o.epe_c0 = parse(key, value)?,
            "oracle.epe_c1" => o.epe_c1 = parse(key, value)?,
            "oracle.sample_step" => o.sample_step = parse(key, value)?,
            "features.window" => self.features.window = parse(key, value)?,
            "features.grid" => self.features.grid = parse(key, value)?,
            "target" => {
                self.target = match HotspotClass::parse(value) {
                    Some(t @ (HotspotClass::C0 | HotspotClass::C1)) => t,
                    _ => return Err(EpicError::InvalidInput(format!("target must be C0 or C1, got `{value}`"))),
                }
            }
            "calib.fraction" => self.calib_fraction = parse(key, value)?,
            "calib.lambda0_init" => c.lambda0_init = parse(key, value)?,
            "calib.levels" => c.levels_per_base = parse_list(key, value)?,
            "calib.psi_alpha" => c.psi.alpha = parse(key, value)?,
            "calib.psi_beta" => c.psi.beta = parse(key, value)?,
            "calib.theta_grid" => c.theta_grid_size = parse(key, value)?,
            "calib.stack_folds" => c.stack_folds = parse(key, value)?,
            "qp.tol" => c.qp_tol = parse(key, value)?,
            "qp.max_iter" => c.qp_max_iter = parse(key, value)?,
            "ann.hidden" => c.ann.hidden = parse(key, value)?,
            "ann.learning_rate" => c.ann.learning_rate = parse(key, value)?,
            "ann.epochs" => c.ann.epochs = parse(key, value)?,
            "ann.init_scale" => c.ann.init_scale = parse(key, value)?,
            "svm.c" => c.svm.c_bound = parse(key, value)?,
            "svm.gamma" => c.svm.gamma = if value == "auto" { None } else { Some(parse(key, value)?) },
            "svm.kkt_tol" => c.svm.kkt_tol = parse(key, value)?,
            "svm.max_passes" => c.svm.max_passes = parse(key, value)?,
            "pm.quant_levels" => c.pm.quant_levels = parse(key, value)?,
            "pm.match_tolerance" => c.pm.match_tolerance = parse(key, value)?,
            "pm.mismatch_budget" => c.pm.mismatch_budget = parse(key, value)?,
            _ => return Err(EpicError::InvalidInput(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides from `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(EpicError::malformed(path, n + 1, "expected key=value"));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| EpicError::malformed(path, n + 1, e.to_string()))?;
        }
        self.validate().map_err(|e| EpicError::malformed(path, 1, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EpicError::io(path, e))?;
        let mut cfg = EpicConfig::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.oracle.validate()?;
        self.features.validate()?;
        self.calib.validate()?;
        if self.frag_len <= 0 {
            return Err(EpicError::InvalidInput("frag_len must be positive".into()));
        }
        if !(self.calib_fraction > 0.0 && self.calib_fraction < 1.0) {
            return Err(EpicError::InvalidInput("calib.fraction must lie strictly between 0 and 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical lines, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_lines().join("\n").as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    /// Comment lines for output headers: the config block plus run metadata.
    pub fn echo(&self, extra: &[String]) -> Vec<String> {
        let mut lines = extra.to_vec();
        lines.push(format!("config_hash={}", self.hash()));
        lines.extend(self.to_lines());
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_lines_reparse_to_same_config() {
        let mut cfg = EpicConfig::default();
        cfg.set("svm.gamma", "0.25").unwrap();
        cfg.set("calib.levels", "4,4,2").unwrap();
        let text = cfg.to_lines().join("\n");
        let mut back = EpicConfig::default();
        back.apply_text(&text, Path::new("c")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(EpicConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn bad_lines_name_the_line() {
        let mut cfg = EpicConfig::default();
        let err = cfg.apply_text("# ok\nnope\n", Path::new("c.cfg")).unwrap_err();
        assert_eq!(err.to_string(), "c.cfg:2: expected key=value");
        assert!(cfg.apply_text("bogus=1", Path::new("c")).is_err());
        assert!(cfg.apply_text("calib.psi_beta=0.5", Path::new("c")).is_err());
    }
}
