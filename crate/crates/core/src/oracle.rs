//! Surrogate lithography oracle.
//!
//! The aerial image is the layout indicator convolved with a normalized 2-D
//! Gaussian. Because the Gaussian is separable, the contribution of each
//! rectangle is an exact product of two CDF differences, so no raster is
//! involved. The printed contour is the `intensity_threshold` level set and
//! EPE is measured along each fragment's outward normal.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{EpicError, Result};
use crate::geom::{Fragment, Layout, Rect, RectIndex};

/// Beyond this many sigmas a rect contributes less than 1e-15.
const CUTOFF_SIGMAS: f64 = 8.0;
/// Bisection stops once the bracket is this narrow (nm).
pub const EPE_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub sigma: f64,
    pub intensity_threshold: f64,
    pub epe_c0: f64,
    pub epe_c1: f64,
    /// Step of the outward/inward scan that brackets the contour crossing.
    pub sample_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            sigma: 40.0,
            intensity_threshold: 0.5,
            epe_c0: 6.0,
            epe_c1: 4.5,
            sample_step: 5.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.intensity_threshold > 0.0
            && self.intensity_threshold < 1.0
            && self.epe_c1 > 0.0
            && self.epe_c1 < self.epe_c0
            && self.sample_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(EpicError::InvalidInput(format!("invalid oracle config {self:?}")))
        }
    }

    pub fn saturation(&self) -> f64 {
        4.0 * self.sigma
    }
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// P(lo <= Z <= hi) evaluated on the side of the distribution where it
/// does not cancel catastrophically.
fn cdf_diff(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

fn rect_coverage(r: &Rect, x: f64, y: f64, sigma: f64) -> f64 {
    let fx = cdf_diff((r.x1 as f64 - x) / sigma, (r.x2 as f64 - x) / sigma);
    let fy = cdf_diff((r.y1 as f64 - y) / sigma, (r.y2 as f64 - y) / sigma);
    fx * fy
}

/// Blurred coverage at `point`, summed over every rect of the layout.
pub fn aerial_intensity(layout: &Layout, point: (f64, f64), cfg: &OracleConfig) -> f64 {
    let sum: f64 = layout
        .rects
        .iter()
        .map(|r| rect_coverage(r, point.0, point.1, cfg.sigma))
        .sum();
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpeResult {
    pub fragment_id: u64,
    /// Positive when the printed contour recedes inside the drawn edge.
    pub epe: f64,
}

/// Oracle bound to one layout, with a spatial index so that only rects
/// within the optical radius are summed.
pub struct Oracle<'a> {
    layout: &'a Layout,
    index: RectIndex,
    cfg: OracleConfig,
    radius: f64,
}

impl<'a> Oracle<'a> {
    pub fn new(layout: &'a Layout, cfg: &OracleConfig) -> Result<Self> {
        cfg.validate()?;
        let radius = CUTOFF_SIGMAS * cfg.sigma;
        let bucket = (2.0 * radius).ceil() as i64;
        Ok(Oracle {
            layout,
            index: RectIndex::build(layout, bucket),
            cfg: cfg.clone(),
            radius,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn intensity(&self, x: f64, y: f64) -> f64 {
        let r = self.radius;
        let ids = self.index.query(
            (x - r).floor() as i64,
            (y - r).floor() as i64,
            (x + r).ceil() as i64,
            (y + r).ceil() as i64,
        );
        let sum: f64 = ids
            .into_iter()
            .map(|i| rect_coverage(&self.layout.rects[i], x, y, self.cfg.sigma))
            .sum();
        sum.clamp(0.0, 1.0)
    }

    /// Signed offset along the outward normal where the contour crosses,
    /// or `None` when no crossing lies within the saturation range.
    fn crossing(&self, fragment: &Fragment) -> (bool, Option<f64>) {
        let (cx, cy) = fragment.center();
        let (nx, ny) = fragment.outward_normal();
        let (nx, ny) = (nx as f64, ny as f64);
        let thr = self.cfg.intensity_threshold;
        let bright = |d: f64| self.intensity(cx + d * nx, cy + d * ny) >= thr;

        let bright0 = bright(0.0);
        let limit = self.cfg.saturation();
        let step = self.cfg.sample_step;
        let steps = (limit / step).ceil() as usize;

        let bisect = |mut lo: f64, mut hi: f64| -> f64 {
            let bright_lo = bright(lo);
            while (hi - lo).abs() > EPE_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if bright(mid) == bright_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };

        let (mut prev_out, mut prev_in) = (bright0, bright0);
        for k in 1..=steps {
            let d_prev = ((k - 1) as f64 * step).min(limit);
            let d = (k as f64 * step).min(limit);
            let now_out = bright(d);
            let now_in = bright(-d);
            let hit_out = (now_out != prev_out).then(|| bisect(d_prev, d));
            let hit_in = (now_in != prev_in).then(|| bisect(-d_prev, -d));
            match (hit_out, hit_in) {
                (Some(o), Some(i)) => {
                    return (bright0, Some(if i.abs() < o.abs() { i } else { o }));
                }
                (Some(o), None) => return (bright0, Some(o)),
                (None, Some(i)) => return (bright0, Some(i)),
                (None, None) => {}
            }
            prev_out = now_out;
            prev_in = now_in;
        }
        (bright0, None)
    }

    pub fn epe(&self, fragment: &Fragment) -> EpeResult {
        let epe = match self.crossing(fragment) {
            (_, Some(d)) => -d,
            // saturated: a bright edge means the contour lies further out
            (true, None) => -self.cfg.saturation(),
            (false, None) => self.cfg.saturation(),
        };
        EpeResult {
            fragment_id: fragment.id,
            epe,
        }
    }

    /// EPE for every fragment, in input order.
    pub fn epe_all(&self, fragments: &[Fragment]) -> Vec<EpeResult> {
        fragments.par_iter().map(|f| self.epe(f)).collect()
    }
}

/// One-shot EPE evaluation; builds the spatial index on every call.
pub fn simulate_epe(layout: &Layout, fragment: &Fragment, cfg: &OracleConfig) -> Result<EpeResult> {
    Ok(Oracle::new(layout, cfg)?.epe(fragment))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HotspotClass {
    C0,
    C1,
    None,
}

impl HotspotClass {
    pub fn as_str(self) -> &'static str {
        match self {
            HotspotClass::C0 => "C0",
            HotspotClass::C1 => "C1",
            HotspotClass::None => "NONE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "C0" => Some(HotspotClass::C0),
            "C1" => Some(HotspotClass::C1),
            "NONE" => Some(HotspotClass::None),
            _ => None,
        }
    }

    pub fn of_epe(epe: f64, cfg: &OracleConfig) -> Self {
        let mag = epe.abs();
        if mag >= cfg.epe_c0 {
            HotspotClass::C0
        } else if mag >= cfg.epe_c1 {
            HotspotClass::C1
        } else {
            HotspotClass::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotspotLabel {
    pub fragment_id: u64,
    pub epe: f64,
    pub class: HotspotClass,
    /// +1 when `class` is the class under study, -1 otherwise.
    pub t_litho: f64,
}

pub fn label_fragments(
    epes: &[EpeResult],
    cfg: &OracleConfig,
    target: HotspotClass,
) -> Result<Vec<HotspotLabel>> {
    cfg.validate()?;
    if target == HotspotClass::None {
        return Err(EpicError::InvalidInput("target class must be C0 or C1".into()));
    }
    Ok(epes
        .iter()
        .map(|e| {
            let class = HotspotClass::of_epe(e.epe, cfg);
            HotspotLabel {
                fragment_id: e.fragment_id,
                epe: e.epe,
                class,
                t_litho: if class == target { 1.0 } else { -1.0 },
            }
        })
        .collect())
}

pub fn labels_to_csv(labels: &[HotspotLabel], comments: &[String]) -> String {
    let mut sorted: Vec<&HotspotLabel> = labels.iter().collect();
    sorted.sort_by_key(|l| l.fragment_id);
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("fragment_id,epe_nm,class,t_litho\n");
    for l in sorted {
        let _ = writeln!(
            out,
            "{},{:?},{},{}",
            l.fragment_id,
            l.epe,
            l.class.as_str(),
            l.t_litho as i64
        );
    }
    out
}

pub fn labels_from_csv(text: &str, path: &Path) -> Result<Vec<HotspotLabel>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != "fragment_id,epe_nm,class,t_litho" {
                return Err(EpicError::malformed(path, line_no, "unexpected labels header"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| EpicError::malformed(path, line_no, format!("bad {what}"));
        if f.len() != 4 {
            return Err(bad("record (expected 4 fields)"));
        }
        let t_litho: f64 = f[3].parse().map_err(|_| bad("t_litho"))?;
        if t_litho != 1.0 && t_litho != -1.0 {
            return Err(bad("t_litho (must be 1 or -1)"));
        }
        out.push(HotspotLabel {
            fragment_id: f[0].parse().map_err(|_| bad("fragment_id"))?,
            epe: f[1].parse().map_err(|_| bad("epe_nm"))?,
            class: HotspotClass::parse(f[2]).ok_or_else(|| bad("class"))?,
            t_litho,
        });
    }
    if !seen_header {
        return Err(EpicError::malformed(path, 1, "missing labels header"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{fragment_layout, Side};

    fn layout(rects: Vec<Rect>) -> Layout {
        Layout::new(20_000, 20_000, 0, rects).unwrap()
    }

    fn frag_on(rect: Rect, side: Side, start: i64, end: i64) -> Fragment {
        Fragment { id: 0, owner: 0, owner_rect: rect, side, start, end }
    }

    #[test]
    fn deep_interior_is_fully_bright() {
        let l = layout(vec![Rect::new(1000, 1000, 9000, 9000).unwrap()]);
        let v = aerial_intensity(&l, (5000.0, 5000.0), &OracleConfig::default());
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn edge_of_half_plane_is_half() {
        let l = layout(vec![Rect::new(1000, 1000, 10_000, 19_000).unwrap()]);
        let v = aerial_intensity(&l, (10_000.0, 10_000.0), &OracleConfig::default());
        assert!((v - 0.5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn one_sigma_outside_long_edge() {
        let l = layout(vec![Rect::new(1000, 1000, 10_000, 19_000).unwrap()]);
        let v = aerial_intensity(&l, (10_040.0, 10_000.0), &OracleConfig::default());
        // Phi(-1)
        assert!((v - 0.158_655_253_931_457).abs() < 1e-4, "{v}");
        assert!((norm_cdf(-1.0) - 0.158_655_253_931_457).abs() < 1e-12);
    }

    #[test]
    fn indexed_and_direct_intensity_agree() {
        let cfg = GenConfigForTest::layout();
        let oracle = Oracle::new(&cfg, &OracleConfig::default()).unwrap();
        for (x, y) in [(500.5, 800.0), (3210.0, 4000.25), (9000.0, 100.0)] {
            let a = oracle.intensity(x, y);
            let b = aerial_intensity(&cfg, (x, y), &OracleConfig::default());
            assert!((a - b).abs() < 1e-13);
        }
    }

    struct GenConfigForTest;
    impl GenConfigForTest {
        fn layout() -> Layout {
            let cfg = crate::geom::GenConfig {
                width: 10_000,
                height: 10_000,
                rect_count: 60,
                ..Default::default()
            };
            crate::geom::generate_layout(2, &cfg).unwrap()
        }
    }

    #[test]
    fn straight_edge_has_zero_epe() {
        let rect = Rect::new(1000, 1000, 10_000, 19_000).unwrap();
        let l = layout(vec![rect]);
        let r = simulate_epe(&l, &frag_on(rect, Side::Right, 9950, 10_050), &OracleConfig::default())
            .unwrap();
        assert!(r.epe.abs() < 0.05, "{}", r.epe);
    }

    /// Independent oracle: walk inward from the edge on a 0.001 nm grid.
    fn linear_scan_epe(l: &Layout, f: &Fragment, cfg: &OracleConfig) -> f64 {
        let (cx, cy) = f.center();
        let (nx, ny) = f.outward_normal();
        let at = |d: f64| aerial_intensity(l, (cx + d * nx as f64, cy + d * ny as f64), cfg);
        let bright0 = at(0.0) >= cfg.intensity_threshold;
        let mut k = 0i64;
        loop {
            k += 1;
            let d = k as f64 * 0.001;
            for cand in [d, -d] {
                if (at(cand) >= cfg.intensity_threshold) != bright0 {
                    return -cand;
                }
            }
            assert!(d < 4.0 * cfg.sigma, "no crossing");
        }
    }

    #[test]
    fn narrow_line_prints_narrow() {
        let cfg = OracleConfig::default();
        let rect = Rect::new(5000, 1000, 5060, 19_000).unwrap();
        let l = layout(vec![rect]);
        let f = frag_on(rect, Side::Right, 9950, 10_050);
        let r = simulate_epe(&l, &f, &cfg).unwrap();
        let expected = linear_scan_epe(&l, &f, &cfg);
        assert!(r.epe > 0.0);
        assert!((r.epe - expected).abs() < 0.02, "{} vs {}", r.epe, expected);
    }

    #[test]
    fn saturated_interior_fragment() {
        // An edge buried between two abutting rects never sees the threshold.
        let cfg = OracleConfig::default();
        let a = Rect::new(1000, 1000, 5000, 19_000).unwrap();
        let b = Rect::new(5000, 1000, 9000, 19_000).unwrap();
        let l = layout(vec![a, b]);
        let r = simulate_epe(&l, &frag_on(a, Side::Right, 9950, 10_050), &cfg).unwrap();
        assert_eq!(r.epe, -4.0 * cfg.sigma);
    }

    #[test]
    fn labels_follow_thresholds() {
        let cfg = OracleConfig::default();
        let epes = [
            EpeResult { fragment_id: 0, epe: 7.0 },
            EpeResult { fragment_id: 1, epe: 5.0 },
            EpeResult { fragment_id: 2, epe: 0.0 },
            EpeResult { fragment_id: 3, epe: -6.0 },
        ];
        let c0 = label_fragments(&epes, &cfg, HotspotClass::C0).unwrap();
        assert_eq!(c0[0].class, HotspotClass::C0);
        assert_eq!(c0[0].t_litho, 1.0);
        assert_eq!(c0[1].class, HotspotClass::C1);
        assert_eq!(c0[1].t_litho, -1.0);
        assert_eq!(c0[2].class, HotspotClass::None);
        assert_eq!(c0[2].t_litho, -1.0);
        assert_eq!(c0[3].class, HotspotClass::C0);
        let c1 = label_fragments(&epes, &cfg, HotspotClass::C1).unwrap();
        assert_eq!(c1[1].t_litho, 1.0);
        assert_eq!(c1[0].t_litho, -1.0);
        assert!(label_fragments(&epes, &cfg, HotspotClass::None).is_err());
    }

    #[test]
    fn intensity_invariants() {
        let cfg = OracleConfig::default();
        let base = GenConfigForTest::layout();
        let frags = fragment_layout(&base, 100).unwrap();
        let probe: Vec<(f64, f64)> = frags.iter().step_by(7).map(|f| f.center()).collect();

        // adding geometry never darkens a point
        let mut more = base.clone();
        more.rects.push(Rect::new(0, 0, 30, 30).unwrap());
        for &p in &probe {
            assert!(aerial_intensity(&more, p, &cfg) >= aerial_intensity(&base, p, &cfg));
        }

        // translation invariance
        let (dx, dy) = (1234, 567);
        let mut moved = base.clone();
        moved.width += dx;
        moved.height += dy;
        for r in &mut moved.rects {
            *r = Rect::new(r.x1 + dx, r.y1 + dy, r.x2 + dx, r.y2 + dy).unwrap();
        }
        for &(x, y) in &probe {
            let a = aerial_intensity(&base, (x, y), &cfg);
            let b = aerial_intensity(&moved, (x + dx as f64, y + dy as f64), &cfg);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mirrored_layout_gives_same_epe() {
        let cfg = OracleConfig::default();
        let base = GenConfigForTest::layout();
        let w = base.width;
        let mut mirror = base.clone();
        for r in &mut mirror.rects {
            *r = Rect::new(w - r.x2, r.y1, w - r.x1, r.y2).unwrap();
        }
        let frags = fragment_layout(&base, 100).unwrap();
        let o1 = Oracle::new(&base, &cfg).unwrap();
        let o2 = Oracle::new(&mirror, &cfg).unwrap();
        for f in frags.iter().step_by(5) {
            let side = match f.side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
                s => s,
            };
            let (start, end) = match side {
                Side::Bottom | Side::Top => (w - f.end, w - f.start),
                _ => (f.start, f.end),
            };
            let mf = Fragment {
                owner_rect: mirror.rects[f.owner],
                side,
                start,
                end,
                ..*f
            };
            let a = o1.epe(f).epe;
            let b = o2.epe(&mf).epe;
            assert!((a - b).abs() <= EPE_RESOLUTION, "{a} vs {b}");
        }
    }

    #[test]
    fn labels_csv_round_trip() {
        let labels = vec![
            HotspotLabel { fragment_id: 2, epe: -1.25, class: HotspotClass::None, t_litho: -1.0 },
            HotspotLabel { fragment_id: 1, epe: 7.5, class: HotspotClass::C0, t_litho: 1.0 },
        ];
        let text = labels_to_csv(&labels, &["seed=1".into()]);
        assert!(text.contains("fragment_id,epe_nm,class,t_litho\n1,7.5,C0,1\n2,-1.25,NONE,-1\n"));
        let back = labels_from_csv(&text, Path::new("l.csv")).unwrap();
        assert_eq!(back[0], labels[1]);
        assert_eq!(back[1], labels[0]);
        assert!(labels_from_csv("fragment_id,epe_nm,class,t_litho\n1,x,C0,1\n", Path::new("l"))
            .is_err());
    }
}
