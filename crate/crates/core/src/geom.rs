//! Rectilinear layouts, the seeded layout generator and edge fragmentation.
//!
//! All coordinates are integer nanometres. Fragment centres can fall on a
//! half-nanometre, so code that needs exact arithmetic works with doubled
//! coordinates (see [`Fragment::center_x2`]).

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EpicError, Result};

/// Name of the generator recorded in every output header.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl Rect {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 || x1 < 0 || y1 < 0 {
            return Err(EpicError::InvalidInput(format!(
                "degenerate or negative rect ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(Rect { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> i64 {
        2 * (self.width() + self.height())
    }

    /// Signed separation: the larger of the x and y gaps. Negative means the
    /// interiors overlap, zero means the rects touch.
    pub fn gap(&self, other: &Rect) -> i64 {
        let dx = (other.x1 - self.x2).max(self.x1 - other.x2);
        let dy = (other.y1 - self.y2).max(self.y1 - other.y2);
        dx.max(dy)
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.gap(other) < 0
    }

    fn within(&self, width: i64, height: i64) -> bool {
        self.x1 >= 0 && self.y1 >= 0 && self.x2 <= width && self.y2 <= height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub width: i64,
    pub height: i64,
    pub seed: u64,
    pub rects: Vec<Rect>,
}

impl Layout {
    pub fn new(width: i64, height: i64, seed: u64, rects: Vec<Rect>) -> Result<Self> {
        if width <= 0 || height <= 0 {
            return Err(EpicError::InvalidInput(format!(
                "layout extent {width}x{height} must be positive"
            )));
        }
        if let Some(r) = rects.iter().find(|r| !r.within(width, height)) {
            return Err(EpicError::InvalidInput(format!(
                "rect {r:?} lies outside the {width}x{height} layout"
            )));
        }
        Ok(Layout {
            width,
            height,
            seed,
            rects,
        })
    }

    pub fn empty(width: i64, height: i64) -> Self {
        Layout {
            width,
            height,
            seed: 0,
            rects: Vec::new(),
        }
    }

    /// Serializes to the `LAYOUT v1` text format. `comments` are emitted as
    /// `# ` lines after the header.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "LAYOUT v1 {} {} {}", self.width, self.height, self.seed);
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for r in &self.rects {
            let _ = writeln!(out, "RECT {} {} {} {}", r.x1, r.y1, r.x2, r.y2);
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| EpicError::malformed(path, 1, "missing LAYOUT header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "LAYOUT" {
            return Err(EpicError::malformed(path, 1, "expected `LAYOUT v1 width height seed`"));
        }
        if fields[1] != "v1" {
            return Err(EpicError::malformed(
                path,
                1,
                format!("unsupported layout version {}", fields[1]),
            ));
        }
        let num = |s: &str, line: usize| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|_| EpicError::malformed(path, line, format!("bad integer `{s}`")))
        };
        let width = num(fields[2], 1)?;
        let height = num(fields[3], 1)?;
        let seed = fields[4]
            .parse::<u64>()
            .map_err(|_| EpicError::malformed(path, 1, format!("bad seed `{}`", fields[4])))?;

        let mut rects = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = trimmed.split_whitespace().collect();
            if f.len() != 5 || f[0] != "RECT" {
                return Err(EpicError::malformed(path, line_no, "expected `RECT x1 y1 x2 y2`"));
            }
            let rect = Rect::new(
                num(f[1], line_no)?,
                num(f[2], line_no)?,
                num(f[3], line_no)?,
                num(f[4], line_no)?,
            )
            .map_err(|e| EpicError::malformed(path, line_no, e.to_string()))?;
            rects.push(rect);
        }
        Layout::new(width, height, seed, rects)
            .map_err(|e| EpicError::malformed(path, 1, e.to_string()))
    }
}

/// Layout generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub width: i64,
    pub height: i64,
    pub rect_count: usize,
    pub min_dim: i64,
    pub max_dim: i64,
    /// Regular rect dimensions are multiples of this step.
    pub dim_step: i64,
    pub min_spacing: i64,
    /// Probability that a regular rect is packed against an existing one at
    /// exactly `min_spacing`.
    pub cluster_rate: f64,
    /// Probability that the next placement is a risk motif (narrow line or
    /// facing line-end pair).
    pub motif_rate: f64,
    pub narrow_min: i64,
    pub narrow_max: i64,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            width: 30_000,
            height: 30_000,
            rect_count: 200,
            min_dim: 200,
            max_dim: 1500,
            dim_step: 100,
            min_spacing: 80,
            cluster_rate: 0.35,
            motif_rate: 0.07,
            narrow_min: 100,
            narrow_max: 150,
            max_attempts: 2000,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EpicError::InvalidInput(m.to_string()));
        if self.width <= 0 || self.height <= 0 {
            return bad("layout extent must be positive");
        }
        if self.min_dim <= 0 || self.max_dim < self.min_dim || self.dim_step <= 0 {
            return bad("rect dimensions must satisfy 0 < min_dim <= max_dim, dim_step > 0");
        }
        if self.narrow_min <= 0 || self.narrow_max < self.narrow_min {
            return bad("narrow widths must satisfy 0 < narrow_min <= narrow_max");
        }
        if self.min_spacing < 0 {
            return bad("min_spacing must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.cluster_rate) || !(0.0..=1.0).contains(&self.motif_rate) {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Uniform bucket grid over rect bounding boxes for neighbourhood queries.
#[derive(Debug, Clone)]
pub struct RectIndex {
    bucket: i64,
    nx: i64,
    ny: i64,
    cells: Vec<Vec<usize>>,
}

impl RectIndex {
    pub fn new(width: i64, height: i64, bucket: i64) -> Self {
        let bucket = bucket.max(1);
        let nx = (width + bucket - 1) / bucket;
        let ny = (height + bucket - 1) / bucket;
        RectIndex {
            bucket,
            nx: nx.max(1),
            ny: ny.max(1),
            cells: vec![Vec::new(); (nx.max(1) * ny.max(1)) as usize],
        }
    }

    pub fn build(layout: &Layout, bucket: i64) -> Self {
        let mut index = RectIndex::new(layout.width, layout.height, bucket);
        for (i, r) in layout.rects.iter().enumerate() {
            index.insert(i, r);
        }
        index
    }

    fn span(&self, lo: i64, hi: i64, n: i64) -> (i64, i64) {
        let a = (lo.div_euclid(self.bucket)).clamp(0, n - 1);
        let b = ((hi - 1).div_euclid(self.bucket)).clamp(0, n - 1);
        (a, b)
    }

    pub fn insert(&mut self, idx: usize, r: &Rect) {
        let (cx0, cx1) = self.span(r.x1, r.x2, self.nx);
        let (cy0, cy1) = self.span(r.y1, r.y2, self.ny);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                self.cells[(cy * self.nx + cx) as usize].push(idx);
            }
        }
    }

    /// Indices of rects whose bounding boxes may intersect the query box,
    /// sorted ascending and deduplicated.
    pub fn query(&self, x1: i64, y1: i64, x2: i64, y2: i64) -> Vec<usize> {
        let (cx0, cx1) = self.span(x1, x2.max(x1 + 1), self.nx);
        let (cy0, cy1) = self.span(y1, y2.max(y1 + 1), self.ny);
        let mut out = Vec::new();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                out.extend_from_slice(&self.cells[(cy * self.nx + cx) as usize]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

struct Placer<'a> {
    cfg: &'a GenConfig,
    rects: Vec<Rect>,
    regular: Vec<usize>,
    index: RectIndex,
}

impl Placer<'_> {
    fn fits(&self, r: &Rect) -> bool {
        if !r.within(self.cfg.width, self.cfg.height) {
            return false;
        }
        let s = self.cfg.min_spacing;
        self.index
            .query(r.x1 - s, r.y1 - s, r.x2 + s, r.y2 + s)
            .into_iter()
            .all(|i| r.gap(&self.rects[i]) >= s)
    }

    fn push(&mut self, r: Rect, regular: bool) {
        let idx = self.rects.len();
        self.index.insert(idx, &r);
        if regular {
            self.regular.push(idx);
        }
        self.rects.push(r);
    }

    fn snapped(&self, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
        let step = self.cfg.dim_step;
        let a = (lo + step - 1) / step;
        let b = (hi / step).max(a);
        rng.gen_range(a..=b) * step
    }

    fn narrow_width(&self, rng: &mut ChaCha8Rng) -> i64 {
        // 10 nm granularity between the narrow bounds
        let a = self.cfg.narrow_min;
        let steps = (self.cfg.narrow_max - a) / 10;
        a + 10 * rng.gen_range(0..=steps)
    }

    fn regular_dims(&self, rng: &mut ChaCha8Rng) -> (i64, i64) {
        let (lo, hi) = (self.cfg.min_dim, self.cfg.max_dim);
        let long = self.snapped(rng, lo, hi);
        let short = if rng.gen_bool(0.5) {
            self.snapped(rng, lo, (2 * lo).min(hi))
        } else {
            self.snapped(rng, lo, hi)
        };
        if rng.gen_bool(0.5) {
            (long, short)
        } else {
            (short, long)
        }
    }

    fn random_at(&self, rng: &mut ChaCha8Rng, w: i64, h: i64) -> Option<Rect> {
        if w > self.cfg.width || h > self.cfg.height {
            return None;
        }
        let x = rng.gen_range(0..=self.cfg.width - w);
        let y = rng.gen_range(0..=self.cfg.height - h);
        Some(Rect { x1: x, y1: y, x2: x + w, y2: y + h })
    }

    /// A rect parallel to `anchor` on a random side at exactly `min_spacing`.
    fn beside(&self, rng: &mut ChaCha8Rng, anchor: &Rect, w: i64, h: i64) -> Rect {
        let s = self.cfg.min_spacing;
        match rng.gen_range(0..4u8) {
            0 | 1 => {
                let y = rng.gen_range(anchor.y1 - h + 1..anchor.y2);
                let x = if rng.gen_bool(0.5) { anchor.x2 + s } else { anchor.x1 - s - w };
                Rect { x1: x, y1: y, x2: x + w, y2: y + h }
            }
            _ => {
                let x = rng.gen_range(anchor.x1 - w + 1..anchor.x2);
                let y = if rng.gen_bool(0.5) { anchor.y2 + s } else { anchor.y1 - s - h };
                Rect { x1: x, y1: y, x2: x + w, y2: y + h }
            }
        }
    }

    /// Tries to add one rect (or a line-end pair when `allow_pair`). Returns
    /// the number of rects added, zero when the attempt was rejected.
    fn attempt(&mut self, rng: &mut ChaCha8Rng, allow_pair: bool) -> usize {
        let cfg = self.cfg;
        if rng.gen_bool(cfg.motif_rate) {
            let width = self.narrow_width(rng);
            let len = self.snapped(rng, cfg.min_dim, cfg.max_dim);
            let horizontal = rng.gen_bool(0.5);
            let (w, h) = if horizontal { (len, width) } else { (width, len) };
            let Some(first) = self.random_at(rng, w, h) else {
                return 0;
            };
            if !self.fits(&first) {
                return 0;
            }
            if allow_pair && rng.gen_bool(0.5) {
                let s = cfg.min_spacing;
                let second = if horizontal {
                    Rect { x1: first.x2 + s, y1: first.y1, x2: first.x2 + s + len, y2: first.y2 }
                } else {
                    Rect { x1: first.x1, y1: first.y2 + s, x2: first.x2, y2: first.y2 + s + len }
                };
                if !self.fits(&second) {
                    return 0;
                }
                self.push(first, false);
                self.push(second, false);
                return 2;
            }
            self.push(first, false);
            return 1;
        }

        let (w, h) = self.regular_dims(rng);
        let candidate = if !self.regular.is_empty() && rng.gen_bool(cfg.cluster_rate) {
            let anchor = self.rects[self.regular[rng.gen_range(0..self.regular.len())]];
            Some(self.beside(rng, &anchor, w, h))
        } else {
            self.random_at(rng, w, h)
        };
        match candidate {
            Some(r) if self.fits(&r) => {
                self.push(r, true);
                1
            }
            _ => 0,
        }
    }
}

/// Generates a layout as a deterministic function of `(seed, cfg)`.
pub fn generate_layout(seed: u64, cfg: &GenConfig) -> Result<Layout> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bucket = (cfg.max_dim + cfg.min_spacing).max(1) * 2;
    let mut placer = Placer {
        cfg,
        rects: Vec::with_capacity(cfg.rect_count),
        regular: Vec::new(),
        index: RectIndex::new(cfg.width, cfg.height, bucket),
    };

    while placer.rects.len() < cfg.rect_count {
        let remaining = cfg.rect_count - placer.rects.len();
        let mut added = 0;
        for _ in 0..cfg.max_attempts {
            added = placer.attempt(&mut rng, remaining >= 2);
            if added > 0 {
                break;
            }
        }
        if added == 0 {
            return Err(EpicError::PlacementFailure {
                placed: placer.rects.len(),
                requested: cfg.rect_count,
                attempts: cfg.max_attempts,
            });
        }
    }

    Ok(Layout {
        width: cfg.width,
        height: cfg.height,
        seed,
        rects: placer.rects,
    })
}

/// Edge of a rect, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// normal -y
    Bottom,
    /// normal +x
    Right,
    /// normal +y
    Top,
    /// normal -x
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn normal(self) -> (i64, i64) {
        match self {
            Side::Bottom => (0, -1),
            Side::Right => (1, 0),
            Side::Top => (0, 1),
            Side::Left => (-1, 0),
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Side::Bottom | Side::Top => Orientation::Horizontal,
            Side::Left | Side::Right => Orientation::Vertical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A contiguous piece of one rect edge, the unit that gets classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment {
    pub id: u64,
    pub owner: usize,
    pub owner_rect: Rect,
    pub side: Side,
    /// Range along the edge (x for horizontal edges, y for vertical ones).
    pub start: i64,
    pub end: i64,
}

impl Fragment {
    pub fn length(&self) -> i64 {
        self.end - self.start
    }

    pub fn orientation(&self) -> Orientation {
        self.side.orientation()
    }

    pub fn outward_normal(&self) -> (i64, i64) {
        self.side.normal()
    }

    /// Twice the centre coordinates, exact in integers.
    pub fn center_x2(&self) -> (i64, i64) {
        let r = &self.owner_rect;
        let along = self.start + self.end;
        match self.side {
            Side::Bottom => (along, 2 * r.y1),
            Side::Top => (along, 2 * r.y2),
            Side::Left => (2 * r.x1, along),
            Side::Right => (2 * r.x2, along),
        }
    }

    pub fn center(&self) -> (f64, f64) {
        let (x, y) = self.center_x2();
        (x as f64 / 2.0, y as f64 / 2.0)
    }
}

/// Splits `len` into pieces of `frag_len`; a remainder of at most half a
/// fragment is merged into the last full piece.
pub fn partition_edge(len: i64, frag_len: i64) -> Vec<i64> {
    let n = len / frag_len;
    let r = len % frag_len;
    if n == 0 {
        return vec![len];
    }
    let mut pieces = vec![frag_len; n as usize];
    if r > 0 {
        if 2 * r <= frag_len {
            *pieces.last_mut().unwrap() += r;
        } else {
            pieces.push(r);
        }
    }
    pieces
}

/// Fragments every rect edge. Ids are assigned sequentially in rect order,
/// then bottom, right, top, left, each edge walked from its low end.
pub fn fragment_layout(layout: &Layout, frag_len: i64) -> Result<Vec<Fragment>> {
    if frag_len <= 0 {
        return Err(EpicError::InvalidInput(format!("frag_len {frag_len} must be positive")));
    }
    let mut out = Vec::new();
    let mut id = 0u64;
    for (owner, rect) in layout.rects.iter().enumerate() {
        for side in Side::ALL {
            let (lo, len) = match side.orientation() {
                Orientation::Horizontal => (rect.x1, rect.width()),
                Orientation::Vertical => (rect.y1, rect.height()),
            };
            let mut start = lo;
            for piece in partition_edge(len, frag_len) {
                out.push(Fragment {
                    id,
                    owner,
                    owner_rect: *rect,
                    side,
                    start,
                    end: start + piece,
                });
                id += 1;
                start += piece;
            }
        }
    }
    Ok(out)
}

pub fn read_layout(path: &Path) -> Result<Layout> {
    let text = std::fs::read_to_string(path).map_err(|e| EpicError::io(path, e))?;
    Layout::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn one_rect(w: i64, h: i64) -> Layout {
        Layout::new(1000, 1000, 0, vec![Rect::new(100, 100, 100 + w, 100 + h).unwrap()]).unwrap()
    }

    #[test]
    fn empty_generation() {
        let cfg = GenConfig { rect_count: 0, ..GenConfig::default() };
        let layout = generate_layout(1, &cfg).unwrap();
        assert!(layout.rects.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig { rect_count: 120, width: 20_000, height: 20_000, ..GenConfig::default() };
        assert_eq!(generate_layout(3, &cfg).unwrap(), generate_layout(3, &cfg).unwrap());
        assert_ne!(generate_layout(3, &cfg).unwrap(), generate_layout(4, &cfg).unwrap());
    }

    #[test]
    fn default_layout_respects_spacing_brute_force() {
        let cfg = GenConfig::default();
        let layout = generate_layout(7, &cfg).unwrap();
        assert_eq!(layout.rects.len(), cfg.rect_count);
        let s = cfg.min_spacing;
        for (i, a) in layout.rects.iter().enumerate() {
            assert!(a.x1 >= 0 && a.y1 >= 0 && a.x2 <= layout.width && a.y2 <= layout.height);
            for b in &layout.rects[i + 1..] {
                // independent separation test: the s-inflated box of `a` must not
                // overlap the interior of `b`
                let overlap_x = a.x1 - s < b.x2 && b.x1 < a.x2 + s;
                let overlap_y = a.y1 - s < b.y2 && b.y1 < a.y2 + s;
                assert!(!(overlap_x && overlap_y), "{a:?} and {b:?} closer than {s}");
            }
        }
    }

    #[test]
    fn infeasible_config_fails() {
        let cfg = GenConfig {
            width: 1000,
            height: 1000,
            rect_count: 50,
            max_attempts: 50,
            ..GenConfig::default()
        };
        assert!(matches!(generate_layout(1, &cfg), Err(EpicError::PlacementFailure { .. })));
    }

    #[test]
    fn square_rect_gives_one_fragment_per_edge() {
        let frags = fragment_layout(&one_rect(100, 100), 100).unwrap();
        assert_eq!(frags.len(), 4);
        assert!(frags.iter().all(|f| f.length() == 100));
    }

    #[test]
    fn remainder_of_half_fragment_is_merged() {
        let frags = fragment_layout(&one_rect(250, 100), 100).unwrap();
        assert_eq!(frags.len(), 6);
        let bottom: Vec<i64> =
            frags.iter().filter(|f| f.side == Side::Bottom).map(|f| f.length()).collect();
        assert_eq!(bottom, vec![100, 150]);
        assert_eq!(partition_edge(260, 100), vec![100, 100, 60]);
        assert_eq!(partition_edge(40, 100), vec![40]);
    }

    #[test]
    fn empty_layout_has_no_fragments() {
        assert!(fragment_layout(&Layout::empty(100, 100), 100).unwrap().is_empty());
        assert!(fragment_layout(&Layout::empty(100, 100), 0).is_err());
    }

    #[test]
    fn fragments_cover_perimeter_with_unique_centers() {
        let cfg = GenConfig { rect_count: 150, width: 20_000, height: 20_000, ..GenConfig::default() };
        let layout = generate_layout(11, &cfg).unwrap();
        let frags = fragment_layout(&layout, 100).unwrap();
        for (i, r) in layout.rects.iter().enumerate() {
            let total: i64 = frags.iter().filter(|f| f.owner == i).map(|f| f.length()).sum();
            assert_eq!(total, r.perimeter());
        }
        let centers: HashSet<(i64, i64)> = frags.iter().map(|f| f.center_x2()).collect();
        assert_eq!(centers.len(), frags.len());
        assert_eq!(frags, fragment_layout(&layout, 100).unwrap());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let cfg = GenConfig { rect_count: 30, width: 10_000, height: 10_000, ..GenConfig::default() };
        let layout = generate_layout(5, &cfg).unwrap();
        let text = layout.to_text(&["note".to_string()]);
        let back = Layout::parse(&text, Path::new("x.layout")).unwrap();
        assert_eq!(back, layout);

        let err = Layout::parse("LAYOUT v1 10 10 0\nRECT 1 2 3\n", Path::new("bad.layout"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("bad.layout:2"), "{err}");
        assert!(Layout::parse("LAYOUT v1 10 10 0\nRECT 5 5 20 6\n", Path::new("o")).is_err());
    }

    #[test]
    fn index_finds_neighbours() {
        let layout = Layout::new(
            10_000,
            10_000,
            0,
            vec![Rect::new(0, 0, 10, 10).unwrap(), Rect::new(5000, 5000, 5100, 5100).unwrap()],
        )
        .unwrap();
        let index = RectIndex::build(&layout, 1000);
        assert_eq!(index.query(0, 0, 50, 50), vec![0]);
        assert_eq!(index.query(4900, 4900, 6000, 6000), vec![1]);
        assert_eq!(index.query(0, 0, 10_000, 10_000), vec![0, 1]);
    }
}
