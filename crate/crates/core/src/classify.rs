//! Attribute classification of phenotypes.
//!
//! Maps an occupancy grid and color onto the size / color / shape target
//! space and scores how close a phenotype is to a target. The heuristics are
//! stand-ins for human judgment and drive the synthetic viewer.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::shape::{ColorTriple, ScalarGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Size {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ColorClass {
    Red,
    Blue,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Shape {
    Cone,
    Oval,
    Rectangle,
}

impl Size {
    pub const ALL: [Size; 2] = [Size::Small, Size::Large];
}

impl ColorClass {
    pub const ALL: [ColorClass; 3] = [ColorClass::Red, ColorClass::Blue, ColorClass::Green];

    pub fn prototype(self) -> [f64; 3] {
        match self {
            ColorClass::Red => [1.0, 0.0, 0.0],
            ColorClass::Green => [0.0, 1.0, 0.0],
            ColorClass::Blue => [0.0, 0.0, 1.0],
        }
    }
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Cone, Shape::Oval, Shape::Rectangle];
}

/// A directed-design goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Target {
    pub size: Size,
    pub color: ColorClass,
    pub shape: Shape,
}

impl Target {
    pub const fn new(size: Size, color: ColorClass, shape: Shape) -> Self {
        Target { size, color, shape }
    }

    /// All 18 targets in a fixed order.
    pub fn all() -> Vec<Target> {
        let mut v = Vec::with_capacity(18);
        for size in Size::ALL {
            for color in ColorClass::ALL {
                for shape in Shape::ALL {
                    v.push(Target { size, color, shape });
                }
            }
        }
        v
    }

    /// Position in [`Target::all`].
    pub fn ordinal(&self) -> usize {
        let s = Size::ALL.iter().position(|&x| x == self.size).unwrap();
        let c = ColorClass::ALL.iter().position(|&x| x == self.color).unwrap();
        let h = Shape::ALL.iter().position(|&x| x == self.shape).unwrap();
        (s * 3 + c) * 3 + h
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let size = match self.size {
            Size::Small => "small",
            Size::Large => "large",
        };
        let color = match self.color {
            ColorClass::Red => "red",
            ColorClass::Blue => "blue",
            ColorClass::Green => "green",
        };
        let shape = match self.shape {
            Shape::Cone => "cone",
            Shape::Oval => "oval",
            Shape::Rectangle => "rectangle",
        };
        write!(f, "{size}-{color}-{shape}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected size-color-shape, e.g. small-blue-oval")]
pub struct TargetParseError;

impl FromStr for Target {
    type Err = TargetParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let mut parts = lower.split(['-', ',', ' ']).filter(|p| !p.is_empty());
        let size = match parts.next() {
            Some("small") => Size::Small,
            Some("large") => Size::Large,
            _ => return Err(TargetParseError),
        };
        let color = match parts.next() {
            Some("red") => ColorClass::Red,
            Some("blue") => ColorClass::Blue,
            Some("green") => ColorClass::Green,
            _ => return Err(TargetParseError),
        };
        let shape = match parts.next() {
            Some("cone") => Shape::Cone,
            Some("oval") => Shape::Oval,
            Some("rectangle") => Shape::Rectangle,
            _ => return Err(TargetParseError),
        };
        if parts.next().is_some() {
            return Err(TargetParseError);
        }
        Ok(Target { size, color, shape })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ClassifierConfig {
    /// Volume fraction at and above which an object counts as large.
    pub large_threshold: f64,
    /// Fewer occupied cells than this leaves the shape unknown.
    pub min_shape_cells: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { large_threshold: 0.15, min_shape_cells: 8 }
    }
}

pub fn classify_size(grid: &ScalarGrid, config: &ClassifierConfig) -> Option<Size> {
    size_of_fraction(grid.volume_fraction(), config)
}

fn size_of_fraction(fraction: f64, config: &ClassifierConfig) -> Option<Size> {
    if fraction <= 0.0 {
        None
    } else if fraction < config.large_threshold {
        Some(Size::Small)
    } else {
        Some(Size::Large)
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    libm::sqrt(sq(a[0] - b[0]) + sq(a[1] - b[1]) + sq(a[2] - b[2]))
}

fn sq(v: f64) -> f64 {
    v * v
}

fn rgb(c: ColorTriple) -> [f64; 3] {
    [c.r, c.g, c.b]
}

/// Nearest primary prototype; ties resolve in red, green, blue order.
pub fn classify_color(c: ColorTriple) -> ColorClass {
    let mut best = ColorClass::Red;
    let mut best_d = f64::INFINITY;
    for class in [ColorClass::Red, ColorClass::Green, ColorClass::Blue] {
        let d = distance(rgb(c), class.prototype());
        if d < best_d {
            best = class;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShapeScores {
    pub cone: f64,
    pub oval: f64,
    pub rectangle: f64,
}

impl ShapeScores {
    pub fn get(&self, shape: Shape) -> f64 {
        match shape {
            Shape::Cone => self.cone,
            Shape::Oval => self.oval,
            Shape::Rectangle => self.rectangle,
        }
    }

    /// Best shape, ties in cone, oval, rectangle order.
    pub fn argmax(&self) -> Shape {
        let mut best = Shape::Cone;
        for s in [Shape::Oval, Shape::Rectangle] {
            if self.get(s) > self.get(best) {
                best = s;
            }
        }
        best
    }
}

struct Occupied {
    cells: Vec<[usize; 3]>,
    lo: [usize; 3],
    hi: [usize; 3],
}

fn occupied(grid: &ScalarGrid) -> Occupied {
    let spec = grid.spec();
    let mut cells = Vec::new();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for (idx, &v) in grid.values().iter().enumerate() {
        if v > 0.0 {
            let (i, j, k) = spec.unindex(idx);
            let p = [i, j, k];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
            cells.push(p);
        }
    }
    Occupied { cells, lo, hi }
}

/// Shape scores, each in `[0, 1]`.
///
/// * Rectangle: occupied cells over the volume of their tight axis-aligned
///   bounding box.
/// * Oval: intersection-over-union between the occupied set and the
///   axis-aligned ellipsoid with the same centroid and second moments
///   (semi-axis `sqrt(5 * variance)`, variance including the `1/12` cell
///   extent).
/// * Cone: best over the three axes of `taper * roundness * sharpness`, where
///   taper is the Spearman correlation between slice position and slice area
///   oriented from the wider end (clamped at 0), roundness is the mean over
///   slices of `min(f, 1/f)` with `f` the slice area over the area of the disc
///   inscribed in its bounding rectangle, and sharpness is
///   `1 - narrow_end_area / wide_end_area`.
pub fn classify_shape(grid: &ScalarGrid, config: &ClassifierConfig) -> (ShapeScores, Option<Shape>) {
    let occ = occupied(grid);
    if occ.cells.len() < config.min_shape_cells.max(1) {
        return (ShapeScores::default(), None);
    }
    let scores = ShapeScores { cone: cone_score(&occ), oval: oval_score(&occ, grid), rectangle: rectangle_score(&occ) };
    (scores, Some(scores.argmax()))
}

fn rectangle_score(occ: &Occupied) -> f64 {
    let volume: usize = (0..3).map(|a| occ.hi[a] - occ.lo[a] + 1).product();
    occ.cells.len() as f64 / volume as f64
}

fn oval_score(occ: &Occupied, grid: &ScalarGrid) -> f64 {
    let n = occ.cells.len() as f64;
    let mut mean = [0.0; 3];
    for p in &occ.cells {
        for a in 0..3 {
            mean[a] += p[a] as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [1.0 / 12.0; 3];
    for p in &occ.cells {
        for a in 0..3 {
            var[a] += sq(p[a] as f64 - mean[a]) / n;
        }
    }
    let semi = var.map(|v| libm::sqrt(5.0 * v));
    let r = grid.resolution();
    let inside = |p: [usize; 3]| -> bool {
        let mut s = 0.0;
        for a in 0..3 {
            s += sq((p[a] as f64 - mean[a]) / semi[a]);
        }
        s <= 1.0
    };

    let span = |a: usize| -> (usize, usize) {
        let lo = libm::floor(mean[a] - semi[a]).max(0.0) as usize;
        let hi = (libm::ceil(mean[a] + semi[a]) as usize).min(r - 1);
        (lo, hi)
    };
    let (x0, x1) = span(0);
    let (y0, y1) = span(1);
    let (z0, z1) = span(2);
    let mut ellipsoid = 0usize;
    let mut both = 0usize;
    for k in z0..=z1 {
        for j in y0..=y1 {
            for i in x0..=x1 {
                if inside([i, j, k]) {
                    ellipsoid += 1;
                    if grid.get(i, j, k) > 0.0 {
                        both += 1;
                    }
                }
            }
        }
    }
    let union = occ.cells.len() + ellipsoid - both;
    if union == 0 {
        0.0
    } else {
        both as f64 / union as f64
    }
}

/// Average ranks (1-based), ties sharing the mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += sq(a - mx);
        syy += sq(b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / libm::sqrt(sxx * syy)
    }
}

fn cone_score(occ: &Occupied) -> f64 {
    let mut best: f64 = 0.0;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let len = occ.hi[axis] - occ.lo[axis] + 1;
        if len < 3 {
            continue;
        }
        let mut area = alloc::vec![0usize; len];
        let mut lo_u = alloc::vec![usize::MAX; len];
        let mut hi_u = alloc::vec![0usize; len];
        let mut lo_v = alloc::vec![usize::MAX; len];
        let mut hi_v = alloc::vec![0usize; len];
        for p in &occ.cells {
            let s = p[axis] - occ.lo[axis];
            area[s] += 1;
            lo_u[s] = lo_u[s].min(p[u]);
            hi_u[s] = hi_u[s].max(p[u]);
            lo_v[s] = lo_v[s].min(p[v]);
            hi_v[s] = hi_v[s].max(p[v]);
        }
        let positions: Vec<f64> = (0..len).map(|s| s as f64).collect();
        let areas: Vec<f64> = area.iter().map(|&a| a as f64).collect();
        let rho = spearman(&positions, &areas);
        let (wide, narrow) = if area[0] >= area[len - 1] { (area[0], area[len - 1]) } else { (area[len - 1], area[0]) };
        let taper = if area[0] >= area[len - 1] { -rho } else { rho }.max(0.0);
        if taper == 0.0 {
            continue;
        }
        let sharpness = 1.0 - narrow as f64 / wide as f64;

        let mut roundness = 0.0;
        let mut slices = 0usize;
        for s in 0..len {
            if area[s] == 0 {
                continue;
            }
            let w = (hi_u[s] - lo_u[s] + 1) as f64;
            let h = (hi_v[s] - lo_v[s] + 1) as f64;
            let fill = area[s] as f64 / (core::f64::consts::FRAC_PI_4 * w * h);
            roundness += fill.min(1.0 / fill);
            slices += 1;
        }
        let roundness = roundness / slices as f64;
        best = best.max(taper * roundness * sharpness);
    }
    best.clamp(0.0, 1.0)
}

/// Per-axis classification; `None` means unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Classification {
    pub size: Option<Size>,
    pub color: Option<ColorClass>,
    pub shape: Option<Shape>,
}

impl Classification {
    pub fn matches(&self, target: &Target) -> bool {
        self.size == Some(target.size) && self.color == Some(target.color) && self.shape == Some(target.shape)
    }

    pub fn matched_axes(&self, target: &Target) -> usize {
        usize::from(self.size == Some(target.size))
            + usize::from(self.color == Some(target.color))
            + usize::from(self.shape == Some(target.shape))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttributeSummary {
    pub volume_fraction: f64,
    pub color: ColorTriple,
    pub shape_scores: ShapeScores,
    pub classified: Classification,
}

impl AttributeSummary {
    pub fn is_empty(&self) -> bool {
        self.volume_fraction <= 0.0
    }
}

pub fn summarize(grid: &ScalarGrid, color: ColorTriple, config: &ClassifierConfig) -> AttributeSummary {
    let volume_fraction = grid.volume_fraction();
    let (shape_scores, shape) = classify_shape(grid, config);
    let size = size_of_fraction(volume_fraction, config);
    let classified = Classification { size, color: size.map(|_| classify_color(color)), shape };
    AttributeSummary { volume_fraction, color, shape_scores, classified }
}

fn size_band(size: Size, config: &ClassifierConfig) -> (f64, f64) {
    match size {
        Size::Small => (config.large_threshold / 2.0, config.large_threshold),
        Size::Large => ((1.0 + config.large_threshold) / 2.0, 1.0 - config.large_threshold),
    }
}

/// Per-axis similarity to `target`, each in `[0, 1]`: size, color, shape.
pub fn axis_scores(summary: &AttributeSummary, target: &Target, config: &ClassifierConfig) -> [f64; 3] {
    if summary.is_empty() {
        return [0.0; 3];
    }
    let size = if summary.classified.size == Some(target.size) {
        1.0
    } else {
        let (center, width) = size_band(target.size, config);
        (1.0 - (summary.volume_fraction - center).abs() / width).max(0.0)
    };
    let color =
        (1.0 - distance(rgb(summary.color), target.color.prototype()) / core::f64::consts::SQRT_2).clamp(0.0, 1.0);
    let shape = summary.shape_scores.get(target.shape);
    [size, color, shape]
}

/// Similarity of a phenotype to a target in `[0, 1]`.
///
/// The number of axes whose classification matches dominates; the mean of
/// the per-axis scores orders phenotypes within the same match count:
/// `(matched + mean(axis_scores)) / 4`. Empty phenotypes score 0.
pub fn target_score(summary: &AttributeSummary, target: &Target, config: &ClassifierConfig) -> f64 {
    if summary.is_empty() {
        return 0.0;
    }
    let axes = axis_scores(summary, target, config);
    let mean = axes.iter().sum::<f64>() / 3.0;
    (summary.classified.matched_axes(target) as f64 + mean) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::LatticeSpec;
    use alloc::string::ToString;

    fn spec(r: usize) -> LatticeSpec {
        LatticeSpec::new(r).unwrap()
    }

    fn ball(r: usize, radius: f64) -> ScalarGrid {
        ScalarGrid::from_fn(spec(r), |x, y, z| radius - (x * x + y * y + z * z).sqrt())
    }

    fn boxed(r: usize, half: f64) -> ScalarGrid {
        ScalarGrid::from_fn(spec(r), |x, y, z| half - x.abs().max(y.abs()).max(z.abs()))
    }

    fn cone(r: usize) -> ScalarGrid {
        // apex at y = 0.8, base radius 0.7 at y = -0.8
        ScalarGrid::from_fn(spec(r), |x, y, z| {
            if !(-0.8..=0.8).contains(&y) {
                return -1.0;
            }
            let radius = 0.7 * (0.8 - y) / 1.6;
            radius - (x * x + z * z).sqrt()
        })
    }

    #[test]
    fn target_space_has_eighteen_members() {
        let all = Target::all();
        assert_eq!(all.len(), 18);
        for (i, t) in all.iter().enumerate() {
            assert_eq!(t.ordinal(), i);
            assert_eq!(t.to_string().parse::<Target>().unwrap(), *t);
        }
        assert!("huge-red-cone".parse::<Target>().is_err());
    }

    #[test]
    fn size_thresholds() {
        let cfg = ClassifierConfig::default();
        assert_eq!(classify_size(&ScalarGrid::filled(spec(8), -1.0), &cfg), None);
        assert_eq!(classify_size(&ScalarGrid::filled(spec(8), 1.0), &cfg), Some(Size::Large));
        // sphere volume (4/3) pi 0.35^3 / 8 = 0.0224
        let g = ball(32, 0.35);
        assert!((g.volume_fraction() - 0.0224).abs() < 0.003, "{}", g.volume_fraction());
        assert_eq!(classify_size(&g, &cfg), Some(Size::Small));
    }

    #[test]
    fn color_prototypes() {
        let c = |r, g, b| ColorTriple { r, g, b };
        assert_eq!(classify_color(c(0.9, 0.1, 0.1)), ColorClass::Red);
        assert_eq!(classify_color(c(0.33, 0.34, 0.33)), ColorClass::Green);
        assert_eq!(classify_color(c(0.5, 0.5, 0.5)), ColorClass::Red);
        assert_eq!(classify_color(c(0.1, 0.2, 0.8)), ColorClass::Blue);
        assert_eq!(classify_color(c(0.0, 0.5, 0.5)), ColorClass::Green);
    }

    #[test]
    fn box_is_rectangle() {
        let (scores, shape) = classify_shape(&boxed(16, 0.5), &ClassifierConfig::default());
        assert!(scores.rectangle >= 0.95, "{scores:?}");
        assert_eq!(shape, Some(Shape::Rectangle));
    }

    #[test]
    fn cone_is_cone() {
        let (scores, shape) = classify_shape(&cone(16), &ClassifierConfig::default());
        assert_eq!(shape, Some(Shape::Cone), "{scores:?}");
    }

    #[test]
    fn ball_is_oval() {
        for r in [16, 24] {
            let (scores, shape) = classify_shape(&ball(r, 0.6), &ClassifierConfig::default());
            assert_eq!(shape, Some(Shape::Oval), "{scores:?}");
            assert!(scores.cone < 0.2, "{scores:?}");
        }
    }

    #[test]
    fn tiny_phenotypes_have_unknown_shape() {
        let mut g = ScalarGrid::filled(spec(8), -1.0);
        for i in 0..7 {
            g.set(i, 0, 0, 1.0);
        }
        let (scores, shape) = classify_shape(&g, &ClassifierConfig::default());
        assert_eq!(shape, None);
        assert_eq!(scores, ShapeScores::default());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[0.0, 1.0, 2.0], &[5.0, 3.0, 1.0]), -1.0);
        assert_eq!(spearman(&[0.0, 1.0, 2.0], &[2.0, 2.0, 2.0]), 0.0);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), alloc::vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn matching_phenotype_scores_high() {
        let cfg = ClassifierConfig::default();
        let red = ColorTriple { r: 1.0, g: 0.0, b: 0.0 };
        let s = summarize(&boxed(16, 0.3), red, &cfg);
        let target = Target::new(Size::Small, ColorClass::Red, Shape::Rectangle);
        assert!(s.classified.matches(&target));
        assert!(target_score(&s, &target, &cfg) >= 0.9);
    }

    #[test]
    fn empty_phenotype_scores_zero() {
        let cfg = ClassifierConfig::default();
        let s = summarize(&ScalarGrid::filled(spec(8), -1.0), ColorTriple::GRAY, &cfg);
        assert_eq!(s.classified, Classification::default());
        for t in Target::all() {
            assert_eq!(target_score(&s, &t, &cfg), 0.0);
        }
    }

    #[test]
    fn color_axis_is_monotone() {
        let cfg = ClassifierConfig::default();
        let red = ColorTriple { r: 1.0, g: 0.0, b: 0.0 };
        let s = summarize(&ball(16, 0.33), red, &cfg);
        assert!(s.volume_fraction < 0.05);
        let want = target_score(&s, &Target::new(Size::Small, ColorClass::Red, Shape::Oval), &cfg);
        let other = target_score(&s, &Target::new(Size::Small, ColorClass::Blue, Shape::Oval), &cfg);
        assert!(want > other);
    }

    #[test]
    fn translation_keeps_shape_class() {
        let cfg = ClassifierConfig::default();
        let a = ScalarGrid::from_fn(spec(16), |x, y, z| 0.4 - (x * x + y * y + z * z).sqrt());
        let b = ScalarGrid::from_fn(spec(16), |x, y, z| {
            let x = x - 0.25;
            let z = z + 0.125;
            0.4 - (x * x + y * y + z * z).sqrt()
        });
        let (sa, _) = classify_shape(&a, &cfg);
        let (sb, _) = classify_shape(&b, &cfg);
        assert_eq!(a.occupied_count(), b.occupied_count());
        assert!((sa.oval - sb.oval).abs() < 1e-12);
        assert!((sa.rectangle - sb.rectangle).abs() < 1e-12);
        assert!((sa.cone - sb.cone).abs() < 1e-12);
    }
}
