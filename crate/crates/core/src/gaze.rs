//! Point-of-regard samples, the 3x5 display layout, and the synthetic viewer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::{target_score, AttributeSummary, ClassifierConfig, Target};

/// One point-of-regard reading in normalized screen coordinates.
///
/// Invalid samples (eyes lost, gaze off-screen) may carry any coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GazeSample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t_ms: f64, x: f64, y: f64) -> Self {
        let valid = (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y);
        GazeSample { t_ms, x, y, valid }
    }

    pub fn invalid(t_ms: f64) -> Self {
        GazeSample { t_ms, x: -1.0, y: -1.0, valid: false }
    }
}

pub const GRID_ROWS: usize = 3;
pub const GRID_COLS: usize = 5;
pub const GRID_CELLS: usize = GRID_ROWS * GRID_COLS;

/// Axis-aligned rectangle in normalized screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// The on-screen 3x5 array. Cells are indexed row-major from the top-left;
/// gutters separate neighboring cells but there is no outer margin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridLayout {
    /// Gutter width as a fraction of the screen extent.
    pub gutter: f64,
}

impl Default for GridLayout {
    fn default() -> Self {
        GridLayout { gutter: 0.02 }
    }
}

impl GridLayout {
    pub fn new(gutter: f64) -> Self {
        GridLayout { gutter }
    }

    pub fn cell_width(&self) -> f64 {
        (1.0 - (GRID_COLS - 1) as f64 * self.gutter) / GRID_COLS as f64
    }

    pub fn cell_height(&self) -> f64 {
        (1.0 - (GRID_ROWS - 1) as f64 * self.gutter) / GRID_ROWS as f64
    }

    pub fn cell_rect(&self, cell: usize) -> Rect {
        let (row, col) = (cell / GRID_COLS, cell % GRID_COLS);
        let (w, h) = (self.cell_width(), self.cell_height());
        let x0 = col as f64 * (w + self.gutter);
        let y0 = row as f64 * (h + self.gutter);
        Rect { x0, y0, x1: x0 + w, y1: y0 + h }
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        self.cell_rect(cell).center()
    }

    fn band(v: f64, size: f64, gutter: f64, count: usize) -> Option<usize> {
        let pitch = size + gutter;
        let idx = ((v / pitch) as usize).min(count - 1);
        let offset = v - idx as f64 * pitch;
        let last = idx == count - 1;
        if offset < size || (last && offset <= size + 1e-12) {
            Some(idx)
        } else {
            None
        }
    }

    /// The cell containing `(x, y)`; `None` in gutters or off-screen.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return None;
        }
        let col = Self::band(x, self.cell_width(), self.gutter, GRID_COLS)?;
        let row = Self::band(y, self.cell_height(), self.gutter, GRID_ROWS)?;
        Some(row * GRID_COLS + col)
    }
}

/// Maps a sample to the grid cell it falls in. Invalid samples map nowhere.
pub fn map_point_to_cell(sample: &GazeSample, layout: &GridLayout) -> Option<usize> {
    if !sample.valid {
        return None;
    }
    layout.cell_at(sample.x, sample.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PolicyParams {
    /// Probability of glancing at a uniformly random cell.
    pub epsilon: f64,
    /// Fixation jitter standard deviation in cell widths.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams { epsilon: 0.05, sigma: 0.1, seed: 0 }
    }
}

/// A scripted viewer that looks at whichever object best matches its target.
#[derive(Debug, Clone)]
pub struct SyntheticPolicy {
    pub target: Target,
    pub params: PolicyParams,
    pub classifier: ClassifierConfig,
    rng: ChaCha8Rng,
}

impl SyntheticPolicy {
    pub fn new(target: Target, params: PolicyParams) -> Self {
        SyntheticPolicy {
            target,
            params,
            classifier: ClassifierConfig::default(),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        }
    }

    /// One sample given the summaries of the displayed phenotypes.
    pub fn step(&mut self, summaries: &[AttributeSummary], layout: &GridLayout, now_ms: f64) -> GazeSample {
        let mut scores = [0.0; GRID_CELLS];
        for (s, summary) in scores.iter_mut().zip(summaries) {
            *s = target_score(summary, &self.target, &self.classifier);
        }
        self.step_scores(&scores[..summaries.len().min(GRID_CELLS)], layout, now_ms)
    }

    /// One sample given precomputed per-cell scores.
    pub fn step_scores(&mut self, scores: &[f64], layout: &GridLayout, now_ms: f64) -> GazeSample {
        let cell = if self.params.epsilon > 0.0 && self.rng.random_bool(self.params.epsilon.min(1.0)) {
            self.rng.random_range(0..GRID_CELLS)
        } else {
            argmax(scores)
        };
        let (cx, cy) = layout.cell_center(cell);
        let (mut x, mut y) = (cx, cy);
        if self.params.sigma > 0.0 {
            let jitter = Normal::new(0.0, self.params.sigma * layout.cell_width()).expect("finite sigma");
            x += jitter.sample(&mut self.rng);
            y += jitter.sample(&mut self.rng);
        }
        GazeSample::new(now_ms, x, y)
    }
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ColorClass, Shape, Size};

    fn policy(epsilon: f64, sigma: f64) -> SyntheticPolicy {
        SyntheticPolicy::new(
            Target::new(Size::Small, ColorClass::Red, Shape::Cone),
            PolicyParams { epsilon, sigma, seed: 11 },
        )
    }

    #[test]
    fn center_and_corners() {
        let l = GridLayout::default();
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, 0.5, 0.5), &l), Some(7));
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, 0.0, 0.0), &l), Some(0));
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, 0.999, 0.999), &l), Some(14));
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, 1.0, 1.0), &l), Some(14));
    }

    #[test]
    fn invalid_and_gutter_map_nowhere() {
        let l = GridLayout::default();
        let mut s = GazeSample::new(0.0, 0.5, 0.5);
        s.valid = false;
        assert_eq!(map_point_to_cell(&s, &l), None);
        let gutter_x = l.cell_width() + l.gutter / 2.0;
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, gutter_x, 0.1), &l), None);
        let gutter_y = l.cell_height() + l.gutter / 2.0;
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, 0.1, gutter_y), &l), None);
        assert_eq!(map_point_to_cell(&GazeSample::new(0.0, -0.1, 0.5), &l), None);
    }

    #[test]
    fn cells_are_row_major() {
        let l = GridLayout::default();
        for cell in 0..GRID_CELLS {
            let (x, y) = l.cell_center(cell);
            assert_eq!(l.cell_at(x, y), Some(cell));
        }
        let tiles: f64 = (0..GRID_CELLS)
            .map(|c| {
                let r = l.cell_rect(c);
                (r.x1 - r.x0) * (r.y1 - r.y0)
            })
            .sum();
        let gutters = 1.0 - (1.0 - 4.0 * l.gutter) * (1.0 - 2.0 * l.gutter);
        assert!((tiles + gutters - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_policy_fixates_best_cell_center() {
        let mut p = policy(0.0, 0.0);
        let mut scores = [0.1; GRID_CELLS];
        scores[3] = 0.9;
        let l = GridLayout::default();
        let s = p.step_scores(&scores, &l, 5.0);
        assert_eq!((s.x, s.y), l.cell_center(3));
        assert!(s.valid);
        assert_eq!(s.t_ms, 5.0);
    }

    #[test]
    fn ties_choose_lowest_cell() {
        let mut p = policy(0.0, 0.0);
        let mut scores = [0.0; GRID_CELLS];
        scores[2] = 0.8;
        scores[9] = 0.8;
        let l = GridLayout::default();
        assert_eq!(map_point_to_cell(&p.step_scores(&scores, &l, 0.0), &l), Some(2));
    }

    #[test]
    fn policy_is_seeded() {
        let l = GridLayout::default();
        let scores = [0.5; GRID_CELLS];
        let (mut a, mut b) = (policy(0.3, 0.2), policy(0.3, 0.2));
        for t in 0..50 {
            assert_eq!(a.step_scores(&scores, &l, t as f64), b.step_scores(&scores, &l, t as f64));
        }
    }
}
