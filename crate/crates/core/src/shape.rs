//! Genome to colored triangle mesh.
//!
//! The presence output is sampled at the cell centers of a cubic lattice over
//! `[-1, 1]^3`, fragments other than the largest 6-connected component are
//! cleared, and the iso-surface at level 0 is extracted with marching cubes.
//! Color comes from a single query at the origin.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::cppn::{CompiledCppn, CppnError, Genome};

pub const DEFAULT_RESOLUTION: usize = 16;
pub const MAX_RESOLUTION: usize = 256;

/// Iso-level separating material (above) from empty space.
pub const ISO_LEVEL: f64 = 0.0;

/// Edge-interpolation parameters are kept this far from the lattice points
/// so that vertices from different edges never coincide.
const EDGE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("resolution {0} outside [2, 256]")]
    Resolution(usize),
}

/// A cubic lattice over `[-1, 1]^3` sampled at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticeSpec {
    resolution: usize,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec { resolution: DEFAULT_RESOLUTION }
    }
}

impl LatticeSpec {
    pub fn new(resolution: usize) -> Result<Self, LatticeError> {
        if (2..=MAX_RESOLUTION).contains(&resolution) {
            Ok(LatticeSpec { resolution })
        } else {
            Err(LatticeError::Resolution(resolution))
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Coordinate of sample index `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + (2 * i + 1) as f64 / self.resolution as f64
    }

    /// Distance between neighboring samples.
    pub fn spacing(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let r = self.resolution;
        (idx % r, (idx / r) % r, idx / (r * r))
    }
}

/// Presence values over a lattice, x varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    spec: LatticeSpec,
    values: Vec<f64>,
}

impl ScalarGrid {
    /// Panics if `values` does not match the lattice size.
    pub fn from_values(spec: LatticeSpec, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), spec.len(), "grid size mismatch");
        ScalarGrid { spec, values }
    }

    pub fn filled(spec: LatticeSpec, value: f64) -> Self {
        ScalarGrid { spec, values: vec![value; spec.len()] }
    }

    /// Fills the grid from a function of lattice coordinates.
    pub fn from_fn(spec: LatticeSpec, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for k in 0..spec.resolution {
            for j in 0..spec.resolution {
                for i in 0..spec.resolution {
                    values.push(f(spec.coord(i), spec.coord(j), spec.coord(k)));
                }
            }
        }
        ScalarGrid { spec, values }
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.spec.index(i, j, k);
        self.values[idx] = v;
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.values[idx] > ISO_LEVEL
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > ISO_LEVEL).count()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.values.len() as f64
    }
}

/// Samples the presence output over the lattice.
pub fn sample_field(genome: &Genome, spec: LatticeSpec) -> Result<ScalarGrid, CppnError> {
    let cppn = CompiledCppn::new(genome)?;
    Ok(sample_compiled(&cppn, spec))
}

pub fn sample_compiled(cppn: &CompiledCppn, spec: LatticeSpec) -> ScalarGrid {
    let mut scratch = Vec::with_capacity(cppn.scratch_len());
    ScalarGrid::from_fn(spec, |x, y, z| {
        let d = libm::sqrt(x * x + y * y + z * z);
        cppn.evaluate_with(&mut scratch, x, y, z, d).presence
    })
}

/// An RGB color with channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColorTriple {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ColorTriple {
    pub const GRAY: ColorTriple = ColorTriple { r: 0.5, g: 0.5, b: 0.5 };

    /// Maps CPPN outputs in `[-1, 1]` onto `[0, 1]`.
    pub fn from_outputs(r: f64, g: f64, b: f64) -> Self {
        let map = |v: f64| ((v + 1.0) / 2.0).clamp(0.0, 1.0);
        ColorTriple { r: map(r), g: map(g), b: map(b) }
    }

    pub fn to_bytes(self) -> [u8; 3] {
        let q = |v: f64| libm::round(v.clamp(0.0, 1.0) * 255.0) as u8;
        [q(self.r), q(self.g), q(self.b)]
    }

    pub fn from_bytes(rgb: [u8; 3]) -> Self {
        ColorTriple { r: rgb[0] as f64 / 255.0, g: rgb[1] as f64 / 255.0, b: rgb[2] as f64 / 255.0 }
    }
}

/// The object's color: the color outputs queried once at the center.
pub fn query_color(genome: &Genome) -> Result<ColorTriple, CppnError> {
    Ok(query_color_compiled(&CompiledCppn::new(genome)?))
}

pub fn query_color_compiled(cppn: &CompiledCppn) -> ColorTriple {
    let out = cppn.evaluate(0.0, 0.0, 0.0, 0.0);
    ColorTriple::from_outputs(out.red, out.green, out.blue)
}

/// Clears every occupied cell outside the largest 6-connected component.
///
/// On equal sizes the component holding the smallest flat index wins.
pub fn largest_component(grid: &ScalarGrid) -> ScalarGrid {
    let spec = grid.spec;
    let r = spec.resolution;
    let n = spec.len();
    let mut label = vec![u32::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..n {
        if !grid.is_occupied(start) || label[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let mut size = 0;
        label[start] = id;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            size += 1;
            let (i, j, k) = spec.unindex(idx);
            let mut visit = |ni: usize, nj: usize, nk: usize| {
                let nidx = spec.index(ni, nj, nk);
                if grid.is_occupied(nidx) && label[nidx] == u32::MAX {
                    label[nidx] = id;
                    stack.push(nidx);
                }
            };
            if i > 0 {
                visit(i - 1, j, k);
            }
            if i + 1 < r {
                visit(i + 1, j, k);
            }
            if j > 0 {
                visit(i, j - 1, k);
            }
            if j + 1 < r {
                visit(i, j + 1, k);
            }
            if k > 0 {
                visit(i, j, k - 1);
            }
            if k + 1 < r {
                visit(i, j, k + 1);
            }
        }
        sizes.push(size);
    }

    if sizes.len() <= 1 {
        return grid.clone();
    }
    let mut keep = 0u32;
    for (id, &s) in sizes.iter().enumerate() {
        if s > sizes[keep as usize] {
            keep = id as u32;
        }
    }
    let values =
        grid.values.iter().zip(&label).map(|(&v, &l)| if l != u32::MAX && l != keep { -1.0 } else { v }).collect();
    ScalarGrid { spec, values }
}

/// A colored triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub color: ColorTriple,
}

impl Mesh {
    pub fn empty() -> Self {
        Mesh { vertices: Vec::new(), triangles: Vec::new(), color: ColorTriple::GRAY }
    }

    pub fn with_color(mut self, color: ColorTriple) -> Self {
        self.color = color;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_corners(&self, t: [u32; 3]) -> [[f64; 3]; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    /// Undirected edge -> number of incident triangles.
    pub fn edge_incidence(&self) -> BTreeMap<(u32, u32), usize> {
        let mut edges = BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        self.edge_incidence().values().all(|&c| c == 2)
    }

    /// Every directed edge appears once, so neighbors agree on winding.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed = BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                if directed.insert((t[e], t[(e + 1) % 3]), ()).is_some() {
                    return false;
                }
            }
        }
        true
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_incidence().len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_area(&self, t: [u32; 3]) -> f64 {
        let [a, b, c] = self.triangle_corners(t);
        let n = cross(sub(b, a), sub(c, a));
        0.5 * libm::sqrt(dot(n, n))
    }

    pub fn min_triangle_area(&self) -> Option<f64> {
        self.triangles.iter().map(|&t| self.triangle_area(t)).reduce(f64::min)
    }

    /// Signed enclosed volume; positive when triangles wind outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| {
                let [a, b, c] = self.triangle_corners(t);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Cube edges as (lower corner, axis); corner `c` sits at offset
/// `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
const CUBE_EDGES: [(u8, u8); 12] =
    [(0, 0), (2, 0), (4, 0), (6, 0), (0, 1), (1, 1), (4, 1), (5, 1), (0, 2), (1, 2), (2, 2), (3, 2)];

fn edge_between(a: u8, b: u8) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as u8;
    CUBE_EDGES.iter().position(|&e| e == (lo, axis)).expect("corners share an edge")
}

/// Corners of each cube face, counter-clockwise seen from outside the cube.
fn face_corners() -> [[u8; 4]; 6] {
    let mut faces = [[0u8; 4]; 6];
    for axis in 0..3u8 {
        let u = (axis + 1) % 3;
        let v = (axis + 2) % 3;
        for side in 0..2u8 {
            let at = |du: u8, dv: u8| (side << axis) | (du << u) | (dv << v);
            faces[(axis * 2 + side) as usize] = if side == 1 {
                [at(0, 0), at(1, 0), at(1, 1), at(0, 1)]
            } else {
                [at(0, 0), at(0, 1), at(1, 1), at(1, 0)]
            };
        }
    }
    faces
}

/// The 256 marching-cubes cases as closed, oriented loops of cube edges.
///
/// On each face every maximal run of inside corners is cut off by one
/// segment, so ambiguous faces always separate the inside corners. Adjacent
/// cubes see the same rule on their shared face, which makes the extracted
/// surface closed. Loops wind so that their right-hand normal points away
/// from the inside corners.
#[derive(Debug, Clone)]
struct CaseTable {
    loops: Vec<Vec<Vec<u8>>>,
}

impl CaseTable {
    fn build() -> Self {
        let faces = face_corners();
        let mut loops = Vec::with_capacity(256);
        for case in 0..256u16 {
            let inside = |c: u8| case & (1 << c) != 0;
            let mut next = [u8::MAX; 12];
            for face in &faces {
                for k in 0..4 {
                    let prev = (k + 3) % 4;
                    if !inside(face[k]) || inside(face[prev]) {
                        continue;
                    }
                    let mut end = k;
                    while inside(face[(end + 1) % 4]) {
                        end = (end + 1) % 4;
                    }
                    let entering = edge_between(face[prev], face[k]);
                    let leaving = edge_between(face[end], face[(end + 1) % 4]);
                    next[entering] = leaving as u8;
                }
            }
            let mut case_loops = Vec::new();
            let mut used = [false; 12];
            for start in 0..12 {
                if next[start] == u8::MAX || used[start] {
                    continue;
                }
                let mut lp = Vec::new();
                let mut e = start;
                while !used[e] {
                    used[e] = true;
                    lp.push(e as u8);
                    e = next[e] as usize;
                }
                case_loops.push(lp);
            }
            loops.push(case_loops);
        }
        CaseTable { loops }
    }
}

/// Extracts the iso-surface at level 0.
///
/// The grid is treated as padded by one layer of `-1`, so surfaces always
/// close. Loops of three edge points become one triangle; longer loops are
/// fanned around their centroid.
pub fn marching_cubes(grid: &ScalarGrid) -> Mesh {
    let table = CaseTable::build();
    let r = grid.resolution();
    let spec = grid.spec();
    let n = r + 2;
    let value = |p: [usize; 3]| -> f64 {
        if p.iter().any(|&c| c == 0 || c > r) {
            -1.0
        } else {
            grid.get(p[0] - 1, p[1] - 1, p[2] - 1)
        }
    };
    let coord = |c: usize| -1.0 + (2.0 * c as f64 - 1.0) / r as f64;

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut edge_vertex: BTreeMap<u64, u32> = BTreeMap::new();

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let mut corner_values = [0.0; 8];
                let mut case = 0usize;
                for (c, cv) in corner_values.iter_mut().enumerate() {
                    let p = [i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1)];
                    *cv = value(p);
                    if *cv > ISO_LEVEL {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for lp in &table.loops[case] {
                    let ids: Vec<u32> = lp
                        .iter()
                        .map(|&e| {
                            let (lo, axis) = CUBE_EDGES[e as usize];
                            let p = [i + (lo as usize & 1), j + (lo as usize >> 1 & 1), k + (lo as usize >> 2 & 1)];
                            let key = ((((p[2] * n + p[1]) * n + p[0]) * 3) + axis as usize) as u64;
                            *edge_vertex.entry(key).or_insert_with(|| {
                                let a = corner_values[lo as usize];
                                let b = corner_values[(lo | (1 << axis)) as usize];
                                let t = ((ISO_LEVEL - a) / (b - a)).clamp(EDGE_MARGIN, 1.0 - EDGE_MARGIN);
                                let mut pos = [coord(p[0]), coord(p[1]), coord(p[2])];
                                pos[axis as usize] += t * spec.spacing();
                                vertices.push(pos);
                                (vertices.len() - 1) as u32
                            })
                        })
                        .collect();
                    if ids.len() == 3 {
                        triangles.push([ids[0], ids[1], ids[2]]);
                    } else {
                        let mut c = [0.0; 3];
                        for &v in &ids {
                            for a in 0..3 {
                                c[a] += vertices[v as usize][a];
                            }
                        }
                        let inv = 1.0 / ids.len() as f64;
                        vertices.push([c[0] * inv, c[1] * inv, c[2] * inv]);
                        let centre = (vertices.len() - 1) as u32;
                        for w in 0..ids.len() {
                            triangles.push([centre, ids[w], ids[(w + 1) % ids.len()]]);
                        }
                    }
                }
            }
        }
    }
    Mesh { vertices, triangles, color: ColorTriple::GRAY }
}

/// One rendered individual.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    /// Presence grid restricted to its largest component.
    pub grid: ScalarGrid,
    pub color: ColorTriple,
    pub mesh: Option<Mesh>,
}

impl Phenotype {
    /// Runs the full pipeline; meshing is optional because it dominates cost
    /// when only attribute summaries are needed.
    pub fn build(genome: &Genome, spec: LatticeSpec, with_mesh: bool) -> Result<Self, CppnError> {
        let cppn = CompiledCppn::new(genome)?;
        let grid = largest_component(&sample_compiled(&cppn, spec));
        let color = query_color_compiled(&cppn);
        let mesh = with_mesh.then(|| marching_cubes(&grid).with_color(color));
        Ok(Phenotype { grid, color, mesh })
    }

    /// The mesh, computing it if it was not built up front.
    pub fn mesh(&self) -> Mesh {
        match &self.mesh {
            Some(m) => m.clone(),
            None => marching_cubes(&self.grid).with_color(self.color),
        }
    }
}
