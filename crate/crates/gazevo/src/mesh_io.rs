//! Printable mesh files: binary STL and Wavefront OBJ.
//!
//! Binary STL carries the object color in the 80-byte header as the
//! widely supported `COLOR=` + RGBA convention. Normals are recomputed from
//! the single-precision vertices actually written, so parsing a file back
//! into a [`Mesh`] and exporting it again reproduces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use gazevo_core::shape::{ColorTriple, Mesh};

pub const STL_HEADER_LEN: usize = 80;
pub const STL_TRIANGLE_LEN: usize = 50;
const HEADER_TAG: &[u8] = b"gazevo binary STL ";
const COLOR_TAG: &[u8] = b"COLOR=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshFormat {
    #[default]
    StlBinary,
    Obj,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::StlBinary => "stl",
            MeshFormat::Obj => "obj",
        }
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stl" | "stl_binary" | "stl-binary" => Ok(MeshFormat::StlBinary),
            "obj" => Ok(MeshFormat::Obj),
            other => Err(format!("unknown mesh format {other:?} (expected stl or obj)")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshIoError {
    #[error("refusing to export a mesh with no triangles")]
    EmptyMesh,
    #[error("STL is {0} bytes, shorter than its header")]
    Truncated(usize),
    #[error("STL declares {declared} triangles but holds {actual} bytes of triangle data")]
    CountMismatch { declared: u32, actual: usize },
    #[error("OBJ line {line}: {reason}")]
    Obj { line: usize, reason: String },
}

/// Exports a mesh in `format`.
pub fn export_mesh(mesh: &Mesh, format: MeshFormat) -> Result<Vec<u8>, MeshIoError> {
    match format {
        MeshFormat::StlBinary => write_stl(mesh),
        MeshFormat::Obj => write_obj(mesh),
    }
}

fn to_f32(p: [f64; 3]) -> [f32; 3] {
    [p[0] as f32, p[1] as f32, p[2] as f32]
}

/// Unit normal of a single-precision triangle, zero if degenerate.
fn facet_normal(v: &[[f32; 3]; 3]) -> [f32; 3] {
    let p = v.map(|c| c.map(f64::from));
    let u = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
    let w = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
    let n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len == 0.0 {
        [0.0; 3]
    } else {
        n.map(|c| (c / len) as f32)
    }
}

fn stl_header(color: ColorTriple) -> [u8; STL_HEADER_LEN] {
    let mut header = [b' '; STL_HEADER_LEN];
    let [r, g, b] = color.to_bytes();
    let mut at = 0;
    for chunk in [HEADER_TAG, COLOR_TAG, &[r, g, b, 255]] {
        header[at..at + chunk.len()].copy_from_slice(chunk);
        at += chunk.len();
    }
    header
}

/// Binary STL: header, little-endian triangle count, 50 bytes per facet.
pub fn write_stl(mesh: &Mesh) -> Result<Vec<u8>, MeshIoError> {
    if mesh.triangles.is_empty() {
        return Err(MeshIoError::EmptyMesh);
    }
    let mut out = Vec::with_capacity(STL_HEADER_LEN + 4 + STL_TRIANGLE_LEN * mesh.triangles.len());
    out.extend_from_slice(&stl_header(mesh.color));
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in &mesh.triangles {
        let v = t.map(|i| to_f32(mesh.vertices[i as usize]));
        for c in facet_normal(&v).iter().chain(v.iter().flatten()) {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

/// A parsed binary STL.
#[derive(Debug, Clone, PartialEq)]
pub struct StlFile {
    pub header: [u8; STL_HEADER_LEN],
    pub facets: Vec<StlFacet>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlFacet {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

impl StlFile {
    /// The `COLOR=` RGB triple from the header, if present.
    pub fn color(&self) -> Option<ColorTriple> {
        let at = self.header.windows(COLOR_TAG.len()).position(|w| w == COLOR_TAG)? + COLOR_TAG.len();
        let rgb = self.header.get(at..at + 3)?;
        Some(ColorTriple::from_bytes([rgb[0], rgb[1], rgb[2]]))
    }

    /// Rebuilds an indexed mesh, merging bit-identical vertices.
    pub fn to_mesh(&self) -> Mesh {
        let mut index: BTreeMap<[u32; 3], u32> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(self.facets.len());
        for f in &self.facets {
            let t = f.vertices.map(|v| {
                *index.entry(v.map(f32::to_bits)).or_insert_with(|| {
                    vertices.push(v.map(f64::from));
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(t);
        }
        Mesh { vertices, triangles, color: self.color().unwrap_or(ColorTriple::GRAY) }
    }
}

fn read_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn parse_stl(bytes: &[u8]) -> Result<StlFile, MeshIoError> {
    if bytes.len() < STL_HEADER_LEN + 4 {
        return Err(MeshIoError::Truncated(bytes.len()));
    }
    let header: [u8; STL_HEADER_LEN] = bytes[..STL_HEADER_LEN].try_into().expect("checked length");
    let declared = u32::from_le_bytes(bytes[STL_HEADER_LEN..STL_HEADER_LEN + 4].try_into().expect("4 bytes"));
    let body = &bytes[STL_HEADER_LEN + 4..];
    if body.len() != declared as usize * STL_TRIANGLE_LEN {
        return Err(MeshIoError::CountMismatch { declared, actual: body.len() });
    }
    let facets = body
        .chunks_exact(STL_TRIANGLE_LEN)
        .map(|c| {
            let f = |i: usize| read_f32(c, 4 * i);
            StlFacet {
                normal: [f(0), f(1), f(2)],
                vertices: [[f(3), f(4), f(5)], [f(6), f(7), f(8)], [f(9), f(10), f(11)]],
                attribute: u16::from_le_bytes([c[48], c[49]]),
            }
        })
        .collect();
    Ok(StlFile { header, facets })
}

/// ASCII OBJ with LF endings. The color rides on a `# color r g b` comment.
pub fn write_obj(mesh: &Mesh) -> Result<Vec<u8>, MeshIoError> {
    if mesh.triangles.is_empty() {
        return Err(MeshIoError::EmptyMesh);
    }
    let c = mesh.color;
    let mut s = String::new();
    let _ = writeln!(s, "# gazevo object");
    let _ = writeln!(s, "# color {} {} {}", c.r, c.g, c.b);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    Ok(s.into_bytes())
}

pub fn parse_obj(text: &str) -> Result<Mesh, MeshIoError> {
    let mut mesh = Mesh::empty();
    for (n, line) in text.lines().enumerate() {
        let err = |reason: &str| MeshIoError::Obj { line: n + 1, reason: reason.to_string() };
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let xyz: Vec<f64> = fields.map(str::parse).collect::<Result<_, _>>().map_err(|_| err("bad vertex"))?;
                let [x, y, z] = xyz[..] else { return Err(err("vertex needs three coordinates")) };
                mesh.vertices.push([x, y, z]);
            }
            Some("f") => {
                let idx: Vec<u32> = fields
                    // tolerate `f a/b/c` forms by keeping the position index
                    .map(|f| f.split('/').next().unwrap_or("").parse::<u32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err("bad face"))?;
                let [a, b, c] = idx[..] else { return Err(err("only triangular faces are supported")) };
                if [a, b, c].iter().any(|&i| i == 0 || i as usize > mesh.vertices.len()) {
                    return Err(err("face index out of range"));
                }
                mesh.triangles.push([a - 1, b - 1, c - 1]);
            }
            Some("#") if line.starts_with("# color ") => {
                let rgb: Vec<f64> =
                    fields.skip(1).map(str::parse).collect::<Result<_, _>>().map_err(|_| err("bad color"))?;
                let [r, g, b] = rgb[..] else { return Err(err("color needs three channels")) };
                mesh.color = ColorTriple { r, g, b };
            }
            _ => {}
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Mesh {
        Mesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            color: ColorTriple { r: 1.0, g: 0.0, b: 0.5 },
        }
    }

    fn cube() -> Mesh {
        let vertices = (0..8).map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]).collect();
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Mesh { vertices, triangles, color: ColorTriple::GRAY }
    }

    #[test]
    fn single_triangle_is_134_bytes() {
        let bytes = write_stl(&triangle()).unwrap();
        assert_eq!(bytes.len(), 134);
        let f = parse_stl(&bytes).unwrap();
        assert_eq!(f.facets[0].normal, [0.0, 0.0, 1.0]);
        assert_eq!(f.facets[0].attribute, 0);
    }

    #[test]
    fn count_field_matches() {
        let bytes = write_stl(&cube()).unwrap();
        assert_eq!(u32::from_le_bytes(bytes[80..84].try_into().unwrap()), 12);
        assert!(cube().is_watertight());
    }

    #[test]
    fn stl_round_trip_is_byte_identical() {
        let bytes = write_stl(&cube()).unwrap();
        let parsed = parse_stl(&bytes).unwrap();
        assert_eq!(parsed.to_mesh().vertices.len(), 8);
        assert_eq!(write_stl(&parsed.to_mesh()).unwrap(), bytes);
    }

    #[test]
    fn header_carries_color() {
        let bytes = write_stl(&triangle()).unwrap();
        let c = parse_stl(&bytes).unwrap().color().unwrap();
        assert_eq!(c.to_bytes(), [255, 0, 128]);
    }

    #[test]
    fn empty_mesh_is_refused() {
        assert_eq!(write_stl(&Mesh::empty()), Err(MeshIoError::EmptyMesh));
        assert_eq!(write_obj(&Mesh::empty()), Err(MeshIoError::EmptyMesh));
    }

    #[test]
    fn truncated_stl_is_rejected() {
        let bytes = write_stl(&cube()).unwrap();
        assert!(matches!(parse_stl(&bytes[..100]), Err(MeshIoError::CountMismatch { declared: 12, .. })));
        assert_eq!(parse_stl(&bytes[..10]), Err(MeshIoError::Truncated(10)));
    }

    #[test]
    fn obj_round_trip() {
        let bytes = write_obj(&cube()).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(!text.contains('\r'));
        let m = parse_obj(&text).unwrap();
        assert_eq!(m, cube());
        assert_eq!(write_obj(&m).unwrap(), bytes);
    }

    #[test]
    fn obj_rejects_bad_faces() {
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(parse_obj("v 0 0\n").is_err());
    }
}
