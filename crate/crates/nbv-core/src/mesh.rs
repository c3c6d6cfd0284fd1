//! Triangle meshes: PLY/OBJ loading, area-uniform surface sampling, binary PLY
//! output, and the procedural test objects used by the simulation runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("mesh contains no valid triangles")]
    EmptyMesh,
}

/// Indexed triangle mesh in world coordinates (meters).
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub surface_area: f64,
}

fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

impl TriangleMesh {
    /// Build from raw buffers, dropping zero-area/degenerate triangles and
    /// rejecting out-of-range indices or non-finite coordinates.
    pub fn from_buffers(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        for v in &vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::ParseError("non-finite vertex coordinate".into()));
            }
        }
        let n = vertices.len() as u32;
        let mut kept = Vec::with_capacity(triangles.len());
        let mut surface_area = 0.0;
        for t in triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(MeshError::ParseError(format!(
                    "triangle index out of range: {:?} with {} vertices",
                    t, n
                )));
            }
            let area = triangle_area(
                &vertices[t[0] as usize],
                &vertices[t[1] as usize],
                &vertices[t[2] as usize],
            );
            if area > 0.0 {
                surface_area += area;
                kept.push(t);
            }
        }
        if kept.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        Ok(Self {
            vertices,
            triangles: kept,
            surface_area,
        })
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("mesh has vertices")
    }

    pub fn triangle_vertices(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// Outward face normal assuming counter-clockwise winding seen from outside.
    pub fn triangle_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(i);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Area-uniform surface samples with the face normal at each sample.
    pub fn sample_surface<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<(Vec3, Vec3)> {
        // Cumulative-area table for proportional triangle selection.
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(i);
            acc += triangle_area(&a, &b, &c);
            cumulative.push(acc);
        }
        let total = acc;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let target = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&x| x < target).min(self.triangles.len() - 1);
            let [a, b, c] = self.triangle_vertices(idx);
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = a + (b - a) * u + (c - a) * v;
            out.push((p, self.triangle_normal(idx)));
        }
        out
    }

    /// Exact distance from a point to the mesh surface (linear scan).
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(i);
            best = best.min(point_triangle_distance(p, &a, &b, &c));
        }
        best
    }
}

/// Load a triangle mesh from PLY (ASCII or binary little-endian) or OBJ,
/// chosen by file extension with a PLY magic-number fallback.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh, MeshError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("obj") => load_obj(path),
        Some("ply") => load_ply(path),
        _ => {
            let mut head = [0u8; 4];
            File::open(path)?.read_exact(&mut head).ok();
            if &head[..3] == b"ply" {
                load_ply(path)
            } else {
                load_obj(path)
            }
        }
    }
}

fn load_obj(path: &Path) -> Result<TriangleMesh, MeshError> {
    let reader = BufReader::new(File::open(path)?);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in coord.iter_mut() {
                    *c = fields
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| {
                            MeshError::ParseError(format!("bad vertex at line {}", lineno + 1))
                        })?;
                }
                vertices.push(Vec3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                // Indices may be v, v/vt, v/vt/vn, or v//vn; negative indices
                // reference from the end per the OBJ spec.
                let mut idx = Vec::new();
                for f in fields {
                    let first = f.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| {
                        MeshError::ParseError(format!("bad face index at line {}", lineno + 1))
                    })?;
                    let resolved = if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        i - 1
                    };
                    if resolved < 0 {
                        return Err(MeshError::ParseError(format!(
                            "face index out of range at line {}",
                            lineno + 1
                        )));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(MeshError::ParseError(format!(
                        "face with fewer than 3 vertices at line {}",
                        lineno + 1
                    )));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::from_buffers(vertices, triangles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy)]
enum PlyScalar {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            _ => return None,
        })
    }

    fn size(&self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::F32 | Self::I32 | Self::U32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(&self, bytes: &[u8]) -> f64 {
        match self {
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            Self::I8 => bytes[0] as i8 as f64,
            Self::U8 => bytes[0] as f64,
            Self::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Self::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { name: String, ty: PlyScalar },
    List { name: String, count_ty: PlyScalar, item_ty: PlyScalar },
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn load_ply(path: &Path) -> Result<TriangleMesh, MeshError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = String::new();
    reader.read_line(&mut magic)?;
    if magic.trim_end() != "ply" {
        return Err(MeshError::ParseError("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(MeshError::ParseError("unexpected EOF in header".into()));
        }
        let line = line.trim_end();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                format = match fields.next() {
                    Some("ascii") => Some(PlyFormat::Ascii),
                    Some("binary_little_endian") => Some(PlyFormat::BinaryLittleEndian),
                    Some(other) => {
                        return Err(MeshError::ParseError(format!(
                            "unsupported ply format {other}"
                        )))
                    }
                    None => return Err(MeshError::ParseError("bad format line".into())),
                };
            }
            Some("element") => {
                let name = fields
                    .next()
                    .ok_or_else(|| MeshError::ParseError("bad element line".into()))?;
                let count: usize = fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| MeshError::ParseError("bad element count".into()))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::ParseError("property before element".into()))?;
                let kind = fields
                    .next()
                    .ok_or_else(|| MeshError::ParseError("bad property line".into()))?;
                if kind == "list" {
                    let count_ty = fields
                        .next()
                        .and_then(PlyScalar::parse)
                        .ok_or_else(|| MeshError::ParseError("bad list count type".into()))?;
                    let item_ty = fields
                        .next()
                        .and_then(PlyScalar::parse)
                        .ok_or_else(|| MeshError::ParseError("bad list item type".into()))?;
                    let name = fields
                        .next()
                        .ok_or_else(|| MeshError::ParseError("unnamed list property".into()))?;
                    element.properties.push(PlyProperty::List {
                        name: name.to_string(),
                        count_ty,
                        item_ty,
                    });
                } else {
                    let ty = PlyScalar::parse(kind)
                        .ok_or_else(|| MeshError::ParseError(format!("bad scalar type {kind}")))?;
                    let name = fields
                        .next()
                        .ok_or_else(|| MeshError::ParseError("unnamed property".into()))?;
                    element.properties.push(PlyProperty::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(MeshError::ParseError(format!("unknown header token {other}")))
            }
        }
    }
    let format = format.ok_or_else(|| MeshError::ParseError("no format line".into()))?;

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    match format {
        PlyFormat::Ascii => {
            for element in &elements {
                for _ in 0..element.count {
                    let mut line = String::new();
                    if reader.read_line(&mut line)? == 0 {
                        return Err(MeshError::ParseError("unexpected EOF in body".into()));
                    }
                    let mut tokens = line.split_whitespace();
                    parse_ply_row(element, &mut vertices, &mut triangles, |_| {
                        tokens
                            .next()
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| MeshError::ParseError("bad ascii value".into()))
                    })?;
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut body = Vec::new();
            reader.read_to_end(&mut body)?;
            let mut offset = 0usize;
            for element in &elements {
                for _ in 0..element.count {
                    parse_ply_row(element, &mut vertices, &mut triangles, |ty| {
                        let size = ty.size();
                        if offset + size > body.len() {
                            return Err(MeshError::ParseError("truncated binary body".into()));
                        }
                        let v = ty.read_le(&body[offset..offset + size]);
                        offset += size;
                        Ok(v)
                    })?;
                }
            }
        }
    }
    TriangleMesh::from_buffers(vertices, triangles)
}

/// Decode one element row, pulling scalars through `next_value` (which binds
/// ASCII tokens or binary bytes) and collecting vertex coordinates and faces.
fn parse_ply_row(
    element: &PlyElement,
    vertices: &mut Vec<Vec3>,
    triangles: &mut Vec<[u32; 3]>,
    mut next_value: impl FnMut(PlyScalar) -> Result<f64, MeshError>,
) -> Result<(), MeshError> {
    let mut xyz = [f64::NAN; 3];
    for prop in &element.properties {
        match prop {
            PlyProperty::Scalar { name, ty } => {
                let v = next_value(*ty)?;
                match name.as_str() {
                    "x" => xyz[0] = v,
                    "y" => xyz[1] = v,
                    "z" => xyz[2] = v,
                    _ => {}
                }
            }
            PlyProperty::List { name, count_ty, item_ty } => {
                let n = next_value(*count_ty)? as usize;
                let mut idx = Vec::with_capacity(n);
                for _ in 0..n {
                    idx.push(next_value(*item_ty)? as i64);
                }
                if (name == "vertex_indices" || name == "vertex_index") && element.name == "face" {
                    if idx.len() < 3 {
                        return Err(MeshError::ParseError("face with <3 indices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                    }
                }
            }
        }
    }
    if element.name == "vertex" {
        if xyz.iter().any(|v| v.is_nan()) {
            return Err(MeshError::ParseError("vertex missing x/y/z".into()));
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(())
}

/// Write points as a binary little-endian PLY cloud (float32 x/y/z).
pub fn write_ply_cloud(path: &Path, points: &[Vec3]) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    for p in points {
        w.write_all(&(p.x as f32).to_le_bytes())?;
        w.write_all(&(p.y as f32).to_le_bytes())?;
        w.write_all(&(p.z as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Write a mesh as binary little-endian PLY with uchar-counted uint faces.
pub fn write_ply_mesh(path: &Path, mesh: &TriangleMesh) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    for p in &mesh.vertices {
        w.write_all(&(p.x as f32).to_le_bytes())?;
        w.write_all(&(p.y as f32).to_le_bytes())?;
        w.write_all(&(p.z as f32).to_le_bytes())?;
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Exact point-to-triangle distance (Ericson, Real-Time Collision Detection).
pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm()
}

/// Procedural test objects.
pub mod synth {
    use super::*;

    /// Longitude/latitude sphere with poles on the z axis.
    ///
    /// Winding is counter-clockwise seen from outside, so face normals point
    /// outward.
    pub fn uv_sphere(center: Vec3, radius: f64, segments: u32, rings: u32) -> TriangleMesh {
        radial_blob(center, segments, rings, |_, _| radius)
    }

    /// Star-shaped surface `r(theta, phi)` tessellated like a UV sphere.
    /// `radius_fn` receives (elevation from +z pole in [0, pi], azimuth in
    /// [0, 2pi)) and must return a positive radius.
    pub fn radial_blob(
        center: Vec3,
        segments: u32,
        rings: u32,
        radius_fn: impl Fn(f64, f64) -> f64,
    ) -> TriangleMesh {
        assert!(segments >= 3 && rings >= 2);
        let mut vertices = Vec::new();
        // North pole (+z), ring vertices, south pole.
        vertices.push(center + Vec3::new(0.0, 0.0, radius_fn(0.0, 0.0)));
        for ring in 1..rings {
            let theta = std::f64::consts::PI * ring as f64 / rings as f64;
            for seg in 0..segments {
                let phi = std::f64::consts::TAU * seg as f64 / segments as f64;
                let r = radius_fn(theta, phi);
                vertices.push(
                    center
                        + Vec3::new(
                            r * theta.sin() * phi.cos(),
                            r * theta.sin() * phi.sin(),
                            r * theta.cos(),
                        ),
                );
            }
        }
        vertices.push(center + Vec3::new(0.0, 0.0, -radius_fn(std::f64::consts::PI, 0.0)));
        let south = (vertices.len() - 1) as u32;
        let ring_start = |ring: u32| 1 + (ring - 1) * segments;

        let mut triangles = Vec::new();
        for seg in 0..segments {
            let next = (seg + 1) % segments;
            triangles.push([0, ring_start(1) + seg, ring_start(1) + next]);
        }
        for ring in 1..rings - 1 {
            for seg in 0..segments {
                let next = (seg + 1) % segments;
                let a = ring_start(ring) + seg;
                let b = ring_start(ring) + next;
                let c = ring_start(ring + 1) + seg;
                let d = ring_start(ring + 1) + next;
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        for seg in 0..segments {
            let next = (seg + 1) % segments;
            triangles.push([south, ring_start(rings - 1) + next, ring_start(rings - 1) + seg]);
        }
        TriangleMesh::from_buffers(vertices, triangles).expect("generator produces valid mesh")
    }

    /// Torus around `center`, axis along `axis_y = false ? z : y`-style builds
    /// are avoided: the tube circles the local z axis, then the whole ring is
    /// rotated into the x-z plane when `vertical` is set.
    pub fn torus(
        center: Vec3,
        major_radius: f64,
        minor_radius: f64,
        segments: u32,
        sides: u32,
        vertical: bool,
    ) -> TriangleMesh {
        assert!(segments >= 3 && sides >= 3);
        let mut vertices = Vec::new();
        for seg in 0..segments {
            let u = std::f64::consts::TAU * seg as f64 / segments as f64;
            for side in 0..sides {
                let v = std::f64::consts::TAU * side as f64 / sides as f64;
                let ring = major_radius + minor_radius * v.cos();
                let local = Vec3::new(ring * u.cos(), ring * u.sin(), minor_radius * v.sin());
                let p = if vertical {
                    // Rotate the ring plane from x-y into x-z.
                    Vec3::new(local.x, local.z, local.y)
                } else {
                    local
                };
                vertices.push(center + p);
            }
        }
        let index = |seg: u32, side: u32| (seg % segments) * sides + (side % sides);
        let mut triangles = Vec::new();
        for seg in 0..segments {
            for side in 0..sides {
                let a = index(seg, side);
                let b = index(seg + 1, side);
                let c = index(seg, side + 1);
                let d = index(seg + 1, side + 1);
                if vertical {
                    triangles.push([a, c, d]);
                    triangles.push([a, d, b]);
                } else {
                    triangles.push([a, d, c]);
                    triangles.push([a, b, d]);
                }
            }
        }
        TriangleMesh::from_buffers(vertices, triangles).expect("generator produces valid mesh")
    }

    /// Concatenate meshes into one triangle soup.
    pub fn merge(meshes: &[TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        TriangleMesh::from_buffers(vertices, triangles).expect("merged mesh valid")
    }

    /// Desk-scale bunny-like blob: a star-shaped body with head, two ear
    /// lobes, and a tail bump. Roughly 0.2 m across, centered near the origin.
    pub fn bunny() -> TriangleMesh {
        let lobe = |theta: f64, phi: f64, t0: f64, p0: f64, amp: f64, sharp: f64| {
            // Geodesic distance between (theta, phi) and the lobe center.
            let cosd = t0.cos() * theta.cos() + t0.sin() * theta.sin() * (phi - p0).cos();
            let d = cosd.clamp(-1.0, 1.0).acos();
            amp * (-sharp * d * d).exp()
        };
        let rad = std::f64::consts::PI / 180.0;
        radial_blob(Vec3::zeros(), 96, 64, move |theta, phi| {
            let mut r = 0.075;
            // Head: up-front.
            r += lobe(theta, phi, 45.0 * rad, 0.0, 0.035, 6.0);
            // Ears: two narrow lobes near the top, slightly splayed.
            r += lobe(theta, phi, 18.0 * rad, 35.0 * rad, 0.055, 28.0);
            r += lobe(theta, phi, 18.0 * rad, -35.0 * rad, 0.055, 28.0);
            // Tail: small bump at the back, low.
            r += lobe(theta, phi, 110.0 * rad, 180.0 * rad, 0.02, 14.0);
            // Haunches: widen the lower back.
            r += lobe(theta, phi, 95.0 * rad, 150.0 * rad, 0.012, 3.0);
            r += lobe(theta, phi, 95.0 * rad, -150.0 * rad, 0.012, 3.0);
            r
        })
    }

    /// Sphere with a torus handle sticking out of the top.
    pub fn sphere_with_handle() -> TriangleMesh {
        let sphere = uv_sphere(Vec3::zeros(), 0.06, 64, 48);
        let handle = torus(Vec3::new(0.0, 0.0, 0.055), 0.035, 0.011, 48, 24, true);
        merge(&[sphere, handle])
    }

    /// Named generator lookup used by the CLI and tests.
    pub fn by_name(name: &str) -> Option<TriangleMesh> {
        match name {
            "bunny" => Some(bunny()),
            "sphere-with-handle" => Some(sphere_with_handle()),
            "sphere" => Some(uv_sphere(Vec3::zeros(), 0.08, 64, 48)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn write_temp(content: &[u8], ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn single_triangle_ascii_ply() {
        let ply = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let f = write_temp(ply, ".ply");
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.triangles.len(), 1);
        assert_relative_eq!(mesh.surface_area, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cube_obj_area() {
        let obj = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\nf 1 2 3\nf 1 3 4\nf 5 7 6\nf 5 8 7\nf 1 5 6\nf 1 6 2\nf 2 6 7\nf 2 7 3\nf 3 7 8\nf 3 8 4\nf 4 8 5\nf 4 5 1\n";
        let f = write_temp(obj, ".obj");
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        assert_relative_eq!(mesh.surface_area, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn quad_faces_are_fan_triangulated() {
        let obj = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let f = write_temp(obj, ".obj");
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert_relative_eq!(mesh.surface_area, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn binary_ply_counts_match_header() {
        // Header-count oracle: write the generated bunny, reload, and compare
        // against the counts stated in the header of the written file.
        let mesh = synth::bunny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bunny.ply");
        write_ply_mesh(&path, &mesh).unwrap();
        let header = {
            let mut s = String::new();
            let mut reader = BufReader::new(File::open(&path).unwrap());
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                s.push_str(&line);
                if line.trim_end() == "end_header" {
                    break;
                }
            }
            s
        };
        let vertex_count: usize = header
            .lines()
            .find(|l| l.starts_with("element vertex"))
            .unwrap()
            .split_whitespace()
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        let face_count: usize = header
            .lines()
            .find(|l| l.starts_with("element face"))
            .unwrap()
            .split_whitespace()
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(loaded.vertices.len(), vertex_count);
        assert_eq!(loaded.triangles.len(), face_count);
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let obj = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\nf 1 1 2\n";
        let f = write_temp(obj, ".obj");
        let mesh = load_mesh(f.path()).unwrap();
        assert_eq!(mesh.triangles.len(), 1);
    }

    #[test]
    fn empty_mesh_is_error() {
        let obj = b"v 0 0 0\nv 1 0 0\nv 0 0 0\nf 1 2 3\n";
        let f = write_temp(obj, ".obj");
        assert!(matches!(load_mesh(f.path()), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn malformed_ply_is_parse_error() {
        let f = write_temp(b"ply\nformat ascii 1.0\nelement vertex x\nend_header\n", ".ply");
        assert!(matches!(load_mesh(f.path()), Err(MeshError::ParseError(_))));
    }

    #[test]
    fn sphere_area_approaches_analytic() {
        let mesh = synth::uv_sphere(Vec3::zeros(), 1.0, 128, 96);
        let analytic = 4.0 * std::f64::consts::PI;
        assert!((mesh.surface_area - analytic).abs() / analytic < 2e-3);
    }

    #[test]
    fn sphere_normals_point_outward() {
        let mesh = synth::uv_sphere(Vec3::new(0.3, -0.2, 0.5), 0.5, 24, 16);
        for i in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangle_vertices(i);
            let centroid = (a + b + c) / 3.0 - Vec3::new(0.3, -0.2, 0.5);
            assert!(mesh.triangle_normal(i).dot(&centroid.normalize()) > 0.0);
        }
    }

    #[test]
    fn torus_normals_point_outward() {
        let mesh = synth::torus(Vec3::zeros(), 0.05, 0.015, 32, 16, true);
        for i in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangle_vertices(i);
            let centroid = (a + b + c) / 3.0;
            // Nearest point on the ring circle (in the x-z plane).
            let ring_dir = Vec3::new(centroid.x, 0.0, centroid.z);
            let ring_pt = if ring_dir.norm() > 1e-12 {
                ring_dir.normalize() * 0.05
            } else {
                Vec3::new(0.05, 0.0, 0.0)
            };
            let outward = (centroid - ring_pt).normalize();
            assert!(
                mesh.triangle_normal(i).dot(&outward) > 0.0,
                "inward normal on triangle {i}"
            );
        }
    }

    #[test]
    fn surface_samples_lie_on_mesh() {
        let mesh = synth::uv_sphere(Vec3::zeros(), 1.0, 48, 32);
        let mut rng = StdRng::seed_from_u64(5);
        for (p, n) in mesh.sample_surface(200, &mut rng) {
            assert!(mesh.distance_to_surface(&p) < 1e-9);
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cloud_ply_round_trip() {
        let points = vec![Vec3::new(0.5, -1.25, 3.0), Vec3::new(0.0, 0.0, 0.0)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        write_ply_cloud(&path, &points).unwrap();
        let mut reader = BufReader::new(File::open(&path).unwrap());
        let mut header = String::new();
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            header.push_str(&line);
            if line.trim_end() == "end_header" {
                break;
            }
        }
        assert!(header.contains("format binary_little_endian 1.0"));
        assert!(header.contains("element vertex 2"));
        let mut body = Vec::new();
        reader.read_to_end(&mut body).unwrap();
        assert_eq!(body.len(), 2 * 3 * 4);
        let x0 = f32::from_le_bytes(body[0..4].try_into().unwrap());
        assert_eq!(x0, 0.5f32);
    }
}
