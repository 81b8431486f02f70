//! ASCII PLY 1.0 reader for the `vertex` element (x, y, z); all other
//! properties and elements are skipped.

use std::io::{Read, Write};
use std::path::Path;

use super::{open, read_utf8, with_path, IngestError};
use crate::geometry::{Frame, Point3};

/// A landmark from the SLAM sparse map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseMapPoint {
    pub id: u64,
    /// Map frame, SLAM units until scaled.
    pub position: Point3,
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
    has_list: bool,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8",
    "int16", "uint16", "int32", "uint32", "float32", "float64",
];

pub fn parse_pointcloud(path: &Path) -> Result<Vec<SparseMapPoint>, IngestError> {
    with_path(path, parse_pointcloud_from(open(path)?))
}

pub fn parse_pointcloud_from<R: Read>(reader: R) -> Result<Vec<SparseMapPoint>, IngestError> {
    let text = read_utf8(reader)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let bad = |m: &str| IngestError::BadHeader(m.to_string());

    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(bad("missing `ply` magic")),
    }
    let mut format_seen = false;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (_, raw) in lines.by_ref() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, version] => {
                if *fmt != "ascii" {
                    return Err(bad(&format!("unsupported format `{fmt}`")));
                }
                if *version != "1.0" {
                    return Err(bad(&format!("unsupported version `{version}`")));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| bad(&format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            ["property", "list", count_ty, item_ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                if !SCALAR_TYPES.contains(count_ty) || !SCALAR_TYPES.contains(item_ty) {
                    return Err(bad("unknown list property type"));
                }
                el.properties.push(name.to_string());
                el.has_list = true;
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                if !SCALAR_TYPES.contains(ty) {
                    return Err(bad(&format!("unknown property type `{ty}`")));
                }
                el.properties.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(bad(&format!("unrecognised header line `{}`", raw.trim()))),
        }
    }
    if !header_done {
        return Err(bad("missing end_header"));
    }
    if !format_seen {
        return Err(bad("missing format line"));
    }
    let vertex_idx = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| bad("no vertex element"))?;
    let vertex = &elements[vertex_idx];
    if vertex.has_list {
        return Err(bad("list properties on vertex are not supported"));
    }
    let col = |n: &str| {
        vertex
            .properties
            .iter()
            .position(|p| p == n)
            .ok_or_else(|| bad(&format!("vertex has no `{n}` property")))
    };
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);

    let data: Vec<(u64, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut before = 0usize;
    for e in &elements[..vertex_idx] {
        before = before.checked_add(e.count).ok_or_else(|| bad("element counts overflow"))?;
    }
    let mut others = before;
    for e in &elements[vertex_idx + 1..] {
        others = others.checked_add(e.count).ok_or_else(|| bad("element counts overflow"))?;
    }
    let found = data.len().saturating_sub(others);
    if found != vertex.count || data.len() < others {
        return Err(IngestError::VertexCountMismatch {
            declared: vertex.count,
            found,
        });
    }

    let mut points = Vec::with_capacity(vertex.count);
    for (id, (line, raw)) in data[before..before + vertex.count].iter().enumerate() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() != vertex.properties.len() {
            return Err(IngestError::malformed(
                *line,
                format!(
                    "expected {} vertex values, found {}",
                    vertex.properties.len(),
                    tokens.len()
                ),
            ));
        }
        let coord = |i: usize| -> Result<f64, IngestError> {
            let v: f64 = tokens[i]
                .parse()
                .map_err(|_| IngestError::malformed(*line, format!("cannot parse `{}`", tokens[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(IngestError::NonFiniteCoordinate { line: *line })
            }
        };
        points.push(SparseMapPoint {
            id: id as u64,
            position: Point3::new(coord(ix)?, coord(iy)?, coord(iz)?, Frame::Map),
        });
    }
    Ok(points)
}

pub fn write_pointcloud<W: Write>(mut w: W, points: &[SparseMapPoint]) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", points.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "end_header")?;
    for p in points {
        let c = &p.position;
        writeln!(w, "{} {} {}", c.x, c.y, c.z)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(n: usize) -> String {
        format!("ply\nformat ascii 1.0\nelement vertex {n}\nproperty float x\nproperty float y\nproperty float z\nend_header\n")
    }

    #[test]
    fn zero_vertices() {
        assert!(parse_pointcloud_from(header(0).as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn short_body_is_count_mismatch() {
        let mut s = header(10);
        for i in 0..9 {
            s.push_str(&format!("{i} 0 0\n"));
        }
        assert!(matches!(
            parse_pointcloud_from(s.as_bytes()),
            Err(IngestError::VertexCountMismatch { declared: 10, found: 9 })
        ));
    }

    #[test]
    fn header_errors() {
        for bad in [
            "",
            "plx\n",
            "ply\nformat binary_little_endian 1.0\nend_header\n",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n",
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n",
            "ply\nformat ascii 1.0\nelement face 0\nend_header\n",
        ] {
            assert!(matches!(parse_pointcloud_from(bad.as_bytes()), Err(IngestError::BadHeader(_))), "{bad:?}");
        }
    }

    #[test]
    fn non_finite_coordinate() {
        let s = format!("{}1 nan 2\n", header(1));
        assert!(matches!(
            parse_pointcloud_from(s.as_bytes()),
            Err(IngestError::NonFiniteCoordinate { line: 8 })
        ));
    }

    #[test]
    fn extra_properties_and_elements_are_skipped() {
        let s = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty uchar red\nproperty double z\n\
property double x\nproperty double y\nelement edge 1\nproperty int vertex1\nproperty int vertex2\nend_header\n\
255 3 1 2\n0 6 4 5\n0 1\n";
        let pts = parse_pointcloud_from(s.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].position, Point3::new(4.0, 5.0, 6.0, Frame::Map));
        assert_eq!(pts[1].id, 1);
    }

    #[test]
    fn generated_cloud_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<SparseMapPoint> = (0..100)
            .map(|id| SparseMapPoint {
                id,
                position: Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(0.0..3.0),
                    Frame::Map,
                ),
            })
            .collect();
        let mut buf = Vec::new();
        write_pointcloud(&mut buf, &pts).unwrap();
        let back = parse_pointcloud_from(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 100);
        for (a, b) in pts.iter().zip(&back) {
            assert!((a.position.coords() - b.position.coords()).norm() < 1e-6);
            assert_eq!(a.id, b.id);
        }
    }
}
