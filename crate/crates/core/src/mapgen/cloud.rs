use std::io::{self, Write};

use super::AccessibilityMap;

/// Vertex pairs of a box whose corners are ordered front face then rear face.
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// ASCII PLY: the cloud, then 8 corner vertices per volume (tagged with the
/// volume index, -1 for cloud points), then an `edge` element with the 12
/// box edges of every volume.
pub fn write_annotated_cloud<W: Write>(mut w: W, map: &AccessibilityMap) -> io::Result<()> {
    let n_vertex = map.cloud.len() + 8 * map.volumes.len();
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment accessibility map: sparse cloud and bounding volumes")?;
    for (i, v) in map.volumes.iter().enumerate() {
        let name = v.class_name.replace(['\n', '\r'], " ");
        writeln!(w, "comment volume {i} class {} {name} appearances {}", v.class_id, v.appearances)?;
    }
    writeln!(w, "element vertex {n_vertex}")?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "property int volume")?;
    writeln!(w, "element edge {}", 12 * map.volumes.len())?;
    writeln!(w, "property int vertex1")?;
    writeln!(w, "property int vertex2")?;
    writeln!(w, "end_header")?;
    for p in &map.cloud {
        writeln!(w, "{} {} {} -1", p.position.x, p.position.y, p.position.z)?;
    }
    for (i, v) in map.volumes.iter().enumerate() {
        for c in &v.corners {
            writeln!(w, "{} {} {} {i}", c.x, c.y, c.z)?;
        }
    }
    let base = map.cloud.len();
    for i in 0..map.volumes.len() {
        for (a, b) in BOX_EDGES {
            writeln!(w, "{} {}", base + 8 * i + a, base + 8 * i + b)?;
        }
    }
    Ok(())
}

pub fn emit_annotated_cloud(map: &AccessibilityMap) -> String {
    let mut buf = Vec::new();
    write_annotated_cloud(&mut buf, map).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("PLY text is UTF-8")
}
