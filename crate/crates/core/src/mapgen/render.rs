use std::fmt::Write as _;

use log::warn;

use super::{AccessibilityMap, MapgenError};

/// Padding around the content, metres.
const PAD_M: f64 = 0.5;
pub const MAX_RASTER_SIDE: u64 = 16_384;

const PGM_UNKNOWN: u8 = 205;
const PGM_FREE: u8 = 255;
const PGM_POINT: u8 = 96;
const PGM_OCCUPIED: u8 = 0;

/// Footprint rectangle in image pixels (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopDownRender {
    pub svg: String,
    /// Binary P5 greymap, same geometry as the SVG.
    pub pgm: Vec<u8>,
    pub width: u32,
    pub height: u32,
    /// Map-frame (x, y) of the top-left image corner.
    pub origin: (f64, f64),
    pub resolution: f64,
    pub footprints: Vec<PixelRect>,
    pub warnings: Vec<String>,
}

impl TopDownRender {
    /// Image coordinates of a map-frame ground point.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin.0) / self.resolution, (self.origin.1 - y) / self.resolution)
    }

    /// Pixels of the raster at `(col, row)`.
    pub fn raster_at(&self, col: u32, row: u32) -> u8 {
        let header = pgm_header(self.width, self.height).len();
        self.pgm[header + row as usize * self.width as usize + col as usize]
    }
}

fn pgm_header(w: u32, h: u32) -> String {
    format!("P5\n{w} {h}\n255\n")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Orthographic top-down view on the map z = 0 plane: x to the right, y up.
pub fn render_topdown(map: &AccessibilityMap, resolution: f64) -> Result<TopDownRender, MapgenError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(MapgenError::InvalidResolution(resolution));
    }
    let mut xs: Vec<(f64, f64)> = Vec::new();
    xs.extend(map.cloud.iter().map(|p| (p.position.x, p.position.y)));
    xs.extend(map.trajectory.iter().map(|e| {
        let t = e.pose.translation();
        (t.x, t.y)
    }));
    for v in &map.volumes {
        xs.push((v.aabb.min.x, v.aabb.min.y));
        xs.push((v.aabb.max.x, v.aabb.max.y));
    }
    if xs.is_empty() {
        return Err(MapgenError::EmptyMap);
    }
    let mut warnings = Vec::new();
    if map.volumes.is_empty() {
        let msg = "no volumes survived refinement; rendering points and trajectory only".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }

    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &xs {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    min_x -= PAD_M;
    min_y -= PAD_M;
    max_x += PAD_M;
    max_y += PAD_M;
    let w = ((max_x - min_x) / resolution).ceil() as u64;
    let h = ((max_y - min_y) / resolution).ceil() as u64;
    if w > MAX_RASTER_SIDE || h > MAX_RASTER_SIDE {
        return Err(MapgenError::RasterTooLarge { width: w, height: h });
    }
    let (w, h) = (w.max(1) as u32, h.max(1) as u32);
    let px = |x: f64, y: f64| ((x - min_x) / resolution, (max_y - y) / resolution);

    let footprints: Vec<PixelRect> = map
        .volumes
        .iter()
        .map(|v| {
            let (x0, y0) = px(v.aabb.min.x, v.aabb.max.y);
            let (x1, y1) = px(v.aabb.max.x, v.aabb.min.y);
            PixelRect { x: x0, y: y0, width: x1 - x0, height: y1 - y0 }
        })
        .collect();

    // Vector overlay.
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(svg, r##"<g id="cloud" fill="#7f7f7f">"##);
    for p in &map.cloud {
        let (x, y) = px(p.position.x, p.position.y);
        let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.5"/>"#);
    }
    let _ = writeln!(svg, "</g>");
    if !map.trajectory.is_empty() {
        let pts: Vec<String> = map
            .trajectory
            .iter()
            .map(|e| {
                let t = e.pose.translation();
                let (x, y) = px(t.x, t.y);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline id="trajectory" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(svg, r#"<g id="volumes">"#);
    for (v, r) in map.volumes.iter().zip(&footprints) {
        let label = escape(&format!("{} \u{d7}{}", v.class_name, v.appearances));
        let _ = writeln!(
            svg,
            r##"<g class="volume" data-class-id="{}"><rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#d62728" fill-opacity="0.35" stroke="#d62728" stroke-width="1"/><text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{label}</text></g>"##,
            v.class_id,
            r.x,
            r.y,
            r.width,
            r.height,
            r.x,
            r.y - 3.0,
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");

    // Raster: pixel (c, r) covers map x in [min_x + c·res, min_x + (c+1)·res);
    // it is painted when its centre falls in a shape.
    let mut raster = vec![PGM_UNKNOWN; w as usize * h as usize];
    let mut put = |x: f64, y: f64, value: u8| {
        let (fx, fy) = px(x, y);
        if fx >= 0.0 && fy >= 0.0 && fx < f64::from(w) && fy < f64::from(h) {
            raster[fy as usize * w as usize + fx as usize] = value;
        }
    };
    for e in &map.trajectory {
        let t = e.pose.translation();
        put(t.x, t.y, PGM_FREE);
    }
    for p in &map.cloud {
        put(p.position.x, p.position.y, PGM_POINT);
    }
    for r in &footprints {
        let c0 = (r.x - 0.5).ceil().max(0.0) as u32;
        let c1 = ((r.x + r.width - 0.5).floor()).min(f64::from(w) - 1.0);
        let r0 = (r.y - 0.5).ceil().max(0.0) as u32;
        let r1 = ((r.y + r.height - 0.5).floor()).min(f64::from(h) - 1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        for row in r0..=r1 as u32 {
            for col in c0..=c1 as u32 {
                raster[row as usize * w as usize + col as usize] = PGM_OCCUPIED;
            }
        }
    }
    let mut pgm = pgm_header(w, h).into_bytes();
    pgm.extend_from_slice(&raster);

    Ok(TopDownRender {
        svg,
        pgm,
        width: w,
        height: h,
        origin: (min_x, max_y),
        resolution,
        footprints,
        warnings,
    })
}
