//! Deterministic R-X diagram rasterization and binary PGM I/O.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaysim::ImpedanceTrajectory;

pub const BACKGROUND: u8 = 0;
pub const AXIS_INTENSITY: u8 = 64;
pub const ZONE_INTENSITY: u8 = 128;
pub const TRAJECTORY_INTENSITY: u8 = 255;

/// Pixel grid and the impedance window it covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanvasSpec {
    pub width: usize,
    pub height: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl CanvasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config(format!(
                "canvas {}x{} smaller than 16x16",
                self.width, self.height
            )));
        }
        let finite = [self.r_min, self.r_max, self.x_min, self.x_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.r_max > self.r_min) || !(self.x_max > self.x_min) {
            return Err(Error::Config(
                "canvas window must have r_max > r_min and x_max > x_min".into(),
            ));
        }
        Ok(())
    }

    /// Square window [−0.25·|z|, 1.25·|z|] on both axes.
    pub fn around_line(width: usize, height: usize, line_z_magnitude: f64) -> Self {
        Self {
            width,
            height,
            r_min: -0.25 * line_z_magnitude,
            r_max: 1.25 * line_z_magnitude,
            x_min: -0.25 * line_z_magnitude,
            x_max: 1.25 * line_z_magnitude,
        }
    }

    /// Unrounded (col, row) of an impedance point.
    fn to_pixel(self, r: f64, x: f64) -> (f64, f64) {
        let col = (r - self.r_min) / (self.r_max - self.r_min) * (self.width - 1) as f64;
        let row = (self.x_max - x) / (self.x_max - self.x_min) * (self.height - 1) as f64;
        (col, row)
    }

    /// Pixel (col, row) of an impedance point, if it lands on the canvas.
    pub fn pixel_of(&self, r: f64, x: f64) -> Option<(usize, usize)> {
        let (c, w) = self.to_pixel(r, x);
        let (c, w) = (c.round(), w.round());
        if c >= 0.0 && w >= 0.0 && c <= (self.width - 1) as f64 && w <= (self.height - 1) as f64 {
            Some((c as usize, w as usize))
        } else {
            None
        }
    }
}

/// Row-major grayscale raster with `levels` distinct intensities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub levels: u16,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: u16) -> Self {
        Self {
            width,
            height,
            levels,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, levels: u16, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Domain(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if !(1..=256).contains(&levels) {
            return Err(Error::Domain(format!("levels {levels} outside 1..=256")));
        }
        if let Some(&p) = pixels.iter().find(|&&p| u16::from(p) >= levels) {
            return Err(Error::Domain(format!(
                "pixel {p} not below levels {levels}"
            )));
        }
        Ok(Self {
            width,
            height,
            levels,
            pixels,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Raises a pixel to `value`; overlapping strokes keep the maximum.
    fn stamp(&mut self, col: usize, row: usize, value: u8) {
        let p = &mut self.pixels[row * self.width + col];
        *p = (*p).max(value);
    }
}

/// Liang–Barsky clip of a segment to [0, w−1] × [0, h−1] in pixel space.
fn clip_segment(
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
    w: f64,
    h: f64,
) -> Option<((f64, f64), (f64, f64))> {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, x0), (dx, w - x0), (-dy, y0), (dy, h - y0)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    Some(((x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)))
}

/// Integer midpoint (Bresenham) line between two in-canvas pixels.
fn draw_pixels(img: &mut GrayImage, (c0, r0): (i64, i64), (c1, r1): (i64, i64), value: u8) {
    let dx = (c1 - c0).abs();
    let dy = -(r1 - r0).abs();
    let sx = if c0 < c1 { 1 } else { -1 };
    let sy = if r0 < r1 { 1 } else { -1 };
    let (mut c, mut r) = (c0, r0);
    let mut err = dx + dy;
    loop {
        img.stamp(c as usize, r as usize, value);
        if c == c1 && r == r1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            c += sx;
        }
        if e2 <= dx {
            err += dx;
            r += sy;
        }
    }
}

/// Draws an impedance-space segment, clipped to the canvas.
fn draw_segment(img: &mut GrayImage, canvas: &CanvasSpec, a: (f64, f64), b: (f64, f64), value: u8) {
    let pa = canvas.to_pixel(a.0, a.1);
    let pb = canvas.to_pixel(b.0, b.1);
    let w = (canvas.width - 1) as f64;
    let h = (canvas.height - 1) as f64;
    if let Some((p, q)) = clip_segment(pa, pb, w, h) {
        let round = |(x, y): (f64, f64)| -> (i64, i64) {
            (
                (x.round() as i64).clamp(0, w as i64),
                (y.round() as i64).clamp(0, h as i64),
            )
        };
        draw_pixels(img, round(p), round(q), value);
    }
}

/// Mho circle through the origin with diameter `reach` along `angle_rad`.
fn draw_mho(img: &mut GrayImage, canvas: &CanvasSpec, reach: f64, angle_rad: f64) {
    if !(reach > 0.0) {
        return;
    }
    let radius = reach / 2.0;
    let (cr, cx) = (radius * angle_rad.cos(), radius * angle_rad.sin());
    let px_per_ohm = (canvas.width as f64 / (canvas.r_max - canvas.r_min))
        .max(canvas.height as f64 / (canvas.x_max - canvas.x_min));
    let steps = ((2.0 * std::f64::consts::PI * radius * px_per_ohm * 2.0).ceil() as usize)
        .clamp(64, 1 << 16);
    let point = |k: usize| {
        let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
        (cr + radius * t.cos(), cx + radius * t.sin())
    };
    for k in 0..steps {
        draw_segment(img, canvas, point(k), point(k + 1), ZONE_INTENSITY);
    }
}

/// Renders axes, the mho zone and the trajectory into a 256-level image.
/// `line_angle_rad` orients the mho diameter.
pub fn render_rx_image(
    traj: &ImpedanceTrajectory,
    zone_reach: f64,
    line_angle_rad: f64,
    canvas: &CanvasSpec,
) -> Result<GrayImage> {
    canvas.validate()?;
    if traj.points.is_empty() {
        return Err(Error::Domain("cannot render an empty trajectory".into()));
    }
    let mut img = GrayImage::new(canvas.width, canvas.height, 256);

    if canvas.r_min <= 0.0 && canvas.r_max >= 0.0 {
        draw_segment(
            &mut img,
            canvas,
            (0.0, canvas.x_min),
            (0.0, canvas.x_max),
            AXIS_INTENSITY,
        );
    }
    if canvas.x_min <= 0.0 && canvas.x_max >= 0.0 {
        draw_segment(
            &mut img,
            canvas,
            (canvas.r_min, 0.0),
            (canvas.r_max, 0.0),
            AXIS_INTENSITY,
        );
    }
    draw_mho(&mut img, canvas, zone_reach, line_angle_rad);

    for pair in traj.points.windows(2) {
        draw_segment(&mut img, canvas, pair[0], pair[1], TRAJECTORY_INTENSITY);
    }
    for &(r, x) in &traj.points {
        if let Some((c, w)) = canvas.pixel_of(r, x) {
            img.stamp(c, w, TRAJECTORY_INTENSITY);
        }
    }
    Ok(img)
}

/// Uniform re-binning: out = floor(in · levels / in_levels).
pub fn quantize_levels(img: &GrayImage, levels: u16) -> Result<GrayImage> {
    if levels < 2 || levels > img.levels {
        return Err(Error::Config(format!(
            "cannot quantize {} levels to {levels}",
            img.levels
        )));
    }
    let in_levels = u32::from(img.levels);
    let out = u32::from(levels);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| ((u32::from(p) * out / in_levels).min(out - 1)) as u8)
        .collect();
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        levels,
        pixels,
    })
}

/// Binary graymap (P5) with maxval = levels − 1.
pub fn write_pgm(img: &GrayImage) -> Result<Vec<u8>> {
    if img.levels < 2 || img.levels > 256 {
        return Err(Error::Format(format!(
            "cannot write {} levels as PGM",
            img.levels
        )));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.levels - 1).into_bytes();
    out.extend_from_slice(&img.pixels);
    Ok(out)
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("missing P5 magic".into()));
    }
    let width = parse_header_number(bytes, &mut pos, "width")?;
    let height = parse_header_number(bytes, &mut pos, "height")?;
    let maxval = parse_header_number(bytes, &mut pos, "maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("missing whitespace after header".into())),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < n {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {n}",
            payload.len()
        )));
    }
    GrayImage::from_pixels(width, height, (maxval + 1) as u16, payload[..n].to_vec())
        .map_err(|e| Error::Format(e.to_string()))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::Format("truncated header".into())),
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn parse_header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad {what} in header")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas() -> CanvasSpec {
        CanvasSpec {
            width: 64,
            height: 48,
            r_min: -10.0,
            r_max: 50.0,
            x_min: -10.0,
            x_max: 50.0,
        }
    }

    fn traj(points: Vec<(f64, f64)>) -> ImpedanceTrajectory {
        let n = points.len();
        ImpedanceTrajectory {
            points,
            window_start_indices: (0..n).collect(),
        }
    }

    /// Impedance coordinates of a pixel center.
    fn at_pixel(c: &CanvasSpec, col: f64, row: f64) -> (f64, f64) {
        (
            c.r_min + col / (c.width - 1) as f64 * (c.r_max - c.r_min),
            c.x_max - row / (c.height - 1) as f64 * (c.x_max - c.x_min),
        )
    }

    #[test]
    fn single_point_at_center() {
        let c = canvas();
        let (cc, rc) = (c.width as f64 / 2.0, c.height as f64 / 2.0);
        let p = at_pixel(&c, cc, rc);
        // a reach of zero leaves only the axes besides the point
        let img = render_rx_image(&traj(vec![p]), 0.0, 1.4, &c).unwrap();
        let hot: Vec<usize> = (0..img.pixels.len())
            .filter(|&i| img.pixels[i] == TRAJECTORY_INTENSITY)
            .collect();
        assert_eq!(hot, vec![(c.height / 2) * c.width + c.width / 2]);
        let axis_px = img.pixels.iter().filter(|&&p| p == AXIS_INTENSITY).count();
        assert!(axis_px > 0);
    }

    #[test]
    fn horizontal_run_matches_brute_force() {
        let c = canvas();
        let row = 20.0;
        let a = at_pixel(&c, 7.0, row);
        let b = at_pixel(&c, 41.0, row);
        let img = render_rx_image(&traj(vec![a, b]), 0.0, 1.4, &c).unwrap();
        // oracle: every pixel whose center lies on the segment
        for r in 0..c.height {
            for col in 0..c.width {
                let on = r == row as usize && (7..=41).contains(&col);
                assert_eq!(img.get(col, r) == TRAJECTORY_INTENSITY, on, "({col}, {r})");
            }
        }
    }

    #[test]
    fn corner_mapping() {
        let c = canvas();
        assert_eq!(c.pixel_of(c.r_min, c.x_min), Some((0, c.height - 1)));
        assert_eq!(c.pixel_of(c.r_max, c.x_max), Some((c.width - 1, 0)));
        assert_eq!(c.pixel_of(c.r_max + 5.0, 0.0), None);
    }

    #[test]
    fn mho_circle_passes_near_origin_and_reach() {
        let c = canvas();
        let angle = 80f64.to_radians();
        let far = at_pixel(&c, 60.0, 2.0);
        let img = render_rx_image(&traj(vec![far]), 40.0, angle, &c).unwrap();
        let (oc, orow) = c.pixel_of(0.0, 0.0).unwrap();
        assert_eq!(img.get(oc, orow), ZONE_INTENSITY);
        let (tc, trow) = c.pixel_of(40.0 * angle.cos(), 40.0 * angle.sin()).unwrap();
        let near = (-1i64..=1).any(|dc| {
            (-1i64..=1).any(|dr| {
                img.get((tc as i64 + dc) as usize, (trow as i64 + dr) as usize) == ZONE_INTENSITY
            })
        });
        assert!(near);
    }

    #[test]
    fn far_off_canvas_points_are_clipped() {
        let c = canvas();
        let img = render_rx_image(&traj(vec![(1185.0, 0.5), (20.0, 30.0)]), 0.0, 1.4, &c).unwrap();
        let hot = img
            .pixels
            .iter()
            .filter(|&&p| p == TRAJECTORY_INTENSITY)
            .count();
        assert!(hot > 10);
        let img =
            render_rx_image(&traj(vec![(1185.0, 0.5), (900.0, 900.0)]), 0.0, 1.4, &c).unwrap();
        assert!(!img.pixels.contains(&TRAJECTORY_INTENSITY));
    }

    #[test]
    fn render_rejects_empty_and_bad_canvas() {
        let c = canvas();
        assert!(matches!(
            render_rx_image(&traj(vec![]), 10.0, 1.4, &c),
            Err(Error::Domain(_))
        ));
        let bad = CanvasSpec { width: 8, ..c };
        assert!(render_rx_image(&traj(vec![(1.0, 1.0)]), 10.0, 1.4, &bad).is_err());
    }

    #[test]
    fn quantize_examples() {
        let img = GrayImage::from_pixels(4, 1, 256, vec![0, 64, 128, 255]).unwrap();
        let q = quantize_levels(&img, 8).unwrap();
        assert_eq!(q.pixels, vec![0, 2, 4, 7]);
        assert_eq!(q.levels, 8);
        assert_eq!(quantize_levels(&img, 256).unwrap(), img);
        assert!(matches!(quantize_levels(&img, 1), Err(Error::Config(_))));
        assert!(matches!(quantize_levels(&q, 16), Err(Error::Config(_))));
    }

    #[test]
    fn pgm_layout() {
        let img = GrayImage::from_pixels(2, 2, 256, vec![0, 255, 128, 64]).unwrap();
        let bytes = write_pgm(&img).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0x00, 0xFF, 0x80, 0x40]);
        assert_eq!(read_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn pgm_errors() {
        let img = GrayImage::from_pixels(2, 2, 8, vec![0, 7, 3, 1]).unwrap();
        let bytes = write_pgm(&img).unwrap();
        assert!(matches!(
            read_pgm(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(matches!(read_pgm(b"P2\n2 2\n255\n"), Err(Error::Format(_))));
        assert!(matches!(read_pgm(b"P5\n2"), Err(Error::Format(_))));
        assert!(matches!(
            read_pgm(b"P5\n1 1\n7\n\x09"),
            Err(Error::Format(_))
        ));
        let commented = b"P5\n# made by hand\n1 1\n7\n\x05";
        assert_eq!(read_pgm(commented).unwrap().pixels, vec![5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn image_strategy() -> impl Strategy<Value = GrayImage> {
            (1usize..20, 1usize..20, 2u16..=256).prop_flat_map(|(w, h, levels)| {
                proptest::collection::vec(0..levels, w * h).prop_map(move |px| {
                    GrayImage::from_pixels(w, h, levels, px.into_iter().map(|p| p as u8).collect())
                        .unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn pgm_roundtrip(img in image_strategy()) {
                prop_assert_eq!(read_pgm(&write_pgm(&img).unwrap()).unwrap(), img);
            }

            #[test]
            fn quantize_is_monotone(a in 0u8..=255, b in 0u8..=255, levels in 2u16..=256) {
                let img = GrayImage::from_pixels(2, 1, 256, vec![a.min(b), a.max(b)]).unwrap();
                let q = quantize_levels(&img, levels).unwrap();
                prop_assert!(q.pixels[0] <= q.pixels[1]);
                prop_assert!(u16::from(q.pixels[1]) < levels);
            }

            #[test]
            fn render_is_pure_and_marks_every_point(
                pts in proptest::collection::vec((-20.0..60.0f64, -20.0..60.0f64), 1..30),
                reach in 0.0..50.0f64,
            ) {
                let c = canvas();
                let t = traj(pts.clone());
                let a = render_rx_image(&t, reach, 1.3, &c).unwrap();
                let b = render_rx_image(&t, reach, 1.3, &c).unwrap();
                prop_assert_eq!(&a, &b);
                let mut distinct: Vec<(usize, usize)> =
                    pts.iter().filter_map(|&(r, x)| c.pixel_of(r, x)).collect();
                distinct.sort_unstable();
                distinct.dedup();
                let hot = a.pixels.iter().filter(|&&p| p == TRAJECTORY_INTENSITY).count();
                prop_assert!(hot >= distinct.len());
                for (col, row) in distinct {
                    prop_assert_eq!(a.get(col, row), TRAJECTORY_INTENSITY);
                }
            }
        }
    }
}
