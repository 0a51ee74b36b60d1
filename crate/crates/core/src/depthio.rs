//! On-disk depth and point-cloud representations.
//!
//! * PFM (`Pf`, single channel) for raw metric depth,
//! * 8-bit grayscale PNG for quantized depth, with the range stored in a
//!   `depth:max_range` text chunk,
//! * KITTI velodyne `.bin` clouds (packed little-endian `f32` x, y, z, i).
//!
//! Depth and coordinates are held as `f64` in memory; the file formats store
//! `f32`, so round trips are bit-exact for any value that came from a file.

use std::io::Cursor;
use std::path::Path;

use crate::geometry::Point3;
use crate::metrics::ImageGrid;

/// Range used when a PNG carries no `depth:max_range` chunk.
pub const DEFAULT_MAX_RANGE: f64 = 10.0;

/// tEXt keyword holding the metric range of an 8-bit depth PNG.
pub const MAX_RANGE_KEY: &str = "depth:max_range";

#[derive(Debug, thiserror::Error)]
pub enum DepthIoError {
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A decoded value together with the number of recoverable anomalies the
/// decoder patched up (clamped samples, NaN intensities, missing metadata).
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded<T> {
    pub value: T,
    pub warnings: usize,
}

/// Dense metric depth, row-major, top row first. Zero marks "no reading".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthIoError> {
        if values.len() != width * height {
            return Err(DepthIoError::Data(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DepthIoError::Data(format!(
                "depth at index {i} is {v}; values must be finite and nonnegative"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, DepthIoError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// 8-bit depth image; level `k` stands for `k / 255 · max_range` meters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDepth {
    width: usize,
    height: usize,
    levels: Vec<u8>,
    max_range: f64,
}

impl QuantizedDepth {
    pub fn new(
        width: usize,
        height: usize,
        levels: Vec<u8>,
        max_range: f64,
    ) -> Result<Self, DepthIoError> {
        if !(max_range.is_finite() && max_range > 0.0) {
            return Err(DepthIoError::Data(format!(
                "max_range must be positive and finite, got {max_range}"
            )));
        }
        if levels.len() != width * height {
            return Err(DepthIoError::Data(format!(
                "{} levels for a {width}x{height} image",
                levels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            levels,
            max_range,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn level(&self, col: usize, row: usize) -> u8 {
        self.levels[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: Option<f64>,
}

impl LidarPoint {
    pub fn new(x: f64, y: f64, z: f64, intensity: Option<f64>) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn range(&self) -> f64 {
        self.position().coords.norm()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<LidarPoint>) -> Result<Self, DepthIoError> {
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(DepthIoError::Data(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// ---------------------------------------------------------------------------
// PFM

/// Parses a grayscale PFM. The scale's sign selects byte order (negative:
/// little-endian); its magnitude is ignored. Negative samples are clamped to
/// zero and counted as warnings.
pub fn read_pfm(bytes: &[u8]) -> Result<Decoded<DepthMap>, DepthIoError> {
    match bytes.get(..2) {
        Some(b"Pf") => {}
        Some(b"PF") => {
            return Err(DepthIoError::Format(
                "color PFM (PF) is not supported; depth must be single-channel".into(),
            ))
        }
        _ => return Err(DepthIoError::Format("missing PFM magic \"Pf\"".into())),
    }
    let mut pos = 2;
    let width = parse_header_token::<usize>(bytes, &mut pos, "width")?;
    let height = parse_header_token::<usize>(bytes, &mut pos, "height")?;
    let scale = parse_header_token::<f64>(bytes, &mut pos, "scale")?;
    if width == 0 || height == 0 {
        return Err(DepthIoError::Format(format!(
            "degenerate size {width}x{height}"
        )));
    }
    if !scale.is_finite() || scale == 0.0 {
        return Err(DepthIoError::Format(format!("invalid scale {scale}")));
    }
    // exactly one whitespace byte separates the header from the samples
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(DepthIoError::Format(
                "header not terminated by whitespace".into(),
            ))
        }
    }
    let little_endian = scale < 0.0;

    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| DepthIoError::Format("image dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(DepthIoError::Length {
            expected,
            actual: payload.len(),
        });
    }

    let mut values = vec![0.0; width * height];
    let mut warnings = 0;
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let sample = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !sample.is_finite() {
            return Err(DepthIoError::Data(format!(
                "non-finite sample at index {i}"
            )));
        }
        let (file_row, col) = (i / width, i % width);
        let row = height - 1 - file_row;
        values[row * width + col] = if sample < 0.0 {
            warnings += 1;
            0.0
        } else {
            sample as f64
        };
    }
    Ok(Decoded {
        value: DepthMap {
            width,
            height,
            values,
        },
        warnings,
    })
}

fn parse_header_token<T: std::str::FromStr>(
    bytes: &[u8],
    pos: &mut usize,
    what: &str,
) -> Result<T, DepthIoError> {
    let start_ws = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_whitespace()) {
        *pos += 1;
    }
    if *pos == start_ws {
        return Err(DepthIoError::Format(format!(
            "expected whitespace before {what}"
        )));
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DepthIoError::Format(format!("unparseable PFM {what}")))
}

/// Little-endian PFM, rows bottom-to-top, samples narrowed to `f32`.
pub fn write_pfm(m: &DepthMap) -> Vec<u8> {
    let header = format!("Pf\n{} {}\n-1.0\n", m.width, m.height);
    let mut out = Vec::with_capacity(header.len() + 4 * m.values.len());
    out.extend_from_slice(header.as_bytes());
    for row in m.values.chunks_exact(m.width.max(1)).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// quantization

/// Truncates at `max_range` and scales linearly onto 0..=255, rounding half
/// away from zero.
pub fn quantize_depth(m: &DepthMap, max_range: f64) -> Result<QuantizedDepth, DepthIoError> {
    if !(max_range.is_finite() && max_range > 0.0) {
        return Err(DepthIoError::Data(format!(
            "max_range must be positive and finite, got {max_range}"
        )));
    }
    let levels = m
        .values
        .iter()
        .map(|&v| quantize_value(v, max_range))
        .collect();
    QuantizedDepth::new(m.width, m.height, levels, max_range)
}

pub fn quantize_value(value: f64, max_range: f64) -> u8 {
    // f64::round is half-away-from-zero
    (value.min(max_range) / max_range * 255.0)
        .round()
        .clamp(0.0, 255.0) as u8
}

pub fn dequantize_level(level: u8, max_range: f64) -> f64 {
    level as f64 / 255.0 * max_range
}

pub fn dequantize_depth(q: &QuantizedDepth) -> DepthMap {
    DepthMap {
        width: q.width,
        height: q.height,
        values: q
            .levels
            .iter()
            .map(|&l| dequantize_level(l, q.max_range))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// KITTI bin

const KITTI_RECORD: usize = 16;

/// Reads packed `(x, y, z, intensity)` little-endian `f32` records. A
/// non-finite intensity becomes 0 and counts as a warning.
pub fn read_kitti_bin(bytes: &[u8]) -> Result<Decoded<PointCloud>, DepthIoError> {
    if !bytes.len().is_multiple_of(KITTI_RECORD) {
        return Err(DepthIoError::Format(format!(
            "KITTI bin length {} is not a multiple of {KITTI_RECORD}",
            bytes.len()
        )));
    }
    let mut warnings = 0;
    let mut points = Vec::with_capacity(bytes.len() / KITTI_RECORD);
    for (i, rec) in bytes.chunks_exact(KITTI_RECORD).enumerate() {
        let f = |k: usize| {
            f32::from_le_bytes([rec[4 * k], rec[4 * k + 1], rec[4 * k + 2], rec[4 * k + 3]])
        };
        let (x, y, z, intensity) = (f(0), f(1), f(2), f(3));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(DepthIoError::Data(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        let intensity = if intensity.is_finite() {
            intensity
        } else {
            warnings += 1;
            0.0
        };
        points.push(LidarPoint::new(
            x as f64,
            y as f64,
            z as f64,
            Some(intensity as f64),
        ));
    }
    Ok(Decoded {
        value: PointCloud { points },
        warnings,
    })
}

/// Missing intensities are written as 0.
pub fn write_kitti_bin(c: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(c.points.len() * KITTI_RECORD);
    for p in &c.points {
        for v in [p.x, p.y, p.z, p.intensity.unwrap_or(0.0)] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// PNG

fn png_err(e: impl std::fmt::Display) -> DepthIoError {
    DepthIoError::Format(format!("png: {e}"))
}

/// Decodes an 8-bit grayscale, non-interlaced PNG. A missing range chunk
/// falls back to [`DEFAULT_MAX_RANGE`] and counts as one warning.
pub fn read_png8(bytes: &[u8]) -> Result<Decoded<QuantizedDepth>, DepthIoError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    {
        let info = reader.info();
        if info.color_type != png::ColorType::Grayscale {
            return Err(DepthIoError::Format(format!(
                "expected grayscale PNG, found {:?}",
                info.color_type
            )));
        }
        if info.bit_depth != png::BitDepth::Eight {
            return Err(DepthIoError::Format(format!(
                "expected 8-bit PNG, found {:?}",
                info.bit_depth
            )));
        }
        if info.interlaced {
            return Err(DepthIoError::Format(
                "interlaced PNG is not supported".into(),
            ));
        }
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| DepthIoError::Format("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    let (width, height) = (frame.width as usize, frame.height as usize);
    if frame.line_size != width {
        return Err(DepthIoError::Format("unexpected PNG row stride".into()));
    }
    // pick up text chunks stored after the image data as well
    let _ = reader.finish();

    let text = reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .find(|c| c.keyword == MAX_RANGE_KEY)
        .map(|c| c.text.clone());
    let (max_range, warnings) = match text {
        Some(t) => {
            let r: f64 = t
                .trim()
                .parse()
                .map_err(|_| DepthIoError::Format(format!("unparseable {MAX_RANGE_KEY} {t:?}")))?;
            (r, 0)
        }
        None => (DEFAULT_MAX_RANGE, 1),
    };
    let value = QuantizedDepth::new(width, height, buf, max_range)
        .map_err(|e| DepthIoError::Format(e.to_string()))?;
    Ok(Decoded { value, warnings })
}

pub fn write_png8(q: &QuantizedDepth) -> Result<Vec<u8>, DepthIoError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, q.width as u32, q.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        // shortest round-trip decimal representation
        enc.add_text_chunk(MAX_RANGE_KEY.to_string(), format!("{}", q.max_range))
            .map_err(png_err)?;
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&q.levels).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// 8-bit RGB (or grayscale, for single-channel grids) PNG of an image grid.
pub fn write_rgb_png(img: &ImageGrid) -> Result<Vec<u8>, DepthIoError> {
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(DepthIoError::Format(format!(
                "cannot encode {c}-channel image"
            )))
        }
    };
    let data: Vec<u8> = img
        .values()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Loads a metric depth map from a `.pfm` file or an 8-bit `.png`
/// (dequantized with its stored range).
pub fn load_depth(path: &Path) -> Result<Decoded<DepthMap>, DepthIoError> {
    let bytes = std::fs::read(path)?;
    match extension(path).as_deref() {
        Some("pfm") => read_pfm(&bytes),
        Some("png") => read_png8(&bytes).map(|d| Decoded {
            value: dequantize_depth(&d.value),
            warnings: d.warnings,
        }),
        _ => Err(DepthIoError::Format(format!(
            "{}: unknown depth format (expected .pfm or .png)",
            path.display()
        ))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}
