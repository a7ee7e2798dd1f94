//! Handcrafted image features for the algorithm selector.
//!
//! Features are concatenated histograms over a window (or the whole image):
//! per-channel color intensity, brightness, local contrast and log-binned
//! FFT magnitudes. Externally computed feature vectors can be ingested from
//! sidecar files instead. The per-class attribute means trained here
//! describe hypotheses with a constant-size representation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::labelmap::{AttributeVector, Bbox, ClassId};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("window has zero area")]
    ZeroAreaWindow,
    #[error("window exceeds image bounds")]
    WindowOutOfBounds,
    #[error("feature length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite feature value at line {line}")]
    NonFinite { line: usize },
    #[error("line {line}: unreadable feature token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("no training regions supplied")]
    EmptyTraining,
    #[error("attribute table: {0}")]
    MalformedTable(String),
}

/// An 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self, FeatureError> {
        if rgb.len() != width * height * 3 {
            return Err(FeatureError::MalformedImage(format!(
                "pixel buffer has {} bytes, expected {}",
                rgb.len(),
                width * height * 3
            )));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let mut rgb = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            rgb.extend_from_slice(&color);
        }
        Self { width, height, rgb }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    /// Integer luma approximation `(r + 2g + b) / 4`.
    #[inline]
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        let [r, g, b] = self.pixel(x, y);
        ((r as u16 + 2 * g as u16 + b as u16) / 4) as u8
    }

    pub fn crop(&self, window: Window) -> Result<RawImage, FeatureError> {
        window.validate(self.width, self.height)?;
        let mut rgb = Vec::with_capacity(window.width * window.height * 3);
        for y in window.y..window.y + window.height {
            let start = (y * self.width + window.x) * 3;
            rgb.extend_from_slice(&self.rgb[start..start + window.width * 3]);
        }
        RawImage::new(window.width, window.height, rgb)
    }

    /// Parses a binary PPM (P6) image with 8-bit samples.
    pub fn from_ppm_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        let mut pos = 0usize;
        let mut token = |bytes: &[u8]| -> Result<String, FeatureError> {
            // Skip whitespace and `#` comments.
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(FeatureError::MalformedImage("truncated header".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };

        if token(bytes)? != "P6" {
            return Err(FeatureError::MalformedImage("not a P6 file".into()));
        }
        let width: usize = token(bytes)?
            .parse()
            .map_err(|_| FeatureError::MalformedImage("bad width".into()))?;
        let height: usize = token(bytes)?
            .parse()
            .map_err(|_| FeatureError::MalformedImage("bad height".into()))?;
        let maxval: usize = token(bytes)?
            .parse()
            .map_err(|_| FeatureError::MalformedImage("bad maxval".into()))?;
        if maxval != 255 {
            return Err(FeatureError::MalformedImage(format!(
                "unsupported maxval {maxval}"
            )));
        }
        // Exactly one whitespace byte separates the header from the samples.
        pos += 1;
        let need = width * height * 3;
        if bytes.len() < pos + need {
            return Err(FeatureError::MalformedImage("truncated pixel data".into()));
        }
        RawImage::new(width, height, bytes[pos..pos + need].to_vec())
    }

    /// Canonical P6 serialization: `P6\n<w> <h>\n255\n` plus raw samples.
    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.rgb.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_ppm_bytes(&bytes)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ppm_bytes()).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// An exclusive-size window `(x..x+width, y..y+height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    fn validate(&self, image_w: usize, image_h: usize) -> Result<(), FeatureError> {
        if self.width == 0 || self.height == 0 {
            return Err(FeatureError::ZeroAreaWindow);
        }
        if self.x + self.width > image_w || self.y + self.height > image_h {
            return Err(FeatureError::WindowOutOfBounds);
        }
        Ok(())
    }
}

impl From<Bbox> for Window {
    fn from(b: Bbox) -> Self {
        Window {
            x: b.x0,
            y: b.y0,
            width: b.width(),
            height: b.height(),
        }
    }
}

/// Ordered list of `(block name, bin count)` describing a feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    pub blocks: Vec<(String, usize)>,
}

impl FeatureLayout {
    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|(_, n)| n).sum()
    }
}

/// A feature vector tied to the layout it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: FeatureLayout,
}

/// Histogram bin counts per block, and whether blocks are normalized to
/// sum 1 (so image size does not dominate the selector input).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureConfig {
    pub color_bins: usize,
    pub brightness_bins: usize,
    pub contrast_bins: usize,
    pub fft_bins: usize,
    pub normalized: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            color_bins: 64,
            brightness_bins: 64,
            contrast_bins: 64,
            fft_bins: 64,
            normalized: true,
        }
    }
}

impl FeatureConfig {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            blocks: vec![
                ("color_r".into(), self.color_bins),
                ("color_g".into(), self.color_bins),
                ("color_b".into(), self.color_bins),
                ("brightness".into(), self.brightness_bins),
                ("contrast".into(), self.contrast_bins),
                ("fft".into(), self.fft_bins),
            ],
        }
    }
}

/// Extracts the concatenated feature histograms over `window` (or the whole
/// image when absent). Deterministic for a fixed config.
pub fn extract_image_features(
    image: &RawImage,
    window: Option<Window>,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let window = window.unwrap_or(Window {
        x: 0,
        y: 0,
        width: image.width(),
        height: image.height(),
    });
    window.validate(image.width(), image.height())?;
    let (wx, wy, ww, wh) = (window.x, window.y, window.width, window.height);
    let samples = ww * wh;

    let mut hist_r = vec![0.0f64; config.color_bins];
    let mut hist_g = vec![0.0f64; config.color_bins];
    let mut hist_b = vec![0.0f64; config.color_bins];
    let mut hist_y = vec![0.0f64; config.brightness_bins];
    let mut hist_c = vec![0.0f64; config.contrast_bins];
    let mut hist_f = vec![0.0f64; config.fft_bins];

    let byte_bin = |v: u8, bins: usize| (v as usize * bins) / 256;

    let mut luma = vec![0u8; samples];
    for y in 0..wh {
        for x in 0..ww {
            let [r, g, b] = image.pixel(wx + x, wy + y);
            hist_r[byte_bin(r, config.color_bins)] += 1.0;
            hist_g[byte_bin(g, config.color_bins)] += 1.0;
            hist_b[byte_bin(b, config.color_bins)] += 1.0;
            let l = image.luma(wx + x, wy + y);
            hist_y[byte_bin(l, config.brightness_bins)] += 1.0;
            luma[y * ww + x] = l;
        }
    }

    // Local contrast: |forward dx| + |forward dy| of the luma, clamped to
    // the window so cropping and windowing agree.
    for y in 0..wh {
        for x in 0..ww {
            let here = luma[y * ww + x] as i32;
            let gx = if x + 1 < ww {
                (luma[y * ww + x + 1] as i32 - here).abs()
            } else {
                0
            };
            let gy = if y + 1 < wh {
                (luma[(y + 1) * ww + x] as i32 - here).abs()
            } else {
                0
            };
            let g = (gx + gy) as usize; // 0..=510
            hist_c[(g * config.contrast_bins) / 512] += 1.0;
        }
    }

    // Log-magnitude FFT of the luma. The histogram is invariant to the
    // customary center shift, so the shift is not applied.
    let spectrum = fft2_magnitudes(&luma, ww, wh);
    let vmax = (1.0 + 255.0 * samples as f64).ln();
    for m in spectrum {
        let v = (1.0 + m).ln();
        let bin = ((v / vmax) * config.fft_bins as f64) as usize;
        hist_f[bin.min(config.fft_bins - 1)] += 1.0;
    }

    let mut values = Vec::with_capacity(config.layout().total_len());
    for hist in [hist_r, hist_g, hist_b, hist_y, hist_c, hist_f] {
        if config.normalized {
            let total: f64 = hist.iter().sum();
            values.extend(hist.iter().map(|v| v / total));
        } else {
            values.extend_from_slice(&hist);
        }
    }
    Ok(FeatureVector {
        values,
        layout: config.layout(),
    })
}

/// Forward 2-D DFT magnitudes (unnormalized), row-column decomposition.
fn fft2_magnitudes(luma: &[u8], w: usize, h: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut grid: Vec<Complex<f64>> = luma
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .collect();
    for row in grid.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            grid[y * w + x] = col[y];
        }
    }
    grid.iter().map(|c| c.norm()).collect()
}

/// Loads an externally computed feature vector: one float per line.
pub fn load_external_features(
    path: impl AsRef<Path>,
    expected_layout: &FeatureLayout,
) -> Result<FeatureVector, FeatureError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| FeatureError::BadToken {
            line: idx + 1,
            token: line.to_string(),
        })?;
        if !v.is_finite() {
            return Err(FeatureError::NonFinite { line: idx + 1 });
        }
        values.push(v);
    }
    let expected = expected_layout.total_len();
    if values.len() != expected {
        return Err(FeatureError::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok(FeatureVector {
        values,
        layout: expected_layout.clone(),
    })
}

/// Per-class arithmetic means of region attribute vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    means: BTreeMap<ClassId, AttributeVector>,
}

impl AttributeTable {
    pub fn get(&self, class: ClassId) -> Option<&AttributeVector> {
        self.means.get(&class)
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.means.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("ATTR 1\n");
        for (class, v) in &self.means {
            let _ = write!(out, "{class}");
            for x in v.as_slice() {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| FeatureError::MalformedTable("empty file".into()))?;
        if header.trim() != "ATTR 1" {
            return Err(FeatureError::MalformedTable(format!(
                "expected \"ATTR 1\", found {header:?}"
            )));
        }
        let mut means = BTreeMap::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let class: ClassId = toks
                .next()
                .unwrap()
                .parse()
                .map_err(|_| FeatureError::MalformedTable(format!("bad class in {line:?}")))?;
            let vals: Vec<f64> = toks
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| FeatureError::MalformedTable(format!("bad value in {line:?}")))?;
            if vals.len() != AttributeVector::LEN {
                return Err(FeatureError::MalformedTable(format!(
                    "class {class} has {} values, expected {}",
                    vals.len(),
                    AttributeVector::LEN
                )));
            }
            let mut arr = [0.0; AttributeVector::LEN];
            arr.copy_from_slice(&vals);
            means.insert(class, AttributeVector(arr));
        }
        Ok(Self { means })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Trains the per-class attribute means from labeled training regions.
pub fn train_class_attribute_model(
    regions: &[(ClassId, AttributeVector)],
) -> Result<AttributeTable, FeatureError> {
    if regions.is_empty() {
        return Err(FeatureError::EmptyTraining);
    }
    let mut sums: BTreeMap<ClassId, ([f64; AttributeVector::LEN], usize)> = BTreeMap::new();
    for (class, v) in regions {
        let entry = sums.entry(*class).or_insert(([0.0; 10], 0));
        for (a, b) in entry.0.iter_mut().zip(v.as_slice()) {
            *a += b;
        }
        entry.1 += 1;
    }
    let means = sums
        .into_iter()
        .map(|(class, (sum, n))| {
            let mut mean = [0.0; AttributeVector::LEN];
            for (m, s) in mean.iter_mut().zip(&sum) {
                *m = s / n as f64;
            }
            (class, AttributeVector(mean))
        })
        .collect();
    Ok(AttributeTable { means })
}
