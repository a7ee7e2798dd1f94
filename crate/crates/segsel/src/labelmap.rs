//! Pixel-wise label maps, connected-region extraction and shape attributes.
//!
//! A [`LabelMap`] is the universal segmentation currency of this crate:
//! ground truth, algorithm outputs and merged results all use it. Regions
//! are 4- or 8-connected components of a single non-background class and
//! carry a fixed ten-entry shape attribute vector.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Object class identifier. `0` is background, `255` is void/ignore.
pub type ClassId = u8;

/// Background class: never forms a region node.
pub const BACKGROUND: ClassId = 0;
/// Void/ignore class: excluded from regions and from scoring.
pub const VOID: ClassId = 255;

/// Pixel neighborhood used for connected-component extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// N, S, E, W neighbors.
    Four,
    /// All eight surrounding pixels.
    Eight,
}

#[derive(Debug, Error)]
pub enum LabelMapError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: out-of-range label {value} (allowed 0..=255)")]
    OutOfRangeLabel { line: usize, value: i64 },
    #[error("line {line}: unreadable label token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("label grid has {found} values, expected {expected} (width x height)")]
    BadGridLength { expected: usize, found: usize },
}

/// A 2-D grid of class labels, stored row-major. Immutable in spirit:
/// pipeline stages always produce new maps rather than editing shared ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<ClassId>,
}

impl LabelMap {
    /// Builds a map from a row-major label grid.
    pub fn new(width: usize, height: usize, labels: Vec<ClassId>) -> Result<Self, LabelMapError> {
        if labels.len() != width * height {
            return Err(LabelMapError::BadGridLength {
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// An all-background map.
    pub fn filled(width: usize, height: usize, label: ClassId) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> ClassId {
        debug_assert!(x < self.width && y < self.height);
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: ClassId) {
        debug_assert!(x < self.width && y < self.height);
        self.labels[y * self.width + x] = label;
    }

    /// Row-major label slice.
    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    /// Distinct non-background, non-void labels present, ascending.
    pub fn present_labels(&self) -> Vec<ClassId> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0u16..256)
            .map(|l| l as ClassId)
            .filter(|&l| l != BACKGROUND && l != VOID && seen[l as usize])
            .collect()
    }

    /// Parses the LBLMAP text format.
    ///
    /// Line 1 is `LBLMAP 1`, line 2 is `<width> <height>`, followed by
    /// `height` lines of `width` space-separated labels in `0..=255`.
    pub fn from_lblmap_str(text: &str) -> Result<Self, LabelMapError> {
        let mut lines = text.lines().enumerate();

        let (_, header) = lines.next().ok_or(LabelMapError::MalformedHeader {
            line: 1,
            reason: "empty file".into(),
        })?;
        if header.trim() != "LBLMAP 1" {
            return Err(LabelMapError::MalformedHeader {
                line: 1,
                reason: format!("expected \"LBLMAP 1\", found {header:?}"),
            });
        }

        let (_, dims) = lines.next().ok_or(LabelMapError::MalformedHeader {
            line: 2,
            reason: "missing dimension line".into(),
        })?;
        let mut it = dims.split_whitespace();
        let parse_dim = |tok: Option<&str>| -> Result<usize, LabelMapError> {
            let tok = tok.ok_or(LabelMapError::MalformedHeader {
                line: 2,
                reason: "dimension line needs \"<width> <height>\"".into(),
            })?;
            tok.parse::<usize>()
                .map_err(|_| LabelMapError::MalformedHeader {
                    line: 2,
                    reason: format!("bad dimension token {tok:?}"),
                })
        };
        let width = parse_dim(it.next())?;
        let height = parse_dim(it.next())?;
        if it.next().is_some() {
            return Err(LabelMapError::MalformedHeader {
                line: 2,
                reason: "trailing tokens after dimensions".into(),
            });
        }

        let mut labels = Vec::with_capacity(width * height);
        let mut rows = 0usize;
        for (idx, row) in lines {
            let line_no = idx + 1;
            if rows == height {
                if row.trim().is_empty() {
                    continue;
                }
                return Err(LabelMapError::DimensionMismatch {
                    line: line_no,
                    expected: 0,
                    found: row.split_whitespace().count(),
                });
            }
            let mut count = 0usize;
            for tok in row.split_whitespace() {
                let value: i64 = tok.parse().map_err(|_| LabelMapError::BadToken {
                    line: line_no,
                    token: tok.to_string(),
                })?;
                if !(0..=255).contains(&value) {
                    return Err(LabelMapError::OutOfRangeLabel {
                        line: line_no,
                        value,
                    });
                }
                labels.push(value as ClassId);
                count += 1;
            }
            if count != width {
                return Err(LabelMapError::DimensionMismatch {
                    line: line_no,
                    expected: width,
                    found: count,
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(LabelMapError::DimensionMismatch {
                line: rows + 3,
                expected: height,
                found: rows,
            });
        }
        Self::new(width, height, labels)
    }

    /// Canonical LBLMAP serialization: single spaces, trailing newline.
    pub fn to_lblmap_string(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 3 + 32);
        let _ = writeln!(out, "LBLMAP 1");
        let _ = writeln!(out, "{} {}", self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if x > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.get(x, y));
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabelMapError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LabelMapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_lblmap_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LabelMapError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_lblmap_string()).map_err(|source| LabelMapError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Inclusive bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bbox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Bbox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Grows the box by `frac` of its size per side, clamped to the image.
    pub fn dilated(&self, frac: f64, image_w: usize, image_h: usize) -> Bbox {
        let dx = (self.width() as f64 * frac).ceil() as usize;
        let dy = (self.height() as f64 * frac).ceil() as usize;
        Bbox {
            x0: self.x0.saturating_sub(dx),
            y0: self.y0.saturating_sub(dy),
            x1: (self.x1 + dx).min(image_w - 1),
            y1: (self.y1 + dy).min(image_h - 1),
        }
    }
}

/// A horizontal run of region pixels: `(x0..x0+len)` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRun {
    pub y: usize,
    pub x0: usize,
    pub len: usize,
}

/// The ten shape attributes of a region, in fixed order:
/// area ratio, extent, aspect ratio, eccentricity, orientation, solidity,
/// compactness, normalized centroid x, normalized centroid y, perimeter
/// ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeVector(pub [f64; 10]);

impl AttributeVector {
    pub const LEN: usize = 10;

    pub fn zeros() -> Self {
        Self([0.0; 10])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn area_ratio(&self) -> f64 {
        self.0[0]
    }
    pub fn extent(&self) -> f64 {
        self.0[1]
    }
    pub fn aspect_ratio(&self) -> f64 {
        self.0[2]
    }
    pub fn eccentricity(&self) -> f64 {
        self.0[3]
    }
    pub fn orientation(&self) -> f64 {
        self.0[4]
    }
    pub fn solidity(&self) -> f64 {
        self.0[5]
    }
    pub fn compactness(&self) -> f64 {
        self.0[6]
    }
    pub fn centroid_x(&self) -> f64 {
        self.0[7]
    }
    pub fn centroid_y(&self) -> f64 {
        self.0[8]
    }
    pub fn perimeter_ratio(&self) -> f64 {
        self.0[9]
    }
}

/// One connected object region of a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDescriptor {
    pub label: ClassId,
    pub area: usize,
    /// Mean pixel coordinate (sub-pixel).
    pub centroid: (f64, f64),
    pub bbox: Bbox,
    pub attributes: AttributeVector,
    /// Row-major run-length encoding of the region mask.
    pub runs: Vec<PixelRun>,
}

impl RegionDescriptor {
    /// Iterates over every pixel of the region.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.x0..r.x0 + r.len).map(move |x| (x, r.y)))
    }

    /// Stable identity of the pixel set, independent of extraction order.
    /// FNV-1a over the runs; used to key per-region bookkeeping.
    pub fn pixel_key(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for r in &self.runs {
            mix(r.y as u64);
            mix(r.x0 as u64);
            mix(r.len as u64);
        }
        h
    }
}

const NEIGHBORS_4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const NEIGHBORS_8: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Extracts one region per connected component of each non-background,
/// non-void label. Results are sorted by label, then area descending, then
/// bounding-box position.
pub fn extract_regions(map: &LabelMap, connectivity: Connectivity) -> Vec<RegionDescriptor> {
    let (w, h) = (map.width(), map.height());
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &NEIGHBORS_4,
        Connectivity::Eight => &NEIGHBORS_8,
    };

    let mut visited = vec![false; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        let label = map.labels()[start];
        if visited[start] || label == BACKGROUND || label == VOID {
            continue;
        }
        // BFS over same-label connected pixels.
        visited[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            pixels.push((x, y));
            for &(dx, dy) in offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && map.labels()[nidx] == label {
                    visited[nidx] = true;
                    queue.push_back(nidx);
                }
            }
        }
        regions.push(build_region(label, pixels, w, h));
    }

    regions.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(b.area.cmp(&a.area))
            .then(a.bbox.y0.cmp(&b.bbox.y0))
            .then(a.bbox.x0.cmp(&b.bbox.x0))
    });
    regions
}

fn build_region(
    label: ClassId,
    mut pixels: Vec<(usize, usize)>,
    image_w: usize,
    image_h: usize,
) -> RegionDescriptor {
    pixels.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let runs = runs_from_sorted_pixels(&pixels);
    let area = pixels.len();
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for &(x, y) in &pixels {
        sx += x as f64;
        sy += y as f64;
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let centroid = (sx / area as f64, sy / area as f64);
    let bbox = Bbox { x0, y0, x1, y1 };
    let attributes = attributes_from_runs(&runs, image_w, image_h);
    RegionDescriptor {
        label,
        area,
        centroid,
        bbox,
        attributes,
        runs,
    }
}

fn runs_from_sorted_pixels(pixels: &[(usize, usize)]) -> Vec<PixelRun> {
    let mut runs: Vec<PixelRun> = Vec::new();
    for &(x, y) in pixels {
        match runs.last_mut() {
            Some(r) if r.y == y && r.x0 + r.len == x => r.len += 1,
            _ => runs.push(PixelRun { y, x0: x, len: 1 }),
        }
    }
    runs
}

/// Recomputes the ten shape attributes of a region from its pixel runs.
pub fn compute_region_attributes(
    region: &RegionDescriptor,
    image_size: (usize, usize),
) -> AttributeVector {
    attributes_from_runs(&region.runs, image_size.0, image_size.1)
}

fn attributes_from_runs(runs: &[PixelRun], image_w: usize, image_h: usize) -> AttributeVector {
    let area: usize = runs.iter().map(|r| r.len).sum();
    debug_assert!(area >= 1, "regions have at least one pixel");
    let area_f = area as f64;

    // First pass: centroid and bbox.
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for r in runs {
        // Sum of x over the run: len terms starting at x0.
        let lx = r.len as f64;
        sx += lx * r.x0 as f64 + lx * (lx - 1.0) / 2.0;
        sy += lx * r.y as f64;
        x0 = x0.min(r.x0);
        x1 = x1.max(r.x0 + r.len - 1);
        y0 = y0.min(r.y);
        y1 = y1.max(r.y);
    }
    let cx = sx / area_f;
    let cy = sy / area_f;
    let bbox = Bbox { x0, y0, x1, y1 };

    // Second central moments (per pixel, exact integer-grid sums).
    let (mut mxx, mut myy, mut mxy) = (0.0f64, 0.0f64, 0.0f64);
    for r in runs {
        let dy = r.y as f64 - cy;
        for x in r.x0..r.x0 + r.len {
            let dx = x as f64 - cx;
            mxx += dx * dx;
            myy += dy * dy;
            mxy += dx * dy;
        }
    }
    mxx /= area_f;
    myy /= area_f;
    mxy /= area_f;

    let (eccentricity, orientation) = eccentricity_orientation(mxx, myy, mxy);
    let perimeter = perimeter_edge_count(runs) as f64;
    let hull_area = convex_hull_area(runs);

    let image_area = (image_w * image_h) as f64;
    let diag = ((image_w * image_w + image_h * image_h) as f64).sqrt();

    AttributeVector([
        area_f / image_area,
        area_f / bbox.area() as f64,
        bbox.width() as f64 / bbox.height() as f64,
        eccentricity,
        orientation,
        (area_f / hull_area).min(1.0),
        4.0 * std::f64::consts::PI * area_f / (perimeter * perimeter),
        cx / image_w as f64,
        cy / image_h as f64,
        perimeter / diag,
    ])
}

/// Eccentricity and orientation from the normalized second central moments.
/// Isotropic regions (including single pixels) get eccentricity 0 and
/// orientation 0; a zero minor axis with a nonzero major axis gives 1.
fn eccentricity_orientation(mxx: f64, myy: f64, mxy: f64) -> (f64, f64) {
    let tr = mxx + myy;
    let disc = ((mxx - myy) * (mxx - myy) + 4.0 * mxy * mxy).sqrt();
    let lambda1 = (tr + disc) / 2.0;
    let lambda2 = (tr - disc) / 2.0;
    let eccentricity = if lambda1 <= 1e-12 {
        0.0
    } else {
        (1.0 - (lambda2.max(0.0) / lambda1)).max(0.0).sqrt()
    };
    let orientation = if disc <= 1e-12 {
        0.0
    } else {
        0.5 * (2.0 * mxy).atan2(mxx - myy)
    };
    (eccentricity, orientation)
}

/// Perimeter as the number of pixel-edge segments on the region boundary.
/// Edges against the image border count; a single pixel has perimeter 4.
fn perimeter_edge_count(runs: &[PixelRun]) -> usize {
    let contains = mask_lookup(runs);
    let mut edges = 0usize;
    for r in runs {
        for x in r.x0..r.x0 + r.len {
            let (xi, yi) = (x as isize, r.y as isize);
            for (dx, dy) in NEIGHBORS_4 {
                if !contains(xi + dx, yi + dy) {
                    edges += 1;
                }
            }
        }
    }
    edges
}

/// Membership test over the run set. Runs are row-major sorted by
/// construction; binary search per row keeps this cheap for desk scale.
fn mask_lookup(runs: &[PixelRun]) -> impl Fn(isize, isize) -> bool + '_ {
    move |x: isize, y: isize| {
        if x < 0 || y < 0 {
            return false;
        }
        let (x, y) = (x as usize, y as usize);
        let row_start = runs.partition_point(|r| r.y < y);
        runs[row_start..]
            .iter()
            .take_while(|r| r.y == y)
            .any(|r| x >= r.x0 && x < r.x0 + r.len)
    }
}

/// Convex hull area over pixel-corner coordinates.
///
/// Row-extreme pixels supply the candidate corners; the hull of those
/// corners contains every pixel square of the region, so the returned area
/// is always >= the pixel count.
fn convex_hull_area(runs: &[PixelRun]) -> f64 {
    // Per row: min x0 and max x1 (exclusive right corner).
    let mut row_extremes: Vec<(usize, usize, usize)> = Vec::new();
    for r in runs {
        match row_extremes.last_mut() {
            Some((y, min_x, max_x)) if *y == r.y => {
                *min_x = (*min_x).min(r.x0);
                *max_x = (*max_x).max(r.x0 + r.len);
            }
            _ => row_extremes.push((r.y, r.x0, r.x0 + r.len)),
        }
    }
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(row_extremes.len() * 4);
    for (y, min_x, max_x) in row_extremes {
        let (yf0, yf1) = (y as f64, y as f64 + 1.0);
        points.push((min_x as f64, yf0));
        points.push((min_x as f64, yf1));
        points.push((max_x as f64, yf0));
        points.push((max_x as f64, yf1));
    }
    let hull = monotone_chain(&mut points);
    polygon_area(&hull)
}

fn monotone_chain(points: &mut Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    if points.len() <= 2 {
        return points.clone();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 1);
    for &p in points.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        s += x0 * y1 - x1 * y0;
    }
    s.abs() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map_from_rows(rows: &[&[u8]]) -> LabelMap {
        let h = rows.len();
        let w = rows[0].len();
        let mut labels = Vec::with_capacity(w * h);
        for r in rows {
            assert_eq!(r.len(), w);
            labels.extend_from_slice(r);
        }
        LabelMap::new(w, h, labels).unwrap()
    }

    // Independent flood-fill oracle: recursive component count per label.
    fn oracle_component_pixel_sets(
        map: &LabelMap,
        connectivity: Connectivity,
    ) -> Vec<(ClassId, Vec<(usize, usize)>)> {
        let (w, h) = (map.width(), map.height());
        let mut seen = vec![false; w * h];
        let mut comps = Vec::new();
        fn fill(
            map: &LabelMap,
            seen: &mut [bool],
            x: usize,
            y: usize,
            label: ClassId,
            eight: bool,
            out: &mut Vec<(usize, usize)>,
        ) {
            let w = map.width();
            if seen[y * w + x] || map.get(x, y) != label {
                return;
            }
            seen[y * w + x] = true;
            out.push((x, y));
            let deltas: &[(isize, isize)] = if eight {
                &[
                    (1, 0),
                    (-1, 0),
                    (0, 1),
                    (0, -1),
                    (1, 1),
                    (1, -1),
                    (-1, 1),
                    (-1, -1),
                ]
            } else {
                &[(1, 0), (-1, 0), (0, 1), (0, -1)]
            };
            for &(dx, dy) in deltas {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < map.height() {
                    fill(map, seen, nx as usize, ny as usize, label, eight, out);
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let l = map.get(x, y);
                if l != BACKGROUND && l != VOID && !seen[y * w + x] {
                    let mut pixels = Vec::new();
                    fill(
                        map,
                        &mut seen,
                        x,
                        y,
                        l,
                        matches!(connectivity, Connectivity::Eight),
                        &mut pixels,
                    );
                    pixels.sort_unstable();
                    comps.push((l, pixels));
                }
            }
        }
        comps
    }

    #[test]
    fn parses_minimal_file() {
        let m = LabelMap::from_lblmap_str("LBLMAP 1\n2 2\n0 1\n1 0\n").unwrap();
        assert_eq!((m.width(), m.height()), (2, 2));
        assert_eq!(m.labels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = LabelMap::from_lblmap_str("LBLMAP 1\n2 2\n0 1 1\n1 0\n").unwrap_err();
        match err {
            LabelMapError::DimensionMismatch {
                line,
                expected,
                found,
            } => {
                assert_eq!(line, 3);
                assert_eq!(expected, 2);
                assert_eq!(found, 3);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn rejects_missing_rows() {
        let err = LabelMap::from_lblmap_str("LBLMAP 1\n2 2\n0 1\n").unwrap_err();
        assert!(matches!(err, LabelMapError::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_out_of_range_label() {
        let err = LabelMap::from_lblmap_str("LBLMAP 1\n2 1\n0 256\n").unwrap_err();
        match err {
            LabelMapError::OutOfRangeLabel { line, value } => {
                assert_eq!(line, 3);
                assert_eq!(value, 256);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn rejects_malformed_header() {
        let err = LabelMap::from_lblmap_str("LBLMAP 9\n1 1\n0\n").unwrap_err();
        assert!(matches!(err, LabelMapError::MalformedHeader { line: 1, .. }));
    }

    #[test]
    fn canonical_round_trip() {
        let text = "LBLMAP 1\n3 2\n0 1 2\n255 0 7\n";
        let m = LabelMap::from_lblmap_str(text).unwrap();
        assert_eq!(m.to_lblmap_string(), text);
        let m2 = LabelMap::from_lblmap_str(&m.to_lblmap_string()).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lbl");
        let m = map_from_rows(&[&[0, 3, 3], &[0, 0, 5]]);
        m.save(&path).unwrap();
        assert_eq!(LabelMap::load(&path).unwrap(), m);
    }

    #[test]
    fn all_background_has_no_regions() {
        let m = LabelMap::filled(4, 4, BACKGROUND);
        assert!(extract_regions(&m, Connectivity::Four).is_empty());
    }

    #[test]
    fn void_is_excluded() {
        let m = map_from_rows(&[&[255, 255], &[255, 2]]);
        let regions = extract_regions(&m, Connectivity::Four);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].label, 2);
    }

    #[test]
    fn two_disjoint_blobs_same_label() {
        let m = map_from_rows(&[&[3, 3, 0, 0], &[0, 0, 0, 3]]);
        let regions = extract_regions(&m, Connectivity::Four);
        assert_eq!(regions.len(), 2);
        assert!(regions.iter().all(|r| r.label == 3));
        // Sorted by area descending within the label.
        assert_eq!(regions[0].area, 2);
        assert_eq!(regions[1].area, 1);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let m = map_from_rows(&[&[1, 0], &[0, 1]]);
        let four = extract_regions(&m, Connectivity::Four);
        let eight = extract_regions(&m, Connectivity::Eight);
        assert_eq!(four.len(), 2);
        assert_eq!(eight.len(), 1);
        // Agree with the independent flood-fill oracle.
        assert_eq!(four.len(), oracle_component_pixel_sets(&m, Connectivity::Four).len());
        assert_eq!(
            eight.len(),
            oracle_component_pixel_sets(&m, Connectivity::Eight).len()
        );
    }

    #[test]
    fn solid_square_attributes() {
        let mut m = LabelMap::filled(100, 100, BACKGROUND);
        for y in 20..30 {
            for x in 40..50 {
                m.set(x, y, 6);
            }
        }
        let regions = extract_regions(&m, Connectivity::Four);
        assert_eq!(regions.len(), 1);
        let a = &regions[0].attributes;
        assert!((a.area_ratio() - 0.01).abs() < 1e-12);
        assert!((a.extent() - 1.0).abs() < 1e-12);
        assert!((a.aspect_ratio() - 1.0).abs() < 1e-12);
        assert!(a.eccentricity().abs() < 1e-12);
        assert!((a.solidity() - 1.0).abs() < 1e-12);
        // 10x10 square: perimeter 40 edges.
        assert!((a.perimeter_ratio() - 40.0 / (20000.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_attributes() {
        let mut m = LabelMap::filled(8, 8, BACKGROUND);
        m.set(3, 5, 2);
        let r = &extract_regions(&m, Connectivity::Four)[0];
        let a = &r.attributes;
        assert_eq!(r.area, 1);
        assert!((a.extent() - 1.0).abs() < 1e-12);
        assert!((a.solidity() - 1.0).abs() < 1e-12);
        assert!((a.aspect_ratio() - 1.0).abs() < 1e-12);
        // Perimeter 4 by definition.
        assert!((a.compactness() - std::f64::consts::PI / 4.0).abs() < 1e-12);
        assert!(a.eccentricity().abs() < 1e-12);
        assert!(a.orientation().abs() < 1e-12);
    }

    // Brute-force attribute oracle: direct moment computation over the raw
    // pixel list, no run encoding involved.
    fn oracle_moments(pixels: &[(usize, usize)]) -> (f64, f64, f64, f64, f64) {
        let n = pixels.len() as f64;
        let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
        for &(x, y) in pixels {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            mxx += dx * dx;
            myy += dy * dy;
            mxy += dx * dy;
        }
        (cx, cy, mxx / n, myy / n, mxy / n)
    }

    #[test]
    fn digital_ellipse_matches_moment_oracle() {
        let (w, h) = (80, 60);
        let (cx, cy, a, b) = (39.0, 29.0, 20.0, 10.0);
        let mut m = LabelMap::filled(w, h, BACKGROUND);
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx) / a;
                let dy = (y as f64 - cy) / b;
                if dx * dx + dy * dy <= 1.0 {
                    m.set(x, y, 1);
                    pixels.push((x, y));
                }
            }
        }
        let r = &extract_regions(&m, Connectivity::Four)[0];
        let (ocx, ocy, mxx, myy, mxy) = oracle_moments(&pixels);
        assert!((r.centroid.0 - ocx).abs() < 1e-9);
        assert!((r.centroid.1 - ocy).abs() < 1e-9);
        let (oecc, oori) = super::eccentricity_orientation(mxx, myy, mxy);
        assert!((r.attributes.eccentricity() - oecc).abs() < 1e-9);
        assert!((r.attributes.orientation() - oori).abs() < 1e-9);
        // Wide ellipse: strongly eccentric, axis-aligned.
        assert!(r.attributes.eccentricity() > 0.8);
        assert!(r.attributes.orientation().abs() < 1e-9);
        // Convex digital ellipse: solidity near 1 (the corner hull adds
        // about half a pixel per side).
        assert!(r.attributes.solidity() > 0.90);
    }

    #[test]
    fn horizontal_line_is_degenerate() {
        let mut m = LabelMap::filled(10, 5, BACKGROUND);
        for x in 1..9 {
            m.set(x, 2, 4);
        }
        let r = &extract_regions(&m, Connectivity::Four)[0];
        assert!((r.attributes.eccentricity() - 1.0).abs() < 1e-12);
        assert!(r.attributes.orientation().abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn extraction_partitions_pixels(
            w in 1usize..12, h in 1usize..12,
            seed in proptest::collection::vec(0u8..4, 1..144)
        ) {
            let labels: Vec<u8> = (0..w * h).map(|i| seed[i % seed.len()]).collect();
            let m = LabelMap::new(w, h, labels).unwrap();
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let regions = extract_regions(&m, conn);
                let mut covered = vec![0usize; w * h];
                for r in &regions {
                    for (x, y) in r.pixels() {
                        covered[y * w + x] += 1;
                        prop_assert_eq!(m.get(x, y), r.label);
                    }
                }
                for y in 0..h {
                    for x in 0..w {
                        let expected = usize::from(m.get(x, y) != BACKGROUND && m.get(x, y) != VOID);
                        prop_assert_eq!(covered[y * w + x], expected);
                    }
                }
                // Cross-check the component structure against the oracle.
                let mut ours: Vec<(ClassId, Vec<(usize, usize)>)> = regions
                    .iter()
                    .map(|r| {
                        let mut p: Vec<_> = r.pixels().collect();
                        p.sort_unstable();
                        (r.label, p)
                    })
                    .collect();
                ours.sort();
                let mut oracle = oracle_component_pixel_sets(&m, conn);
                oracle.sort();
                prop_assert_eq!(ours, oracle);
            }
        }

        #[test]
        fn padding_with_background_preserves_regions(
            w in 1usize..8, h in 1usize..8,
            seed in proptest::collection::vec(0u8..3, 1..64),
            pad in 1usize..4
        ) {
            let labels: Vec<u8> = (0..w * h).map(|i| seed[i % seed.len()]).collect();
            let m = LabelMap::new(w, h, labels).unwrap();
            let mut padded = LabelMap::filled(w + 2 * pad, h + 2 * pad, BACKGROUND);
            for y in 0..h {
                for x in 0..w {
                    padded.set(x + pad, y + pad, m.get(x, y));
                }
            }
            let a = extract_regions(&m, Connectivity::Four);
            let b = extract_regions(&padded, Connectivity::Four);
            prop_assert_eq!(a.len(), b.len());
            for (ra, rb) in a.iter().zip(&b) {
                prop_assert_eq!(ra.label, rb.label);
                prop_assert_eq!(ra.area, rb.area);
                let mut pa: Vec<_> = ra.pixels().map(|(x, y)| (x + pad, y + pad)).collect();
                let mut pb: Vec<_> = rb.pixels().collect();
                pa.sort_unstable();
                pb.sort_unstable();
                prop_assert_eq!(pa, pb);
            }
        }

        #[test]
        fn attributes_are_translation_invariant(
            blob in proptest::collection::hash_set((0usize..6, 0usize..6), 1..20),
            tx in 0usize..6, ty in 0usize..6
        ) {
            let (w, h) = (16usize, 16usize);
            let mut m1 = LabelMap::filled(w, h, BACKGROUND);
            let mut m2 = LabelMap::filled(w, h, BACKGROUND);
            for &(x, y) in &blob {
                m1.set(x, y, 1);
                m2.set(x + tx, y + ty, 1);
            }
            let r1 = extract_regions(&m1, Connectivity::Eight);
            let r2 = extract_regions(&m2, Connectivity::Eight);
            prop_assert_eq!(r1.len(), r2.len());
            for (a, b) in r1.iter().zip(&r2) {
                for i in 0..AttributeVector::LEN {
                    // Normalized centroids (indices 7, 8) are the two
                    // attributes allowed to move.
                    if i != 7 && i != 8 {
                        prop_assert!((a.attributes.0[i] - b.attributes.0[i]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn attribute_ranges_hold(
            blob in proptest::collection::hash_set((0usize..10, 0usize..10), 1..40)
        ) {
            let mut m = LabelMap::filled(10, 10, BACKGROUND);
            for &(x, y) in &blob {
                m.set(x, y, 1);
            }
            for r in extract_regions(&m, Connectivity::Four) {
                let a = &r.attributes;
                for v in a.as_slice() {
                    prop_assert!(v.is_finite());
                }
                for idx in [0usize, 1, 5, 6, 7, 8] {
                    prop_assert!(a.0[idx] >= 0.0 && a.0[idx] <= 1.0, "attr {} = {}", idx, a.0[idx]);
                }
                prop_assert!(a.eccentricity() >= 0.0 && a.eccentricity() <= 1.0);
                prop_assert!(r.centroid.0 >= r.bbox.x0 as f64 && r.centroid.0 <= r.bbox.x1 as f64);
                prop_assert!(r.centroid.1 >= r.bbox.y0 as f64 && r.centroid.1 <= r.bbox.y1 as f64);
            }
        }
    }
}
