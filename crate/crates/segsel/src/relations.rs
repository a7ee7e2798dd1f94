//! Pairwise co-occurrence statistics and the multi-relational graph.
//!
//! For every ordered pair of detected objects an edge carries six relation
//! values: left/right/up/down positional ratios, relative size and
//! proximity. Each observed ratio is compared against the trained mean for
//! the ordered class pair with a bounded min/max similarity, giving scores
//! in `(0, 1]` that are 1 exactly when the observation matches the trained
//! expectation.
//!
//! The graph is fully connected and anti-symmetric: between two nodes the
//! outward and inward edges carry reciprocal position and size ratios and
//! an identical proximity value.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::labelmap::{ClassId, Connectivity, LabelMap, RegionDescriptor};

/// Denominator guard for positional ratios; centroids can sit at zero.
pub const RATIO_EPSILON: f64 = 1e-6;

/// Similarity assigned to every relation of a class pair never seen in
/// training.
pub const NEUTRAL_SIMILARITY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no training map contains at least two objects")]
    NoMultiObjectMap,
    #[error("line {line}: malformed co-occurrence file: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Raw geometric observation for an ordered object pair `(src, dst)`.
///
/// Ratios are `src / dst` with denominators guarded by [`RATIO_EPSILON`];
/// `clamped` records whether any guard fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairObservation {
    pub src_label: ClassId,
    pub dst_label: ClassId,
    pub horizontal_ratio: f64,
    pub vertical_ratio: f64,
    pub size_ratio: f64,
    pub adjacency: u8,
    pub clamped: bool,
}

impl PairObservation {
    /// Observation from raw geometry: `(centroid_x, centroid_y, area)`.
    pub fn from_geometry(
        src_label: ClassId,
        src: (f64, f64, f64),
        dst_label: ClassId,
        dst: (f64, f64, f64),
        adjacent: bool,
    ) -> Self {
        let guard = |v: f64| v.max(RATIO_EPSILON);
        let clamped = src.0 < RATIO_EPSILON
            || src.1 < RATIO_EPSILON
            || dst.0 < RATIO_EPSILON
            || dst.1 < RATIO_EPSILON;
        Self {
            src_label,
            dst_label,
            horizontal_ratio: guard(src.0) / guard(dst.0),
            vertical_ratio: guard(src.1) / guard(dst.1),
            size_ratio: guard(src.2) / guard(dst.2),
            adjacency: u8::from(adjacent),
            clamped,
        }
    }

    pub fn from_regions(src: &RegionDescriptor, dst: &RegionDescriptor, adjacent: bool) -> Self {
        Self::from_geometry(
            src.label,
            (src.centroid.0, src.centroid.1, src.area as f64),
            dst.label,
            (dst.centroid.0, dst.centroid.1, dst.area as f64),
            adjacent,
        )
    }

    /// The same geometry under a different source label; used when scoring
    /// replacement hypotheses.
    pub fn with_src_label(&self, label: ClassId) -> Self {
        Self {
            src_label: label,
            ..*self
        }
    }

    pub fn with_dst_label(&self, label: ClassId) -> Self {
        Self {
            dst_label: label,
            ..*self
        }
    }

    /// The four directional positional views: left `h`, right `1/h`,
    /// up `v`, down `1/v`.
    fn directional(&self) -> (f64, f64, f64, f64) {
        (
            self.horizontal_ratio,
            1.0 / self.horizontal_ratio,
            self.vertical_ratio,
            1.0 / self.vertical_ratio,
        )
    }
}

/// Trained means for one ordered class pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub mean_left: f64,
    pub mean_right: f64,
    pub mean_up: f64,
    pub mean_down: f64,
    pub mean_size: f64,
    pub mean_proximity: f64,
    pub count: u64,
}

/// Per ordered class pair means of all pairwise observations harvested from
/// the training maps, plus the global label set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CooccurrenceModel {
    labels: Vec<ClassId>,
    pairs: BTreeMap<(ClassId, ClassId), PairStats>,
}

impl CooccurrenceModel {
    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn pair(&self, src: ClassId, dst: ClassId) -> Option<&PairStats> {
        self.pairs.get(&(src, dst))
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("COOC 1\n");
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{l}");
        }
        out.push('\n');
        for ((a, b), s) in &self.pairs {
            let _ = writeln!(
                out,
                "{a} {b} {} {} {} {} {} {} {}",
                s.mean_left, s.mean_right, s.mean_up, s.mean_down, s.mean_size, s.mean_proximity,
                s.count
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RelationError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(RelationError::Malformed {
            line: 1,
            reason: "empty file".into(),
        })?;
        if header.trim() != "COOC 1" {
            return Err(RelationError::Malformed {
                line: 1,
                reason: format!("expected \"COOC 1\", found {header:?}"),
            });
        }
        let (_, label_line) = lines.next().ok_or(RelationError::Malformed {
            line: 2,
            reason: "missing label set line".into(),
        })?;
        let labels: Vec<ClassId> = label_line
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| RelationError::Malformed {
                    line: 2,
                    reason: format!("bad label {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;

        let mut pairs = BTreeMap::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 9 {
                return Err(RelationError::Malformed {
                    line: line_no,
                    reason: format!("expected 9 fields, found {}", toks.len()),
                });
            }
            let bad = |what: &str| RelationError::Malformed {
                line: line_no,
                reason: format!("bad {what} in {line:?}"),
            };
            let a: ClassId = toks[0].parse().map_err(|_| bad("class"))?;
            let b: ClassId = toks[1].parse().map_err(|_| bad("class"))?;
            let f = |i: usize, what: &str| -> Result<f64, RelationError> {
                toks[i].parse().map_err(|_| bad(what))
            };
            pairs.insert(
                (a, b),
                PairStats {
                    mean_left: f(2, "mean")?,
                    mean_right: f(3, "mean")?,
                    mean_up: f(4, "mean")?,
                    mean_down: f(5, "mean")?,
                    mean_size: f(6, "mean")?,
                    mean_proximity: f(7, "mean")?,
                    count: toks[8].parse().map_err(|_| bad("count"))?,
                },
            );
        }
        Ok(Self { labels, pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RelationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RelationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RelationError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| RelationError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Default)]
struct PairAccumulator {
    sum_left: f64,
    sum_right: f64,
    sum_up: f64,
    sum_down: f64,
    sum_size: f64,
    sum_adjacency: f64,
    count: u64,
}

impl PairAccumulator {
    fn push(&mut self, obs: &PairObservation) {
        let (l, r, u, d) = obs.directional();
        self.sum_left += l;
        self.sum_right += r;
        self.sum_up += u;
        self.sum_down += d;
        self.sum_size += obs.size_ratio;
        self.sum_adjacency += obs.adjacency as f64;
        self.count += 1;
    }

    fn stats(&self) -> PairStats {
        let n = self.count as f64;
        PairStats {
            mean_left: self.sum_left / n,
            mean_right: self.sum_right / n,
            mean_up: self.sum_up / n,
            mean_down: self.sum_down / n,
            mean_size: self.sum_size / n,
            mean_proximity: self.sum_adjacency / n,
            count: self.count,
        }
    }
}

/// Trains the co-occurrence model from ground-truth label maps.
///
/// Every ordered pair of objects in every map contributes one observation
/// to its ordered class pair. At least one map must contain two objects.
pub fn train_cooccurrence(
    maps: &[LabelMap],
    connectivity: Connectivity,
) -> Result<CooccurrenceModel, RelationError> {
    let mut accs: BTreeMap<(ClassId, ClassId), PairAccumulator> = BTreeMap::new();
    let mut labels: BTreeSet<ClassId> = BTreeSet::new();
    let mut saw_multi_object = false;

    for map in maps {
        let regions = crate::labelmap::extract_regions(map, connectivity);
        for r in &regions {
            labels.insert(r.label);
        }
        if regions.len() >= 2 {
            saw_multi_object = true;
        }
        let adjacency = adjacency_pairs(map, &regions);
        for i in 0..regions.len() {
            for j in 0..regions.len() {
                if i == j {
                    continue;
                }
                let obs = PairObservation::from_regions(
                    &regions[i],
                    &regions[j],
                    adjacency.contains(&(i, j)),
                );
                accs.entry((regions[i].label, regions[j].label))
                    .or_default()
                    .push(&obs);
            }
        }
    }

    if !saw_multi_object {
        return Err(RelationError::NoMultiObjectMap);
    }
    Ok(CooccurrenceModel {
        labels: labels.into_iter().collect(),
        pairs: accs.iter().map(|(k, a)| (*k, a.stats())).collect(),
    })
}

/// Region pairs sharing a 4-connected pixel boundary, both directions.
pub fn adjacency_pairs(map: &LabelMap, regions: &[RegionDescriptor]) -> HashSet<(usize, usize)> {
    let (w, h) = (map.width(), map.height());
    let mut owner = vec![usize::MAX; w * h];
    for (idx, r) in regions.iter().enumerate() {
        for (x, y) in r.pixels() {
            owner[y * w + x] = idx;
        }
    }
    let mut pairs = HashSet::new();
    let mut note = |a: usize, b: usize| {
        if a != usize::MAX && b != usize::MAX && a != b {
            pairs.insert((a, b));
            pairs.insert((b, a));
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                note(owner[y * w + x], owner[y * w + x + 1]);
            }
            if y + 1 < h {
                note(owner[y * w + x], owner[(y + 1) * w + x]);
            }
        }
    }
    pairs
}

/// Bounded ratio similarity: `min/max` of two positive reals, in `(0, 1]`,
/// symmetric, and 1 exactly at equality.
pub fn ratio_similarity(observed: f64, mean: f64) -> f64 {
    let (lo, hi) = if observed < mean {
        (observed, mean)
    } else {
        (mean, observed)
    };
    lo / hi
}

/// The six relation similarity scores of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSims {
    pub left: f64,
    pub right: f64,
    pub up: f64,
    pub down: f64,
    pub size: f64,
    pub proximity: f64,
}

/// Binary position weights from the centroid comparison. Exactly one of
/// `w0`/`w1` and one of `w2`/`w3` is set; ties go left/up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeWeights {
    pub w0: bool,
    pub w1: bool,
    pub w2: bool,
    pub w3: bool,
}

/// Everything computed for one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeValues {
    pub sims: EdgeSims,
    pub weights: EdgeWeights,
    /// Scalar position from the observed directional ratios.
    pub position: f64,
    /// True when the class pair was never seen in training and all
    /// similarities fell back to [`NEUTRAL_SIMILARITY`].
    pub low_evidence: bool,
}

/// Compares an observation against the trained means for its class pair.
pub fn compute_edge(obs: &PairObservation, model: &CooccurrenceModel) -> EdgeValues {
    let (l, r, u, d) = obs.directional();
    let weights = EdgeWeights {
        w0: obs.horizontal_ratio <= 1.0,
        w1: obs.horizontal_ratio > 1.0,
        w2: obs.vertical_ratio <= 1.0,
        w3: obs.vertical_ratio > 1.0,
    };
    let active_h = if weights.w0 { l } else { r };
    let active_v = if weights.w2 { u } else { d };
    let position = (active_h + active_v) / 4.0;

    let sims = match model.pair(obs.src_label, obs.dst_label) {
        Some(stats) => EdgeSims {
            left: ratio_similarity(l, stats.mean_left),
            right: ratio_similarity(r, stats.mean_right),
            up: ratio_similarity(u, stats.mean_up),
            down: ratio_similarity(d, stats.mean_down),
            size: ratio_similarity(obs.size_ratio, stats.mean_size),
            proximity: 1.0 - (obs.adjacency as f64 - stats.mean_proximity).abs(),
        },
        None => EdgeSims {
            left: NEUTRAL_SIMILARITY,
            right: NEUTRAL_SIMILARITY,
            up: NEUTRAL_SIMILARITY,
            down: NEUTRAL_SIMILARITY,
            size: NEUTRAL_SIMILARITY,
            proximity: NEUTRAL_SIMILARITY,
        },
    };
    EdgeValues {
        sims,
        weights,
        position,
        low_evidence: model.pair(obs.src_label, obs.dst_label).is_none(),
    }
}

/// One directed edge of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub obs: PairObservation,
    pub values: EdgeValues,
}

impl Edge {
    /// Observed relative size carried by the edge.
    pub fn size_ratio(&self) -> f64 {
        self.obs.size_ratio
    }

    /// Observed proximity carried by the edge; identical in both directions.
    pub fn proximity(&self) -> f64 {
        self.obs.adjacency as f64
    }

    pub fn position(&self) -> f64 {
        self.values.position
    }
}

/// A detected object and its current label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub region: RegionDescriptor,
    pub label: ClassId,
}

/// Fully connected directed graph over the detected objects: `n` nodes and
/// `n * (n - 1)` edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiRelationalGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

impl MultiRelationalGraph {
    pub fn edge(&self, src: usize, dst: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    pub fn incident(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges
            .iter()
            .filter(move |e| e.src == node || e.dst == node)
    }
}

/// Builds the fully connected multi-relational graph for one labeling.
///
/// `regions` must come from [`crate::labelmap::extract_regions`] on `map`.
/// For each unordered pair the outward edge (lower node index first) is
/// computed from its observation; the inward edge keeps its own similarity
/// scores and weights but stores the reciprocal position, which is what
/// makes the graph anti-symmetric.
pub fn build_graph(
    regions: Vec<RegionDescriptor>,
    map: &LabelMap,
    model: &CooccurrenceModel,
) -> MultiRelationalGraph {
    let adjacency = adjacency_pairs(map, &regions);
    let n = regions.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1) * n);
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = adjacency.contains(&(i, j));
            let obs_out = PairObservation::from_regions(&regions[i], &regions[j], adjacent);
            let obs_in = PairObservation::from_regions(&regions[j], &regions[i], adjacent);
            let out_values = compute_edge(&obs_out, model);
            let mut in_values = compute_edge(&obs_in, model);
            in_values.position = 1.0 / out_values.position;
            edges.push(Edge {
                src: i,
                dst: j,
                obs: obs_out,
                values: out_values,
            });
            edges.push(Edge {
                src: j,
                dst: i,
                obs: obs_in,
                values: in_values,
            });
        }
    }
    edges.sort_by(|a, b| a.src.cmp(&b.src).then(a.dst.cmp(&b.dst)));
    let nodes = regions
        .into_iter()
        .map(|region| GraphNode {
            label: region.label,
            region,
        })
        .collect();
    MultiRelationalGraph { nodes, edges }
}
