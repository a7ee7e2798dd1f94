//! Symbolic contradiction detection and replacement hypotheses.
//!
//! Every directed edge of the multi-relational graph is scored by averaging
//! its weighted position, size and proximity similarities; an edge whose
//! score falls below the threshold theta is a contradiction. The
//! contradiction histogram counts, per node, how many contradicted
//! relations the node participates in; its argmax nodes are the candidates
//! for label replacement. A hypothesis proposes a new label for a candidate
//! node, scored by how well the relabeled node's edges would agree with the
//! trained co-occurrence statistics.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::imgfeat::AttributeTable;
use crate::labelmap::{AttributeVector, ClassId};
use crate::relations::{compute_edge, CooccurrenceModel, EdgeValues, MultiRelationalGraph};

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("no alternative labels")]
    NoAlternativeLabels,
    #[error("no trained attribute mean for class {class}")]
    MissingAttributes { class: ClassId },
    #[error("empty validation set")]
    EmptyValidation,
    #[error("theta must lie in (0, 1), got {theta}")]
    BadTheta { theta: f64 },
}

/// Which similarity fills the sixth slot of the edge score.
///
/// The size term appearing twice mirrors the score as printed in the
/// source material; using proximity instead makes all three relation
/// groups count, which is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariant {
    #[default]
    RsPlusRp,
    RsPlusRs,
}

impl ScoreVariant {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "rs_rp" => Some(Self::RsPlusRp),
            "rs_rs" => Some(Self::RsPlusRs),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RsPlusRp => "rs_rp",
            Self::RsPlusRs => "rs_rs",
        }
    }
}

/// Threshold and scoring variant for contradiction detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContradictionConfig {
    pub theta: f64,
    pub variant: ScoreVariant,
}

impl ContradictionConfig {
    pub fn new(theta: f64, variant: ScoreVariant) -> Result<Self, ReasoningError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ReasoningError::BadTheta { theta });
        }
        Ok(Self { theta, variant })
    }
}

/// The per-edge plausibility score: weighted position similarities plus the
/// size and variant terms, averaged over six. A perfectly matching edge
/// scores 4/6 because only one of each directional pair is active.
pub fn edge_score(values: &EdgeValues, variant: ScoreVariant) -> f64 {
    let s = &values.sims;
    let w = &values.weights;
    let position = f64::from(w.w0) * s.left
        + f64::from(w.w1) * s.right
        + f64::from(w.w2) * s.up
        + f64::from(w.w3) * s.down;
    let last = match variant {
        ScoreVariant::RsPlusRp => s.proximity,
        ScoreVariant::RsPlusRs => s.size,
    };
    (position + s.size + last) / 6.0
}

/// One contradicted directed relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContradictedEdge {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}

/// Result of scanning a graph for contradictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContradictionReport {
    pub edges: Vec<ContradictedEdge>,
    /// Node -> number of contradicted relations it participates in.
    pub histogram: BTreeMap<usize, usize>,
    /// All nodes attaining the maximum count, in node order.
    pub candidates: Vec<usize>,
}

impl ContradictionReport {
    pub fn is_clean(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Scores every edge and reports the ones below theta. Graphs with fewer
/// than two nodes have no relations to verify and report clean.
pub fn detect_contradictions(
    graph: &MultiRelationalGraph,
    config: &ContradictionConfig,
) -> ContradictionReport {
    if graph.nodes.len() < 2 {
        return ContradictionReport::default();
    }
    let edges: Vec<ContradictedEdge> = graph
        .edges
        .iter()
        .filter_map(|e| {
            let score = edge_score(&e.values, config.variant);
            (score < config.theta).then_some(ContradictedEdge {
                src: e.src,
                dst: e.dst,
                score,
            })
        })
        .collect();
    let (histogram, candidates) = contradiction_histogram(&edges);
    ContradictionReport {
        edges,
        histogram,
        candidates,
    }
}

/// Counts per-node membership in contradicted relations and returns the
/// argmax nodes (ties all included, ascending node order).
pub fn contradiction_histogram(
    edges: &[ContradictedEdge],
) -> (BTreeMap<usize, usize>, Vec<usize>) {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for e in edges {
        *histogram.entry(e.src).or_insert(0) += 1;
        *histogram.entry(e.dst).or_insert(0) += 1;
    }
    let max = histogram.values().copied().max().unwrap_or(0);
    let candidates = histogram
        .iter()
        .filter(|(_, &c)| c == max && max > 0)
        .map(|(&n, _)| n)
        .collect();
    (histogram, candidates)
}

/// A proposed replacement label for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub target: usize,
    pub proposed: ClassId,
    /// Sum of the edge scores of all relations incident to the target,
    /// recomputed under the proposed label.
    pub score: f64,
    /// Class-mean attribute vector describing the hypothesis.
    pub attributes: AttributeVector,
}

/// Scores every alternative label for `target` by relabeling it while all
/// other nodes stay fixed, and returns the best `max_k` in order of
/// relevance (ties broken by ascending class id).
pub fn generate_hypotheses(
    graph: &MultiRelationalGraph,
    target: usize,
    model: &CooccurrenceModel,
    attributes: &AttributeTable,
    variant: ScoreVariant,
    max_k: usize,
) -> Result<Vec<Hypothesis>, ReasoningError> {
    let current = graph.nodes[target].label;
    let alternatives: Vec<ClassId> = model
        .labels()
        .iter()
        .copied()
        .filter(|&l| l != current)
        .collect();
    if alternatives.is_empty() {
        return Err(ReasoningError::NoAlternativeLabels);
    }

    let mut hypotheses = Vec::with_capacity(alternatives.len());
    for label in alternatives {
        let mut score = 0.0;
        for edge in graph.incident(target) {
            let obs = if edge.src == target {
                edge.obs.with_src_label(label)
            } else {
                edge.obs.with_dst_label(label)
            };
            score += edge_score(&compute_edge(&obs, model), variant);
        }
        let attr = attributes
            .get(label)
            .copied()
            .ok_or(ReasoningError::MissingAttributes { class: label })?;
        hypotheses.push(Hypothesis {
            target,
            proposed: label,
            score,
            attributes: attr,
        });
    }
    hypotheses.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.proposed.cmp(&b.proposed))
    });
    hypotheses.truncate(max_k);
    Ok(hypotheses)
}

/// Outcome of the theta sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCalibration {
    pub theta: f64,
    pub accuracy: f64,
    /// True when even the best threshold stays under the 0.90 target.
    pub below_target: bool,
    /// `(theta, accuracy)` for every grid point, for reporting.
    pub sweep: Vec<(f64, f64)>,
}

/// Calibration accuracy target.
pub const THETA_ACCURACY_TARGET: f64 = 0.90;

const THETA_GRID: usize = 256;

/// Sweeps theta over a 1/256 grid and picks the value maximizing
/// edge-level contradiction classification accuracy against the planted
/// truth (first maximizer wins, so the result is deterministic).
pub fn calibrate_theta(
    validation: &[(MultiRelationalGraph, Vec<bool>)],
    variant: ScoreVariant,
) -> Result<ThetaCalibration, ReasoningError> {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for (graph, truth) in validation {
        assert_eq!(
            graph.edges.len(),
            truth.len(),
            "one truth flag per directed edge"
        );
        for (edge, &contradicted) in graph.edges.iter().zip(truth) {
            scored.push((edge_score(&edge.values, variant), contradicted));
        }
    }
    if scored.is_empty() {
        return Err(ReasoningError::EmptyValidation);
    }

    let mut best = (0.0f64, -1.0f64);
    let mut sweep = Vec::with_capacity(THETA_GRID - 1);
    for k in 1..THETA_GRID {
        let theta = k as f64 / THETA_GRID as f64;
        let correct = scored
            .iter()
            .filter(|(score, truth)| (*score < theta) == *truth)
            .count();
        let accuracy = correct as f64 / scored.len() as f64;
        sweep.push((theta, accuracy));
        if accuracy > best.1 {
            best = (theta, accuracy);
        }
    }
    Ok(ThetaCalibration {
        theta: best.0,
        accuracy: best.1,
        below_target: best.1 < THETA_ACCURACY_TARGET,
        sweep,
    })
}

/// Renders the sweep as a plain text report, one grid point per line.
pub fn sweep_report(calibration: &ThetaCalibration) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "theta sweep: best theta {} accuracy {:.4}{}",
        calibration.theta,
        calibration.accuracy,
        if calibration.below_target {
            " (below 0.90 target)"
        } else {
            ""
        }
    );
    for (theta, acc) in &calibration.sweep {
        let _ = writeln!(out, "{theta} {acc:.6}");
    }
    out
}
