//! Portfolio-based semantic segmentation.
//!
//! Given several candidate segmentations of the same image, this crate
//! selects among them per image, reasons about the plausibility of the
//! resulting object layout through a fully connected multi-relational
//! graph, and iteratively replaces implausible regions with the output of
//! a better-suited algorithm until the labeling is self-consistent.
//!
//! The main building blocks, bottom to top:
//!
//! - [`labelmap`]: pixel-wise label grids, connected-region extraction and
//!   shape attributes.
//! - [`imgfeat`]: handcrafted image feature histograms and per-class
//!   attribute statistics.
//! - [`relations`]: pairwise co-occurrence statistics and the
//!   multi-relational graph.
//! - [`reasoning`]: contradiction detection, replacement hypotheses and
//!   threshold calibration.
//! - [`selection`]: the trainable algorithm selectors.
//! - [`evalrep`]: per-class intersection-over-union scoring and reports.
//! - [`synth`]: a deterministic synthetic benchmark generator.
//! - [`pipeline`]: the iterative select / verify / merge loop.
//! - [`manifest`]: the on-disk dataset description shared by the tools.

pub mod evalrep;
pub mod imgfeat;
pub mod labelmap;
pub mod manifest;
pub mod pipeline;
pub mod reasoning;
pub mod relations;
pub mod selection;
pub mod synth;

pub use labelmap::{ClassId, Connectivity, LabelMap, RegionDescriptor, BACKGROUND, VOID};
