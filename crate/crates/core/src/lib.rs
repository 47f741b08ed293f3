//! Per-event motion segmentation of event-camera streams by motion-compensated
//! contrast maximization.
//!
//! A packet of events is explained by `J` clusters, each with its own
//! parametric warp. The layered method alternates soft event-cluster
//! associations and per-cluster motion ascent on the sum of the clusters'
//! image contrasts; mixture-density and fuzzy k-means variants share the same
//! kernels. A labeled simulator and experiment drivers support evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod event;
pub mod experiments;
pub mod io;
pub mod iwe;
pub mod sim;
pub mod solver;
pub mod warp;

pub use error::{Error, Result};
pub use evaluation::{detection_success, per_event_accuracy, AccuracyReport, DetectionBox, PixelRect};
pub use event::{sliding_windows, validate_packet, Event, EventPacket, ImageGeometry, Polarity, RefTime};
pub use iwe::{GaussianKernel, Iwe, Voting};
pub use sim::{simulate, GroundTruth, LabeledEvent, SceneObject, SimConfig};
pub use solver::config::{InitConfig, SolverConfig};
pub use solver::layered::{segment, segment_stream};
pub use solver::types::{AssociationMatrix, ClusterSet, Method, SegmentationResult};
pub use solver::{initialize_greedy, segment_from, segment_with};
pub use warp::{WarpModel, WarpParams};
