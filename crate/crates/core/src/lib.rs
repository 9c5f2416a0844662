//! Leader identification in semi-autonomous consensus networks.
//!
//! Agents run the consensus protocol over an undirected graph; a subset of
//! them (leaders) also track constant external inputs. The slowest mode of the
//! closed loop is the Fiedler eigenpair of the grounded Laplacian, and on
//! graphs with dense follower interconnection its leader entries sit strictly
//! below its follower entries. Late-time velocity ratios (relative tempos)
//! recover that vector up to scale, so the largest gap in the sorted estimate
//! separates leaders from followers without knowing the topology.
//!
//! Modules:
//! - [`graph`]: graphs, partitions, grounded Laplacian, augmented system.
//! - [`eigen`]: cyclic Jacobi eigensolver.
//! - [`spectral`]: Fiedler pair, semi-normalized adjacency, Perron check.
//! - [`identifiability`]: limiting Fiedler vector, margins, separation report.
//! - [`sequence`]: densifying graph sequences with fixed leaders.
//! - [`dynamics`]: closed-loop simulation (RK4 or modal exact solution).
//! - [`tempo`]: relative tempos, Fiedler estimate, sorted-gap leader detection.
//! - [`ensemble`]: seeded random instances for tests and batch runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod identifiability;
pub mod sequence;
pub mod spectral;
pub mod tempo;

pub use error::{Error, Result};
pub use graph::{Graph, GraphFile, NodeId, Partition};
