//! A matrix gateway: clients open sessions, receive a group of worker
//! endpoints, push dense matrices into distributed storage under
//! process-grid layouts, run library functions on the stored handles and
//! fetch the results.

pub mod bench;
pub mod client;
pub mod error;
pub mod layout;
pub mod protocol;
pub mod server;
pub mod testlib;

pub use error::{Error, ErrorCode, Result};
pub use layout::{DistPair, DistScheme, Layout, LocalCoord, ProcessGrid, StridedRange, TransferPlan};
pub use protocol::{ElemType, MatrixInfo, TaskValue, WorkerInfo};
pub use server::{Gateway, GatewayConfig};
pub use client::{BlockedSource, Client, FrameStats, RowPartitionedSource};
