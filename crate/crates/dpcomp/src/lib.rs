//! Privacy-budget accounting over HTTP and the command line.
//!
//! [`api::compose`], [`allocate::allocate_budget`] and [`curve::curve`] take
//! the same request types on both surfaces, so the CLI and the service give
//! identical numbers for identical requests.

pub mod allocate;
pub mod api;
pub mod curve;
pub mod error;
pub mod service;

pub use allocate::{allocate_budget, AllocationRequest, AllocationResponse};
pub use api::{compose, ComposeRequest, ComposeResponse, Limits, MethodChoice, Settings, Target};
pub use curve::{curve, to_csv, CurveRequest, CurveRow};
pub use error::{ApiError, ErrorBody};
pub use service::{router, serve, ServiceConfig};
