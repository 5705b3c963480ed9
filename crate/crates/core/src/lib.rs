//! Incident data integration for NG9-1-1 style EIDO-JSON documents.
//!
//! The pipeline turns heterogeneous reports into validated documents
//! ([`model`], [`transform`]), resolves informal place names ([`geocoder`]),
//! links documents into incident contexts by weighted temporal, spatial and
//! semantic similarity ([`correlator`]), derives composite incident views
//! ([`composite`]), persists everything in an append-only event log with
//! deterministic replay ([`store`]) and converts documents to and from flat
//! feature tables ([`tabular`]). [`pipeline`] wires the pieces together for
//! the command-line tool.

pub mod bundled;
pub mod composite;
pub mod config;
pub mod correlator;
pub mod geo;
pub mod geocoder;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod store;
pub mod tabular;
pub mod transform;

pub use model::{descriptive_text, parse_document, serialize_document, EidoDocument, Timestamp};
