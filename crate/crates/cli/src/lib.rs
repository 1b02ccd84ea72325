//! Command-line tools and an HTTP/JSON service over trained dgvse models.
//!
//! Both front ends share [`payloads`], so a query answered by the `dgvse`
//! binary and by `POST /retrieve` serialises to the same bytes.

pub mod commands;
pub mod exit;
pub mod payloads;
pub mod server;
