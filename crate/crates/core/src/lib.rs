//! Near-duplicate detection for documentation text.
//!
//! [`clonemap`] finds exact token-level repeats and paints a heat map of how
//! often each token is duplicated; [`search`] finds every fragment within a
//! given similarity of a pattern; [`groups`] models near-duplicate groups and
//! checks search results against them; [`harness`] runs parameter sweeps.

pub mod clonemap;
pub mod corpus;
pub mod distance;
pub mod groups;
pub mod harness;
pub mod search;
