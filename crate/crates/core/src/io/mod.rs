//! Run configuration and outputs (placeholder).
