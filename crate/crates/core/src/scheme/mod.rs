//! Iteration scheme (placeholder).
