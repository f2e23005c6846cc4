//! Localized plane-wave terms (placeholder).
