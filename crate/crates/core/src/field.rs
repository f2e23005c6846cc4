//! Analytic field (placeholder).
pub struct AnalyticField;
