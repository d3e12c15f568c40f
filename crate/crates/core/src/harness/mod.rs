//! Metrics, benchmark matrix, config ingestion (placeholder while under construction).
