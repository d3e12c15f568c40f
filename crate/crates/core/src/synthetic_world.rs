//! Synthetic scene generation (placeholder while under construction).
