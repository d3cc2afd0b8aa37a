//! Guide chapters.
