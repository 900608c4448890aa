//! The three classifier families.

pub mod cnn;
pub mod gbdt;
pub mod knn;
