//! Special functions at arbitrary precision.

pub mod gamma;
pub mod kummer;
