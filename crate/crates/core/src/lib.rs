pub mod symexpr;
pub mod geometry;
pub mod dtsystem;
pub mod flatness;
pub mod decompose;
pub mod sysfile;
pub mod analysis;
pub mod report;
