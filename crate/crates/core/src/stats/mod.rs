pub mod experiments;
pub mod fit;
pub mod ks;
pub mod report;
pub mod summary;
pub mod testfn;
pub mod theory;
