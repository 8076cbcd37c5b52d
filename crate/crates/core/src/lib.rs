pub mod bnsl;
pub mod experiments;
pub mod linalg;
pub mod linesearch;
pub mod oracle;
pub mod radiosim;
