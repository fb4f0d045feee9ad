pub mod entropy;
pub mod error;
pub mod experiments;
pub mod irs;
pub mod nilquot;
pub mod schreier;
pub mod sl2;
pub mod stats;
pub mod walks;
pub mod words;
