//! Local decoders for linear codes.

pub mod codealg;
pub mod gf;
pub mod report;
pub mod decoder;
pub mod smooth;
pub mod fool;
pub mod goldberg;
pub mod twoquery;
pub mod linecode;
pub mod attack;
