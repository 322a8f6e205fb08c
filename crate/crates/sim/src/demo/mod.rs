//! Demo operators that embed a tuner in real work: adaptive convolution and
//! a partitioned adaptive join.

pub mod conv;
pub mod join;
