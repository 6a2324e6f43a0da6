pub mod allocate;
pub mod fewshot;
pub mod label;
pub mod predict;
pub mod probe;
pub mod synth;
pub mod train;
