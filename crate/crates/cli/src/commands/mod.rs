pub mod augment;
pub mod eval;
pub mod fit;
pub mod manifest;
pub mod score;
pub mod sweep;
pub mod synth;
pub mod transfer;
