pub mod eval;
pub mod ground;
pub mod migrate;
pub mod split;
pub mod stats;
pub mod translate;
