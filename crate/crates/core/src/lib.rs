//! Points-to specification inference for library code.
//!
//! The crate is organised as a pipeline: [`ir`] defines the language,
//! [`analysis`] runs the CFL-reachability points-to analysis, [`pathspec`]
//! describes candidate specifications, [`synth`] and [`oracle`] check them
//! dynamically, [`learner`] infers a regular language of them, and
//! [`codegen`] turns that language back into analysable code. [`evalbench`]
//! measures the result against static ground truth.

pub mod analysis;
pub mod codegen;
pub mod evalbench;
pub mod interpreter;
pub mod ir;
pub mod learner;
pub mod oracle;
pub mod pathspec;
pub mod synth;
