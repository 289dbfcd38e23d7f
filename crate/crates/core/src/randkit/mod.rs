//! Random streams, special functions, margins and base samplers.

pub mod margin;
pub mod samplers;
pub mod special;
pub mod stream;

pub use margin::{margin_cdf, margin_quantile, MarginKind, MarginSpec};
pub use samplers::{sample_gamma, sample_mvn, sample_trunc_exp01, GammaSampler, MvnFactor};
pub use special::StudentT;
pub use stream::{make_stream, RngStream};
