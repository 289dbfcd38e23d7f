//! Copula families, h-functions, conditional inverses and vines.

pub mod event;
pub mod pair;
pub mod sampling;
pub mod spec;
pub mod vine;

pub use event::{CornerEvent, Direction, Indicator, PreparedEvent};
pub use pair::{h_func, h_inv, PairCopula, PairFamily};
pub use sampling::{sample_copula_crude, transform_event, CrudeSampler, Model};
pub use spec::{equicorrelation, CopulaFamily, CopulaSpec, LatentScale};
pub use vine::{RVineSpec, VineEdge};
