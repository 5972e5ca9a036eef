//! Target ranking losses and their convex surrogates.

mod gain;
mod phi;
mod surrogate;
mod target;

pub use gain::{DiscountFunction, GainFunction};
pub use phi::ConvexPhi;
pub(crate) use phi::{sigmoid, softplus};
pub use surrogate::*;
pub use target::*;
