//! Mobility functions and the kernel catalog.

mod kernel;
mod mobility;

pub use kernel::{kernel_centered_at, make_kernel, Kernel, KernelSpec, KernelStats, KernelTag};
pub use mobility::{Mobility, MobilityBounds, MobilityKind};
