//! Integer kernels shared by the exact solvers: `i128` when magnitudes allow,
//! `BigInt` otherwise.

use std::fmt::Debug;
use num_traits::Signed;

pub trait Int: Clone + Ord + Signed + Send + Sync + Debug + 'static {}
impl<T: Clone + Ord + Signed + Send + Sync + Debug + 'static> Int for T {}
