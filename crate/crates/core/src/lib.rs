#![no_std]
// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod emulate;
pub mod geom;
pub mod hall;
pub mod locate;
pub mod measure;
pub mod raytrace;
pub mod report;
pub mod scene;
