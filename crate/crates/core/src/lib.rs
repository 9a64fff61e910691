#![no_std]
extern crate alloc;

pub mod error;
pub mod filter;
pub mod iwar;
pub mod iwar2;
pub mod matcore;
pub mod mcmc;
pub mod oracle;
pub mod svmodel;

pub use error::{Error, Result};
