#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod linalg;
pub mod neuron;
pub mod probe;
pub mod rng;
pub mod signals;
pub mod stability;
pub mod systems;
pub mod trainer;
