pub mod channel;
pub mod codec;
pub mod config;
pub mod demod;
pub mod detector;
pub mod experiment;
pub mod io;
pub mod keydist;
pub mod link;
pub mod physics;
pub mod rng;
