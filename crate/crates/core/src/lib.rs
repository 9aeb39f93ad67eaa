//! Information measures, channel models, achievable-rate regions and Monte
//! Carlo coding simulations for a broadcast channel cascaded with a
//! two-user multiple-access channel.

pub mod channel;
pub mod channel_file;
pub mod prob;
pub mod rng;
pub mod region;
pub mod rfid;
pub mod sim;
