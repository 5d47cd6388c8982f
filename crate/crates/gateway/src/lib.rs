//! Local gateway around one simulated device: a JSON/WebSocket service for
//! UIs, a blocking client, and the peer link to another device.

pub mod client;
pub mod device;
pub mod schema;
pub mod server;

pub use device::{Device, DeviceConfig, DeviceError};
