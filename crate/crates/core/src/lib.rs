//! Codebook-based port selection and combining for CSI-free uplink fluid
//! antenna multiple access.
//!
//! Each UE owns an `N`-port fluid antenna surface and knows its own `M x N`
//! channel. It picks a codeword from a unitary codebook shared with the BS,
//! activates `K` ports and sets real combining weights so that its effective
//! channel lines up with that codeword. The BS needs no CSI: it separates
//! users by projecting the received signal onto each claimed codeword.
//! Codeword collisions are detected in a short reservation phase and resolved
//! by deferral, UE-side reselection or BS-side reassignment.

pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod linalg;
pub mod mac;
pub mod metrics;
pub mod plot;
pub mod ports;
pub mod rng;
pub mod selector;
pub mod sim;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
