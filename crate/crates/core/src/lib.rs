//! Buffer-aided relay selection for the half-duplex single-relay-selection
//! network.
//!
//! A source reaches a destination only through `M` half-duplex
//! decode-and-forward relays, and exactly one relay is active per slot.
//! This crate provides:
//!
//! * [`channel`]: Rayleigh block-fading realizations and link capacities,
//! * [`protocols`]: conventional, max-link, optimal buffer-aided and
//!   delay-limited selection rules with their queue and estimator updates,
//! * [`analysis`]: effective SNR densities, the flow-balance solver for the
//!   optimal selection weights, and closed-form i.i.d. Rayleigh rates,
//! * [`simulator`]: the slot-by-slot Monte-Carlo driver,
//! * [`cli`] and [`verify`]: the experiment runner behind the `bufrelay`
//!   binary and its built-in acceptance checks.
//!
//! ```
//! use bufrelay::analysis::{closed_form_rate_ba_iid_rayleigh, closed_form_rate_conv_iid_rayleigh};
//!
//! let ba = closed_form_rate_ba_iid_rayleigh(2, 10.0).unwrap();
//! let conv = closed_form_rate_conv_iid_rayleigh(2, 10.0).unwrap();
//! assert!(ba > conv);
//! ```

pub mod analysis;
pub mod channel;
pub mod cli;
mod error;
pub mod protocols;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};

/// The guide's chapters, compiled as doctests so the snippets stay honest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/flow-balance.md")]
    mod flow_balance {}
    #[doc = include_str!("../../../book/src/closed-forms.md")]
    mod closed_forms {}
    #[doc = include_str!("../../../book/src/delay.md")]
    mod delay {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
