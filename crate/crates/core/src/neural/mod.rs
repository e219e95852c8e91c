//! Small dense networks with hand-written backpropagation, the policy
//! distributions they parameterize, Adam and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod distributions;
pub mod layers;
pub mod nets;
pub mod params;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, Section};
pub use distributions::{DistributionParams, EntropyForm, HeadKind, Marginal};
pub use layers::{Activation, Affine, LayerStack};
pub use nets::{build_accept_net, build_offer_net, DiscreteActorCritic, OfferNet};
pub use params::{gradient_check, GradientReport, Parameterized};
