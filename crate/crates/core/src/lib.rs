//! Privacy-preserving eigendecomposition over decentralized graphs.
//!
//! Users perturb their local adjacency rows under local differential privacy
//! and secret-share them to two simulated non-colluding servers; the servers
//! run a secret-shared Arnoldi/Lanczos reduction and a Givens-rotation QR
//! iteration to recover the top-k eigenpairs, with full communication
//! accounting and plaintext reference oracles for every stage.

pub mod collect;
pub mod compare;
pub mod dealer;
pub mod eigen;
pub mod fss;
pub mod graph;
pub mod ldp;
pub mod plain;
pub mod protocol;
pub mod ring;
pub mod shares;
pub mod sim;

pub use compare::CompareBackend;
pub use dealer::{DealerCore, PartyCtx};
pub use graph::{generate_synthetic, GraphDataset, SyntheticKind};
pub use protocol::{
    run_protocol, storage_figures, BackendChoice, ProtocolError, QrVariant, RunConfig, RunOutput,
    StorageFigures,
};
pub use ring::{decode, decode128, encode, encode128, Ring, FRAC_BITS};
pub use shares::{ArithShare, BinShare};
pub use sim::{Channel, Party, SimMode, Transcript};
