//! Two-phase detection of malignant TLS servers.
//!
//! Phase one scores a certificate that failed traditional validation using
//! the reasons it failed plus a self-signed flag (C4.5 decision tree). Phase
//! two scores the encrypted session captured in a sandbox using flow
//! statistics and plaintext handshake metadata (tree-augmented naive Bayes).
//! Nothing is ever decrypted.

pub mod capture;
pub mod ml;
pub mod pipeline;
pub mod synth;
pub mod tls;
pub mod validation;
pub mod x509;
