use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested quantity is undefined at this point (e.g. a dispersive
    /// shift evaluated exactly on resonance).
    #[error("domain error: {0}")]
    Domain(String),

    /// A gate protocol's timing constraints cannot be met by the supplied
    /// couplings.
    #[error("protocol constraint violated: {0}")]
    Protocol(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sweep cell g2={g_ghz} GHz, freq={freq_ghz} GHz failed: {source}")]
    Cell {
        g_ghz: f64,
        freq_ghz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
