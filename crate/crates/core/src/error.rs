use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its documented domain.
    Domain(&'static str),
    /// A B step or parity check whose survival probability vanished.
    DegeneratePostselection,
    /// The error rate of a photon-number class with zero yield was requested.
    UndefinedErrorRate,
    /// Measured or synthetic inputs that cannot come from one physical channel.
    Inconsistent(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "parameter out of domain: {what}"),
            Error::DegeneratePostselection => f.write_str("post-selection survival probability is zero"),
            Error::UndefinedErrorRate => f.write_str("error rate undefined for a zero-yield photon class"),
            Error::Inconsistent(what) => write!(f, "inconsistent inputs: {what}"),
        }
    }
}

impl core::error::Error for Error {}
