use crate::quadrature::QuadratureError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    #[error("at (r, t) = ({r}, {t}): {source}")]
    At {
        r: f64,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point (r, t) = ({r}, {t}) is outside the field horizon {horizon}")]
    Horizon { r: f64, t: f64, horizon: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("iterate {iterate} diverged: weighted norm {norm:e}")]
    Divergence { iterate: usize, norm: f64 },

    #[error("unreliable blow-up measurement: crossing times {times:?} spread {spread:.3}")]
    Unreliable { times: Vec<f64>, spread: f64 },

    #[error("eps = {eps:e} exceeds the certificate limit eps0 = {eps0:e}")]
    OutOfCertificate { eps: f64, eps0: f64 },

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("certificate violated: {0}")]
    CertificateViolated(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, r: f64, t: f64) -> Self {
        match self {
            e @ Error::At { .. } => e,
            e => Error::At { r, t, source: Box::new(e) },
        }
    }

    /// Innermost error, skipping location wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait Locate<T> {
    fn at(self, r: f64, t: f64) -> Result<T>;
}

impl<T, E: Into<Error>> Locate<T> for std::result::Result<T, E> {
    fn at(self, r: f64, t: f64) -> Result<T> {
        self.map_err(|e| e.into().at(r, t))
    }
}
