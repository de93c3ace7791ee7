use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geodesic integration blew up at t = {last_valid_time}")]
    IntegrationBlowup { last_valid_time: f64 },

    #[error("distance solver did not converge: best = {best}, gap = {gap}")]
    Convergence { best: f64, gap: f64 },

    #[error("degenerate plane: gram determinant {gram} below threshold")]
    DegeneratePlane { gram: f64 },

    #[error("rho below distance on pair {index}: rho = {rho}, dist = {dist}")]
    SandwichViolation { index: usize, rho: f64, dist: f64 },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("radius {r} exceeds truncation validity {r_valid}; need t_max >= {required_t_max}")]
    Truncation { r: f64, r_valid: f64, required_t_max: f64 },

    #[error("insufficient data: {got} points in window, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("horosphere sampling failed at node {node}: {reason}")]
    Sampling { node: String, reason: String },

    #[error("matching error: vertex {vertex} offset {offset} exceeds {limit}")]
    Matching { vertex: usize, offset: f64, limit: f64 },

    #[error("fit windows do not overlap: [{a_lo}, {a_hi}] vs [{b_lo}, {b_hi}]")]
    Window { a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64 },

    #[error("horoball sandwich failed at {count} vertices (first: {first})")]
    SandwichFailure { count: usize, first: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
