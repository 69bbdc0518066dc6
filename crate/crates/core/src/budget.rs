use serde::{Deserialize, Serialize};

/// Resource caps for every stage. Exceeding one is reported as
/// [`crate::Error::BudgetExceeded`], never as a mathematical failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Largest finite group that may be constructed.
    pub group_order_cap: usize,
    /// Largest coset space enumerated by any BFS.
    pub coset_cap: usize,
    /// Deepest term of the mod-p derived series that is tried.
    pub series_depth_cap: usize,
    /// Largest exponent tried by the ping-pong search.
    pub pingpong_cap: usize,
    /// Largest number of words enumerated by a ball check.
    pub ball_cap: usize,
    /// Radius of the injectivity ball recorded in embedding certificates.
    pub ball_radius: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            group_order_cap: 4096,
            coset_cap: 10_000,
            series_depth_cap: 6,
            pingpong_cap: 64,
            ball_cap: 200_000,
            ball_radius: 3,
        }
    }
}
