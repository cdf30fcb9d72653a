//! Benchmark fixtures shared by the criterion targets.

use trifactor::generators::gnp;
use trifactor::Graph;

/// `G(n, 1/2)` with the fixed seed every benchmark uses.
pub fn dense(n: usize) -> Graph {
    gnp(n, 0.5, 7)
}
