//! Unconstrained dynamic time warping with steps right, down and diagonal.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DtwPath {
    /// (row, col) cells from (0, 0) to (M-1, N-1).
    pub path: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Align over an M x N distance matrix. Rows are recipe steps and columns
/// transcript sentences. Backtracking prefers diagonal, then down (previous
/// row), then right (previous column) when accumulated costs tie.
pub fn dtw_matrix(dist: &[Vec<f64>]) -> Result<DtwPath> {
    let m = dist.len();
    let n = dist.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::Validation("DTW needs two nonempty sequences".into()));
    }
    if dist.iter().any(|r| r.len() != n) {
        return Err(Error::Validation("distance matrix rows differ in length".into()));
    }
    if dist.iter().flatten().any(|d| !d.is_finite()) {
        return Err(Error::Validation("distance matrix has non-finite entries".into()));
    }
    let mut acc = vec![vec![0.0f64; n]; m];
    for i in 0..m {
        for j in 0..n {
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[0][j - 1],
                (_, 0) => acc[i - 1][0],
                _ => acc[i - 1][j - 1].min(acc[i - 1][j]).min(acc[i][j - 1]),
            };
            acc[i][j] = prev + dist[i][j];
        }
    }
    let mut path = vec![(m - 1, n - 1)];
    let (mut i, mut j) = (m - 1, n - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[i - 1][j - 1];
                let down = acc[i - 1][j];
                let right = acc[i][j - 1];
                if diag <= down && diag <= right {
                    (i - 1, j - 1)
                } else if down <= right {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwPath {
        path,
        cost: acc[m - 1][n - 1],
    })
}
