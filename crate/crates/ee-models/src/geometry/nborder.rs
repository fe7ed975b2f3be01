use ndarray::Array2;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Neighbourhood orders from a symmetric boolean adjacency matrix.
///
/// Entry (j, i) is the graph distance between units j and i, capped at
/// `maxlag`; the diagonal is 0 and unreachable pairs stay at 0.
pub fn nb_order(adjacency: &Array2<bool>, maxlag: u32) -> Result<Array2<u32>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::Dimension("adjacency must be square".into()));
    }
    for i in 0..n {
        if adjacency[[i, i]] {
            return Err(Error::Invalid("adjacency diagonal must be false".into()));
        }
        for j in 0..n {
            if adjacency[[i, j]] != adjacency[[j, i]] {
                return Err(Error::Invalid(format!(
                    "adjacency is asymmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut order = Array2::<u32>::zeros((n, n));
    for start in 0..n {
        // BFS from `start`
        let mut dist = vec![u32::MAX; n];
        dist[start] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if adjacency[[u, v]] && dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (v, &d) in dist.iter().enumerate() {
            if v != start && d != u32::MAX {
                order[[start, v]] = d.min(maxlag);
            }
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_region() {
        let adj = Array2::from_elem((1, 1), false);
        let o = nb_order(&adj, 5).unwrap();
        assert_eq!(o[[0, 0]], 0);
    }

    #[test]
    fn path_graph_orders() {
        // a - b - c
        let adj = array![
            [false, true, false],
            [true, false, true],
            [false, true, false]
        ];
        let o = nb_order(&adj, 10).unwrap();
        assert_eq!(o[[0, 2]], 2);
        assert_eq!(o[[2, 0]], 2);
        assert_eq!(o[[0, 1]], 1);
        assert_eq!(o[[1, 1]], 0);
    }

    #[test]
    fn maxlag_caps() {
        // path of 5 nodes, maxlag 2
        let mut adj = Array2::from_elem((5, 5), false);
        for i in 0..4 {
            adj[[i, i + 1]] = true;
            adj[[i + 1, i]] = true;
        }
        let o = nb_order(&adj, 2).unwrap();
        assert_eq!(o[[0, 4]], 2); // true distance 4, capped
        assert_eq!(o[[0, 2]], 2);
        assert_eq!(o[[0, 1]], 1);
    }

    #[test]
    fn asymmetric_rejected() {
        let mut adj = Array2::from_elem((2, 2), false);
        adj[[0, 1]] = true;
        assert!(nb_order(&adj, 3).is_err());
    }

    #[test]
    fn triangle_inequality_on_grid() {
        // 3x3 rook-adjacency grid
        let n = 9;
        let mut adj = Array2::from_elem((n, n), false);
        for r in 0..3 {
            for c in 0..3 {
                let u = r * 3 + c;
                if c + 1 < 3 {
                    adj[[u, u + 1]] = true;
                    adj[[u + 1, u]] = true;
                }
                if r + 1 < 3 {
                    adj[[u, u + 3]] = true;
                    adj[[u + 3, u]] = true;
                }
            }
        }
        let o = nb_order(&adj, 100).unwrap();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    assert!(o[[a, c]] <= o[[a, b]] + o[[b, c]]);
                }
            }
        }
    }
}
