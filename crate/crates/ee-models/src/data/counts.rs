use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{nb_order, PolygonSet};

/// A time-by-unit grid of event counts with population fractions and a
/// neighbourhood-order matrix; the aggregated-data input of the count engine.
#[derive(Debug, Clone)]
pub struct CountSeries {
    /// T x U counts, validated nonnegative and integral.
    pub counts: Array2<f64>,
    /// (year, sample index within year) of the first row.
    pub start: (i32, u32),
    /// Samples per year.
    pub freq: u32,
    /// T x U population fractions e_it; every row sums to 1.
    pub pop_frac: Array2<f64>,
    /// U x U neighbourhood orders o_ji with zero diagonal.
    pub nb_order: Array2<u32>,
    pub unit_ids: Vec<String>,
    pub map: Option<BTreeMap<String, PolygonSet>>,
}

impl CountSeries {
    pub fn n_time(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_units(&self) -> usize {
        self.counts.ncols()
    }
}

/// Population fractions: either a full grid or one fraction per unit that is
/// broadcast over time.
pub enum PopulationInput {
    Grid(Array2<f64>),
    PerUnit(Vec<f64>),
}

/// Spatial structure: a raw adjacency (turned into orders by breadth-first
/// search, capped at `maxlag`) or a precomputed order matrix.
pub enum NeighbourhoodInput {
    Adjacency { matrix: Array2<bool>, maxlag: u32 },
    Order(Array2<u32>),
}

/// Construct a [`CountSeries`], checking every invariant.
pub fn validate_counts(
    raw_counts: Array2<f64>,
    start: (i32, u32),
    freq: u32,
    pop_frac: PopulationInput,
    neighbourhood: NeighbourhoodInput,
    unit_ids: Vec<String>,
    map: Option<BTreeMap<String, PolygonSet>>,
) -> Result<CountSeries> {
    let (t_len, u_len) = raw_counts.dim();
    if t_len == 0 || u_len == 0 {
        return Err(Error::Dimension("counts grid is empty".into()));
    }
    if freq == 0 {
        return Err(Error::Invalid("freq must be positive".into()));
    }
    if unit_ids.len() != u_len {
        return Err(Error::Dimension(format!(
            "{} unit ids for {} count columns",
            unit_ids.len(),
            u_len
        )));
    }
    for ((t, i), &v) in raw_counts.indexed_iter() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Invalid(format!(
                "count at (t={t}, unit={}) is {v}; counts must be nonnegative",
                unit_ids[i]
            )));
        }
        if v.fract() != 0.0 {
            return Err(Error::Invalid(format!(
                "count at (t={t}, unit={}) is {v}; counts must be integral",
                unit_ids[i]
            )));
        }
    }

    let pop = match pop_frac {
        PopulationInput::Grid(g) => {
            if g.dim() != (t_len, u_len) {
                return Err(Error::Dimension(format!(
                    "population grid is {:?}, counts are {:?}",
                    g.dim(),
                    raw_counts.dim()
                )));
            }
            g
        }
        PopulationInput::PerUnit(v) => {
            if v.len() != u_len {
                return Err(Error::Dimension(format!(
                    "{} population fractions for {} units",
                    v.len(),
                    u_len
                )));
            }
            Array2::from_shape_fn((t_len, u_len), |(_, i)| v[i])
        }
    };
    for t in 0..t_len {
        let row_sum: f64 = pop.row(t).sum();
        if (row_sum - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!(
                "population fractions at t={t} sum to {row_sum}, not 1"
            )));
        }
    }

    let order = match neighbourhood {
        NeighbourhoodInput::Adjacency { matrix, maxlag } => {
            if matrix.nrows() != u_len {
                return Err(Error::Dimension("adjacency size != number of units".into()));
            }
            nb_order(&matrix, maxlag)?
        }
        NeighbourhoodInput::Order(o) => {
            if o.dim() != (u_len, u_len) {
                return Err(Error::Dimension("order matrix size != number of units".into()));
            }
            for i in 0..u_len {
                if o[[i, i]] != 0 {
                    return Err(Error::Invalid(
                        "neighbourhood order diagonal must be zero".into(),
                    ));
                }
            }
            o
        }
    };

    if let Some(m) = &map {
        for id in &unit_ids {
            if !m.contains_key(id) {
                return Err(Error::Invalid(format!("map has no polygon for unit {id}")));
            }
        }
    }

    Ok(CountSeries {
        counts: raw_counts,
        start,
        freq,
        pop_frac: pop,
        nb_order: order,
        unit_ids,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_units() -> (Array2<f64>, Vec<String>) {
        (
            array![[0.0, 1.0], [2.0, 3.0], [1.0, 0.0]],
            vec!["a".into(), "b".into()],
        )
    }

    #[test]
    fn minimal_single_cell() {
        let cs = validate_counts(
            array![[0.0]],
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![1.0]),
            NeighbourhoodInput::Order(array![[0u32]]),
            vec!["only".into()],
            None,
        )
        .unwrap();
        assert_eq!(cs.n_time(), 1);
        assert_eq!(cs.n_units(), 1);
    }

    #[test]
    fn negative_count_rejected() {
        let (mut counts, ids) = two_units();
        counts[[1, 0]] = -1.0;
        let err = validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.5, 0.5]),
            NeighbourhoodInput::Order(Array2::zeros((2, 2))),
            ids,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nonnegative"));
    }

    #[test]
    fn non_integer_count_rejected() {
        let (mut counts, ids) = two_units();
        counts[[0, 1]] = 0.5;
        assert!(validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.5, 0.5]),
            NeighbourhoodInput::Order(Array2::zeros((2, 2))),
            ids,
            None,
        )
        .is_err());
    }

    #[test]
    fn population_rows_must_sum_to_one() {
        let (counts, ids) = two_units();
        assert!(validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.5, 0.4]),
            NeighbourhoodInput::Order(Array2::zeros((2, 2))),
            ids,
            None,
        )
        .is_err());
    }

    #[test]
    fn per_unit_population_broadcasts() {
        let (counts, ids) = two_units();
        let cs = validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.25, 0.75]),
            NeighbourhoodInput::Order(Array2::zeros((2, 2))),
            ids,
            None,
        )
        .unwrap();
        assert_eq!(cs.pop_frac.dim(), (3, 2));
        assert_eq!(cs.pop_frac[[2, 1]], 0.75);
    }

    #[test]
    fn adjacency_turns_into_orders() {
        let counts = Array2::zeros((2, 3));
        let adj = array![
            [false, true, false],
            [true, false, true],
            [false, true, false]
        ];
        let cs = validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.2, 0.3, 0.5]),
            NeighbourhoodInput::Adjacency {
                matrix: adj,
                maxlag: 5,
            },
            vec!["a".into(), "b".into(), "c".into()],
            None,
        )
        .unwrap();
        assert_eq!(cs.nb_order[[0, 2]], 2);
        // symmetric with zero diagonal
        for i in 0..3 {
            assert_eq!(cs.nb_order[[i, i]], 0);
            for j in 0..3 {
                assert_eq!(cs.nb_order[[i, j]], cs.nb_order[[j, i]]);
            }
        }
    }

    #[test]
    fn unit_id_count_must_match() {
        let (counts, _) = two_units();
        assert!(validate_counts(
            counts,
            (2001, 1),
            52,
            PopulationInput::PerUnit(vec![0.5, 0.5]),
            NeighbourhoodInput::Order(Array2::zeros((2, 2))),
            vec!["only".into()],
            None,
        )
        .is_err());
    }
}
