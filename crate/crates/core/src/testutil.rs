//! Shared proptest strategies for unit tests.

use proptest::prelude::*;

use crate::graph::Graph;

/// Random connected graph: a random spanning tree plus random extra edges.
pub fn connected_graph() -> impl Strategy<Value = Graph> {
    (1usize..9)
        .prop_flat_map(|m| {
            let parents = proptest::collection::vec(any::<prop::sample::Index>(), m - 1);
            let extra = proptest::collection::vec((0..m, 0..m), 0..m * 2);
            (Just(m), parents, extra)
        })
        .prop_map(|(m, parents, extra)| {
            let mut edges: Vec<_> = parents
                .iter()
                .enumerate()
                .map(|(k, p)| (p.index(k + 1) + 1, k + 2))
                .collect();
            edges.extend(
                extra
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a + 1, b + 1)),
            );
            Graph::new(m, &edges).unwrap()
        })
}

/// `m x m` agent-major priority table with entries bounded away from 0.
pub fn priority_table(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.02f64..1.0, m), m).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let total: f64 = r.iter().sum();
                r.into_iter().map(|v| v / total).collect()
            })
            .collect()
    })
}
