use ionarch::mapper::{linear_arrange, InteractionGraph};
use proptest::prelude::*;

/// Exhaustive minimum linear arrangement cost by Heap's algorithm.
fn brute_force_cost(g: &InteractionGraph) -> u64 {
    let n = g.n_nodes();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = g.arrangement_cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            perm.swap(if i % 2 == 0 { 0 } else { c[i] }, i);
            best = best.min(g.arrangement_cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn graph() -> impl Strategy<Value = InteractionGraph> {
    (1usize..=8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        prop::collection::vec(prop::option::weighted(0.4, 1u64..6), m).prop_map(move |ws| {
            let edges: Vec<_> = pairs.iter().zip(ws).filter_map(|(&(u, v), w)| w.map(|w| (u, v, w))).collect();
            InteractionGraph::from_edges(n, &edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn heuristic_within_half_again_of_optimum(g in graph()) {
        let order = linear_arrange(&g);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..g.n_nodes()).collect::<Vec<_>>());
        let cost = g.arrangement_cost(&order);
        let best = brute_force_cost(&g);
        prop_assert!(cost * 2 <= best * 3, "heuristic {} vs optimum {}", cost, best);
    }

    #[test]
    fn arrangement_is_deterministic(g in graph()) {
        prop_assert_eq!(linear_arrange(&g), linear_arrange(&g));
    }
}

#[test]
fn path_graph_is_laid_out_in_order() {
    let g = InteractionGraph::from_edges(6, &[(0, 3, 1), (3, 1, 1), (1, 5, 1), (5, 2, 1), (2, 4, 1)]);
    assert_eq!(g.arrangement_cost(&linear_arrange(&g)), 5);
}
