//! Max-weight bipartite b-matching solved as a min-cost flow on negated
//! weights, by successive shortest paths with potentials. Integrality of the
//! transportation polytope makes the rounded solution exact; augmentation
//! stops once the best augmenting path no longer improves total weight, so
//! zero-weight pairs are never forced into the matching.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Absolute tolerance for cost comparisons on real-valued weights.
const COST_EPS: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Arc {
    to: u32,
    residual: i32,
    cost: f64,
}

pub(crate) struct BMatchingResult {
    /// Chosen (left, right) pairs, in ascending (left, right) order.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
    pub augmentations: u64,
}

/// Maximizes `sum w(l,r) x_{lr}` subject to `sum_r x_{lr} <= cap_left[l]` and
/// `sum_l x_{lr} <= 1`, for finite nonnegative weights.
#[allow(clippy::needless_range_loop)]
pub(crate) fn max_weight_b_matching(
    n_left: usize,
    n_right: usize,
    cap_left: &[usize],
    weight: impl Fn(usize, usize) -> f64,
) -> BMatchingResult {
    debug_assert_eq!(cap_left.len(), n_left);
    let source = 0usize;
    let left0 = 1usize;
    let right0 = left0 + n_left;
    let sink = right0 + n_right;
    let n_nodes = sink + 1;

    let mut arcs: Vec<Arc> = Vec::with_capacity(2 * (n_left + n_right + n_left * n_right));
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_nodes];
    let link = |arcs: &mut Vec<Arc>, adj: &mut Vec<Vec<u32>>, u: usize, v: usize, cap: i32, cost: f64| {
        adj[u].push(arcs.len() as u32);
        arcs.push(Arc { to: v as u32, residual: cap, cost });
        adj[v].push(arcs.len() as u32);
        arcs.push(Arc { to: u as u32, residual: 0, cost: -cost });
    };

    // Fixed arc construction order for reproducible tie-breaking.
    for l in 0..n_left {
        link(&mut arcs, &mut adj, source, left0 + l, cap_left[l] as i32, 0.0);
    }
    let mut pair_arc = vec![vec![0u32; n_right]; n_left];
    for l in 0..n_left {
        for r in 0..n_right {
            let w = weight(l, r);
            debug_assert!(w.is_finite() && w >= 0.0, "weight({l},{r}) = {w}");
            pair_arc[l][r] = arcs.len() as u32;
            link(&mut arcs, &mut adj, left0 + l, right0 + r, 1, -w);
        }
    }
    for r in 0..n_right {
        link(&mut arcs, &mut adj, right0 + r, sink, 1, 0.0);
    }

    // The network is a layered DAG, so exact initial potentials come from one
    // relaxation sweep; reduced costs are then nonnegative for Dijkstra.
    let mut phi = vec![0.0f64; n_nodes];
    for r in 0..n_right {
        phi[right0 + r] = (0..n_left)
            .map(|l| arcs[pair_arc[l][r] as usize].cost)
            .fold(0.0, f64::min);
    }
    phi[sink] = (0..n_right).map(|r| phi[right0 + r]).fold(0.0, f64::min);

    let mut dist = vec![f64::INFINITY; n_nodes];
    let mut parent: Vec<u32> = vec![u32::MAX; n_nodes];
    let mut heap: BinaryHeap<Reverse<(OrdF64, u32)>> = BinaryHeap::new();
    let mut augmentations = 0u64;

    loop {
        dist.fill(f64::INFINITY);
        parent.fill(u32::MAX);
        heap.clear();
        dist[source] = 0.0;
        heap.push(Reverse((OrdF64(0.0), source as u32)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            let u = u as usize;
            if d > dist[u] {
                continue;
            }
            for &arc_id in &adj[u] {
                let arc = &arcs[arc_id as usize];
                if arc.residual <= 0 {
                    continue;
                }
                let v = arc.to as usize;
                // Clamp float noise in reduced costs.
                let reduced = (arc.cost + phi[u] - phi[v]).max(0.0);
                let candidate = d + reduced;
                if candidate < dist[v] {
                    dist[v] = candidate;
                    parent[v] = arc_id;
                    heap.push(Reverse((OrdF64(candidate), arc.to)));
                }
            }
        }
        if parent[sink] == u32::MAX {
            break;
        }
        // Real (unreduced) cost of the augmenting path; stop once it can no
        // longer improve total weight.
        let mut real_cost = 0.0;
        let mut bottleneck = i32::MAX;
        let mut v = sink;
        while v != source {
            let arc_id = parent[v] as usize;
            real_cost += arcs[arc_id].cost;
            bottleneck = bottleneck.min(arcs[arc_id].residual);
            v = arcs[arc_id ^ 1].to as usize;
        }
        if real_cost >= -COST_EPS {
            break;
        }
        let mut v = sink;
        while v != source {
            let arc_id = parent[v] as usize;
            arcs[arc_id].residual -= bottleneck;
            arcs[arc_id ^ 1].residual += bottleneck;
            v = arcs[arc_id ^ 1].to as usize;
        }
        for node in 0..n_nodes {
            if dist[node].is_finite() {
                phi[node] += dist[node];
            }
        }
        augmentations += 1;
    }

    let mut pairs = Vec::new();
    let mut total_weight = 0.0;
    for l in 0..n_left {
        for r in 0..n_right {
            if arcs[pair_arc[l][r] as usize].residual == 0 {
                pairs.push((l, r));
                total_weight += weight(l, r);
            }
        }
    }
    BMatchingResult {
        pairs,
        total_weight,
        augmentations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive reference: assign each right node to a left node or none.
    fn brute_force(n_left: usize, n_right: usize, cap_left: &[usize], w: &[Vec<f64>]) -> f64 {
        fn rec(
            r: usize,
            n_left: usize,
            n_right: usize,
            used: &mut [usize],
            cap: &[usize],
            w: &[Vec<f64>],
        ) -> f64 {
            if r == n_right {
                return 0.0;
            }
            let mut best = rec(r + 1, n_left, n_right, used, cap, w);
            for l in 0..n_left {
                if used[l] < cap[l] {
                    used[l] += 1;
                    best = best.max(w[l][r] + rec(r + 1, n_left, n_right, used, cap, w));
                    used[l] -= 1;
                }
            }
            best
        }
        rec(0, n_left, n_right, &mut vec![0; n_left], cap_left, w)
    }

    #[test]
    fn picks_best_supply_under_unit_cap() {
        let res = max_weight_b_matching(1, 2, &[1], |_, r| [5.0, 3.0][r]);
        assert_eq!(res.pairs, vec![(0, 0)]);
        assert!((res.total_weight - 5.0).abs() < 1e-12);
    }

    #[test]
    fn dense_positive_weights_saturate() {
        let res = max_weight_b_matching(2, 5, &[2, 2], |l, r| 1.0 + (l + r) as f64 * 0.1);
        assert_eq!(res.pairs.len(), 4);
    }

    #[test]
    fn does_not_force_max_cardinality_when_weights_say_otherwise() {
        // Matching both rights costs the valuable pair: {l0r0} alone wins.
        let w = vec![vec![10.0, 1.0], vec![2.0, 0.0]];
        let res = max_weight_b_matching(2, 2, &[1, 1], |l, r| w[l][r]);
        let brute = brute_force(2, 2, &[1, 1], &w);
        assert!((res.total_weight - brute).abs() < 1e-9, "{} vs {brute}", res.total_weight);
    }

    #[test]
    fn zero_weights_yield_empty_matching() {
        let res = max_weight_b_matching(2, 3, &[2, 2], |_, _| 0.0);
        assert!(res.pairs.is_empty());
        assert_eq!(res.total_weight, 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for case in 0..300 {
            let n_left = rng.gen_range(1..=3);
            let n_right = rng.gen_range(1..=5);
            let cap: Vec<usize> = (0..n_left).map(|_| rng.gen_range(1..=2)).collect();
            let w: Vec<Vec<f64>> = (0..n_left)
                .map(|_| (0..n_right).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let res = max_weight_b_matching(n_left, n_right, &cap, |l, r| w[l][r]);
            let brute = brute_force(n_left, n_right, &cap, &w);
            assert!(
                (res.total_weight - brute).abs() < 1e-9,
                "case {case}: {} vs {brute}",
                res.total_weight
            );
        }
    }
}
