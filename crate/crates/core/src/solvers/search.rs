//! Shared search machinery for the surrogate and SAA solvers: both maximize a
//! sum of per-demand set functions over the recommendation polytope
//! (per-demand cap, supply exclusivity), so lazy greedy, the local-search
//! neighborhoods, and exhaustive enumeration are written once against
//! [`DemandObjective`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::evaluation::{demand_sample_value, ScenarioSet, EMPTY_DEMAND_EPSILON};
use crate::instance::Instance;
use crate::solvers::SolveError;

use super::mincost::max_weight_b_matching;

const GAIN_TOL: f64 = 1e-10;

/// Enumeration-based solvers refuse instances whose candidate count
/// `(num_demands + 1)^num_supplies` exceeds this.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

pub(crate) fn enumeration_size(num_demands: usize, num_supplies: usize) -> f64 {
    ((num_demands + 1) as f64).powi(num_supplies as i32)
}

/// Value contributed by one demand given its recommended set. Implementations
/// must be monotone in the set for greedy to make sense; both objectives here
/// are monotone submodular per demand.
pub(crate) trait DemandObjective {
    fn demand_value(&self, demand: usize, list: &[usize]) -> f64;
}

/// The log-sum-exp surrogate: `tau * ln(sum_{j in S} exp(u/tau) p + eps)`.
pub(crate) struct SurrogateObjective<'a> {
    pub instance: &'a Instance,
    pub tau: f64,
    pub epsilon: f64,
}

impl<'a> SurrogateObjective<'a> {
    pub fn new(instance: &'a Instance, tau: f64) -> Self {
        SurrogateObjective {
            instance,
            tau,
            epsilon: EMPTY_DEMAND_EPSILON,
        }
    }
}

impl DemandObjective for SurrogateObjective<'_> {
    fn demand_value(&self, demand: usize, list: &[usize]) -> f64 {
        let ln_eps = self.epsilon.ln();
        let mut shift = ln_eps;
        for &j in list {
            let t = self.instance.utility(demand, j) / self.tau + self.instance.prob(demand, j).ln();
            shift = shift.max(t);
        }
        let mut sum = (ln_eps - shift).exp();
        for &j in list {
            let t = self.instance.utility(demand, j) / self.tau + self.instance.prob(demand, j).ln();
            sum += (t - shift).exp();
        }
        self.tau * (shift + sum.ln())
    }
}

/// In-sample average of the best accepted utility over a fixed scenario set.
pub(crate) struct SaaObjective<'a> {
    pub instance: &'a Instance,
    pub scenarios: &'a ScenarioSet,
}

impl DemandObjective for SaaObjective<'_> {
    fn demand_value(&self, demand: usize, list: &[usize]) -> f64 {
        if list.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .scenarios
            .realizations
            .iter()
            .map(|sample| demand_sample_value(self.instance, sample, demand, list))
            .sum();
        total / self.scenarios.realizations.len() as f64
    }
}

/// Mutable search position: per-demand sorted lists, the supply-to-demand
/// ownership map, and cached per-demand values.
#[derive(Clone)]
pub(crate) struct SearchState {
    pub lists: Vec<Vec<usize>>,
    pub owner: Vec<Option<usize>>,
    pub values: Vec<f64>,
    pub total: f64,
}

impl SearchState {
    pub fn empty<O: DemandObjective>(obj: &O, num_demands: usize, num_supplies: usize) -> Self {
        let lists = vec![Vec::new(); num_demands];
        let values: Vec<f64> = (0..num_demands).map(|i| obj.demand_value(i, &[])).collect();
        SearchState {
            total: values.iter().sum(),
            lists,
            owner: vec![None; num_supplies],
            values,
        }
    }

    pub fn from_lists<O: DemandObjective>(
        obj: &O,
        lists: Vec<Vec<usize>>,
        num_supplies: usize,
    ) -> Self {
        let mut owner = vec![None; num_supplies];
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                owner[j] = Some(i);
            }
        }
        let values: Vec<f64> = lists
            .iter()
            .enumerate()
            .map(|(i, list)| obj.demand_value(i, list))
            .collect();
        SearchState {
            total: values.iter().sum(),
            lists,
            owner,
            values,
        }
    }

    fn set_demand<O: DemandObjective>(&mut self, obj: &O, demand: usize, list: Vec<usize>) {
        for &j in &self.lists[demand] {
            self.owner[j] = None;
        }
        for &j in &list {
            self.owner[j] = Some(demand);
        }
        self.lists[demand] = list;
        let new_value = obj.demand_value(demand, &self.lists[demand]);
        self.total += new_value - self.values[demand];
        self.values[demand] = new_value;
    }

    fn insert<O: DemandObjective>(&mut self, obj: &O, demand: usize, supply: usize) {
        let mut list = self.lists[demand].clone();
        let pos = list.partition_point(|&x| x < supply);
        list.insert(pos, supply);
        self.set_demand(obj, demand, list);
    }

    fn remove<O: DemandObjective>(&mut self, obj: &O, demand: usize, supply: usize) {
        let list: Vec<usize> = self.lists[demand]
            .iter()
            .copied()
            .filter(|&x| x != supply)
            .collect();
        self.set_demand(obj, demand, list);
    }

    fn with_insert(&self, demand: usize, supply: usize) -> Vec<usize> {
        let mut list = self.lists[demand].clone();
        let pos = list.partition_point(|&x| x < supply);
        list.insert(pos, supply);
        list
    }

    fn without(&self, demand: usize, supply: usize) -> Vec<usize> {
        self.lists[demand]
            .iter()
            .copied()
            .filter(|&x| x != supply)
            .collect()
    }
}

#[derive(PartialEq)]
struct GainItem {
    gain: f64,
    demand: usize,
    supply: usize,
    stamp: u32,
}

impl Eq for GainItem {}

impl PartialOrd for GainItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GainItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: highest gain first, ties to the lowest (demand, supply).
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| Reverse(self.demand).cmp(&Reverse(other.demand)))
            .then_with(|| Reverse(self.supply).cmp(&Reverse(other.supply)))
    }
}

/// Lazy greedy: repeatedly applies the highest-gain feasible insertion,
/// re-evaluating stale gains only when they surface. Per-demand
/// submodularity makes cached gains valid upper bounds.
pub(crate) fn greedy_fill<O: DemandObjective>(
    obj: &O,
    state: &mut SearchState,
    theta: usize,
) -> u64 {
    let num_demands = state.lists.len();
    let num_supplies = state.owner.len();
    let mut stamp = vec![0u32; num_demands];
    let mut heap = BinaryHeap::with_capacity(num_demands * num_supplies);
    for demand in 0..num_demands {
        if state.lists[demand].len() >= theta {
            continue;
        }
        for supply in 0..num_supplies {
            if state.owner[supply].is_some() {
                continue;
            }
            let gain = obj.demand_value(demand, &state.with_insert(demand, supply))
                - state.values[demand];
            heap.push(GainItem { gain, demand, supply, stamp: 0 });
        }
    }
    let mut inserted = 0u64;
    while let Some(item) = heap.pop() {
        if item.gain <= GAIN_TOL {
            break;
        }
        if state.owner[item.supply].is_some() || state.lists[item.demand].len() >= theta {
            continue;
        }
        if item.stamp != stamp[item.demand] {
            let gain = obj.demand_value(item.demand, &state.with_insert(item.demand, item.supply))
                - state.values[item.demand];
            heap.push(GainItem { gain, stamp: stamp[item.demand], ..item });
            continue;
        }
        state.insert(obj, item.demand, item.supply);
        stamp[item.demand] += 1;
        inserted += 1;
    }
    inserted
}

pub(crate) struct SearchBudget {
    pub max_moves: u64,
    pub deadline: Option<Instant>,
}

impl SearchBudget {
    fn exhausted(&self, moves: u64) -> bool {
        moves >= self.max_moves
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// First-improvement local search over the fixed neighborhood order
/// insert -> transfer -> swap -> delete, deterministic scan order, restarting
/// from the first neighborhood after every applied move.
pub(crate) fn local_search<O: DemandObjective>(
    obj: &O,
    state: &mut SearchState,
    theta: usize,
    budget: &SearchBudget,
) -> u64 {
    let num_demands = state.lists.len();
    let num_supplies = state.owner.len();
    let mut moves = 0u64;
    'improve: loop {
        if budget.exhausted(moves) {
            break;
        }
        // Insert a free supply.
        for demand in 0..num_demands {
            if state.lists[demand].len() >= theta {
                continue;
            }
            for supply in 0..num_supplies {
                if state.owner[supply].is_some() {
                    continue;
                }
                let gain = obj.demand_value(demand, &state.with_insert(demand, supply))
                    - state.values[demand];
                if gain > GAIN_TOL {
                    state.insert(obj, demand, supply);
                    moves += 1;
                    continue 'improve;
                }
            }
        }
        // Transfer a supply to another demand.
        for from in 0..num_demands {
            for idx in 0..state.lists[from].len() {
                let supply = state.lists[from][idx];
                let from_without = obj.demand_value(from, &state.without(from, supply));
                for to in 0..num_demands {
                    if to == from || state.lists[to].len() >= theta {
                        continue;
                    }
                    let to_with = obj.demand_value(to, &state.with_insert(to, supply));
                    let gain =
                        from_without + to_with - state.values[from] - state.values[to];
                    if gain > GAIN_TOL {
                        state.remove(obj, from, supply);
                        state.insert(obj, to, supply);
                        moves += 1;
                        continue 'improve;
                    }
                }
            }
        }
        // Swap two supplies between demands.
        for first in 0..num_demands {
            for second in first + 1..num_demands {
                for a_idx in 0..state.lists[first].len() {
                    let a = state.lists[first][a_idx];
                    for b_idx in 0..state.lists[second].len() {
                        let b = state.lists[second][b_idx];
                        let mut first_list = state.without(first, a);
                        let pos = first_list.partition_point(|&x| x < b);
                        first_list.insert(pos, b);
                        let mut second_list = state.without(second, b);
                        let pos = second_list.partition_point(|&x| x < a);
                        second_list.insert(pos, a);
                        let gain = obj.demand_value(first, &first_list)
                            + obj.demand_value(second, &second_list)
                            - state.values[first]
                            - state.values[second];
                        if gain > GAIN_TOL {
                            state.remove(obj, first, a);
                            state.remove(obj, second, b);
                            state.insert(obj, first, b);
                            state.insert(obj, second, a);
                            moves += 1;
                            continue 'improve;
                        }
                    }
                }
            }
        }
        // Delete (never improving for monotone objectives, kept for
        // completeness of the neighborhood).
        for demand in 0..num_demands {
            for idx in 0..state.lists[demand].len() {
                let supply = state.lists[demand][idx];
                let gain =
                    obj.demand_value(demand, &state.without(demand, supply)) - state.values[demand];
                if gain > GAIN_TOL {
                    state.remove(obj, demand, supply);
                    moves += 1;
                    continue 'improve;
                }
            }
        }
        break;
    }
    moves
}

/// Start whose primaries come from a max-weight assignment on singleton
/// gains (one supply per demand), greedily completed. In the flat region of
/// the surrogate objective the primary structure dominates the value, and
/// sequential greedy can lock into assignments that pairwise moves cannot
/// repair; the matching start sidesteps that.
fn assignment_start<O: DemandObjective>(
    obj: &O,
    num_demands: usize,
    num_supplies: usize,
    theta: usize,
) -> (SearchState, u64) {
    let empty_values: Vec<f64> = (0..num_demands).map(|i| obj.demand_value(i, &[])).collect();
    let caps = vec![1usize; num_demands];
    let matching = max_weight_b_matching(num_demands, num_supplies, &caps, |i, j| {
        (obj.demand_value(i, &[j]) - empty_values[i]).max(0.0)
    });
    let mut lists = vec![Vec::new(); num_demands];
    for &(i, j) in &matching.pairs {
        lists[i].push(j);
    }
    let mut state = SearchState::from_lists(obj, lists, num_supplies);
    let inserted = greedy_fill(obj, &mut state, theta);
    (state, inserted + matching.augmentations)
}

/// Greedy start, an assignment-seeded start, local search on each, then
/// restarts from the incumbent with 20% of its recommendations removed and
/// re-greedied. Returns the best state and the total insertions plus applied
/// moves.
#[allow(clippy::too_many_arguments)]
pub(crate) fn multistart_local_search<O: DemandObjective>(
    obj: &O,
    num_demands: usize,
    num_supplies: usize,
    theta: usize,
    ls_max_iters: u64,
    multistart_count: u64,
    seed: u64,
    deadline: Option<Instant>,
) -> (SearchState, u64) {
    let budget = SearchBudget {
        max_moves: ls_max_iters,
        deadline,
    };
    let mut state = SearchState::empty(obj, num_demands, num_supplies);
    let mut iterations = greedy_fill(obj, &mut state, theta);
    iterations += local_search(obj, &mut state, theta, &budget);
    let mut best = state;
    if multistart_count > 1 {
        let (mut seeded, start_iterations) =
            assignment_start(obj, num_demands, num_supplies, theta);
        iterations += start_iterations;
        iterations += local_search(obj, &mut seeded, theta, &budget);
        if seeded.total > best.total + 1e-12 {
            best = seeded;
        }
    }
    for restart in 2..multistart_count {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let pairs: Vec<(usize, usize)> = best
            .lists
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(move |&j| (i, j)))
            .collect();
        if pairs.is_empty() {
            break;
        }
        let remove = ((pairs.len() as f64 * 0.2).round() as usize).max(1);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "multistart", restart));
        for t in 0..remove {
            let pick = t + rng.gen_range(0..order.len() - t);
            order.swap(t, pick);
        }
        let mut lists = best.lists.clone();
        for &idx in &order[..remove] {
            let (i, j) = pairs[idx];
            lists[i].retain(|&x| x != j);
        }
        let mut candidate = SearchState::from_lists(obj, lists, num_supplies);
        iterations += greedy_fill(obj, &mut candidate, theta);
        iterations += local_search(obj, &mut candidate, theta, &budget);
        if candidate.total > best.total + 1e-12 {
            best = candidate;
        }
    }
    (best, iterations)
}

/// Visits every feasible recommendation family once, in canonical order:
/// supplies considered ascending, each either unassigned or given to a demand
/// (ascending) with remaining capacity. Returns the number of leaves visited.
pub(crate) fn enumerate_feasible<F: FnMut(&[Vec<usize>])>(
    num_demands: usize,
    num_supplies: usize,
    theta: usize,
    visit: &mut F,
) -> u64 {
    fn dfs<F: FnMut(&[Vec<usize>])>(
        supply: usize,
        num_supplies: usize,
        theta: usize,
        lists: &mut Vec<Vec<usize>>,
        visit: &mut F,
        count: &mut u64,
    ) {
        if supply == num_supplies {
            visit(lists);
            *count += 1;
            return;
        }
        dfs(supply + 1, num_supplies, theta, lists, visit, count);
        for demand in 0..lists.len() {
            if lists[demand].len() < theta {
                lists[demand].push(supply);
                dfs(supply + 1, num_supplies, theta, lists, visit, count);
                lists[demand].pop();
            }
        }
    }
    let mut lists = vec![Vec::new(); num_demands];
    let mut count = 0;
    dfs(0, num_supplies, theta, &mut lists, visit, &mut count);
    count
}

/// Certified maximizer of a demand-separable objective by exhaustive
/// enumeration; ties go to the first optimum in canonical order.
pub(crate) fn exact_tiny_best<O: DemandObjective>(
    obj: &O,
    num_demands: usize,
    num_supplies: usize,
    theta: usize,
) -> (Vec<Vec<usize>>, f64, u64) {
    let mut best_lists = vec![Vec::new(); num_demands];
    let mut best_value = f64::NEG_INFINITY;
    let candidates = enumerate_feasible(num_demands, num_supplies, theta, &mut |lists| {
        let value: f64 = lists
            .iter()
            .enumerate()
            .map(|(i, list)| obj.demand_value(i, list))
            .sum();
        if value > best_value {
            best_value = value;
            best_lists = lists.to_vec();
        }
    });
    (best_lists, best_value, candidates)
}

/// Frank-Wolfe dual bound on the continuous relaxation of the surrogate
/// objective: every linear step is a fractional b-matching, solved exactly by
/// the min-cost-flow core, and for a concave objective
/// `f(x) + <grad f(x), s - x>` upper-bounds the optimum at every iterate.
/// The returned value therefore dominates the best discrete surrogate value.
pub fn frank_wolfe_upper_bound(
    instance: &Instance,
    tau: f64,
    iterations: usize,
) -> Result<f64, SolveError> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(SolveError::BadTau(tau));
    }
    let (nd, ns) = (instance.num_demands, instance.num_supplies);
    let ln_eps = EMPTY_DEMAND_EPSILON.ln();
    let mut terms = vec![vec![0.0; ns]; nd];
    let mut shift = vec![ln_eps; nd];
    for i in 0..nd {
        for (j, term) in terms[i].iter_mut().enumerate() {
            *term = instance.utility(i, j) / tau + instance.prob(i, j).ln();
            shift[i] = shift[i].max(*term);
        }
    }
    let start = (instance.theta as f64 / ns as f64).min(1.0 / nd as f64);
    let mut x = vec![vec![start; ns]; nd];
    let caps = vec![instance.theta; nd];
    let mut best_bound = f64::INFINITY;
    let mut grad = vec![vec![0.0; ns]; nd];
    for k in 0..iterations.max(1) {
        let mut objective = 0.0;
        for i in 0..nd {
            let mut denom = (ln_eps - shift[i]).exp();
            for j in 0..ns {
                denom += (terms[i][j] - shift[i]).exp() * x[i][j];
            }
            objective += tau * (shift[i] + denom.ln());
            for j in 0..ns {
                grad[i][j] = tau * (terms[i][j] - shift[i]).exp() / denom;
            }
        }
        let vertex = max_weight_b_matching(nd, ns, &caps, |i, j| grad[i][j]);
        let mut s = vec![vec![0.0; ns]; nd];
        for &(i, j) in &vertex.pairs {
            s[i][j] = 1.0;
        }
        let mut gap = 0.0;
        for i in 0..nd {
            for j in 0..ns {
                gap += grad[i][j] * (s[i][j] - x[i][j]);
            }
        }
        best_bound = best_bound.min(objective + gap.max(0.0));
        let step = 2.0 / (k as f64 + 2.0);
        for i in 0..nd {
            for j in 0..ns {
                x[i][j] += step * (s[i][j] - x[i][j]);
            }
        }
    }
    Ok(best_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;

    fn weighted_instance(weights: &[f64]) -> Instance {
        // tau = 1 and p = 1 make exp(u) the surrogate weight, so choosing
        // u = ln(w) realizes any positive weight profile.
        Instance::new(
            2,
            vec![weights.iter().map(|w| w.ln()).collect()],
            vec![vec![1.0; weights.len()]],
            None,
            "w",
            None,
        )
        .unwrap()
    }

    #[test]
    fn greedy_picks_top_weights_for_single_demand() {
        let inst = weighted_instance(&[5.0, 3.0, 1.0]);
        let obj = SurrogateObjective::new(&inst, 1.0);
        let mut state = SearchState::empty(&obj, 1, 3);
        let inserted = greedy_fill(&obj, &mut state, 2);
        assert_eq!(inserted, 2);
        assert_eq!(state.lists[0], vec![0, 1]);
    }

    #[test]
    fn local_search_never_degrades_its_start() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let nd = rng.gen_range(1..=3);
            let ns = rng.gen_range(1..=5);
            let theta = rng.gen_range(1..=2);
            let utilities: Vec<Vec<f64>> = (0..nd)
                .map(|_| (0..ns).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let probs: Vec<Vec<f64>> = (0..nd)
                .map(|_| (0..ns).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect())
                .collect();
            let inst = Instance::new(theta, utilities, probs, None, "r", None).unwrap();
            let obj = SurrogateObjective::new(&inst, 0.05);
            let mut state = SearchState::empty(&obj, nd, ns);
            greedy_fill(&obj, &mut state, theta);
            let start_total = state.total;
            local_search(
                &obj,
                &mut state,
                theta,
                &SearchBudget { max_moves: 1000, deadline: None },
            );
            assert!(state.total >= start_total - 1e-12);
        }
    }

    #[test]
    fn enumeration_counts_candidate_families() {
        let mut count = 0u64;
        let visited = enumerate_feasible(1, 2, 2, &mut |_| count += 1);
        assert_eq!(visited, 4);
        assert_eq!(count, 4);
        let visited = enumerate_feasible(2, 1, 1, &mut |_| {});
        assert_eq!(visited, 3);
        // theta binds: one demand, two supplies, cap 1 -> {}, {0}, {1}.
        let visited = enumerate_feasible(1, 2, 1, &mut |_| {});
        assert_eq!(visited, 3);
    }

    #[test]
    fn exact_tiny_matches_enumerated_maximum() {
        let inst = weighted_instance(&[2.0, 7.0, 4.0]);
        let obj = SurrogateObjective::new(&inst, 1.0);
        let (lists, value, candidates) = exact_tiny_best(&obj, 1, 3, 2);
        assert_eq!(candidates, 1 + 3 + 3);
        assert_eq!(lists[0], vec![1, 2]);
        assert!((value - (7.0_f64 + 4.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn frank_wolfe_bound_dominates_discrete_optimum() {
        let inst = weighted_instance(&[5.0, 3.0, 1.0]);
        let obj = SurrogateObjective::new(&inst, 1.0);
        let (_, best, _) = exact_tiny_best(&obj, 1, 3, 2);
        let bound = frank_wolfe_upper_bound(&inst, 1.0, 30).unwrap();
        assert!(bound >= best - 1e-9, "bound {bound} vs optimum {best}");
    }
}
