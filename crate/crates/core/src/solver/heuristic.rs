use serde::{Deserialize, Serialize};

use crate::domain::{Instance, NodeIdx};
use crate::mcsim::rng::UniformStream;

use super::{assemble_solution, preflight, CostModel, Engine, Solution, SolveError};

/// Knobs for the savings plus iterated local search heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicParams {
    /// Seed for the perturbation moves; equal seeds give equal solutions.
    pub seed: u64,
    /// Perturb-and-repair rounds after the first local optimum.
    pub restarts: usize,
    /// Random moves applied per perturbation.
    pub perturbation_moves: usize,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            restarts: 40,
            perturbation_moves: 3,
        }
    }
}

struct Search<'a> {
    instance: &'a Instance,
    model: &'a CostModel,
    capacity: u64,
    allow_idle: bool,
}

#[derive(Clone)]
struct Plan {
    tours: Vec<Vec<NodeIdx>>,
    loads: Vec<u64>,
}

impl Search<'_> {
    fn load_of(&self, stops: &[NodeIdx]) -> u64 {
        stops.iter().map(|&s| u64::from(self.instance.demand(s))).sum()
    }

    fn weight(&self, stops: &[NodeIdx]) -> f64 {
        self.model.route_weight(stops)
    }

    fn plan_weight(&self, plan: &Plan) -> f64 {
        plan.tours.iter().map(|t| self.weight(t)).sum()
    }

    fn eps(&self, plan: &Plan) -> f64 {
        1e-9 * self.plan_weight(plan).abs().max(1.0)
    }

    fn plan(&self, tours: Vec<Vec<NodeIdx>>) -> Plan {
        let loads = tours.iter().map(|t| self.load_of(t)).collect();
        Plan { tours, loads }
    }

    /// Savings construction: start from one tour per customer and keep
    /// applying the cheapest capacity-feasible merge until the fleet fits.
    fn savings(&self, vehicles: usize) -> Option<Plan> {
        let w = |i, j| self.model.w(i, j);
        let mut plan = self.plan((1..=self.instance.customer_count()).map(|c| vec![c]).collect());
        loop {
            let must = plan.tours.len() > vehicles;
            if !must && !self.allow_idle {
                return Some(plan);
            }
            let fwd: Vec<f64> = plan.tours.iter().map(|t| self.weight(t)).collect();
            let rev: Vec<f64> = plan
                .tours
                .iter()
                .map(|t| {
                    let mut r = t.clone();
                    r.reverse();
                    self.weight(&r)
                })
                .collect();
            let mut best: Option<(f64, usize, usize, u8)> = None;
            for a in 0..plan.tours.len() {
                for b in 0..plan.tours.len() {
                    if a == b || plan.loads[a] + plan.loads[b] > self.capacity {
                        continue;
                    }
                    let (ta, tb) = (&plan.tours[a], &plan.tours[b]);
                    let (af, al) = (ta[0], ta[ta.len() - 1]);
                    let (bf, bl) = (tb[0], tb[tb.len() - 1]);
                    let base = fwd[a] + fwd[b];
                    let options = [
                        fwd[a] + fwd[b] - w(al, 0) - w(0, bf) + w(al, bf),
                        fwd[a] + rev[b] - w(al, 0) - w(0, bl) + w(al, bl),
                        rev[a] + fwd[b] - w(af, 0) - w(0, bf) + w(af, bf),
                    ];
                    for (kind, merged) in options.into_iter().enumerate() {
                        let delta = merged - base;
                        if best.is_none_or(|(d, ..)| delta < d - 1e-12) {
                            best = Some((delta, a, b, kind as u8));
                        }
                    }
                }
            }
            let Some((delta, a, b, kind)) = best else {
                return (!must).then_some(plan);
            };
            if !must && delta >= 0.0 {
                return Some(plan);
            }
            let mut tb = plan.tours[b].clone();
            let ta = &mut plan.tours[a];
            match kind {
                0 => {}
                1 => tb.reverse(),
                _ => ta.reverse(),
            }
            ta.extend(tb);
            plan.loads[a] += plan.loads[b];
            plan.tours.remove(b);
            plan.loads.remove(b);
        }
    }

    /// First-fit decreasing packing into exactly `vehicles` bins, each
    /// ordered by nearest neighbour. Used when greedy merging dead-ends.
    fn packing(&self, vehicles: usize) -> Option<Plan> {
        let mut order: Vec<NodeIdx> = self.instance.customers().collect();
        order.sort_by_key(|&c| (std::cmp::Reverse(self.instance.demand(c)), c));
        let mut bins: Vec<Vec<NodeIdx>> = vec![Vec::new(); vehicles];
        let mut loads = vec![0u64; vehicles];
        for c in order {
            let d = u64::from(self.instance.demand(c));
            let slot = (0..vehicles).find(|&b| loads[b] + d <= self.capacity)?;
            bins[slot].push(c);
            loads[slot] += d;
        }
        if !self.allow_idle {
            while let Some(empty) = bins.iter().position(Vec::is_empty) {
                let donor = bins.iter().position(|b| b.len() > 1)?;
                let c = bins[donor].pop()?;
                bins[empty].push(c);
            }
        }
        bins.retain(|b| !b.is_empty());
        let tours = bins.into_iter().map(|b| self.nearest_neighbour(b)).collect();
        Some(self.plan(tours))
    }

    fn nearest_neighbour(&self, mut pool: Vec<NodeIdx>) -> Vec<NodeIdx> {
        let mut tour = Vec::with_capacity(pool.len());
        let mut at = 0;
        while !pool.is_empty() {
            let (k, _) = pool
                .iter()
                .enumerate()
                .min_by(|x, y| self.model.w(at, *x.1).total_cmp(&self.model.w(at, *y.1)))
                .expect("pool is non-empty");
            at = pool.remove(k);
            tour.push(at);
        }
        tour
    }

    fn two_opt(&self, plan: &mut Plan, eps: f64) -> bool {
        let mut improved = false;
        for tour in &mut plan.tours {
            let mut current = self.weight(tour);
            let mut again = true;
            while again {
                again = false;
                for i in 0..tour.len() {
                    for j in i + 1..tour.len() {
                        tour[i..=j].reverse();
                        let cand = self.weight(tour);
                        if cand < current - eps {
                            current = cand;
                            again = true;
                            improved = true;
                        } else {
                            tour[i..=j].reverse();
                        }
                    }
                }
            }
        }
        improved
    }

    fn relocate(&self, plan: &mut Plan, eps: f64) -> bool {
        let mut improved = false;
        'scan: loop {
            for a in 0..plan.tours.len() {
                if plan.tours[a].len() == 1 && !self.allow_idle {
                    continue;
                }
                let wa = self.weight(&plan.tours[a]);
                for i in 0..plan.tours[a].len() {
                    let mut removed = plan.tours[a].clone();
                    let x = removed.remove(i);
                    let dx = u64::from(self.instance.demand(x));
                    let w_removed = self.weight(&removed);
                    for b in 0..plan.tours.len() {
                        if b != a && plan.loads[b] + dx > self.capacity {
                            continue;
                        }
                        let target = if b == a { &removed } else { &plan.tours[b] };
                        let wb = if b == a { 0.0 } else { self.weight(target) };
                        for p in 0..=target.len() {
                            if b == a && p == i {
                                continue;
                            }
                            let mut inserted = target.clone();
                            inserted.insert(p, x);
                            let delta = if b == a {
                                self.weight(&inserted) - wa
                            } else {
                                w_removed + self.weight(&inserted) - wa - wb
                            };
                            if delta < -eps {
                                if b != a {
                                    plan.tours[a] = removed;
                                    plan.loads[a] -= dx;
                                    plan.loads[b] += dx;
                                }
                                plan.tours[b] = inserted;
                                if plan.tours[a].is_empty() {
                                    plan.tours.remove(a);
                                    plan.loads.remove(a);
                                }
                                improved = true;
                                continue 'scan;
                            }
                        }
                    }
                }
            }
            return improved;
        }
    }

    fn swap(&self, plan: &mut Plan, eps: f64) -> bool {
        let mut improved = false;
        'scan: loop {
            for a in 0..plan.tours.len() {
                for b in a + 1..plan.tours.len() {
                    let base = self.weight(&plan.tours[a]) + self.weight(&plan.tours[b]);
                    for i in 0..plan.tours[a].len() {
                        for j in 0..plan.tours[b].len() {
                            let (x, y) = (plan.tours[a][i], plan.tours[b][j]);
                            let (dx, dy) = (
                                u64::from(self.instance.demand(x)),
                                u64::from(self.instance.demand(y)),
                            );
                            if plan.loads[a] - dx + dy > self.capacity
                                || plan.loads[b] - dy + dx > self.capacity
                            {
                                continue;
                            }
                            let mut ta = plan.tours[a].clone();
                            let mut tb = plan.tours[b].clone();
                            ta[i] = y;
                            tb[j] = x;
                            if self.weight(&ta) + self.weight(&tb) < base - eps {
                                plan.loads[a] = plan.loads[a] - dx + dy;
                                plan.loads[b] = plan.loads[b] - dy + dx;
                                plan.tours[a] = ta;
                                plan.tours[b] = tb;
                                improved = true;
                                continue 'scan;
                            }
                        }
                    }
                }
            }
            return improved;
        }
    }

    fn local_search(&self, plan: &mut Plan) {
        loop {
            let eps = self.eps(plan);
            let a = self.two_opt(plan, eps);
            let b = self.relocate(plan, eps);
            let c = self.swap(plan, eps);
            if !(a || b || c) {
                return;
            }
        }
    }

    fn perturb(&self, plan: &mut Plan, rng: &mut UniformStream, moves: usize) {
        for _ in 0..moves {
            let t = plan.tours.len();
            let a = rng.below(t as u64) as usize;
            let i = rng.below(plan.tours[a].len() as u64) as usize;
            let b = rng.below(t as u64) as usize;
            if a == b {
                let j = rng.below(plan.tours[a].len() as u64) as usize;
                plan.tours[a].swap(i, j);
                continue;
            }
            let x = plan.tours[a][i];
            let dx = u64::from(self.instance.demand(x));
            let can_leave = plan.tours[a].len() > 1;
            if can_leave && plan.loads[b] + dx <= self.capacity {
                plan.tours[a].remove(i);
                let p = rng.below(plan.tours[b].len() as u64 + 1) as usize;
                plan.tours[b].insert(p, x);
                plan.loads[a] -= dx;
                plan.loads[b] += dx;
                continue;
            }
            let j = rng.below(plan.tours[b].len() as u64) as usize;
            let y = plan.tours[b][j];
            let dy = u64::from(self.instance.demand(y));
            if plan.loads[a] - dx + dy <= self.capacity && plan.loads[b] - dy + dx <= self.capacity
            {
                plan.tours[a][i] = y;
                plan.tours[b][j] = x;
                plan.loads[a] = plan.loads[a] - dx + dy;
                plan.loads[b] = plan.loads[b] - dy + dx;
            }
        }
    }
}

/// Clarke-Wright savings construction followed by 2-opt, relocate and swap
/// local search, then seeded perturb-and-repair rounds. Deterministic for a
/// fixed seed. Works on any size; optimality is not guaranteed.
pub fn solve_heuristic(
    instance: &Instance,
    alpha: f64,
    params: &HeuristicParams,
) -> Result<Solution, SolveError> {
    let model = preflight(instance, alpha)?;
    let vehicles = instance.vehicle_count;
    if instance.customer_count() == 0 {
        return Ok(assemble_solution(instance, &model, Engine::Heuristic, Vec::new()));
    }
    let search = Search {
        instance,
        model: &model,
        capacity: u64::from(instance.capacity),
        allow_idle: instance.allow_idle_vehicles,
    };
    let Some(mut best) = search.savings(vehicles).or_else(|| search.packing(vehicles)) else {
        return Err(fleet_mismatch(&search, vehicles));
    };
    search.local_search(&mut best);
    let mut best_weight = search.plan_weight(&best);

    let mut rng = UniformStream::new(params.seed);
    for _ in 0..params.restarts {
        let mut cand = best.clone();
        search.perturb(&mut cand, &mut rng, params.perturbation_moves);
        search.local_search(&mut cand);
        let w = search.plan_weight(&cand);
        if w < best_weight - search.eps(&best) {
            best = cand;
            best_weight = w;
        }
    }
    Ok(assemble_solution(instance, &model, Engine::Heuristic, best.tours))
}

fn fleet_mismatch(search: &Search<'_>, vehicles: usize) -> SolveError {
    // Count the bins first-fit decreasing needs with an unbounded fleet.
    let mut demands: Vec<u64> = search
        .instance
        .customers()
        .map(|c| u64::from(search.instance.demand(c)))
        .collect();
    demands.sort_unstable_by(|a, b| b.cmp(a));
    let mut bins: Vec<u64> = Vec::new();
    for d in demands {
        match bins.iter_mut().find(|b| **b + d <= search.capacity) {
            Some(b) => *b += d,
            None => bins.push(d),
        }
    }
    SolveError::FleetMismatch {
        routes: bins.len(),
        vehicles,
        suggestion: format!(
            "first-fit packing needs {} vehicles of capacity {}; raise vehicle_count or capacity",
            bins.len(),
            search.capacity
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_exact, validate_solution};

    fn ring(n: usize) -> Vec<Vec<f64>> {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                if i == 0 {
                    (0.0, 0.0)
                } else {
                    let t = i as f64 * 2.399;
                    (10.0 * t.cos() * (1.0 + i as f64 * 0.1), 10.0 * t.sin())
                }
            })
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                        (dx * dx + dy * dy).sqrt()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = ring(12);
        let inst = Instance::from_matrices(&[3; 11], 3, 12, &m, &m).unwrap();
        let p = HeuristicParams::default();
        let a = solve_heuristic(&inst, 0.4, &p).unwrap();
        let b = solve_heuristic(&inst, 0.4, &p).unwrap();
        assert_eq!(a, b);
        assert!(validate_solution(&inst, &a).is_valid());
        assert_eq!(a.routes.len(), 3);
    }

    #[test]
    fn close_to_exact_on_small_instances() {
        let m = ring(9);
        let inst = Instance::from_matrices(&[2, 3, 4, 2, 3, 4, 2, 3], 2, 12, &m, &m).unwrap();
        let exact = solve_exact(&inst, 0.0).unwrap();
        let heur = solve_heuristic(&inst, 0.0, &HeuristicParams::default()).unwrap();
        assert!(heur.objective >= exact.objective - 1e-9);
        assert!(heur.objective <= exact.objective * 1.05, "{} vs {}", heur.objective, exact.objective);
    }

    #[test]
    fn reports_unpackable_fleet() {
        let m = ring(4);
        let inst = Instance::from_matrices(&[3, 3, 3], 2, 5, &m, &m).unwrap();
        match solve_heuristic(&inst, 0.5, &HeuristicParams::default()) {
            Err(SolveError::FleetMismatch { routes, vehicles, suggestion }) => {
                assert_eq!((routes, vehicles), (3, 2));
                assert!(suggestion.contains("3 vehicles"));
            }
            other => panic!("{other:?}"),
        }
    }
}
