use crate::domain::{Instance, NodeIdx};

use super::{assemble_solution, preflight, Engine, Solution, SolveError, COST_TOLERANCE};

/// Largest customer count the exact engine accepts; memory grows as `n·2^n`.
pub const EXACT_CUSTOMER_LIMIT: usize = 16;

const NO_PRED: u8 = u8::MAX;

/// Accumulated (weighted, risk, logistics) cost. Ordered lexicographically
/// with a relative tolerance so summation-order noise does not decide ties.
#[derive(Debug, Clone, Copy)]
struct Key {
    w: f64,
    r: f64,
    c: f64,
}

impl Key {
    const ZERO: Key = Key {
        w: 0.0,
        r: 0.0,
        c: 0.0,
    };
    const INF: Key = Key {
        w: f64::INFINITY,
        r: f64::INFINITY,
        c: f64::INFINITY,
    };

    fn is_finite(self) -> bool {
        self.w.is_finite()
    }

    fn plus(self, o: Key) -> Key {
        Key {
            w: self.w + o.w,
            r: self.r + o.r,
            c: self.c + o.c,
        }
    }

    /// Strictly better than `o` under the tie-breaking order.
    fn beats(self, o: Key) -> bool {
        if !o.is_finite() {
            return self.is_finite();
        }
        for (a, b) in [(self.w, o.w), (self.r, o.r), (self.c, o.c)] {
            let tol = COST_TOLERANCE * a.abs().max(b.abs()).max(1.0);
            if a < b - tol {
                return true;
            }
            if a > b + tol {
                return false;
            }
        }
        false
    }
}

fn bits(mask: usize) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(b)
        }
    })
}

/// Optimal solution by dynamic programming over customer subsets.
///
/// Layer one is Held-Karp restricted to subsets within capacity, giving the
/// cheapest closed tour for every feasible subset. Layer two partitions the
/// full customer set into exactly `vehicle_count` such subsets (or at most
/// that many when idle vehicles are allowed). Ties on the weighted cost are
/// broken by lower risk, then lower logistics cost.
pub fn solve_exact(instance: &Instance, alpha: f64) -> Result<Solution, SolveError> {
    let model = preflight(instance, alpha)?;
    let n = instance.customer_count();
    if n > EXACT_CUSTOMER_LIMIT {
        return Err(SolveError::TooLarge {
            customers: n,
            limit: EXACT_CUSTOMER_LIMIT,
        });
    }
    if n == 0 {
        return Ok(assemble_solution(instance, &model, Engine::Exact, Vec::new()));
    }

    let full = (1usize << n) - 1;
    let capacity = u64::from(instance.capacity);
    let leg = |i: NodeIdx, j: NodeIdx| Key {
        w: model.w(i, j),
        r: model.r(i, j),
        c: model.c(i, j),
    };

    let mut load = vec![0u64; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + u64::from(instance.demand(low + 1));
    }

    // path[mask·n + j]: cheapest depot -> mask -> customer j path ending at j.
    let mut path = vec![Key::INF; (full + 1) * n];
    let mut pred = vec![NO_PRED; (full + 1) * n];
    let mut tour = vec![Key::INF; full + 1];
    let mut tour_last = vec![NO_PRED; full + 1];
    for mask in 1..=full {
        if load[mask] > capacity {
            continue;
        }
        for j in bits(mask) {
            let slot = mask * n + j;
            let prev = mask ^ (1 << j);
            if prev == 0 {
                path[slot] = leg(0, j + 1);
                continue;
            }
            for i in bits(prev) {
                let base = path[prev * n + i];
                if !base.is_finite() {
                    continue;
                }
                let cand = base.plus(leg(i + 1, j + 1));
                if cand.beats(path[slot]) {
                    path[slot] = cand;
                    pred[slot] = i as u8;
                }
            }
        }
        for j in bits(mask) {
            let p = path[mask * n + j];
            if !p.is_finite() {
                continue;
            }
            let cand = p.plus(leg(j + 1, 0));
            if cand.beats(tour[mask]) {
                tour[mask] = cand;
                tour_last[mask] = j as u8;
            }
        }
    }

    // part[k][mask]: cheapest split of mask into k tours. The block holding
    // the lowest customer of mask is enumerated, so each split is seen once.
    let k_max = instance.vehicle_count.min(n);
    let mut part = vec![vec![Key::INF; full + 1]; k_max + 1];
    let mut choice = vec![vec![0usize; full + 1]; k_max + 1];
    part[0][0] = Key::ZERO;
    for k in 1..=k_max {
        let (done, rest_layers) = part.split_at_mut(k);
        let prev = &done[k - 1];
        let cur = &mut rest_layers[0];
        for mask in 1..=full {
            if (mask.count_ones() as usize) < k {
                continue;
            }
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let block = sub | low;
                let t = tour[block];
                let other = prev[mask ^ block];
                if t.is_finite() && other.is_finite() {
                    let cand = other.plus(t);
                    if cand.beats(cur[mask]) {
                        cur[mask] = cand;
                        choice[k][mask] = block;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
    }

    let mut vehicles = None;
    let k_min = if instance.allow_idle_vehicles { 1 } else { k_max };
    if instance.allow_idle_vehicles || instance.vehicle_count <= n {
        for k in k_min..=k_max {
            let cand = part[k][full];
            if cand.is_finite() && vehicles.is_none_or(|b: usize| cand.beats(part[b][full])) {
                vehicles = Some(k);
            }
        }
    }
    let Some(mut k) = vehicles else {
        return Err(SolveError::Infeasible(format!(
            "no split of {n} customers into {} capacity-feasible routes exists",
            instance.vehicle_count
        )));
    };

    let mut tours = Vec::with_capacity(k);
    let mut mask = full;
    while k > 0 {
        let block = choice[k][mask];
        tours.push(unwind(block, n, &pred, &tour_last));
        mask ^= block;
        k -= 1;
    }
    Ok(assemble_solution(instance, &model, Engine::Exact, tours))
}

fn unwind(block: usize, n: usize, pred: &[u8], tour_last: &[u8]) -> Vec<NodeIdx> {
    let mut stops = Vec::with_capacity(block.count_ones() as usize);
    let mut mask = block;
    let mut j = tour_last[block] as usize;
    loop {
        stops.push(j + 1);
        let p = pred[mask * n + j];
        mask ^= 1 << j;
        if p == NO_PRED {
            break;
        }
        j = p as usize;
    }
    stops.reverse();
    stops
}
