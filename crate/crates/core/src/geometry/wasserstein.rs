//! First Wasserstein (Kantorovich–Rubinstein) distance between empirical
//! measures.

use std::collections::BTreeMap;

use super::measure::{EmpiricalMeasure, MASS_TOL};
use super::point::PlanePoint;
use crate::error::{Error, Result};

/// Largest support (per measure) solved exactly.
pub const EXACT_LIMIT: usize = 512;

/// Number of projection directions for the sliced lower bound.
const SLICES: usize = 64;

/// A W₁ value with a certified bracket. For exact solves
/// `lower == value == upper`; otherwise `value` is the cost of an explicit
/// coupling and therefore equals `upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Estimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl W1Estimate {
    pub fn error_bound(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_mass(m: &EmpiricalMeasure) -> Result<()> {
    let t = m.total_weight();
    if (t - 1.0).abs() > MASS_TOL {
        return Err(Error::Unnormalized(t));
    }
    Ok(())
}

/// W₁ between two normalized measures: exact transport for supports of at
/// most [`EXACT_LIMIT`] points, a sliced/coupling bracket above that.
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<W1Estimate> {
    check_mass(mu)?;
    check_mass(nu)?;
    if mu.len() <= EXACT_LIMIT && nu.len() <= EXACT_LIMIT {
        let v = transport_cost(mu, nu);
        return Ok(W1Estimate { value: v, lower: v, upper: v, exact: true });
    }
    let lower = sliced_lower_bound(mu, nu, SLICES);
    let upper = quadtree_coupling_cost(mu, nu).max(lower);
    Ok(W1Estimate { value: upper, lower, upper, exact: false })
}

/// Exact optimal transport cost (Euclidean ground metric) by successive
/// shortest paths on the bipartite network. Cubic in the support size.
pub fn transport_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    const EPS: f64 = 1e-15;
    let (pa, pb) = (mu.points(), nu.points());
    let n = pa.len();
    let m = pb.len();
    let cost: Vec<f64> = (0..n * m).map(|k| pa[k / m].dist(pb[k % m])).collect();
    let mut flow = vec![0.0f64; n * m];
    let mut supply = mu.weights().to_vec();
    let mut demand = nu.weights().to_vec();
    // nodes: sources 0..n, sinks n..n+m
    let mut pot = vec![0.0f64; n + m];
    let mut dist = vec![0.0f64; n + m];
    let mut pred = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    loop {
        if supply.iter().all(|&s| s <= EPS) || demand.iter().all(|&d| d <= EPS) {
            break;
        }
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, &d) in dist.iter().enumerate() {
                if !done[v] && d < best {
                    best = d;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > EPS {
                target = u;
                break;
            }
            if u < n {
                let row = &cost[u * m..(u + 1) * m];
                for (j, &c) in row.iter().enumerate() {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c + pot[u] - pot[v]).max(0.0);
                    if best + rc < dist[v] {
                        dist[v] = best + rc;
                        pred[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= EPS {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        pred[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let reach = dist[target];
        for (p, &d) in pot.iter_mut().zip(&dist) {
            *p += d.min(reach);
        }
        let mut delta = demand[target - n];
        let mut v = target;
        while pred[v] != usize::MAX {
            let u = pred[v];
            if u >= n {
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        let source = v;
        delta = delta.min(supply[source]);
        let mut v = target;
        while pred[v] != usize::MAX {
            let u = pred[v];
            if u < n {
                flow[u * m + (v - n)] += delta;
            } else {
                flow[v * m + (u - n)] -= delta;
            }
            v = u;
        }
        supply[source] -= delta;
        demand[target - n] -= delta;
    }
    flow.iter().zip(&cost).map(|(f, c)| f * c).sum()
}

/// Exact W₁ between weighted samples on the real line: `∫ |F − G|`.
pub fn w1_line(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().map(|&(x, w)| (x, w)));
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// `max_θ W₁(proj_θ μ, proj_θ ν)` over `directions` evenly spaced angles.
/// Projections are 1-Lipschitz, so this never exceeds W₁(μ, ν).
pub fn sliced_lower_bound(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, directions: usize) -> f64 {
    let project = |m: &EmpiricalMeasure, e: PlanePoint| -> Vec<(f64, f64)> {
        m.points().iter().zip(m.weights()).map(|(p, w)| (p.dot(e), *w)).collect()
    };
    (0..directions.max(1))
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / directions.max(1) as f64;
            let e = PlanePoint::new(a.cos(), a.sin());
            w1_line(&project(mu, e), &project(nu, e))
        })
        .fold(0.0, f64::max)
}

type Atoms = Vec<(PlanePoint, f64)>;

/// Cost of a hierarchical greedy coupling: mass is matched inside the finest
/// quadtree cells first and the unmatched excess is passed to the parent
/// cell. Every match is charged its true distance, so the result is the
/// cost of a feasible plan and an upper bound on W₁.
pub fn quadtree_coupling_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let all = mu.points().iter().chain(nu.points());
    let (mut lo, mut hi) =
        (PlanePoint::new(f64::INFINITY, f64::INFINITY), PlanePoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in all {
        lo = PlanePoint::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
        hi = PlanePoint::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
    }
    let side = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(f64::MIN_POSITIVE);
    let n = (mu.len() + nu.len()) as f64;
    let levels = ((n.log2() / 2.0).ceil() as u32 + 1).min(24);
    let cells = (1u64 << levels) as f64;
    let key = |p: &PlanePoint| -> u64 {
        let ix = (((p.x1 - lo.x1) / side * cells) as u64).min((1 << levels) - 1);
        let iy = (((p.x2 - lo.x2) / side * cells) as u64).min((1 << levels) - 1);
        (ix << 32) | iy
    };
    let mut buckets: BTreeMap<u64, (Atoms, Atoms)> = BTreeMap::new();
    for (p, w) in mu.points().iter().zip(mu.weights()) {
        buckets.entry(key(p)).or_default().0.push((*p, *w));
    }
    for (p, w) in nu.points().iter().zip(nu.weights()) {
        buckets.entry(key(p)).or_default().1.push((*p, *w));
    }
    let mut cost = 0.0;
    for _ in 0..=levels {
        let mut parents: BTreeMap<u64, (Atoms, Atoms)> = BTreeMap::new();
        for (k, (mut a, mut b)) in buckets {
            cost += greedy_match(&mut a, &mut b);
            let parent = ((k >> 33) << 32) | ((k & 0xFFFF_FFFF) >> 1);
            let e = parents.entry(parent).or_default();
            e.0.extend(a);
            e.1.extend(b);
        }
        buckets = parents;
    }
    for (_, (mut a, mut b)) in buckets {
        cost += greedy_match(&mut a, &mut b);
    }
    cost
}

/// North-west-corner matching; leaves only the unmatched remainders.
fn greedy_match(a: &mut Atoms, b: &mut Atoms) -> f64 {
    let mut cost = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let w = a[i].1.min(b[j].1);
        cost += w * a[i].0.dist(b[j].0);
        a[i].1 -= w;
        b[j].1 -= w;
        if a[i].1 <= 0.0 {
            i += 1;
        }
        if b[j].1 <= 0.0 {
            j += 1;
        }
    }
    a.drain(..i);
    b.drain(..j);
    a.retain(|x| x.1 > 0.0);
    b.retain(|x| x.1 > 0.0);
    cost
}
