//! Ground truth: shortest-path distances over the current unit-disc graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::blocks::channel_member;
use crate::calculus::DeviceId;
use crate::netsim::{Environment, Topology};
use crate::num::Real;

struct Entry<T> {
    dist: T,
    node: DeviceId,
}

impl<T: Real> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Entry<T> {}
impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Entry<T> {
    // Reversed: BinaryHeap pops the smallest distance first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Dijkstra from `sources` over `topology` with non-negative edge lengths.
/// Unreachable devices map to `+inf`.
pub fn shortest_paths<T: Real>(
    topology: &Topology,
    sources: &BTreeSet<DeviceId>,
    mut length: impl FnMut(DeviceId, DeviceId) -> T,
) -> BTreeMap<DeviceId, T> {
    let mut dist: BTreeMap<DeviceId, T> = topology.keys().map(|d| (*d, T::infinity())).collect();
    let mut heap = BinaryHeap::new();
    for s in sources {
        if let Some(d) = dist.get_mut(s) {
            *d = T::zero();
            heap.push(Entry {
                dist: T::zero(),
                node: *s,
            });
        }
    }
    while let Some(Entry { dist: du, node: u }) = heap.pop() {
        if du > dist[&u] {
            continue;
        }
        for v in &topology[&u] {
            if *v == u {
                continue;
            }
            let alt = du + length(u, *v);
            if alt < dist[v] {
                dist.insert(*v, alt);
                heap.push(Entry {
                    dist: alt,
                    node: *v,
                });
            }
        }
    }
    dist
}

/// Euclidean shortest-path distance of every device from `sources`.
pub fn oracle_distance_field(
    env: &Environment,
    sources: &BTreeSet<DeviceId>,
) -> BTreeMap<DeviceId, f64> {
    shortest_paths(&env.topology, sources, |a, b| {
        env.positions[&a].distance(&env.positions[&b])
    })
}

/// Channel membership of every device between endpoints `a` and `b`.
pub fn oracle_channel(
    env: &Environment,
    a: DeviceId,
    b: DeviceId,
    width: f64,
) -> BTreeMap<DeviceId, bool> {
    let da = oracle_distance_field(env, &BTreeSet::from([a]));
    let db = oracle_distance_field(env, &BTreeSet::from([b]));
    let between = da.get(&b).copied().unwrap_or(f64::INFINITY);
    da.iter()
        .map(|(d, x)| (*d, channel_member(*x, db[d], between, width)))
        .collect()
}
