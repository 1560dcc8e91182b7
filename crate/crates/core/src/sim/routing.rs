//! Route-request flooding and route selection.
//!
//! A flood starts at the source and is relayed once by every node it
//! reaches, except the destination. Nodes accept a request only from a
//! sender of their own zone unless one of the two is a peripheral, and only
//! when their zone is among the zones the flood may cover. Two nodes hear
//! each other when their distance is within both radio ranges.

use crate::geometry::{distance, Point};
use crate::model::{NodeId, ZoneId};

/// What a flood needs to know about a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloodNode {
    pub id: NodeId,
    pub position: Point,
    pub radio_range: f64,
    pub zone: ZoneId,
    pub is_peripheral: bool,
    pub alive: bool,
}

/// Bidirectional radio link.
pub fn can_hear(a: &FloodNode, b: &FloodNode) -> bool {
    distance(a.position, b.position) <= a.radio_range.min(b.radio_range)
}

/// `b` accepts a route request relayed by `a`.
pub fn relays(a: &FloodNode, b: &FloodNode, allowed: &[ZoneId]) -> bool {
    a.alive
        && b.alive
        && allowed.contains(&b.zone)
        && (a.zone == b.zone || a.is_peripheral || b.is_peripheral)
        && can_hear(a, b)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Discovery {
    /// One route per reached neighbor of the destination: the
    /// lexicographically smallest shortest path to that neighbor, then the
    /// destination.
    pub candidates: Vec<Vec<NodeId>>,
    /// Nodes that transmitted the request, in id order.
    pub flooders: Vec<NodeId>,
    /// Hop depth of the farthest node the flood reached.
    pub depth: usize,
}

/// Floods a route request from `src` over the nodes in `allowed` zones (the
/// source's own zone is always allowed), up to `max_hops` hops.
pub fn route_discovery(
    nodes: &[FloodNode],
    src: NodeId,
    dst: NodeId,
    allowed: &[ZoneId],
    max_hops: usize,
) -> Discovery {
    let Some(s) = nodes.iter().find(|n| n.id == src) else {
        return Discovery::default();
    };
    if !s.alive {
        return Discovery::default();
    }
    let mut zones: Vec<ZoneId> = allowed.to_vec();
    zones.push(s.zone);
    zones.sort();
    zones.dedup();

    // Work on the nodes the flood may touch; index 0 is the source.
    let mut pool: Vec<&FloodNode> = vec![s];
    pool.extend(
        nodes
            .iter()
            .filter(|n| n.id != src && n.alive && zones.contains(&n.zone)),
    );
    let dst_ix = pool.iter().position(|n| n.id == dst);

    let mut paths: Vec<Option<Vec<NodeId>>> = vec![None; pool.len()];
    paths[0] = Some(vec![src]);
    let mut frontier = vec![0usize];
    let mut flooders = Vec::new();
    let mut depth = 0;
    while !frontier.is_empty() && depth < max_hops {
        let mut next: Vec<usize> = Vec::new();
        for &u in &frontier {
            if Some(u) == dst_ix {
                continue;
            }
            flooders.push(pool[u].id);
            for w in 0..pool.len() {
                if !relays(pool[u], pool[w], &zones) {
                    continue;
                }
                let reached_earlier = paths[w].as_ref().is_some_and(|p| p.len() <= depth + 1);
                if reached_earlier {
                    continue;
                }
                let mut cand = paths[u].clone().expect("frontier nodes have paths");
                cand.push(pool[w].id);
                match &paths[w] {
                    Some(existing) if *existing <= cand => {}
                    _ => {
                        if paths[w].is_none() {
                            next.push(w);
                        }
                        paths[w] = Some(cand);
                    }
                }
            }
        }
        if !next.is_empty() {
            depth += 1;
        }
        frontier = next;
    }
    // Relays at the hop limit still retransmit once.
    for &u in &frontier {
        if Some(u) != dst_ix {
            flooders.push(pool[u].id);
        }
    }
    flooders.sort();

    let mut candidates = Vec::new();
    if let Some(d) = dst_ix.filter(|d| paths[*d].is_some()) {
        for (x, path) in paths.iter().enumerate() {
            let Some(path) = path else { continue };
            if x == d || path.len() > max_hops || !relays(pool[x], pool[d], &zones) {
                continue;
            }
            let mut route = path.clone();
            route.push(dst);
            candidates.push(route);
        }
    }
    Discovery {
        candidates,
        flooders,
        depth,
    }
}

/// Fewest hops, ties to the lexicographically smallest id sequence.
pub fn route_select(candidates: &[Vec<NodeId>]) -> Option<Vec<NodeId>> {
    candidates
        .iter()
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        .cloned()
}
