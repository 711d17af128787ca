//! Simplified XOR-metric distributed hash table.
//!
//! Nodes keep 160 distance buckets of bounded width and answer "your k
//! closest known nodes to this target" queries. Lookups iterate from any
//! bootstrap node toward the target and always terminate on the globally
//! closest node: every member of the bucket a target falls into is strictly
//! closer to that target than the bucket's owner, so each hop makes
//! progress, capacity limits notwithstanding.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;

use thiserror::Error;

use crate::keys::PeerId;

/// Bucket capacity and default lookup width.
pub const BUCKET_WIDTH: usize = 8;

const ID_BITS: usize = 160;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DhtError {
    #[error("ids must be 20 bytes, got {0}")]
    WrongWidth(usize),
    #[error("lookup needs at least one bootstrap node")]
    EmptyBootstrap,
    #[error("bootstrap ids name no known node")]
    UnknownBootstrap,
    #[error("no reachable node stores the target")]
    NoRoute,
}

/// XOR distance between two 20-byte ids, big-endian. Compares with plain
/// byte-array ordering.
pub fn dht_xor_distance(a: &[u8], b: &[u8]) -> Result<[u8; 20], DhtError> {
    if a.len() != 20 {
        return Err(DhtError::WrongWidth(a.len()));
    }
    if b.len() != 20 {
        return Err(DhtError::WrongWidth(b.len()));
    }
    let mut out = [0u8; 20];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = a[i] ^ b[i];
    }
    Ok(out)
}

fn distance(a: &[u8; 20], b: &[u8; 20]) -> [u8; 20] {
    dht_xor_distance(a, b).expect("fixed-width inputs")
}

/// Another node as seen from a routing table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_id: [u8; 20],
    pub endpoint: SocketAddrV4,
}

/// A peer endpoint stored under a target id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPeer {
    pub peer_id: PeerId,
    pub external: SocketAddrV4,
    pub local: SocketAddrV4,
}

/// One DHT participant: id, routing buckets, and stored values.
#[derive(Debug, Clone)]
pub struct DhtNode {
    pub node_id: [u8; 20],
    pub endpoint: SocketAddrV4,
    buckets: Vec<Vec<NodeRef>>,
    pub stored: BTreeMap<[u8; 20], Vec<StoredPeer>>,
}

impl DhtNode {
    pub fn new(node_id: [u8; 20], endpoint: SocketAddrV4) -> DhtNode {
        DhtNode {
            node_id,
            endpoint,
            buckets: vec![Vec::new(); ID_BITS],
            stored: BTreeMap::new(),
        }
    }

    /// Bucket index for another id: the bit position of the distance's most
    /// significant set bit. `None` for the node's own id.
    fn bucket_index(&self, other: &[u8; 20]) -> Option<usize> {
        let d = distance(&self.node_id, other);
        for (byte_index, byte) in d.iter().enumerate() {
            if *byte != 0 {
                let bit = 7 - byte.leading_zeros() as usize;
                return Some((19 - byte_index) * 8 + bit);
            }
        }
        None
    }

    /// Admits a node into its distance bucket if there is room. Full buckets
    /// drop the newcomer; membership stays sorted for determinism.
    pub fn observe(&mut self, other: NodeRef) {
        if other.node_id == self.node_id {
            return;
        }
        let Some(index) = self.bucket_index(&other.node_id) else {
            return;
        };
        let bucket = &mut self.buckets[index];
        if bucket.iter().any(|r| r.node_id == other.node_id) || bucket.len() >= BUCKET_WIDTH {
            return;
        }
        bucket.push(other);
        bucket.sort();
    }

    /// The k known nodes closest to a target, nearest first.
    pub fn closest_known(&self, target: &[u8; 20], k: usize) -> Vec<NodeRef> {
        let mut all: Vec<NodeRef> = self.buckets.iter().flatten().copied().collect();
        all.sort_by_key(|r| distance(&r.node_id, target));
        all.truncate(k);
        all
    }

    /// Consistency check: every bucket member's distance has its most
    /// significant bit at the bucket's index.
    pub fn buckets_consistent(&self) -> bool {
        self.buckets.iter().enumerate().all(|(index, bucket)| {
            bucket
                .iter()
                .all(|r| self.bucket_index(&r.node_id) == Some(index))
        })
    }
}

/// All DHT participants of one simulated network.
#[derive(Debug, Clone, Default)]
pub struct DhtNetwork {
    nodes: BTreeMap<[u8; 20], DhtNode>,
}

impl DhtNetwork {
    pub fn add_node(&mut self, node_id: [u8; 20], endpoint: SocketAddrV4) {
        self.nodes
            .entry(node_id)
            .or_insert_with(|| DhtNode::new(node_id, endpoint));
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> Vec<[u8; 20]> {
        self.nodes.keys().copied().collect()
    }

    pub fn node(&self, id: &[u8; 20]) -> Option<&DhtNode> {
        self.nodes.get(id)
    }

    /// Introduces every node to every other, subject to bucket capacity.
    pub fn link_all(&mut self) {
        let refs: Vec<NodeRef> = self
            .nodes
            .values()
            .map(|n| NodeRef {
                node_id: n.node_id,
                endpoint: n.endpoint,
            })
            .collect();
        for node in self.nodes.values_mut() {
            for r in &refs {
                node.observe(*r);
            }
        }
    }

    /// Brute-force nearest node id to a target. The oracle lookups are
    /// checked against.
    pub fn closest_node_id(&self, target: &[u8; 20]) -> Option<[u8; 20]> {
        self.nodes
            .keys()
            .min_by_key(|id| distance(id, target))
            .copied()
    }

    /// Stores a value at the node responsible for the target.
    pub fn publish(&mut self, target: [u8; 20], value: StoredPeer) -> Result<(), DhtError> {
        let id = self.closest_node_id(&target).ok_or(DhtError::NoRoute)?;
        let values = self
            .nodes
            .get_mut(&id)
            .expect("closest id comes from the map")
            .stored
            .entry(target)
            .or_default();
        if !values.contains(&value) {
            values.push(value);
        }
        Ok(())
    }
}

/// Iterative lookup: repeatedly query the closest unqueried known node until
/// the k closest known have all been asked, then read the stored values off
/// the queried nodes nearest-first.
pub fn dht_lookup(
    network: &DhtNetwork,
    bootstrap: &[[u8; 20]],
    target: &[u8; 20],
    k: usize,
) -> Result<Vec<StoredPeer>, DhtError> {
    if bootstrap.is_empty() {
        return Err(DhtError::EmptyBootstrap);
    }
    let k = k.max(1);
    let mut known: BTreeSet<[u8; 20]> = bootstrap
        .iter()
        .filter(|id| network.nodes.contains_key(*id))
        .copied()
        .collect();
    if known.is_empty() {
        return Err(DhtError::UnknownBootstrap);
    }
    let mut queried: BTreeSet<[u8; 20]> = BTreeSet::new();
    loop {
        let mut shortlist: Vec<[u8; 20]> = known.iter().copied().collect();
        shortlist.sort_by_key(|id| distance(id, target));
        shortlist.truncate(k);
        let Some(next) = shortlist.into_iter().find(|id| !queried.contains(id)) else {
            break;
        };
        queried.insert(next);
        for r in network.nodes[&next].closest_known(target, k) {
            known.insert(r.node_id);
        }
    }
    let mut visited: Vec<[u8; 20]> = queried.into_iter().collect();
    visited.sort_by_key(|id| distance(id, target));
    for id in visited {
        if let Some(values) = network.nodes[&id].stored.get(target) {
            return Ok(values.clone());
        }
    }
    Err(DhtError::NoRoute)
}
