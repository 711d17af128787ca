//! Tracker actor: lookups double as registrations, silence expires them.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;

use crate::keys::{share32_from, PeerId, ShareId};
use crate::wire::{GetPeers, PeerEntry, PeersResponse, WireShareId};

/// Registrations survive this many announce intervals without a refresh:
/// one missed announce is tolerated, the second is fatal.
pub const EXPIRY_INTERVALS: u64 = 2;

/// One peer's registration for one share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Registration {
    pub peer_id: PeerId,
    pub external: SocketAddrV4,
    pub local: SocketAddrV4,
    pub last_seen_us: u64,
}

/// Registration table plus the bookkeeping for first-contact replies.
#[derive(Debug, Clone)]
pub struct TrackerState {
    announce_interval_s: u64,
    registrations: BTreeMap<ShareId, Vec<Registration>>,
    answered: BTreeSet<(PeerId, ShareId)>,
}

impl TrackerState {
    pub fn new(announce_interval_s: u64) -> TrackerState {
        TrackerState {
            announce_interval_s,
            registrations: BTreeMap::new(),
            answered: BTreeSet::new(),
        }
    }

    pub fn announce_interval_s(&self) -> u64 {
        self.announce_interval_s
    }

    /// Maps the wire share id of a lookup to the 20-byte id the table is
    /// keyed by. The 32-byte form binds the advertised local endpoint, so
    /// it can only be reversed by recomputing the binding over candidate
    /// ids: every registered share plus whatever extra candidates the
    /// caller knows about.
    pub fn resolve_share(
        &self,
        msg: &GetPeers,
        extra_candidates: &[ShareId],
    ) -> Option<ShareId> {
        match msg.share_id {
            WireShareId::Id20(id) => Some(id),
            WireShareId::Id32(wide) => {
                let mut candidates: BTreeSet<ShareId> =
                    self.registrations.keys().copied().collect();
                candidates.extend(extra_candidates.iter().copied());
                candidates.into_iter().find(|sid| {
                    share32_from(sid, *msg.local_addr.ip(), msg.local_addr.port()) == wide
                })
            }
        }
    }

    /// Registers or refreshes the requester, then answers with every live
    /// registration for the share, requester included and entries sorted by
    /// peer id. The returned flag is true on the first answer ever sent to
    /// this (peer, share) pair; the caller delivers that one on both
    /// transports.
    pub fn handle_get_peers(
        &mut self,
        share: ShareId,
        msg: &GetPeers,
        observed_external: SocketAddrV4,
        now_us: u64,
        unix_time_s: i64,
    ) -> (PeersResponse, bool) {
        self.expire(now_us);
        let regs = self.registrations.entry(share).or_default();
        let fresh = Registration {
            peer_id: msg.peer_id,
            external: observed_external,
            local: msg.local_addr,
            last_seen_us: now_us,
        };
        match regs.iter_mut().find(|r| r.peer_id == msg.peer_id) {
            Some(existing) => *existing = fresh,
            None => regs.push(fresh),
        }
        let mut entries: Vec<PeerEntry> = regs
            .iter()
            .map(|r| PeerEntry {
                addr: r.external,
                local_addr: r.local,
                peer_id: r.peer_id,
            })
            .collect();
        entries.sort_by_key(|e| (e.peer_id, e.addr));
        let first = self.answered.insert((msg.peer_id, share));
        let response = PeersResponse {
            external_addr: observed_external,
            peers: entries,
            share_id: share,
            time: unix_time_s,
        };
        (response, first)
    }

    /// Drops registrations whose age exceeds the expiry horizon.
    pub fn expire(&mut self, now_us: u64) {
        let horizon_us = EXPIRY_INTERVALS * self.announce_interval_s * 1_000_000;
        for regs in self.registrations.values_mut() {
            regs.retain(|r| now_us.saturating_sub(r.last_seen_us) <= horizon_us);
        }
        self.registrations.retain(|_, regs| !regs.is_empty());
    }

    pub fn live_registrations(&self, share: &ShareId) -> &[Registration] {
        self.registrations
            .get(share)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}
