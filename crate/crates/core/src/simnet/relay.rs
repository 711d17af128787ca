//! Relay rendezvous negotiation state machine.
//!
//! The bridge between two firewalled peers is set up by an eight-message
//! script through the relay server. Three of the messages have a documented
//! byte shape (the initial contact and the two nonces); the rest are opaque
//! blobs whose ordering is still enforced. Any out-of-order or replayed
//! message poisons the session permanently.

use std::fmt;

use crate::keys::{PeerId, ShareId};

/// The eight negotiation messages in protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayEvent {
    /// Caller asks the relay for a named remote peer.
    PeerInit,
    /// Relay acknowledges the request.
    RelayAck,
    /// Caller supplies its session nonce.
    PeerNonce,
    /// Relay bootstraps counters with the callee.
    CounterInit,
    /// Callee supplies its session nonce.
    RemoteNonce,
    /// Relay delivers key material to the caller.
    RemoteKey,
    /// Relay delivers key material to the callee.
    LocalKey,
    /// Caller opens the bridge.
    BridgeOpen,
}

impl RelayEvent {
    pub const SCRIPT: [RelayEvent; 8] = [
        RelayEvent::PeerInit,
        RelayEvent::RelayAck,
        RelayEvent::PeerNonce,
        RelayEvent::CounterInit,
        RelayEvent::RemoteNonce,
        RelayEvent::RemoteKey,
        RelayEvent::LocalKey,
        RelayEvent::BridgeOpen,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RelayEvent::PeerInit => "peer-init",
            RelayEvent::RelayAck => "relay-ack",
            RelayEvent::PeerNonce => "peer-nonce",
            RelayEvent::CounterInit => "counter-init",
            RelayEvent::RemoteNonce => "remote-nonce",
            RelayEvent::RemoteKey => "remote-key",
            RelayEvent::LocalKey => "local-key",
            RelayEvent::BridgeOpen => "bridge-open",
        }
    }

    /// True for the two steps that must carry a 16-byte nonce.
    fn carries_nonce(self) -> bool {
        matches!(self, RelayEvent::PeerNonce | RelayEvent::RemoteNonce)
    }
}

impl fmt::Display for RelayEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Negotiation progress. `Failed` is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaySessionState {
    Init,
    Acked,
    NonceReceivedA,
    CountersExchanged,
    NonceReceivedB,
    KeysExchanged,
    Bridged,
    Failed,
}

impl RelaySessionState {
    pub fn label(self) -> &'static str {
        match self {
            RelaySessionState::Init => "init",
            RelaySessionState::Acked => "acked",
            RelaySessionState::NonceReceivedA => "nonce-received-a",
            RelaySessionState::CountersExchanged => "counters-exchanged",
            RelaySessionState::NonceReceivedB => "nonce-received-b",
            RelaySessionState::KeysExchanged => "keys-exchanged",
            RelaySessionState::Bridged => "bridged",
            RelaySessionState::Failed => "failed",
        }
    }
}

/// The order violation that killed a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolViolation {
    pub expected: RelayEvent,
    pub got: RelayEvent,
}

impl fmt::Display for ProtocolViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {} but {} arrived", self.expected, self.got)
    }
}

/// One caller/callee pair's progress through the negotiation.
#[derive(Debug, Clone)]
pub struct RelaySession {
    pub peer_a: PeerId,
    pub peer_b: PeerId,
    pub share: ShareId,
    pub nonce_a: Option<[u8; 16]>,
    pub nonce_b: Option<[u8; 16]>,
    steps_done: usize,
    state: RelaySessionState,
    pub violation: Option<ProtocolViolation>,
}

impl RelaySession {
    pub fn new(peer_a: PeerId, peer_b: PeerId, share: ShareId) -> RelaySession {
        RelaySession {
            peer_a,
            peer_b,
            share,
            nonce_a: None,
            nonce_b: None,
            steps_done: 0,
            state: RelaySessionState::Init,
            violation: None,
        }
    }

    pub fn state(&self) -> RelaySessionState {
        self.state
    }

    fn project(steps_done: usize) -> RelaySessionState {
        match steps_done {
            0 | 1 => RelaySessionState::Init,
            2 => RelaySessionState::Acked,
            3 => RelaySessionState::NonceReceivedA,
            4 => RelaySessionState::CountersExchanged,
            5 => RelaySessionState::NonceReceivedB,
            6 | 7 => RelaySessionState::KeysExchanged,
            _ => RelaySessionState::Bridged,
        }
    }

    /// Advances exactly one step when `incoming` is the expected message;
    /// anything else, including a replay or a nonce step without its nonce,
    /// fails the session permanently.
    pub fn advance(
        &mut self,
        incoming: RelayEvent,
        nonce: Option<[u8; 16]>,
    ) -> RelaySessionState {
        if self.state == RelaySessionState::Failed {
            return self.state;
        }
        let expected = match RelayEvent::SCRIPT.get(self.steps_done) {
            Some(step) => *step,
            None => {
                self.fail(RelayEvent::BridgeOpen, incoming);
                return self.state;
            }
        };
        if incoming != expected || (incoming.carries_nonce() && nonce.is_none()) {
            self.fail(expected, incoming);
            return self.state;
        }
        match incoming {
            RelayEvent::PeerNonce => self.nonce_a = nonce,
            RelayEvent::RemoteNonce => self.nonce_b = nonce,
            _ => {}
        }
        self.steps_done += 1;
        self.state = RelaySession::project(self.steps_done);
        self.state
    }

    fn fail(&mut self, expected: RelayEvent, got: RelayEvent) {
        self.state = RelaySessionState::Failed;
        self.violation = Some(ProtocolViolation { expected, got });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> RelaySession {
        RelaySession::new(PeerId([1; 20]), PeerId([2; 20]), ShareId([9; 20]))
    }

    fn nonce_for(event: RelayEvent) -> Option<[u8; 16]> {
        match event {
            RelayEvent::PeerNonce => Some([0xaa; 16]),
            RelayEvent::RemoteNonce => Some([0xbb; 16]),
            _ => None,
        }
    }

    #[test]
    fn in_order_script_reaches_bridged() {
        let mut s = session();
        let expected_states = [
            RelaySessionState::Init,
            RelaySessionState::Acked,
            RelaySessionState::NonceReceivedA,
            RelaySessionState::CountersExchanged,
            RelaySessionState::NonceReceivedB,
            RelaySessionState::KeysExchanged,
            RelaySessionState::KeysExchanged,
            RelaySessionState::Bridged,
        ];
        for (event, expected) in RelayEvent::SCRIPT.into_iter().zip(expected_states) {
            assert_eq!(s.advance(event, nonce_for(event)), expected);
        }
        assert_eq!(s.nonce_a, Some([0xaa; 16]));
        assert_eq!(s.nonce_b, Some([0xbb; 16]));
        assert!(s.violation.is_none());
    }

    #[test]
    fn every_adjacent_transposition_fails() {
        for swap_at in 0..7 {
            let mut script = RelayEvent::SCRIPT;
            script.swap(swap_at, swap_at + 1);
            let mut s = session();
            let mut outcome = RelaySessionState::Init;
            for event in script {
                outcome = s.advance(event, nonce_for(event));
                if outcome == RelaySessionState::Failed {
                    break;
                }
            }
            assert_eq!(outcome, RelaySessionState::Failed, "swap at {swap_at}");
            assert!(s.violation.is_some());
        }
    }

    #[test]
    fn replayed_step_fails() {
        let mut s = session();
        s.advance(RelayEvent::PeerInit, None);
        assert_eq!(s.advance(RelayEvent::PeerInit, None), RelaySessionState::Failed);
        assert_eq!(
            s.violation,
            Some(ProtocolViolation {
                expected: RelayEvent::RelayAck,
                got: RelayEvent::PeerInit,
            })
        );
    }

    #[test]
    fn nonce_steps_without_nonces_fail() {
        let mut s = session();
        s.advance(RelayEvent::PeerInit, None);
        s.advance(RelayEvent::RelayAck, None);
        assert_eq!(s.advance(RelayEvent::PeerNonce, None), RelaySessionState::Failed);
    }

    #[test]
    fn failed_sessions_stay_failed() {
        let mut s = session();
        s.advance(RelayEvent::RelayAck, None);
        assert_eq!(s.state(), RelaySessionState::Failed);
        assert_eq!(s.advance(RelayEvent::PeerInit, None), RelaySessionState::Failed);
    }
}
