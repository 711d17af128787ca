//! Building blocks for investigating BitTorrent Sync v1.4/v2.0 traffic.
//!
//! The crate is organised around the investigator workflow. [`bencode`] and
//! [`wire`] are byte-exact codecs for the protocol's payload grammar and
//! message set, [`keys`] handles the access-key and share-id taxonomy,
//! [`simnet`] is a deterministic in-memory discovery network to run cases
//! against, and [`dissector`] plus [`crawler`] turn recorded traffic and
//! peer enumeration into analyst reports.

pub mod bencode;
pub mod crawler;
pub mod dissector;
pub mod keys;
pub mod simnet;
pub mod wire;
