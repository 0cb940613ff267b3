//! Deterministic simulation of ARP-poisoning person-in-the-middle attacks on
//! the command link between a robot's digital twin and the physical robot.
//!
//! [`wire`] encodes TCPROS frames, [`netsim`] runs the switched LAN as a
//! discrete-event loop, [`pubsub`] provides ROS1-style topics over it,
//! [`attack`] poisons and rewrites, [`plant`] models the robots and their
//! safety envelope, [`guard`] holds the link defences and [`harness`] wires
//! whole scenarios together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod guard;
pub mod harness;
pub mod netsim;
pub mod plant;
pub mod pubsub;
pub mod wire;
