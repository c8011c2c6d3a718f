//! Two-party execution harness: an instrumented in-process channel, phase
//! transcripts, and drivers that run both parties to completion.
//!
//! Every inter-party byte flows through [`Channel::exchange`]; the parties
//! hold no reference to each other, so there is no hidden communication path.
//! A round is one paired exchange (both directions count as the same round,
//! matching the usual simultaneous-message model).

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    P1,
    P2,
}

impl Party {
    pub fn idx(self) -> usize {
        match self {
            Party::P1 => 0,
            Party::P2 => 1,
        }
    }
    pub fn other(self) -> Party {
        match self {
            Party::P1 => Party::P2,
            Party::P2 => Party::P1,
        }
    }
    pub fn is_p1(self) -> bool {
        self == Party::P1
    }
}

/// How the two party threads interleave. Both modes must produce identical
/// transcripts; `Lockstep` serializes the parties with a turn token for
/// deterministic debugging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimMode {
    #[default]
    Threaded,
    Lockstep,
}

/// Accumulated traffic for one protocol phase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseStats {
    /// Bytes sent, indexed by sender (0 = P1→P2, 1 = P2→P1).
    pub bytes: [u64; 2],
    /// Paired exchanges completed in this phase.
    pub rounds: u64,
    /// Ring elements sent per label, indexed by sender.
    pub elems: BTreeMap<String, [u64; 2]>,
    /// Local work units (e.g. FSS evaluations) recorded by each party.
    pub local_ops: [u64; 2],
}

/// Finalized per-phase record, exported into reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub phase: String,
    pub bytes_p1_to_p2: u64,
    pub bytes_p2_to_p1: u64,
    pub rounds: u64,
    /// Simulated network time: rounds times the configured one-way latency.
    /// Timestamp arithmetic, not sleeping, so runs stay fast and reproducible.
    pub simulated_ms: f64,
    pub elems: BTreeMap<String, [u64; 2]>,
    pub local_ops: [u64; 2],
}

struct Message {
    label: &'static str,
    elems: u64,
    payload: Vec<u8>,
}

struct ChannelState {
    queues: [std::collections::VecDeque<Message>; 2],
    sent: [u64; 2],
    phase: [String; 2],
    stats: BTreeMap<String, PhaseStats>,
    phase_order: Vec<String>,
    mode: SimMode,
    turn: Party,
    done: [bool; 2],
    poisoned: bool,
}

pub struct Channel {
    state: Mutex<ChannelState>,
    cond: Condvar,
    pub latency_ms: f64,
}

impl Channel {
    pub fn new(mode: SimMode, latency_ms: f64) -> Arc<Self> {
        Arc::new(Channel {
            state: Mutex::new(ChannelState {
                queues: [Default::default(), Default::default()],
                sent: [0, 0],
                phase: ["setup".into(), "setup".into()],
                stats: BTreeMap::new(),
                phase_order: vec!["setup".into()],
                mode,
                turn: Party::P1,
                done: [false, false],
                poisoned: false,
            }),
            cond: Condvar::new(),
            latency_ms,
        })
    }

    /// Marks the start of a new accounting phase for `party`.
    pub fn set_phase(&self, party: Party, name: &str) {
        let mut st = self.state.lock().unwrap();
        st.phase[party.idx()] = name.to_string();
        if !st.phase_order.iter().any(|p| p == name) {
            st.phase_order.push(name.to_string());
        }
    }

    /// Records `n` units of local (non-interactive) work for `party`.
    pub fn add_local_ops(&self, party: Party, n: u64) {
        let mut st = self.state.lock().unwrap();
        let phase = st.phase[party.idx()].clone();
        st.stats.entry(phase).or_default().local_ops[party.idx()] += n;
    }

    /// Symmetric exchange: deposits `payload`, returns the peer's payload for
    /// the same step. `elems` is the ring-element count carried, used for the
    /// per-label conformance counters.
    pub fn exchange(&self, party: Party, label: &'static str, elems: u64, payload: Vec<u8>) -> Vec<u8> {
        let me = party.idx();
        let other = party.other().idx();
        let mut st = self.state.lock().unwrap();
        if st.mode == SimMode::Lockstep {
            while st.turn != party && !st.done[other] {
                st = self.cond.wait(st).unwrap();
            }
        }
        assert!(!st.poisoned, "channel poisoned by a peer panic");
        // account the send
        st.sent[me] += 1;
        let completes_round = st.sent[me] <= st.sent[other];
        let phase = st.phase[me].clone();
        let entry = st.stats.entry(phase).or_default();
        entry.bytes[me] += payload.len() as u64;
        entry.elems.entry(label.to_string()).or_insert([0, 0])[me] += elems;
        if completes_round {
            entry.rounds += 1;
        }
        st.queues[me].push_back(Message {
            label,
            elems,
            payload,
        });
        if st.mode == SimMode::Lockstep {
            st.turn = party.other();
        }
        self.cond.notify_all();
        loop {
            if st.poisoned {
                panic!("channel poisoned by a peer panic");
            }
            let gated = st.mode == SimMode::Lockstep && st.turn != party && !st.done[other];
            if !st.queues[other].is_empty() && !gated {
                break;
            }
            st = self.cond.wait(st).unwrap();
        }
        let msg = st.queues[other].pop_front().unwrap();
        assert_eq!(msg.label, label, "parties disagree on exchange label");
        assert_eq!(msg.elems, elems, "parties disagree on element count");
        msg.payload
    }

    fn finish(&self, party: Party) {
        let mut st = self.state.lock().unwrap();
        st.done[party.idx()] = true;
        st.turn = party.other();
        self.cond.notify_all();
    }

    fn poison(&self) {
        let mut st = self.state.lock().unwrap();
        st.poisoned = true;
        self.cond.notify_all();
    }

    fn wait_turn(&self, party: Party) {
        let mut st = self.state.lock().unwrap();
        while st.mode == SimMode::Lockstep && st.turn != party && !st.done[party.other().idx()] {
            st = self.cond.wait(st).unwrap();
        }
    }

    /// Snapshots all phase transcripts in first-use order.
    pub fn transcripts(&self) -> Vec<Transcript> {
        let st = self.state.lock().unwrap();
        st.phase_order
            .iter()
            .filter_map(|name| {
                let s = st.stats.get(name)?;
                Some(Transcript {
                    phase: name.clone(),
                    bytes_p1_to_p2: s.bytes[0],
                    bytes_p2_to_p1: s.bytes[1],
                    rounds: s.rounds,
                    simulated_ms: s.rounds as f64 * self.latency_ms,
                    elems: s.elems.clone(),
                    local_ops: s.local_ops,
                })
            })
            .collect()
    }

    pub fn phase_stats(&self, phase: &str) -> PhaseStats {
        self.state
            .lock()
            .unwrap()
            .stats
            .get(phase)
            .cloned()
            .unwrap_or_default()
    }
}

/// Runs the two party closures to completion and returns their outputs.
///
/// In `Lockstep` mode exactly one party executes at a time, alternating at
/// exchange boundaries; in `Threaded` mode both free-run. The channel's
/// transcript is identical either way because accounting is keyed to the
/// message sequence, not to thread timing.
pub fn run_pair<A, B, FA, FB>(chan: &Arc<Channel>, f1: FA, f2: FB) -> (A, B)
where
    A: Send + 'static,
    B: Send + 'static,
    FA: FnOnce() -> A + Send + 'static,
    FB: FnOnce() -> B + Send + 'static,
{
    std::thread::scope(|s| {
        let c1 = chan.clone();
        let c2 = chan.clone();
        let h1 = s.spawn(move || {
            c1.wait_turn(Party::P1);
            let guard = PoisonGuard(&c1);
            let out = f1();
            std::mem::forget(guard);
            c1.finish(Party::P1);
            out
        });
        let h2 = s.spawn(move || {
            c2.wait_turn(Party::P2);
            let guard = PoisonGuard(&c2);
            let out = f2();
            std::mem::forget(guard);
            c2.finish(Party::P2);
            out
        });
        let r1 = h1.join();
        let r2 = h2.join();
        match (r1, r2) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => std::panic::resume_unwind(e),
        }
    })
}

/// Unblocks the peer if this party's closure panics, so test failures
/// propagate instead of deadlocking.
struct PoisonGuard<'a>(&'a Channel);

impl Drop for PoisonGuard<'_> {
    fn drop(&mut self) {
        self.0.poison();
    }
}
