//! Total-order event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::phy::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    FrameEnd,
    AckEnd,
    Rx1Open,
    Rx2Open,
    AckStart,
    Generate,
    /// Never queued; a frame starts while its generation event is handled.
    FrameStart,
}

impl EventKind {
    /// Tie-break at equal timestamps: endings release the medium before
    /// anything new starts on it.
    fn priority(self) -> u8 {
        match self {
            Self::FrameEnd => 0,
            Self::AckEnd => 1,
            Self::Rx1Open => 2,
            Self::Rx2Open => 3,
            Self::AckStart => 4,
            Self::Generate => 5,
            Self::FrameStart => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FrameStart => "frame_start",
            Self::FrameEnd => "frame_end",
            Self::Rx1Open => "rx1_open",
            Self::Rx2Open => "rx2_open",
            Self::AckStart => "ack_start",
            Self::AckEnd => "ack_end",
            Self::Generate => "generate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimEvent {
    pub time: Micros,
    pub kind: EventKind,
    /// Device the event belongs to.
    pub subject: u32,
    /// Frame index for frame and downlink events.
    pub frame: u32,
    seq: u64,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        (other.time, other.kind.priority(), other.subject, other.seq).cmp(&(
            self.time,
            self.kind.priority(),
            self.subject,
            self.seq,
        ))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: Micros, kind: EventKind, subject: u32, frame: u32) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { time, kind, subject, frame, seq });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
