//! Event kinds, the per-instruction triggered-events record, and event totals.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Index, IndexMut};

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Every event the monitor can observe. `Cycle` and `Instret` are wired to
/// `mcycle`/`minstret`; the rest are selectable through `mhpmevent3..31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Cycle,
    Instret,
    Exception,
    ExtInt,
    TimeInt,
    Branch,
    BranchNt,
    UncondJump,
    Hazard,
    MemAccess,
    Load,
    Store,
    Fetch,
}

pub const EVENT_KINDS: usize = 13;

impl EventKind {
    pub const ALL: [EventKind; EVENT_KINDS] = [
        EventKind::Cycle,
        EventKind::Instret,
        EventKind::Exception,
        EventKind::ExtInt,
        EventKind::TimeInt,
        EventKind::Branch,
        EventKind::BranchNt,
        EventKind::UncondJump,
        EventKind::Hazard,
        EventKind::MemAccess,
        EventKind::Load,
        EventKind::Store,
        EventKind::Fetch,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Cycle => "CYCLE",
            EventKind::Instret => "INSTRET",
            EventKind::Exception => "EXCEPTION",
            EventKind::ExtInt => "EXT_INT",
            EventKind::TimeInt => "TIME_INT",
            EventKind::Branch => "BRANCH",
            EventKind::BranchNt => "BRANCH_NT",
            EventKind::UncondJump => "UNCOND_JUMP",
            EventKind::Hazard => "HAZARD",
            EventKind::MemAccess => "MEM_ACCESS",
            EventKind::Load => "LOAD",
            EventKind::Store => "STORE",
            EventKind::Fetch => "FETCH",
        }
    }

    pub fn from_name(name: &str) -> Option<EventKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// `mhpmevent` selector code. Zero selects nothing; `Cycle` and
    /// `Instret` have fixed counters and no code.
    pub fn selector_code(self) -> Option<u32> {
        match self {
            EventKind::Cycle | EventKind::Instret => None,
            k => Some(k.index() as u32 - 1),
        }
    }

    pub fn from_selector(code: u32) -> Option<EventKind> {
        match code {
            1..=11 => Some(Self::ALL[code as usize + 1]),
            _ => None,
        }
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest multiplicity a record field can hold (4-bit fields).
pub const MAX_MULTIPLICITY: u8 = 15;

/// The events raised by one in-flight instruction, chained from stage to
/// stage until the count tick one cycle after write-back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TriggeredEvents([u8; EVENT_KINDS]);

impl TriggeredEvents {
    pub fn get(&self, kind: EventKind) -> u8 {
        self.0[kind.index()]
    }

    pub fn set(&mut self, kind: EventKind) {
        self.0[kind.index()] = self.0[kind.index()].max(1);
    }

    pub fn clear(&mut self, kind: EventKind) {
        self.0[kind.index()] = 0;
    }

    pub fn add(&mut self, kind: EventKind, n: u8) {
        let slot = &mut self.0[kind.index()];
        *slot = slot.saturating_add(n).min(MAX_MULTIPLICITY);
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// Marks the instruction as excepting: the exception is set and the
    /// provisional retirement withdrawn.
    pub fn raise_exception(&mut self) {
        self.set(EventKind::Exception);
        self.clear(EventKind::Instret);
    }

    /// What survives a flush: only the fetch, which already happened.
    pub fn squashed(&self) -> TriggeredEvents {
        let mut out = TriggeredEvents::default();
        out.0[EventKind::Fetch.index()] = self.get(EventKind::Fetch);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventKind, u8)> + '_ {
        EventKind::ALL.into_iter().map(|k| (k, self.get(k))).filter(|&(_, v)| v > 0)
    }

    /// Checks the per-record invariants, returning the first violated one.
    pub fn check(&self) -> Result<(), &'static str> {
        use EventKind::*;
        if self.get(Instret) > 1 {
            return Err("INSTRET > 1");
        }
        if self.get(Fetch) > 1 {
            return Err("FETCH > 1");
        }
        if self.get(Branch) + self.get(BranchNt) > 1 {
            return Err("BRANCH + BRANCH_NT > 1");
        }
        if self.get(Exception) > 1 {
            return Err("EXCEPTION > 1");
        }
        if self.get(MemAccess) != self.get(Load) + self.get(Store) {
            return Err("MEM_ACCESS != LOAD + STORE");
        }
        if self.get(Exception) == 1 && self.get(Instret) != 0 {
            return Err("excepting record retires");
        }
        Ok(())
    }
}

impl fmt::Display for TriggeredEvents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, n) in self.iter() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}×{n}")?;
        }
        Ok(())
    }
}

/// Sum of records handed to the monitor in a single cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventDelta(pub [u32; EVENT_KINDS]);

impl EventDelta {
    pub fn get(&self, kind: EventKind) -> u32 {
        self.0[kind.index()]
    }

    pub fn accumulate(&mut self, record: &TriggeredEvents) {
        for k in EventKind::ALL {
            self.0[k.index()] += record.get(k) as u32;
        }
    }

    pub fn with_cycle(mut self) -> Self {
        self.0[EventKind::Cycle.index()] += 1;
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventKind, u32)> + '_ {
        EventKind::ALL.into_iter().map(|k| (k, self.get(k))).filter(|&(_, v)| v > 0)
    }
}

impl From<TriggeredEvents> for EventDelta {
    fn from(r: TriggeredEvents) -> Self {
        let mut d = EventDelta::default();
        d.accumulate(&r);
        d
    }
}

/// Per-kind 64-bit counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EventCounts(pub [u64; EVENT_KINDS]);

impl EventCounts {
    pub fn add_delta(&mut self, d: &EventDelta) {
        for k in EventKind::ALL {
            self.0[k.index()] += d.get(k) as u64;
        }
    }

    pub fn add_record(&mut self, r: &TriggeredEvents) {
        for k in EventKind::ALL {
            self.0[k.index()] += r.get(k) as u64;
        }
    }
}

impl Index<EventKind> for EventCounts {
    type Output = u64;
    fn index(&self, k: EventKind) -> &u64 {
        &self.0[k.index()]
    }
}

impl IndexMut<EventKind> for EventCounts {
    fn index_mut(&mut self, k: EventKind) -> &mut u64 {
        &mut self.0[k.index()]
    }
}

impl Add for EventCounts {
    type Output = EventCounts;
    fn add(mut self, rhs: EventCounts) -> EventCounts {
        for i in 0..EVENT_KINDS {
            self.0[i] += rhs.0[i];
        }
        self
    }
}

impl Serialize for EventCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(EVENT_KINDS))?;
        for k in EventKind::ALL {
            map.serialize_entry(k.name(), &self[k])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EventCounts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, u64>::deserialize(d)?;
        let mut out = EventCounts::default();
        for (name, v) in raw {
            let k = EventKind::from_name(&name)
                .ok_or_else(|| D::Error::custom(format!("unknown event `{name}`")))?;
            out[k] = v;
        }
        Ok(out)
    }
}

/// Event totals of a run plus the trap bookkeeping the execution model
/// needs. Trap entries are the EXCEPTION + EXT_INT + TIME_INT events; exits
/// are MRET retirements. Matched entry/exit pairs are `trap_pairs`; the
/// remainder are charged one side only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventTotals {
    pub events: EventCounts,
    #[serde(default)]
    pub trap_pairs: u64,
    #[serde(default)]
    pub back_to_back_mret_traps: u64,
    #[serde(default)]
    pub unmatched_entries: u64,
    #[serde(default)]
    pub unmatched_exits: u64,
}

impl EventTotals {
    /// Builds totals whose trap bookkeeping is derived from entry/exit counts.
    pub fn from_counts(events: EventCounts, trap_exits: u64, back_to_back: u64) -> Self {
        let entries = events[EventKind::Exception] + events[EventKind::ExtInt] + events[EventKind::TimeInt];
        let pairs = entries.min(trap_exits);
        EventTotals {
            events,
            trap_pairs: pairs,
            back_to_back_mret_traps: back_to_back,
            unmatched_entries: entries - pairs,
            unmatched_exits: trap_exits - pairs,
        }
    }

    pub fn get(&self, k: EventKind) -> u64 {
        self.events[k]
    }

    pub fn trap_entries(&self) -> u64 {
        self.trap_pairs + self.unmatched_entries
    }

    pub fn trap_exits(&self) -> u64 {
        self.trap_pairs + self.unmatched_exits
    }

    pub fn check(&self) -> Result<(), String> {
        if self.back_to_back_mret_traps > self.trap_pairs {
            return Err(format!(
                "back-to-back traps ({}) exceed trap pairs ({})",
                self.back_to_back_mret_traps, self.trap_pairs
            ));
        }
        Ok(())
    }
}

impl Add for EventTotals {
    type Output = EventTotals;
    fn add(self, rhs: EventTotals) -> EventTotals {
        EventTotals {
            events: self.events + rhs.events,
            trap_pairs: self.trap_pairs + rhs.trap_pairs,
            back_to_back_mret_traps: self.back_to_back_mret_traps + rhs.back_to_back_mret_traps,
            unmatched_entries: self.unmatched_entries + rhs.unmatched_entries,
            unmatched_exits: self.unmatched_exits + rhs.unmatched_exits,
        }
    }
}
