//! Closed-form execution model: total cycles from event totals.
//!
//! ```text
//! cycles = INSTRET*retire + FETCH*fetch + HAZARD*bubble
//!        + (BRANCH + UNCOND_JUMP)*transfer + LOAD*load_extra + STORE*store_extra
//!        + entries*trap_entry + exits*trap_exit
//!        - back_to_back*(trap_entry + trap_exit - mret_then_trap_total)
//!        + initial_fill
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventKind, EventTotals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySchedule {
    pub fetch_cost: u64,
    pub retire_cost: u64,
    pub hazard_bubble_cost: u64,
    pub load_extra: u64,
    pub store_extra: u64,
    pub taken_transfer_penalty: u64,
    pub trap_entry: u64,
    pub trap_exit: u64,
    pub mret_then_trap_total: u64,
    pub initial_fill: u64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule {
            fetch_cost: 1,
            retire_cost: 1,
            hazard_bubble_cost: 1,
            load_extra: 2,
            store_extra: 1,
            taken_transfer_penalty: 2,
            trap_entry: 4,
            trap_exit: 4,
            mret_then_trap_total: 7,
            initial_fill: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("cycle total overflows 64 bits")]
    Overflow,
    #[error("inconsistent totals: {0}")]
    Inconsistent(&'static str),
}

/// One line of the breakdown. `count` is `None` for the fill row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub event: String,
    pub count: Option<u64>,
    pub cycles_per_event: i64,
    pub cumulative: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelBreakdown {
    pub rows: Vec<BreakdownRow>,
    pub total: u64,
}

impl ModelBreakdown {
    /// Cumulative column with consecutive repeats collapsed.
    pub fn distinct_cumulatives(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.cumulative) {
                out.push(r.cumulative);
            }
        }
        out
    }

    pub const CSV_HEADER: &'static str = "Event,Event count,Cycles per event,Total cycles per event";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let count = r.count.map_or_else(|| "-".to_string(), |c| c.to_string());
            let _ = writeln!(s, "{},{},{},{}", r.event, count, r.cycles_per_event, r.cumulative);
        }
        s
    }

    /// Parses the output of [`ModelBreakdown::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::CSV_HEADER) {
            return Err("missing breakdown header".into());
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("line {}: malformed row `{line}`", n + 2);
            if f.len() != 4 {
                return Err(bad());
            }
            let count = match f[1] {
                "-" => None,
                c => Some(c.parse().map_err(|_| bad())?),
            };
            rows.push(BreakdownRow {
                event: f[0].to_string(),
                count,
                cycles_per_event: f[2].parse().map_err(|_| bad())?,
                cumulative: f[3].parse().map_err(|_| bad())?,
            });
        }
        let total = rows.last().map_or(0, |r| r.cumulative);
        Ok(ModelBreakdown { rows, total })
    }

    /// Recomputes the total from counts and per-event cycles.
    pub fn resum(&self) -> i128 {
        self.rows
            .iter()
            .map(|r| r.count.unwrap_or(1) as i128 * r.cycles_per_event as i128)
            .sum()
    }
}

/// Predicted total cycles.
pub fn predict(t: &EventTotals, s: &PenaltySchedule) -> Result<u64, ModelError> {
    breakdown(t, s).map(|b| b.total)
}

/// Table-shaped breakdown: retired, exceptions, external interrupts, timer
/// interrupts, branches, jumps, hazards, loads, stores, fetches, trap
/// corrections (only when non-zero), initial fill.
pub fn breakdown(t: &EventTotals, s: &PenaltySchedule) -> Result<ModelBreakdown, ModelError> {
    use EventKind::*;
    t.check().map_err(|_| ModelError::Inconsistent("back-to-back traps exceed trap pairs"))?;
    let entries = t.get(Exception) + t.get(ExtInt) + t.get(TimeInt);
    if entries != t.trap_entries() {
        return Err(ModelError::Inconsistent("trap entries disagree with trap events"));
    }
    let round_trip = s.trap_entry.checked_add(s.trap_exit).ok_or(ModelError::Overflow)?;
    let as_i64 = |v: u64| i64::try_from(v).map_err(|_| ModelError::Overflow);
    let rt = as_i64(round_trip)?;
    let exit = as_i64(s.trap_exit)?;

    let mut rows: Vec<(&str, Option<u64>, i64, bool)> = vec![
        ("Retired instructions", Some(t.get(Instret)), as_i64(s.retire_cost)?, true),
        ("Exceptions", Some(t.get(Exception)), rt, true),
        ("External interrupts", Some(t.get(ExtInt)), rt, true),
        ("Timer interrupts", Some(t.get(TimeInt)), rt, true),
        ("Branches", Some(t.get(Branch)), as_i64(s.taken_transfer_penalty)?, true),
        ("Jumps", Some(t.get(UncondJump)), as_i64(s.taken_transfer_penalty)?, true),
        ("Hazards", Some(t.get(Hazard)), as_i64(s.hazard_bubble_cost)?, true),
        ("Loads", Some(t.get(Load)), as_i64(s.load_extra)?, true),
        ("Stores", Some(t.get(Store)), as_i64(s.store_extra)?, true),
        ("Fetches", Some(t.get(Fetch)), as_i64(s.fetch_cost)?, true),
    ];
    let b2b = as_i64(s.mret_then_trap_total)? - rt;
    rows.push(("MRET followed by trap", Some(t.back_to_back_mret_traps), b2b, false));
    rows.push(("Unreturned trap entries", Some(t.unmatched_entries), -exit, false));
    rows.push(("Trap exits without entry", Some(t.unmatched_exits), exit, false));
    rows.push(("Initial pipeline filling", None, as_i64(s.initial_fill)?, true));

    let mut acc: i128 = 0;
    let mut out = Vec::new();
    for (event, count, per, always) in rows {
        if !always && count == Some(0) {
            continue;
        }
        let c = count.unwrap_or(1);
        acc = (c as i128)
            .checked_mul(per as i128)
            .and_then(|v| acc.checked_add(v))
            .ok_or(ModelError::Overflow)?;
        if acc > u64::MAX as i128 {
            return Err(ModelError::Overflow);
        }
        if acc < 0 {
            return Err(ModelError::Inconsistent("negative running total"));
        }
        out.push(BreakdownRow { event: event.to_string(), count, cycles_per_event: per, cumulative: acc as u64 });
    }
    Ok(ModelBreakdown { rows: out, total: acc as u64 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub predicted: u64,
    pub measured: u64,
    pub delta: i64,
    pub pass: bool,
    pub breakdown: ModelBreakdown,
}

/// Compares a measured cycle count against the model.
pub fn validate(
    totals: &EventTotals,
    measured: u64,
    s: &PenaltySchedule,
) -> Result<ValidationReport, ModelError> {
    let breakdown = breakdown(totals, s)?;
    let predicted = breakdown.total;
    let delta = measured as i128 - predicted as i128;
    let delta = i64::try_from(delta).map_err(|_| ModelError::Overflow)?;
    Ok(ValidationReport { predicted, measured, delta, pass: delta == 0, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventCounts;
    use proptest::prelude::*;

    fn totals(pairs: &[(EventKind, u64)]) -> EventTotals {
        let mut c = EventCounts::default();
        for &(k, v) in pairs {
            c[k] = v;
        }
        EventTotals::from_counts(c, 0, 0)
    }

    #[test]
    fn zero_totals_cost_fill_only() {
        let b = breakdown(&EventTotals::default(), &PenaltySchedule::default()).unwrap();
        assert_eq!(b.total, 4);
        assert!(b.rows[..b.rows.len() - 1].iter().all(|r| r.cumulative == 0));
    }

    #[test]
    fn single_nop() {
        let t = totals(&[(EventKind::Instret, 1), (EventKind::Fetch, 1)]);
        assert_eq!(predict(&t, &PenaltySchedule::default()), Ok(6));
    }

    #[test]
    fn ten_and_ten() {
        let t = totals(&[(EventKind::Instret, 10), (EventKind::Fetch, 10)]);
        let b = breakdown(&t, &PenaltySchedule::default()).unwrap();
        assert_eq!(b.distinct_cumulatives(), vec![10, 20, 24]);
    }

    #[test]
    fn trap_round_trip_and_back_to_back() {
        let mut c = EventCounts::default();
        c[EventKind::Exception] = 2;
        let s = PenaltySchedule::default();
        assert_eq!(predict(&EventTotals::from_counts(c, 2, 0), &s), Ok(4 + 16));
        assert_eq!(predict(&EventTotals::from_counts(c, 2, 1), &s), Ok(4 + 15));
        // halted inside the handler: entry only
        assert_eq!(predict(&EventTotals::from_counts(c, 1, 0), &s), Ok(4 + 12));
        // a return without a matching entry
        assert_eq!(predict(&EventTotals::from_counts(EventCounts::default(), 1, 0), &s), Ok(8));
    }

    #[test]
    fn csv_roundtrip() {
        let t = totals(&[(EventKind::Instret, 3), (EventKind::Fetch, 9), (EventKind::Load, 1)]);
        let b = breakdown(&t, &PenaltySchedule::default()).unwrap();
        let back = ModelBreakdown::from_csv(&b.to_csv()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.resum(), b.total as i128);
    }

    #[test]
    fn overflow_is_reported() {
        let t = totals(&[(EventKind::Fetch, u64::MAX)]);
        assert_eq!(predict(&t, &PenaltySchedule::default()), Err(ModelError::Overflow));
    }

    fn arb_totals() -> impl Strategy<Value = EventTotals> {
        (proptest::array::uniform13(0u64..1_000_000), 0u64..1000, 0u64..1000).prop_map(
            |(ev, exits, b2b)| {
                let mut c = EventCounts(ev);
                c[EventKind::MemAccess] = c[EventKind::Load] + c[EventKind::Store];
                let entries = c[EventKind::Exception] + c[EventKind::ExtInt] + c[EventKind::TimeInt];
                let pairs = entries.min(exits);
                EventTotals::from_counts(c, exits, b2b.min(pairs))
            },
        )
    }

    fn arb_schedule() -> impl Strategy<Value = PenaltySchedule> {
        (proptest::array::uniform9(0u64..20), 0u64..20).prop_map(|(v, fill)| PenaltySchedule {
            fetch_cost: v[0],
            retire_cost: v[1],
            hazard_bubble_cost: v[2],
            load_extra: v[3],
            store_extra: v[4],
            taken_transfer_penalty: v[5],
            trap_entry: v[6],
            trap_exit: v[7],
            mret_then_trap_total: v[8].min(v[6] + v[7]),
            initial_fill: fill,
        })
    }

    proptest! {
        #[test]
        fn linearity(a in arb_totals(), b in arb_totals(), s in arb_schedule()) {
            let sum = predict(&(a + b), &s).unwrap();
            prop_assert_eq!(sum + s.initial_fill, predict(&a, &s).unwrap() + predict(&b, &s).unwrap());
        }

        #[test]
        fn last_row_is_total(t in arb_totals(), s in arb_schedule()) {
            let b = breakdown(&t, &s).unwrap();
            prop_assert_eq!(b.rows.last().unwrap().cumulative, b.total);
            prop_assert_eq!(b.resum(), b.total as i128);
        }

        #[test]
        fn monotone_in_each_event(t in arb_totals(), s in arb_schedule(), k in 0usize..13, d in 1u64..1000) {
            let mut bumped = t;
            bumped.events.0[k] += d;
            let kind = EventKind::ALL[k];
            if matches!(kind, EventKind::Exception | EventKind::ExtInt | EventKind::TimeInt) {
                bumped.unmatched_entries += d;
            }
            prop_assert!(predict(&bumped, &s).unwrap() >= predict(&t, &s).unwrap());
        }
    }
}
