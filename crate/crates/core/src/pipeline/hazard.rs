//! Stall decisions for the instruction waiting in ID.
//!
//! Forwarding covers every ALU-to-ALU dependence. What it cannot cover:
//!
//! * a load whose consumer is directly behind it (one bubble);
//! * anything involving a CSR instruction, whose access happens in WB. The
//!   consumer waits until the producer has left WB, i.e. until it is at least
//!   four slots ahead (one to three bubbles).

use crate::isa::{Instr, InstrClass};

/// `older[d]` is the live instruction `d + 1` slots ahead of `consumer`
/// (`None` for bubbles and killed slots).
pub fn must_stall(consumer: &Instr, older: [Option<&Instr>; 3]) -> bool {
    older.iter().enumerate().any(|(d, p)| p.is_some_and(|p| blocks(consumer, p, d + 1)))
}

fn blocks(c: &Instr, p: &Instr, distance: usize) -> bool {
    let feeds = p.dest().is_some_and(|r| c.reads(r));
    match p.class() {
        InstrClass::Load if distance == 1 && feeds => return true,
        InstrClass::Csr => {
            if feeds {
                return true;
            }
            if c.class() == InstrClass::Csr && c.csr_writes() && c.csr == p.csr {
                return true;
            }
        }
        _ => {}
    }
    c.class() == InstrClass::Csr && feeds
}
