//! Control and status registers: trap state and the performance monitor.
//!
//! Counter writes are staged in per-counter shadow registers and land at the
//! next cycle boundary, inside [`HpmCsrFile::apply_cycle`]. A staged write
//! beats any increment arriving in the same cycle. Every other CSR commits
//! immediately.

use thiserror::Error;

use crate::events::{EventDelta, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Privilege {
    User,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CsrError {
    #[error("illegal CSR access to {0:#05x}")]
    IllegalAccess(u16),
    #[error("write to read-only CSR {0:#05x}")]
    WriteToReadOnly(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CounterError {
    #[error("counter index 1 is reserved")]
    ReservedCounter,
    #[error("counter index {0} out of range")]
    OutOfRange(usize),
}

/// Read-modify-write flavour of a CSR instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrOp {
    Swap,
    SetBits,
    ClearBits,
}

pub mod addr {
    pub const MSTATUS: u16 = 0x300;
    pub const MISA: u16 = 0x301;
    pub const MIE: u16 = 0x304;
    pub const MTVEC: u16 = 0x305;
    pub const MCOUNTEREN: u16 = 0x306;
    pub const MCOUNTINHIBIT: u16 = 0x320;
    pub const MHPMEVENT3: u16 = 0x323;
    pub const MSCRATCH: u16 = 0x340;
    pub const MEPC: u16 = 0x341;
    pub const MCAUSE: u16 = 0x342;
    pub const MTVAL: u16 = 0x343;
    pub const MIP: u16 = 0x344;
    pub const MCYCLE: u16 = 0xB00;
    pub const MINSTRET: u16 = 0xB02;
    pub const MHPMCOUNTER3: u16 = 0xB03;
    pub const MCYCLEH: u16 = 0xB80;
    pub const CYCLE: u16 = 0xC00;
    pub const TIME: u16 = 0xC01;
    pub const INSTRET: u16 = 0xC02;
    pub const CYCLEH: u16 = 0xC80;
    pub const TIMEH: u16 = 0xC81;
    pub const MVENDORID: u16 = 0xF11;
    pub const MHARTID: u16 = 0xF14;
}

pub const MSTATUS_MIE: u32 = 1 << 3;
pub const MSTATUS_MPIE: u32 = 1 << 7;
pub const MSTATUS_MPP: u32 = 0b11 << 11;
pub const MIP_MTIP: u32 = 1 << 7;
pub const MIP_MEIP: u32 = 1 << 11;

const MISA_RV32I: u32 = 0x4000_0100;

/// Counter index whose counting is reserved (the `time` slot).
pub const RESERVED_COUNTER: usize = 1;

/// Counters, selectors, enable/inhibit masks and shadow registers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HpmCsrFile {
    counters: [u64; 32],
    selectors: [u32; 32],
    pub mcounteren: u32,
    pub mcountinhibit: u32,
    shadow: [Option<u64>; 32],
    realtime: u64,
}

impl Default for HpmCsrFile {
    fn default() -> Self {
        Self::new()
    }
}

impl HpmCsrFile {
    /// Reset state: all counters zero, `mhpmevent3..13` wired to selector
    /// codes 1..11 in counter order, user access disabled, nothing inhibited.
    pub fn new() -> Self {
        let mut selectors = [0; 32];
        for (i, s) in selectors.iter_mut().enumerate().take(14).skip(3) {
            *s = i as u32 - 2;
        }
        HpmCsrFile {
            counters: [0; 32],
            selectors,
            mcounteren: 0,
            mcountinhibit: 0,
            shadow: [None; 32],
            realtime: 0,
        }
    }

    pub fn realtime(&self) -> u64 {
        self.realtime
    }

    pub fn selector(&self, index: usize) -> u32 {
        self.selectors[index]
    }

    pub fn set_selector(&mut self, index: usize, code: u32) {
        if (3..32).contains(&index) {
            self.selectors[index] = code;
        }
    }

    /// Committed 64-bit counter value; pending shadow writes are invisible.
    pub fn read_counter64(&self, index: usize) -> Result<u64, CounterError> {
        match index {
            RESERVED_COUNTER => Err(CounterError::ReservedCounter),
            i if i >= 32 => Err(CounterError::OutOfRange(i)),
            i => Ok(self.counters[i]),
        }
    }

    pub fn pending_write(&self, index: usize) -> Option<u64> {
        self.shadow.get(index).copied().flatten()
    }

    /// Stages a full 64-bit write for the next cycle boundary.
    pub fn stage_write(&mut self, index: usize, value: u64) {
        debug_assert!(self.shadow[index].is_none(), "two writes to counter {index} in one cycle");
        self.shadow[index] = Some(value);
    }

    fn stage_half(&mut self, index: usize, high: bool, value: u32) {
        let base = self.counters[index];
        let new = if high {
            (base & 0xFFFF_FFFF) | ((value as u64) << 32)
        } else {
            (base & !0xFFFF_FFFF) | value as u64
        };
        self.stage_write(index, new);
    }

    /// Cycle-boundary update. Each counter first takes a pending shadow
    /// write (dropping this cycle's increment for it); otherwise, unless
    /// inhibited, it advances by its event's multiplicity. `realtime`
    /// always advances.
    pub fn apply_cycle(&mut self, delta: &EventDelta) {
        for i in 0..32 {
            if let Some(v) = self.shadow[i].take() {
                self.counters[i] = v;
                continue;
            }
            if self.mcountinhibit & (1 << i) != 0 {
                continue;
            }
            let inc = match i {
                0 => delta.get(EventKind::Cycle),
                RESERVED_COUNTER => 0,
                2 => delta.get(EventKind::Instret),
                _ => EventKind::from_selector(self.selectors[i]).map_or(0, |k| delta.get(k)),
            };
            self.counters[i] = self.counters[i].wrapping_add(inc as u64);
        }
        self.realtime += 1;
    }
}

/// Trap-handling CSRs plus `mscratch`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TrapCsrs {
    pub mstatus: u32,
    pub mtvec: u32,
    pub mepc: u32,
    pub mcause: u32,
    pub mtval: u32,
    pub mie: u32,
    pub mip: u32,
    pub mscratch: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CsrFile {
    pub hpm: HpmCsrFile,
    pub trap: TrapCsrs,
}

/// Where a CSR address lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Mstatus,
    Misa,
    Mie,
    Mtvec,
    Mcounteren,
    Mcountinhibit,
    Selector(usize),
    Mscratch,
    Mepc,
    Mcause,
    Mtval,
    Mip,
    Counter { index: usize, high: bool },
    UserCounter { index: usize, high: bool },
    Time { high: bool },
    Zero,
}

fn classify(a: u16) -> Option<Target> {
    use Target::*;
    let n = (a & 0x1F) as usize;
    Some(match a {
        addr::MSTATUS => Mstatus,
        addr::MISA => Misa,
        addr::MIE => Mie,
        addr::MTVEC => Mtvec,
        addr::MCOUNTEREN => Mcounteren,
        addr::MCOUNTINHIBIT => Mcountinhibit,
        0x323..=0x33F => Selector(n),
        addr::MSCRATCH => Mscratch,
        addr::MEPC => Mepc,
        addr::MCAUSE => Mcause,
        addr::MTVAL => Mtval,
        addr::MIP => Mip,
        addr::TIME => Time { high: false },
        addr::TIMEH => Time { high: true },
        0xB00..=0xB1F if n != RESERVED_COUNTER => Counter { index: n, high: false },
        0xB80..=0xB9F if n != RESERVED_COUNTER => Counter { index: n, high: true },
        0xC00..=0xC1F => UserCounter { index: n, high: false },
        0xC80..=0xC9F => UserCounter { index: n, high: true },
        0xF11..=0xF14 => Zero,
        _ => return None,
    })
}

fn is_read_only(a: u16) -> bool {
    a >> 10 == 0b11
}

fn required_privilege(a: u16) -> Privilege {
    if (a >> 8) & 0b11 == 0 {
        Privilege::User
    } else {
        Privilege::Machine
    }
}

fn half(v: u64, high: bool) -> u32 {
    if high {
        (v >> 32) as u32
    } else {
        v as u32
    }
}

impl CsrFile {
    pub fn new() -> Self {
        CsrFile::default()
    }

    /// Permission check shared by reads and writes.
    pub fn check(&self, a: u16, privilege: Privilege, write: bool) -> Result<(), CsrError> {
        let target = classify(a).ok_or(CsrError::IllegalAccess(a))?;
        if privilege == Privilege::User {
            if required_privilege(a) == Privilege::Machine {
                return Err(CsrError::IllegalAccess(a));
            }
            let bit = match target {
                Target::UserCounter { index, .. } => index,
                Target::Time { .. } => 1,
                _ => 0,
            };
            if self.hpm.mcounteren & (1 << bit) == 0 {
                return Err(CsrError::IllegalAccess(a));
            }
        }
        if write && is_read_only(a) {
            return Err(CsrError::WriteToReadOnly(a));
        }
        Ok(())
    }

    /// Reads the committed value of a CSR.
    pub fn read(&self, a: u16, privilege: Privilege) -> Result<u32, CsrError> {
        self.check(a, privilege, false)?;
        Ok(self.peek(a))
    }

    fn peek(&self, a: u16) -> u32 {
        use Target::*;
        match classify(a).expect("checked") {
            Mstatus => self.trap.mstatus,
            Misa => MISA_RV32I,
            Mie => self.trap.mie,
            Mtvec => self.trap.mtvec,
            Mcounteren => self.hpm.mcounteren,
            Mcountinhibit => self.hpm.mcountinhibit,
            Selector(i) => self.hpm.selectors[i],
            Mscratch => self.trap.mscratch,
            Mepc => self.trap.mepc,
            Mcause => self.trap.mcause,
            Mtval => self.trap.mtval,
            Mip => self.trap.mip,
            Counter { index, high } | UserCounter { index, high } => {
                half(self.hpm.counters[index], high)
            }
            Time { high } => half(self.hpm.realtime, high),
            Zero => 0,
        }
    }

    fn poke(&mut self, a: u16, v: u32) {
        use Target::*;
        match classify(a).expect("checked") {
            Mstatus => {
                let mpp = if v & MSTATUS_MPP == MSTATUS_MPP { MSTATUS_MPP } else { 0 };
                self.trap.mstatus = (v & (MSTATUS_MIE | MSTATUS_MPIE)) | mpp;
            }
            Mie => self.trap.mie = v & (MIP_MTIP | MIP_MEIP),
            Mtvec => self.trap.mtvec = v & !0b11,
            Mcounteren => self.hpm.mcounteren = v,
            Mcountinhibit => self.hpm.mcountinhibit = v,
            Selector(i) => self.hpm.selectors[i] = v,
            Mscratch => self.trap.mscratch = v,
            Mepc => self.trap.mepc = v & !0b11,
            Mcause => self.trap.mcause = v,
            Mtval => self.trap.mtval = v,
            Counter { index, high } => self.hpm.stage_half(index, high, v),
            // WARL / read-only sinks
            Misa | Mip | Zero | UserCounter { .. } | Time { .. } => {}
        }
    }

    /// Atomic read-modify-write: returns the old value and applies the new
    /// one. Counter writes go through the shadow registers.
    pub fn atomic_rw(
        &mut self,
        a: u16,
        op: CsrOp,
        operand: u32,
        privilege: Privilege,
    ) -> Result<u32, CsrError> {
        self.check(a, privilege, true)?;
        let old = self.peek(a);
        let new = match op {
            CsrOp::Swap => operand,
            CsrOp::SetBits => old | operand,
            CsrOp::ClearBits => old & !operand,
        };
        self.poke(a, new);
        Ok(old)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(kind: EventKind, n: u32) -> EventDelta {
        let mut d = EventDelta::default();
        d.0[kind.index()] = n;
        d
    }

    #[test]
    fn user_read_needs_mcounteren() {
        let mut c = CsrFile::new();
        c.hpm.counters[0] = 7;
        assert_eq!(c.read(addr::CYCLE, Privilege::User), Err(CsrError::IllegalAccess(addr::CYCLE)));
        c.hpm.mcounteren = 1;
        assert_eq!(c.read(addr::CYCLE, Privilege::User), Ok(7));
        assert_eq!(
            c.read(addr::MSTATUS, Privilege::User),
            Err(CsrError::IllegalAccess(addr::MSTATUS))
        );
        assert_eq!(c.read(0x7C0, Privilege::Machine), Err(CsrError::IllegalAccess(0x7C0)));
        assert_eq!(c.read(0xB01, Privilege::Machine), Err(CsrError::IllegalAccess(0xB01)));
    }

    #[test]
    fn counter_reset_reads_zero() {
        let c = CsrFile::new();
        assert_eq!(c.read(addr::MHPMCOUNTER3, Privilege::Machine), Ok(0));
        assert_eq!(c.hpm.read_counter64(0), Ok(0));
        assert_eq!(c.hpm.read_counter64(1), Err(CounterError::ReservedCounter));
    }

    #[test]
    fn swap_is_staged_until_boundary() {
        let mut c = CsrFile::new();
        c.hpm.counters[3] = 5;
        let old = c.atomic_rw(addr::MHPMCOUNTER3, CsrOp::Swap, 0, Privilege::Machine).unwrap();
        assert_eq!(old, 5);
        assert_eq!(c.read(addr::MHPMCOUNTER3, Privilege::Machine), Ok(5));
        c.hpm.apply_cycle(&EventDelta::default());
        assert_eq!(c.hpm.read_counter64(3), Ok(0));
    }

    #[test]
    fn inhibit_stops_mcycle() {
        let mut c = CsrFile::new();
        let old = c.atomic_rw(addr::MCOUNTINHIBIT, CsrOp::SetBits, 1, Privilege::Machine).unwrap();
        assert_eq!(old, 0);
        for _ in 0..10 {
            c.hpm.apply_cycle(&EventDelta::default().with_cycle());
        }
        assert_eq!(c.hpm.read_counter64(0), Ok(0));
        assert_eq!(c.hpm.realtime(), 10);
    }

    #[test]
    fn clearing_selector_disables_counting() {
        let mut c = CsrFile::new();
        let old = c
            .atomic_rw(addr::MHPMEVENT3, CsrOp::ClearBits, 0xFFFF_FFFF, Privilege::Machine)
            .unwrap();
        assert_eq!(old, 1);
        c.hpm.apply_cycle(&delta(EventKind::Exception, 1));
        assert_eq!(c.hpm.read_counter64(3), Ok(0));
    }

    #[test]
    fn collision_rules() {
        // increment alone
        let mut h = HpmCsrFile::new();
        h.counters[3] = 10;
        h.apply_cycle(&delta(EventKind::Exception, 1));
        assert_eq!(h.counters[3], 11);

        // write and increment in the same cycle: the increment is lost
        let mut h = HpmCsrFile::new();
        h.counters[3] = 10;
        h.stage_write(3, 0);
        h.apply_cycle(&delta(EventKind::Exception, 1));
        assert_eq!(h.counters[3], 0);

        // write one cycle before the increment arrives
        let mut h = HpmCsrFile::new();
        h.counters[3] = 10;
        h.stage_write(3, 0);
        h.apply_cycle(&EventDelta::default());
        assert_eq!(h.counters[3], 0);
        h.apply_cycle(&delta(EventKind::Exception, 1));
        assert_eq!(h.counters[3], 1);
    }

    #[test]
    fn high_half_write_composes_64_bits() {
        let mut c = CsrFile::new();
        c.hpm.counters[4] = 0xFFFF_FFFF;
        c.atomic_rw(0xB84, CsrOp::Swap, 1, Privilege::Machine).unwrap();
        c.hpm.apply_cycle(&EventDelta::default());
        assert_eq!(c.hpm.read_counter64(4), Ok(0x1_FFFF_FFFF));
    }

    #[test]
    fn read_only_aliases_reject_writes() {
        let mut c = CsrFile::new();
        assert_eq!(
            c.atomic_rw(addr::CYCLE, CsrOp::Swap, 1, Privilege::Machine),
            Err(CsrError::WriteToReadOnly(addr::CYCLE))
        );
        assert_eq!(
            c.atomic_rw(addr::TIME, CsrOp::SetBits, 1, Privilege::Machine),
            Err(CsrError::WriteToReadOnly(addr::TIME))
        );
    }

    #[test]
    fn mstatus_is_warl() {
        let mut c = CsrFile::new();
        c.atomic_rw(addr::MSTATUS, CsrOp::Swap, 0xFFFF_FFFF, Privilege::Machine).unwrap();
        assert_eq!(c.trap.mstatus, MSTATUS_MIE | MSTATUS_MPIE | MSTATUS_MPP);
        c.atomic_rw(addr::MSTATUS, CsrOp::Swap, 1 << 11, Privilege::Machine).unwrap();
        assert_eq!(c.trap.mstatus & MSTATUS_MPP, 0);
    }

    #[test]
    fn reserved_counter_never_counts() {
        let mut h = HpmCsrFile::new();
        for _ in 0..5 {
            h.apply_cycle(&EventDelta([3; 13]));
        }
        assert_eq!(h.counters[RESERVED_COUNTER], 0);
    }
}
