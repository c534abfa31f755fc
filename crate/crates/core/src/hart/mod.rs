//! Architectural state of one hart.

pub mod csr;
pub mod gpr;
pub mod memory;

use sha2::{Digest, Sha256};

pub use csr::{CsrError, CsrFile, CsrOp, CounterError, HpmCsrFile, Privilege, TrapCsrs};
pub use gpr::GprFile;
pub use memory::{MapError, MemFault, Memory, MemoryMap, Region, StoreEffect};

use csr::{MIP_MEIP, MIP_MTIP, MSTATUS_MIE, MSTATUS_MPIE, MSTATUS_MPP};

use crate::events::EventKind;

/// Synchronous exception causes (`mcause` with the interrupt bit clear).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exception {
    InstrAddressMisaligned,
    InstrAccessFault,
    IllegalInstruction,
    Breakpoint,
    LoadAddressMisaligned,
    LoadAccessFault,
    StoreAddressMisaligned,
    StoreAccessFault,
    EcallFromU,
    EcallFromM,
}

impl Exception {
    pub fn code(self) -> u32 {
        match self {
            Exception::InstrAddressMisaligned => 0,
            Exception::InstrAccessFault => 1,
            Exception::IllegalInstruction => 2,
            Exception::Breakpoint => 3,
            Exception::LoadAddressMisaligned => 4,
            Exception::LoadAccessFault => 5,
            Exception::StoreAddressMisaligned => 6,
            Exception::StoreAccessFault => 7,
            Exception::EcallFromU => 8,
            Exception::EcallFromM => 11,
        }
    }

    pub fn ecall(privilege: Privilege) -> Self {
        match privilege {
            Privilege::User => Exception::EcallFromU,
            Privilege::Machine => Exception::EcallFromM,
        }
    }
}

impl From<MemFault> for Exception {
    fn from(f: MemFault) -> Self {
        match f {
            MemFault::LoadAddressMisaligned(_) => Exception::LoadAddressMisaligned,
            MemFault::LoadAccessFault(_) => Exception::LoadAccessFault,
            MemFault::StoreAddressMisaligned(_) => Exception::StoreAddressMisaligned,
            MemFault::StoreAccessFault(_) | MemFault::StoreToRom(_) => Exception::StoreAccessFault,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interrupt {
    MachineTimer,
    MachineExternal,
}

impl Interrupt {
    pub fn code(self) -> u32 {
        match self {
            Interrupt::MachineTimer => 7,
            Interrupt::MachineExternal => 11,
        }
    }

    pub fn event(self) -> EventKind {
        match self {
            Interrupt::MachineTimer => EventKind::TimeInt,
            Interrupt::MachineExternal => EventKind::ExtInt,
        }
    }

    fn mip_bit(self) -> u32 {
        match self {
            Interrupt::MachineTimer => MIP_MTIP,
            Interrupt::MachineExternal => MIP_MEIP,
        }
    }
}

const MCAUSE_INTERRUPT: u32 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HartState {
    pub gpr: GprFile,
    pub privilege: Privilege,
    pub csr: CsrFile,
    pub mem: Memory,
}

impl HartState {
    pub fn new(map: MemoryMap) -> Result<Self, MapError> {
        Ok(HartState {
            gpr: GprFile::default(),
            privilege: Privilege::Machine,
            csr: CsrFile::new(),
            mem: Memory::new(map)?,
        })
    }

    /// Takes a trap and returns the handler address.
    pub fn enter_trap(&mut self, cause: u32, interrupt: bool, epc: u32, tval: u32) -> u32 {
        let t = &mut self.csr.trap;
        t.mepc = epc & !0b11;
        t.mcause = if interrupt { cause | MCAUSE_INTERRUPT } else { cause };
        t.mtval = tval;
        let mie = t.mstatus & MSTATUS_MIE != 0;
        let mpp = if self.privilege == Privilege::Machine { MSTATUS_MPP } else { 0 };
        t.mstatus = (t.mstatus & !(MSTATUS_MIE | MSTATUS_MPIE | MSTATUS_MPP))
            | if mie { MSTATUS_MPIE } else { 0 }
            | mpp;
        self.privilege = Privilege::Machine;
        t.mtvec
    }

    pub fn take_exception(&mut self, e: Exception, epc: u32, tval: u32) -> u32 {
        self.enter_trap(e.code(), false, epc, tval)
    }

    /// Accepts an interrupt: clears an external request and enters the trap.
    pub fn take_interrupt(&mut self, irq: Interrupt, epc: u32) -> u32 {
        if irq == Interrupt::MachineExternal {
            self.csr.trap.mip &= !MIP_MEIP;
        }
        self.enter_trap(irq.code(), true, epc, 0)
    }

    /// Returns from a machine trap and yields the resume address.
    pub fn mret(&mut self) -> u32 {
        let t = &mut self.csr.trap;
        let mpie = t.mstatus & MSTATUS_MPIE != 0;
        self.privilege =
            if t.mstatus & MSTATUS_MPP == MSTATUS_MPP { Privilege::Machine } else { Privilege::User };
        t.mstatus = (t.mstatus & !(MSTATUS_MIE | MSTATUS_MPP)) | MSTATUS_MPIE | if mpie { MSTATUS_MIE } else { 0 };
        t.mepc
    }

    pub fn raise_external(&mut self) {
        self.csr.trap.mip |= MIP_MEIP;
    }

    /// Advances `mtime` by one tick and refreshes the timer pending bit.
    pub fn tick_timer(&mut self) {
        self.mem.mtime = self.mem.mtime.wrapping_add(1);
        self.sync_timer();
    }

    pub fn sync_timer(&mut self) {
        if self.mem.timer_pending() {
            self.csr.trap.mip |= MIP_MTIP;
        } else {
            self.csr.trap.mip &= !MIP_MTIP;
        }
    }

    /// Highest-priority interrupt that is pending, enabled and not masked by
    /// the global enable. External beats timer.
    pub fn pending_interrupt(&self) -> Option<Interrupt> {
        let t = &self.csr.trap;
        let globally = self.privilege == Privilege::User || t.mstatus & MSTATUS_MIE != 0;
        if !globally {
            return None;
        }
        [Interrupt::MachineExternal, Interrupt::MachineTimer]
            .into_iter()
            .find(|irq| t.mie & t.mip & irq.mip_bit() != 0)
    }

    /// SHA-256 over registers, RAM, trap CSRs, privilege and device output.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for r in self.gpr.as_array() {
            h.update(r.to_le_bytes());
        }
        h.update(self.mem.ram());
        let t = &self.csr.trap;
        for v in [t.mstatus, t.mtvec, t.mepc, t.mcause, t.mtval, t.mie, t.mscratch] {
            h.update(v.to_le_bytes());
        }
        h.update([self.privilege as u8]);
        h.update(&self.mem.console);
        h.update(self.mem.exit_code.map_or([0xFF; 5], |c| {
            let mut b = [0; 5];
            b[1..].copy_from_slice(&c.to_le_bytes());
            b
        }));
        hex::encode(h.finalize())
    }
}
