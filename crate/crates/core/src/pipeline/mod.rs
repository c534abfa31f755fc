//! Cycle-stepped five-stage pipeline (IF, ID, EX, MEM, WB) with per-slot
//! event records that reach the counters one cycle after write-back.
//!
//! Each cycle either *advances* (every slot moves one stage, or ID/IF hold
//! behind a bubble) or is *frozen* while an outstanding charge drains: the
//! fetch latency after every fetch, the extra load/store latency when an
//! access enters MEM, and whatever part of a configured penalty exceeds the
//! structural cost of the event. Stages are evaluated WB first, so a trap,
//! `mret` or halt kills the younger slots before they do any work.
//!
//! Structural costs, in advances: one per retired instruction and per
//! bubble, two killed slots per taken transfer, four empty slots while the
//! pipeline fills, three killed slots behind every trap entry or `mret`
//! (plus the excepting slot itself for exceptions). An interrupt taken
//! behind a taken transfer shares two killed slots with it, so those two
//! are charged as frozen cycles.

pub mod hazard;
pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventCounts, EventDelta, EventKind, EventTotals, TriggeredEvents};
use crate::hart::{CsrOp, Exception, HartState, Privilege, StoreEffect};
use crate::isa::{decode, Instr, InstrClass, Mnemonic};
use crate::timing::PenaltySchedule;

pub use trace::{CountedRecord, CycleReport, StageView};

const IF: usize = 0;
const MEM: usize = 3;
const WB: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_cycles: u64,
    pub max_instret: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_cycles: 100_000_000, max_instret: u64::MAX }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    Cycles,
    Instret,
}

/// Deliberate defects for tests of the checking machinery.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimHooks {
    /// Excepting instructions keep their provisional INSTRET.
    pub disable_cancellation: bool,
    /// Freeze the pipeline for one extra cycle at this cycle number.
    pub inject_stall_at: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimConfig {
    pub schedule: PenaltySchedule,
    /// Cycles at which the external interrupt line is raised.
    pub external_interrupts: Vec<u64>,
    pub limits: Limits,
    pub trace: bool,
    pub hooks: SimHooks,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("machine has halted")]
    Halted,
    #[error("{kind:?} limit of {limit} exceeded")]
    LimitExceeded { kind: LimitKind, limit: u64 },
    #[error("invalid penalty schedule: {0}")]
    InvalidSchedule(String),
    #[error("external interrupt cycles must be strictly increasing")]
    InterruptSchedule,
}

/// Rejects schedules the structural pipeline cannot realise. Every penalty
/// must cover the advances its event occupies; the remainder is charged as
/// frozen cycles. The fetch cost must be non-zero so that the exit store's
/// record is counted before the run ends.
pub fn check_schedule(s: &PenaltySchedule) -> Result<(), SimError> {
    let floors = [
        ("fetch_cost", s.fetch_cost, 1),
        ("retire_cost", s.retire_cost, 1),
        ("hazard_bubble_cost", s.hazard_bubble_cost, 1),
        ("taken_transfer_penalty", s.taken_transfer_penalty, 2),
        ("initial_fill", s.initial_fill, 4),
        ("trap_entry", s.trap_entry, 4),
        ("trap_exit", s.trap_exit, 3),
        ("mret_then_trap_total", s.mret_then_trap_total, 3),
    ];
    for (name, v, min) in floors {
        if v < min {
            return Err(SimError::InvalidSchedule(format!("{name} = {v}, must be at least {min}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    /// Raw event totals, independent of selector and inhibit settings.
    pub totals: EventTotals,
    pub cycles: u64,
    pub retired: u64,
    /// Committed counter values at the end of the run (index 1 reads 0).
    pub counters: Vec<u64>,
    pub exit_code: Option<u32>,
    pub console: String,
    pub digest: String,
    /// Digest of the configuration the run was made under; set by the caller.
    pub config_digest: String,
    #[serde(skip)]
    pub trace: Option<Vec<CycleReport>>,
}

#[derive(Debug, Clone)]
struct Slot {
    pc: u32,
    instr: Instr,
    events: TriggeredEvents,
    killed: bool,
    fault: Option<(Exception, u32)>,
    result: u32,
    addr: u32,
    store_data: u32,
    next_pc: u32,
    effect: StoreEffect,
}

impl Slot {
    fn kill(&mut self) {
        self.killed = true;
        self.events = self.events.squashed();
    }

    fn live(&self) -> bool {
        !self.killed
    }

    fn view(&self) -> StageView {
        StageView { pc: self.pc, killed: self.killed }
    }
}

enum Commit {
    Retired,
    Redirect(u32),
    Exit,
}

pub struct Simulator {
    hart: HartState,
    cfg: SimConfig,
    stages: [Option<Slot>; 5],
    fetch_pc: u32,
    count_slot: Option<CountedRecord>,
    settle: Option<u32>,
    outstanding: u64,
    cycle: u64,
    retired: u64,
    counts: EventCounts,
    trap_exits: u64,
    back_to_back: u64,
    halting: bool,
    halted: bool,
    irq_cursor: usize,
}

fn load_width(m: Mnemonic) -> (u32, bool) {
    match m {
        Mnemonic::Lb => (1, true),
        Mnemonic::Lh => (2, true),
        Mnemonic::Lbu => (1, false),
        Mnemonic::Lhu => (2, false),
        Mnemonic::Sb => (1, false),
        Mnemonic::Sh => (2, false),
        _ => (4, false),
    }
}

impl Simulator {
    pub fn new(hart: HartState, entry: u32, cfg: SimConfig) -> Result<Self, SimError> {
        let s = &cfg.schedule;
        check_schedule(s)?;
        let map = hart.mem.map();
        if map.load_extra_cycles as u64 != s.load_extra || map.store_extra_cycles as u64 != s.store_extra {
            return Err(SimError::InvalidSchedule(
                "memory latencies disagree with load_extra/store_extra".into(),
            ));
        }
        if cfg.external_interrupts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InterruptSchedule);
        }
        let outstanding = s.initial_fill - 4;
        Ok(Simulator {
            hart,
            cfg,
            stages: Default::default(),
            fetch_pc: entry,
            count_slot: None,
            settle: None,
            outstanding,
            cycle: 0,
            retired: 0,
            counts: EventCounts::default(),
            trap_exits: 0,
            back_to_back: 0,
            halting: false,
            halted: false,
            irq_cursor: 0,
        })
    }

    pub fn hart(&self) -> &HartState {
        &self.hart
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Event totals counted so far.
    pub fn totals(&self) -> EventTotals {
        EventTotals::from_counts(self.counts, self.trap_exits, self.back_to_back)
    }

    fn stage_views(&self) -> [Option<StageView>; 5] {
        std::array::from_fn(|i| self.stages[i].as_ref().map(Slot::view))
    }

    /// Simulates one clock cycle.
    pub fn step(&mut self) -> Result<CycleReport, SimError> {
        if self.halted {
            return Err(SimError::Halted);
        }
        let limits = self.cfg.limits;
        if self.cycle >= limits.max_cycles {
            return Err(SimError::LimitExceeded { kind: LimitKind::Cycles, limit: limits.max_cycles });
        }
        self.cycle += 1;
        let c = self.cycle;
        while let Some(&at) = self.cfg.external_interrupts.get(self.irq_cursor) {
            if at > c {
                break;
            }
            self.hart.raise_external();
            self.irq_cursor += 1;
        }
        if self.cfg.hooks.inject_stall_at == Some(c) {
            self.outstanding += 1;
        }

        let mut delta = EventDelta::default().with_cycle();
        let counted = self.count_slot.take();
        if let Some(r) = &counted {
            delta.accumulate(&r.events);
        }
        let settled = self.settle.take().unwrap_or(0);
        delta.0[EventKind::Fetch.index()] += settled;

        let advanced = self.outstanding == 0 && !self.halting;
        if advanced {
            self.advance(c);
        } else {
            self.outstanding = self.outstanding.saturating_sub(1);
        }

        self.hart.csr.hpm.apply_cycle(&delta);
        self.counts.add_delta(&delta);
        self.hart.tick_timer();
        if self.halting && self.outstanding == 0 {
            self.halted = true;
        }
        if self.retired > limits.max_instret {
            return Err(SimError::LimitExceeded { kind: LimitKind::Instret, limit: limits.max_instret });
        }

        let hpm = &self.hart.csr.hpm;
        Ok(CycleReport {
            cycle: c,
            advanced,
            stages: self.stage_views(),
            counted,
            settled_fetches: settled,
            delta,
            mcycle: hpm.read_counter64(0).unwrap_or(0),
            minstret: hpm.read_counter64(2).unwrap_or(0),
        })
    }

    /// Steps until the program halts or a limit trips.
    pub fn run(&mut self) -> Result<RunSummary, SimError> {
        let mut trace = self.cfg.trace.then(Vec::new);
        while !self.halted {
            let r = self.step()?;
            if let Some(t) = trace.as_mut() {
                t.push(r);
            }
        }
        Ok(self.summary(trace))
    }

    pub fn summary(&self, trace: Option<Vec<CycleReport>>) -> RunSummary {
        let hpm = &self.hart.csr.hpm;
        RunSummary {
            totals: self.totals(),
            cycles: self.cycle,
            retired: self.retired,
            counters: (0..32).map(|i| hpm.read_counter64(i).unwrap_or(0)).collect(),
            exit_code: self.hart.mem.exit_code,
            console: String::from_utf8_lossy(&self.hart.mem.console).into_owned(),
            digest: self.hart.digest(),
            config_digest: String::new(),
            trace,
        }
    }

    fn flag(&self, s: &mut Slot, e: Exception, tval: u32) {
        s.fault = Some((e, tval));
        if self.cfg.hooks.disable_cancellation {
            s.events.set(EventKind::Exception);
        } else {
            s.events.raise_exception();
        }
    }

    fn advance(&mut self, c: u64) {
        let sched = self.cfg.schedule;
        let [if_s, id_s, ex_s, mem_s, wb_s] = std::mem::take(&mut self.stages);
        let older = [&ex_s, &mem_s, &wb_s].map(|s| s.as_ref().filter(|s| s.live()).map(|s| s.instr));

        // WB
        let mut wb = mem_s;
        let mut redirect = None;
        let mut kill = false;
        if let Some(s) = wb.as_mut() {
            if s.live() {
                match self.commit(s) {
                    Commit::Retired => {}
                    Commit::Redirect(t) => {
                        redirect = Some(t);
                        kill = true;
                    }
                    Commit::Exit => {
                        self.halting = true;
                        kill = true;
                    }
                }
            }
            self.count_slot =
                Some(CountedRecord { pc: s.pc, wb_cycle: c, killed: s.killed, events: s.events });
        }
        let (mut if_s, mut id_s, mut ex_s) = (if_s, id_s, ex_s);
        if kill {
            for s in [&mut if_s, &mut id_s, &mut ex_s].into_iter().flatten() {
                s.kill();
            }
        }
        if let Some(t) = redirect {
            self.fetch_pc = t;
        }

        // MEM
        let mut mem = ex_s;
        if let Some(s) = mem.as_mut() {
            if s.live() && s.fault.is_none() {
                self.memory_access(s);
            }
        }

        // hazard check for the instruction leaving ID
        let stall = !kill
            && id_s.as_ref().is_some_and(|s| {
                s.live() && hazard::must_stall(&s.instr, [older[0].as_ref(), older[1].as_ref(), older[2].as_ref()])
            });

        let (ex, id, ifs);
        if stall {
            let mut held = id_s.expect("stalled slot");
            held.events.add(EventKind::Hazard, 1);
            self.outstanding += sched.hazard_bubble_cost - 1;
            ex = None;
            id = Some(held);
            ifs = if_s;
        } else {
            // EX
            let mut entering = id_s;
            let mut transfer = None;
            if let Some(s) = entering.as_mut() {
                if s.live() && s.fault.is_none() {
                    transfer = self.execute(s, mem.as_ref());
                }
            }
            // ID
            let mut decoding = if_s;
            if let Some(s) = decoding.as_mut() {
                if s.live() && s.fault.is_none() && s.instr.is_illegal() {
                    let raw = s.instr.raw;
                    self.flag(s, Exception::IllegalInstruction, raw);
                }
                if transfer.is_some() {
                    s.kill();
                }
            }
            // IF
            let mut fetched = self.fetch();
            if let Some(t) = transfer {
                fetched.kill();
                self.fetch_pc = t;
                self.outstanding += sched.taken_transfer_penalty - 2;
            }
            ex = entering;
            id = decoding;
            ifs = Some(fetched);
        }

        self.stages = [ifs, id, ex, mem, wb];
        if self.halting {
            let in_flight: u32 = self.stages[IF..=MEM]
                .iter()
                .flatten()
                .map(|s| s.events.get(EventKind::Fetch) as u32)
                .sum();
            self.settle = Some(in_flight);
        }
        debug_assert!(self.stages[WB].is_none() || self.count_slot.is_some());
    }

    fn fetch(&mut self) -> Slot {
        let pc = self.fetch_pc;
        let word = self.hart.mem.fetch(pc);
        let mut s = Slot {
            pc,
            instr: decode(word.unwrap_or(0)),
            events: TriggeredEvents::default(),
            killed: false,
            fault: None,
            result: 0,
            addr: 0,
            store_data: 0,
            next_pc: pc.wrapping_add(4),
            effect: StoreEffect::None,
        };
        s.events.set(EventKind::Fetch);
        s.events.set(EventKind::Instret);
        if word.is_none() {
            let e = if pc % 4 != 0 { Exception::InstrAddressMisaligned } else { Exception::InstrAccessFault };
            self.flag(&mut s, e, pc);
        }
        self.fetch_pc = pc.wrapping_add(4);
        self.outstanding += self.cfg.schedule.fetch_cost;
        s
    }

    /// Operand read in EX: the instruction one slot ahead forwards its ALU
    /// result, everything older is already in the register file.
    fn operand(&self, reg: u8, ahead: Option<&Slot>) -> u32 {
        if reg == 0 {
            return 0;
        }
        if let Some(a) = ahead {
            let forwards = matches!(
                a.instr.class(),
                InstrClass::Alu | InstrClass::UncondJump
            );
            if a.live() && a.fault.is_none() && forwards && a.instr.dest() == Some(reg) {
                return a.result;
            }
        }
        self.hart.gpr.read(reg)
    }

    /// EX stage. Returns the redirect target of a taken transfer.
    fn execute(&self, s: &mut Slot, ahead: Option<&Slot>) -> Option<u32> {
        use Mnemonic::*;
        let i = s.instr;
        let a = self.operand(i.rs1, ahead);
        let b = self.operand(i.rs2, ahead);
        let imm = i.imm as u32;
        let pc = s.pc;
        let shamt = |v: u32| v & 31;
        let mut target = None;
        let mut taken = false;
        s.result = match i.mnemonic {
            Lui => imm,
            Auipc => pc.wrapping_add(imm),
            Jal => {
                target = Some(pc.wrapping_add(imm));
                pc.wrapping_add(4)
            }
            Jalr => {
                target = Some(a.wrapping_add(imm) & !1);
                pc.wrapping_add(4)
            }
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                taken = match i.mnemonic {
                    Beq => a == b,
                    Bne => a != b,
                    Blt => (a as i32) < (b as i32),
                    Bge => (a as i32) >= (b as i32),
                    Bltu => a < b,
                    _ => a >= b,
                };
                if taken {
                    target = Some(pc.wrapping_add(imm));
                }
                0
            }
            Lb | Lh | Lw | Lbu | Lhu | Sb | Sh | Sw => {
                s.addr = a.wrapping_add(imm);
                s.store_data = b;
                0
            }
            Addi => a.wrapping_add(imm),
            Slti => ((a as i32) < (imm as i32)) as u32,
            Sltiu => (a < imm) as u32,
            Xori => a ^ imm,
            Ori => a | imm,
            Andi => a & imm,
            Slli => a << shamt(imm),
            Srli => a >> shamt(imm),
            Srai => ((a as i32) >> shamt(imm)) as u32,
            Add => a.wrapping_add(b),
            Sub => a.wrapping_sub(b),
            Sll => a << shamt(b),
            Slt => ((a as i32) < (b as i32)) as u32,
            Sltu => (a < b) as u32,
            Xor => a ^ b,
            Srl => a >> shamt(b),
            Sra => ((a as i32) >> shamt(b)) as u32,
            Or => a | b,
            And => a & b,
            _ => 0,
        };
        if i.class() == InstrClass::CondBranch && !taken {
            s.events.set(EventKind::BranchNt);
        }
        let t = target?;
        if t % 4 != 0 {
            self.flag(s, Exception::InstrAddressMisaligned, t);
            return None;
        }
        s.events.set(if i.class() == InstrClass::CondBranch { EventKind::Branch } else { EventKind::UncondJump });
        s.next_pc = t;
        Some(t)
    }

    fn memory_access(&mut self, s: &mut Slot) {
        let (width, signed) = load_width(s.instr.mnemonic);
        match s.instr.class() {
            InstrClass::Load => match self.hart.mem.load(s.addr, width, signed) {
                Ok((v, extra)) => {
                    s.result = v;
                    s.events.set(EventKind::Load);
                    s.events.set(EventKind::MemAccess);
                    self.outstanding += extra as u64;
                }
                Err(f) => self.flag(s, f.into(), f.address()),
            },
            InstrClass::Store => match self.hart.mem.store(s.addr, width, s.store_data) {
                Ok((extra, effect)) => {
                    s.effect = effect;
                    s.events.set(EventKind::Store);
                    s.events.set(EventKind::MemAccess);
                    self.outstanding += extra as u64;
                }
                Err(f) => self.flag(s, f.into(), f.address()),
            },
            _ => {}
        }
    }

    fn trap(&mut self, s: &mut Slot, e: Exception, tval: u32) -> Commit {
        if s.fault.is_none() {
            self.flag(s, e, tval);
        }
        self.outstanding += self.cfg.schedule.trap_entry - 4;
        Commit::Redirect(self.hart.take_exception(e, s.pc, tval))
    }

    /// WB stage: architectural commit, CSR access, trap entry and return.
    fn commit(&mut self, s: &mut Slot) -> Commit {
        use Mnemonic::*;
        if let Some((e, tval)) = s.fault {
            return self.trap(s, e, tval);
        }
        let i = s.instr;
        let sched = self.cfg.schedule;
        let mut exited_trap = false;
        match i.class() {
            InstrClass::System => match i.mnemonic {
                Ecall => return self.trap(s, Exception::ecall(self.hart.privilege), 0),
                Ebreak => return self.trap(s, Exception::Breakpoint, s.pc),
                Mret if self.hart.privilege == Privilege::User => {
                    return self.trap(s, Exception::IllegalInstruction, i.raw)
                }
                Mret => {
                    s.next_pc = self.hart.mret();
                    self.trap_exits += 1;
                    exited_trap = true;
                }
                _ => {}
            },
            InstrClass::Csr => {
                let operand = match i.mnemonic {
                    Csrrwi | Csrrsi | Csrrci => i.imm as u32,
                    _ => self.hart.gpr.read(i.rs1),
                };
                let op = match i.mnemonic {
                    Csrrw | Csrrwi => CsrOp::Swap,
                    Csrrs | Csrrsi => CsrOp::SetBits,
                    _ => CsrOp::ClearBits,
                };
                let privilege = self.hart.privilege;
                let r = if i.csr_writes() {
                    self.hart.csr.atomic_rw(i.csr, op, operand, privilege)
                } else {
                    self.hart.csr.read(i.csr, privilege)
                };
                match r {
                    Ok(old) => self.hart.gpr.write(i.rd, old),
                    Err(_) => return self.trap(s, Exception::IllegalInstruction, i.raw),
                }
            }
            InstrClass::Alu | InstrClass::Load | InstrClass::UncondJump => {
                self.hart.gpr.write(i.rd, s.result);
            }
            _ => {}
        }
        self.retired += 1;
        self.outstanding += sched.retire_cost - 1;
        if let StoreEffect::Exit(_) = s.effect {
            return Commit::Exit;
        }
        if let Some(irq) = self.hart.pending_interrupt() {
            s.events.add(irq.event(), 1);
            let target = self.hart.take_interrupt(irq, s.next_pc);
            // The two slots this instruction's own taken transfer killed are
            // also the oldest slots of the trap window.
            if s.events.get(EventKind::Branch) + s.events.get(EventKind::UncondJump) > 0 {
                self.outstanding += 2;
            }
            if exited_trap {
                self.back_to_back += 1;
                self.outstanding += sched.mret_then_trap_total - 3;
            } else {
                self.outstanding += sched.trap_entry - 3;
            }
            return Commit::Redirect(target);
        }
        if exited_trap {
            self.outstanding += sched.trap_exit - 3;
            return Commit::Redirect(s.next_pc);
        }
        Commit::Retired
    }
}
