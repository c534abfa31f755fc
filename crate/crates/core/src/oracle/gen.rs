//! Seeded random program generator.
//!
//! Programs only branch forward, so every one of them reaches the exit
//! store. Traps are resumed at the next instruction by a fixed handler.
//! Generated code never reads counters, the timer or the counter
//! configuration CSRs, and never enables interrupts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hart::MemoryMap;
use crate::isa::encode::*;

/// Registers the body may write. x28..x31 are reserved.
const WRITABLE: u8 = 27;
const JALR_BASE: u8 = 28;
const SCRATCH: u8 = 29;
const RAM_BASE: u8 = 30;
const MMIO_BASE: u8 = 31;

const MSCRATCH: u16 = 0x340;
const READABLE_CSRS: [u16; 7] = [0x300, 0x301, 0x304, 0x305, 0x340, 0x342, 0x343];

pub const MAX_PROGRAM_WORDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub seed: u64,
    pub words: Vec<u32>,
    /// The body runs in U-mode.
    pub user_mode: bool,
}

impl Program {
    pub fn image(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }
}

enum Fixup {
    /// Forward branch/jump to body item `target`, optionally misaligned.
    Branch { at: usize, funct3: u32, rs1: u8, rs2: u8, target: usize, skew: i32 },
    Jal { at: usize, rd: u8, target: usize, skew: i32 },
    Jalr { at: usize, rd: u8, target: usize, skew: i32 },
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    words: Vec<u32>,
    /// Word index of each body item start.
    items: Vec<usize>,
    fixups: Vec<Fixup>,
    user: bool,
}

impl Builder<'_> {
    fn reg(&mut self) -> u8 {
        self.rng.gen_range(0..=31)
    }

    fn dest(&mut self) -> u8 {
        if self.rng.gen_ratio(1, 20) {
            0
        } else {
            self.rng.gen_range(1..=WRITABLE)
        }
    }

    fn imm12(&mut self) -> i32 {
        self.rng.gen_range(-2048..=2047)
    }

    fn emit(&mut self, w: u32) {
        self.words.push(w);
    }

    fn forward(&mut self, item: usize, total: usize) -> usize {
        self.rng.gen_range(item + 1..=(item + 12).min(total))
    }

    fn skew(&mut self) -> i32 {
        if self.rng.gen_ratio(1, 25) {
            2
        } else {
            0
        }
    }

    fn alu(&mut self) {
        let rd = self.dest();
        let (a, b) = (self.reg(), self.reg());
        let f: fn(u8, u8, u8) -> u32 = *[add, sub, sll, slt, sltu, xor, srl, sra, or, and].choose(self.rng).unwrap();
        self.emit(f(rd, a, b));
    }

    fn alu_imm(&mut self) {
        let rd = self.dest();
        let a = self.reg();
        if self.rng.gen_ratio(1, 4) {
            let sh = self.rng.gen_range(0..32);
            let f: fn(u8, u8, u32) -> u32 = *[slli, srli, srai].choose(self.rng).unwrap();
            self.emit(f(rd, a, sh));
        } else {
            let imm = self.imm12();
            let f: fn(u8, u8, i32) -> u32 = *[addi, slti, sltiu, xori, ori, andi].choose(self.rng).unwrap();
            self.emit(f(rd, a, imm));
        }
    }

    fn upper(&mut self) {
        let rd = self.dest();
        let v = self.rng.gen_range(0..1 << 20);
        let w = if self.rng.gen() { lui(rd, v) } else { auipc(rd, v) };
        self.emit(w);
    }

    /// (base register, offset) for an access of `width` bytes.
    fn address(&mut self, width: i32, store: bool) -> (u8, i32) {
        let aligned = |o: i32| o - o.rem_euclid(width);
        match self.rng.gen_range(0..40) {
            0 => (RAM_BASE, aligned(self.rng.gen_range(0..2040)) + 1),
            1 => (0, aligned(self.rng.gen_range(-2048..-16))),
            2 if store => (0, aligned(self.rng.gen_range(0..2040))),
            3 if store => (MMIO_BASE, 0x10),
            4..=6 if !store => (0, aligned(self.rng.gen_range(0..2040))),
            _ => (RAM_BASE, aligned(self.rng.gen_range(0..2040))),
        }
    }

    fn load(&mut self) -> u8 {
        let rd = self.dest();
        let (f, w): (fn(u8, u8, i32) -> u32, i32) = *[(lb as fn(u8, u8, i32) -> u32, 1), (lbu, 1), (lh, 2), (lhu, 2), (lw, 4), (lw, 4)]
            .choose(self.rng)
            .unwrap();
        let (base, off) = self.address(w, false);
        self.emit(f(rd, base, off));
        rd
    }

    fn store(&mut self) {
        let src = self.reg();
        let (f, w): (fn(u8, u8, i32) -> u32, i32) =
            *[(sb as fn(u8, u8, i32) -> u32, 1), (sh, 2), (sw, 4), (sw, 4)].choose(self.rng).unwrap();
        let (base, off) = self.address(w, true);
        let f = if base == MMIO_BASE { sb } else { f };
        self.emit(f(src, base, off));
    }

    fn csr(&mut self) {
        match self.rng.gen_range(0..6) {
            0 => {
                let r = self.rng.gen_range(1..=WRITABLE);
                self.emit(csrr(r, MSCRATCH));
                self.emit(addi(r, r, 1));
                self.emit(csrw(MSCRATCH, r));
            }
            1 => {
                let rd = self.dest();
                let c = *READABLE_CSRS.choose(self.rng).unwrap();
                self.emit(csrr(rd, c));
            }
            2 => {
                let (rd, rs) = (self.dest(), self.reg());
                let f: fn(u8, u16, u8) -> u32 = *[csrrw, csrrs, csrrc].choose(self.rng).unwrap();
                self.emit(f(rd, MSCRATCH, rs));
            }
            3 => {
                let rd = self.dest();
                let u = self.rng.gen_range(0..32);
                let f: fn(u8, u16, u8) -> u32 = *[csrrwi, csrrsi, csrrci].choose(self.rng).unwrap();
                self.emit(f(rd, MSCRATCH, u));
            }
            4 => {
                let (rd, rs) = (self.dest(), self.reg());
                self.emit(csrrw(rd, 0x343, rs));
            }
            _ => {
                let rd = self.dest();
                self.emit(csrrs(rd, 0x342, 0));
                let u = self.dest();
                self.emit(add(u, rd, rd));
            }
        }
    }

    fn control(&mut self, item: usize, total: usize) {
        let at = self.words.len();
        let target = self.forward(item, total);
        let skew = self.skew();
        match self.rng.gen_range(0..4) {
            0 | 1 => {
                let funct3 = *[0, 1, 4, 5, 6, 7].choose(self.rng).unwrap();
                let (rs1, rs2) = (self.reg(), self.reg());
                self.fixups.push(Fixup::Branch { at, funct3, rs1, rs2, target, skew });
            }
            2 => {
                let rd = self.dest();
                self.fixups.push(Fixup::Jal { at, rd, target, skew });
            }
            _ => {
                let rd = self.dest();
                self.fixups.push(Fixup::Jalr { at, rd, target, skew });
            }
        }
        self.emit(NOP);
    }

    fn system(&mut self) {
        let w = match self.rng.gen_range(0..8) {
            0 | 1 => ECALL,
            2 => EBREAK,
            3 => 0,
            4 => 0xFFFF_FFFF,
            5 => 0x1050_0073,
            6 => 0x0FF0_000F,
            _ if self.user => MRET,
            _ => NOP,
        };
        self.emit(w);
    }

    fn item(&mut self, index: usize, total: usize) {
        self.items.push(self.words.len());
        match self.rng.gen_range(0..100) {
            0..=29 => self.alu(),
            30..=44 => self.alu_imm(),
            45..=49 => self.upper(),
            50..=57 => {
                self.load();
            }
            58..=61 => {
                let rd = self.load();
                let c = self.dest();
                let other = self.reg();
                self.emit(add(c, rd, other));
            }
            62..=69 => self.store(),
            70..=81 => self.control(index, total),
            82..=90 => self.csr(),
            _ => self.system(),
        }
    }
}

/// Generates the program for `seed` with at most `max_items` body items.
pub fn generate(seed: u64, max_items: usize, map: &MemoryMap) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = rng.gen_range(1..=max_items.clamp(1, (MAX_PROGRAM_WORDS - 32) / 3));
    let user = rng.gen_ratio(1, 3);
    let base = map.rom.base;

    let mut b = Builder { rng: &mut rng, words: Vec::new(), items: Vec::new(), fixups: Vec::new(), user };
    b.emit(lui(RAM_BASE, map.ram.base >> 12));
    b.emit(lui(MMIO_BASE, map.mmio_base >> 12));
    let prologue = b.words.len();
    b.words.extend([NOP; 8]);
    let main = b.words.len();

    for i in 0..items {
        b.item(i, items);
    }
    b.items.push(b.words.len());
    let code = b.rng.gen_range(0..=WRITABLE);
    b.emit(sw(code, MMIO_BASE, 0x14));
    b.words.extend([NOP; 4]);
    let handler = b.words.len();
    b.words.extend([csrr(SCRATCH, 0x341), addi(SCRATCH, SCRATCH, 4), csrw(0x341, SCRATCH), MRET]);

    let addr = |w: usize| base.wrapping_add(4 * w as u32);
    let [h0, h1] = li(SCRATCH, addr(handler));
    let [m0, m1] = li(JALR_BASE, addr(main));
    let (set_epc, enter) = if user { (csrw(0x341, JALR_BASE), MRET) } else { (NOP, NOP) };
    b.words[prologue..main].copy_from_slice(&[h0, h1, csrw(0x305, SCRATCH), m0, m1, set_epc, csrw(0x300, 0), enter]);
    let fixups = std::mem::take(&mut b.fixups);
    for f in fixups {
        let rel = |at: usize, target: usize, items: &[usize]| 4 * (items[target] as i32 - at as i32);
        match f {
            Fixup::Branch { at, funct3, rs1, rs2, target, skew } => {
                let off = rel(at, target, &b.items) + skew;
                b.words[at] = branch(funct3, rs1, rs2, off);
            }
            Fixup::Jal { at, rd, target, skew } => {
                let off = rel(at, target, &b.items) + skew;
                b.words[at] = jal(rd, off);
            }
            Fixup::Jalr { at, rd, target, skew } => {
                let off = 4 * (b.items[target] as i32 - main as i32) + skew;
                b.words[at] = if off <= 2047 { jalr(rd, JALR_BASE, off) } else { jal(rd, rel(at, target, &b.items)) };
            }
        }
    }
    Program { seed, words: b.words, user_mode: user }
}
