//! RV32I + Zicsr decoding, classification and disassembly.
//!
//! Decoding is total: every 32-bit word maps to exactly one [`Instr`], and
//! unrecognised encodings come back with [`InstrClass::Illegal`] rather than
//! an error. Raising the illegal-instruction exception is the pipeline's job.

mod disasm;
pub mod encode;

pub use disasm::{csr_name, disassemble};

use crate::events::EventKind;

/// Operation performed by a decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mnemonic {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Fence,
    Ecall,
    Ebreak,
    Mret,
    Wfi,
    Csrrw,
    Csrrs,
    Csrrc,
    Csrrwi,
    Csrrsi,
    Csrrci,
    Illegal,
}

/// Coarse classification used by the event detectors and the hazard unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrClass {
    Alu,
    Load,
    Store,
    CondBranch,
    UncondJump,
    Csr,
    System,
    Illegal,
}

impl Mnemonic {
    pub fn class(self) -> InstrClass {
        use Mnemonic::*;
        match self {
            Lb | Lh | Lw | Lbu | Lhu => InstrClass::Load,
            Sb | Sh | Sw => InstrClass::Store,
            Jal | Jalr => InstrClass::UncondJump,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => InstrClass::CondBranch,
            Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => InstrClass::Csr,
            Fence | Ecall | Ebreak | Mret | Wfi => InstrClass::System,
            Illegal => InstrClass::Illegal,
            Lui | Auipc | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai | Add
            | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => InstrClass::Alu,
        }
    }

    pub fn name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Fence => "fence",
            Ecall => "ecall",
            Ebreak => "ebreak",
            Mret => "mret",
            Wfi => "wfi",
            Csrrw => "csrrw",
            Csrrs => "csrrs",
            Csrrc => "csrrc",
            Csrrwi => "csrrwi",
            Csrrsi => "csrrsi",
            Csrrci => "csrrci",
            Illegal => "illegal",
        }
    }

    /// Every mnemonic, in declaration order.
    pub const ALL: [Mnemonic; 49] = {
        use Mnemonic::*;
        [
            Lui, Auipc, Jal, Jalr, Beq, Bne, Blt, Bge, Bltu, Bgeu, Lb, Lh, Lw, Lbu, Lhu, Sb, Sh,
            Sw, Addi, Slti, Sltiu, Xori, Ori, Andi, Slli, Srli, Srai, Add, Sub, Sll, Slt, Sltu,
            Xor, Srl, Sra, Or, And, Fence, Ecall, Ebreak, Mret, Wfi, Csrrw, Csrrs, Csrrc, Csrrwi,
            Csrrsi, Csrrci, Illegal,
        ]
    };
}

/// A decoded instruction.
///
/// Register fields that the encoding format does not use are zero, so
/// `rs1`/`rs2`/`rd` can be fed straight to the hazard unit. For the
/// immediate CSR forms the 5-bit unsigned immediate is held in `imm` and
/// `rs1` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instr {
    pub raw: u32,
    pub mnemonic: Mnemonic,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i32,
    pub csr: u16,
}

impl Instr {
    pub fn class(&self) -> InstrClass {
        self.mnemonic.class()
    }

    pub fn is_illegal(&self) -> bool {
        self.mnemonic == Mnemonic::Illegal
    }

    /// Destination register if the instruction writes one (x0 excluded).
    pub fn dest(&self) -> Option<u8> {
        let writes = matches!(
            self.class(),
            InstrClass::Alu | InstrClass::Load | InstrClass::UncondJump | InstrClass::Csr
        );
        (writes && self.rd != 0).then_some(self.rd)
    }

    /// Source registers read by the instruction, x0 excluded.
    pub fn sources(&self) -> [Option<u8>; 2] {
        let nz = |r: u8| (r != 0).then_some(r);
        use Mnemonic::*;
        match self.mnemonic {
            Jalr | Lb | Lh | Lw | Lbu | Lhu | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli
            | Srli | Srai | Csrrw | Csrrs | Csrrc => [nz(self.rs1), None],
            Beq | Bne | Blt | Bge | Bltu | Bgeu | Sb | Sh | Sw | Add | Sub | Sll | Slt | Sltu
            | Xor | Srl | Sra | Or | And => [nz(self.rs1), nz(self.rs2)],
            _ => [None, None],
        }
    }

    pub fn reads(&self, reg: u8) -> bool {
        reg != 0 && self.sources().contains(&Some(reg))
    }

    /// True when a CSR instruction would write its CSR. `csrrs`/`csrrc`
    /// with a zero source (register x0 or immediate 0) only read.
    pub fn csr_writes(&self) -> bool {
        use Mnemonic::*;
        match self.mnemonic {
            Csrrw | Csrrwi => true,
            Csrrs | Csrrc => self.rs1 != 0,
            Csrrsi | Csrrci => self.imm != 0,
            _ => false,
        }
    }

    fn illegal(raw: u32) -> Self {
        Instr { raw, mnemonic: Mnemonic::Illegal, rd: 0, rs1: 0, rs2: 0, imm: 0, csr: 0 }
    }
}

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn sext(value: u32, width: u32) -> i32 {
    let shift = 32 - width;
    ((value << shift) as i32) >> shift
}

fn imm_i(w: u32) -> i32 {
    (w as i32) >> 20
}

fn imm_s(w: u32) -> i32 {
    sext((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12)
}

fn imm_b(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 12)
        | (bits(w, 7, 7) << 11)
        | (bits(w, 30, 25) << 5)
        | (bits(w, 11, 8) << 1);
    sext(v, 13)
}

fn imm_u(w: u32) -> i32 {
    (w & 0xFFFF_F000) as i32
}

fn imm_j(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 20)
        | (bits(w, 19, 12) << 12)
        | (bits(w, 20, 20) << 11)
        | (bits(w, 30, 21) << 1);
    sext(v, 21)
}

/// Decodes one instruction word. Never fails.
pub fn decode(word: u32) -> Instr {
    use Mnemonic::*;
    if word & 0b11 != 0b11 {
        return Instr::illegal(word);
    }
    let opcode = bits(word, 6, 0);
    let rd = bits(word, 11, 7) as u8;
    let rs1 = bits(word, 19, 15) as u8;
    let rs2 = bits(word, 24, 20) as u8;
    let funct3 = bits(word, 14, 12);
    let funct7 = bits(word, 31, 25);

    let mk = |mnemonic, rd, rs1, rs2, imm| Instr { raw: word, mnemonic, rd, rs1, rs2, imm, csr: 0 };

    match opcode {
        0x37 => mk(Lui, rd, 0, 0, imm_u(word)),
        0x17 => mk(Auipc, rd, 0, 0, imm_u(word)),
        0x6F => mk(Jal, rd, 0, 0, imm_j(word)),
        0x67 if funct3 == 0 => mk(Jalr, rd, rs1, 0, imm_i(word)),
        0x63 => {
            let m = match funct3 {
                0 => Beq,
                1 => Bne,
                4 => Blt,
                5 => Bge,
                6 => Bltu,
                7 => Bgeu,
                _ => return Instr::illegal(word),
            };
            mk(m, 0, rs1, rs2, imm_b(word))
        }
        0x03 => {
            let m = match funct3 {
                0 => Lb,
                1 => Lh,
                2 => Lw,
                4 => Lbu,
                5 => Lhu,
                _ => return Instr::illegal(word),
            };
            mk(m, rd, rs1, 0, imm_i(word))
        }
        0x23 => {
            let m = match funct3 {
                0 => Sb,
                1 => Sh,
                2 => Sw,
                _ => return Instr::illegal(word),
            };
            mk(m, 0, rs1, rs2, imm_s(word))
        }
        0x13 => {
            let shamt = rs2 as i32;
            match funct3 {
                0 => mk(Addi, rd, rs1, 0, imm_i(word)),
                2 => mk(Slti, rd, rs1, 0, imm_i(word)),
                3 => mk(Sltiu, rd, rs1, 0, imm_i(word)),
                4 => mk(Xori, rd, rs1, 0, imm_i(word)),
                6 => mk(Ori, rd, rs1, 0, imm_i(word)),
                7 => mk(Andi, rd, rs1, 0, imm_i(word)),
                1 if funct7 == 0 => mk(Slli, rd, rs1, 0, shamt),
                5 if funct7 == 0 => mk(Srli, rd, rs1, 0, shamt),
                5 if funct7 == 0x20 => mk(Srai, rd, rs1, 0, shamt),
                _ => Instr::illegal(word),
            }
        }
        0x33 => {
            let m = match (funct7, funct3) {
                (0x00, 0) => Add,
                (0x20, 0) => Sub,
                (0x00, 1) => Sll,
                (0x00, 2) => Slt,
                (0x00, 3) => Sltu,
                (0x00, 4) => Xor,
                (0x00, 5) => Srl,
                (0x20, 5) => Sra,
                (0x00, 6) => Or,
                (0x00, 7) => And,
                _ => return Instr::illegal(word),
            };
            mk(m, rd, rs1, rs2, 0)
        }
        0x0F if funct3 == 0 => mk(Fence, 0, 0, 0, bits(word, 27, 20) as i32),
        0x73 => {
            let csr = bits(word, 31, 20) as u16;
            let csr_op = |m, rs1: u8, imm: i32| Instr { raw: word, mnemonic: m, rd, rs1, rs2: 0, imm, csr };
            match funct3 {
                0 => match word {
                    0x0000_0073 => mk(Ecall, 0, 0, 0, 0),
                    0x0010_0073 => mk(Ebreak, 0, 0, 0, 0),
                    0x3020_0073 => mk(Mret, 0, 0, 0, 0),
                    0x1050_0073 => mk(Wfi, 0, 0, 0, 0),
                    _ => Instr::illegal(word),
                },
                1 => csr_op(Csrrw, rs1, 0),
                2 => csr_op(Csrrs, rs1, 0),
                3 => csr_op(Csrrc, rs1, 0),
                5 => csr_op(Csrrwi, 0, rs1 as i32),
                6 => csr_op(Csrrsi, 0, rs1 as i32),
                7 => csr_op(Csrrci, 0, rs1 as i32),
                _ => Instr::illegal(word),
            }
        }
        _ => Instr::illegal(word),
    }
}

/// Events an instruction will trigger regardless of its dynamic behaviour.
///
/// Branch direction is only known in EX, so conditional branches add
/// nothing beyond fetch and retirement here.
pub fn static_event_hints(instr: &Instr) -> Vec<EventKind> {
    let mut kinds = vec![EventKind::Fetch];
    if instr.is_illegal() {
        return kinds;
    }
    kinds.push(EventKind::Instret);
    match instr.class() {
        InstrClass::Load => kinds.extend([EventKind::Load, EventKind::MemAccess]),
        InstrClass::Store => kinds.extend([EventKind::Store, EventKind::MemAccess]),
        InstrClass::UncondJump => kinds.push(EventKind::UncondJump),
        _ => {}
    }
    kinds
}
