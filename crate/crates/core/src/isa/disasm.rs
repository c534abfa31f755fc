use super::{Instr, InstrClass, Mnemonic};

/// Standard name for a CSR address, if it has one we know of.
pub fn csr_name(addr: u16) -> Option<String> {
    let fixed = match addr {
        0x300 => "mstatus",
        0x301 => "misa",
        0x304 => "mie",
        0x305 => "mtvec",
        0x306 => "mcounteren",
        0x320 => "mcountinhibit",
        0x340 => "mscratch",
        0x341 => "mepc",
        0x342 => "mcause",
        0x343 => "mtval",
        0x344 => "mip",
        0xB00 => "mcycle",
        0xB02 => "minstret",
        0xB80 => "mcycleh",
        0xB82 => "minstreth",
        0xC00 => "cycle",
        0xC01 => "time",
        0xC02 => "instret",
        0xC80 => "cycleh",
        0xC81 => "timeh",
        0xC82 => "instreth",
        0xF11 => "mvendorid",
        0xF12 => "marchid",
        0xF13 => "mimpid",
        0xF14 => "mhartid",
        _ => "",
    };
    if !fixed.is_empty() {
        return Some(fixed.to_string());
    }
    let n = addr & 0x1F;
    if n < 3 {
        return None;
    }
    match addr & !0x1F {
        0x320 => Some(format!("mhpmevent{n}")),
        0xB00 => Some(format!("mhpmcounter{n}")),
        0xB80 => Some(format!("mhpmcounter{n}h")),
        0xC00 => Some(format!("hpmcounter{n}")),
        0xC80 => Some(format!("hpmcounter{n}h")),
        _ => None,
    }
}

fn csr_operand(addr: u16) -> String {
    csr_name(addr).unwrap_or_else(|| format!("{addr:#05x}"))
}

fn fence_set(bits: i32) -> String {
    let s: String = [(8, 'i'), (4, 'o'), (2, 'r'), (1, 'w')]
        .iter()
        .filter(|(b, _)| bits & b != 0)
        .map(|(_, c)| *c)
        .collect();
    if s.is_empty() {
        "0".into()
    } else {
        s
    }
}

/// One-line assembly rendering. Illegal words render as
/// `.word 0xXXXXXXXX <illegal>`.
pub fn disassemble(i: &Instr) -> String {
    use Mnemonic::*;
    let name = i.mnemonic.name();
    let (rd, rs1, rs2, imm) = (i.rd, i.rs1, i.rs2, i.imm);
    match i.mnemonic {
        Illegal => format!(".word {:#010x} <illegal>", i.raw),
        Lui | Auipc => format!("{name} x{rd}, {:#x}", (imm as u32) >> 12),
        Jal => format!("{name} x{rd}, {imm}"),
        Jalr => format!("{name} x{rd}, {imm}(x{rs1})"),
        Ecall | Ebreak | Mret | Wfi => name.to_string(),
        Fence => format!("fence {}, {}", fence_set(imm >> 4), fence_set(imm & 0xF)),
        Csrrw | Csrrs | Csrrc => format!("{name} x{rd}, {}, x{rs1}", csr_operand(i.csr)),
        Csrrwi | Csrrsi | Csrrci => format!("{name} x{rd}, {}, {imm}", csr_operand(i.csr)),
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => {
            format!("{name} x{rd}, x{rs1}, x{rs2}")
        }
        _ => match i.class() {
            InstrClass::CondBranch => format!("{name} x{rs1}, x{rs2}, {imm}"),
            InstrClass::Load => format!("{name} x{rd}, {imm}(x{rs1})"),
            InstrClass::Store => format!("{name} x{rs2}, {imm}(x{rs1})"),
            _ => format!("{name} x{rd}, x{rs1}, {imm}"),
        },
    }
}
