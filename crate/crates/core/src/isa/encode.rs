//! Instruction encoders.
//!
//! Used to build test programs, the random differential corpus and the
//! in-repo microbenchmarks without an external toolchain. Register
//! arguments are plain indices; immediates are truncated to their field.

fn r(f7: u32, rs2: u8, rs1: u8, f3: u32, rd: u8, op: u32) -> u32 {
    (f7 << 25) | ((rs2 as u32) << 20) | ((rs1 as u32) << 15) | (f3 << 12) | ((rd as u32) << 7) | op
}

fn i(imm: i32, rs1: u8, f3: u32, rd: u8, op: u32) -> u32 {
    (((imm as u32) & 0xFFF) << 20) | ((rs1 as u32) << 15) | (f3 << 12) | ((rd as u32) << 7) | op
}

fn s(imm: i32, rs2: u8, rs1: u8, f3: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 5) & 0x7F) << 25)
        | ((rs2 as u32) << 20)
        | ((rs1 as u32) << 15)
        | (f3 << 12)
        | ((imm & 0x1F) << 7)
        | 0x23
}

fn b(imm: i32, rs2: u8, rs1: u8, f3: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 12) & 1) << 31)
        | (((imm >> 5) & 0x3F) << 25)
        | ((rs2 as u32) << 20)
        | ((rs1 as u32) << 15)
        | (f3 << 12)
        | (((imm >> 1) & 0xF) << 8)
        | (((imm >> 11) & 1) << 7)
        | 0x63
}

pub fn lui(rd: u8, upper20: u32) -> u32 {
    ((upper20 & 0xFFFFF) << 12) | ((rd as u32) << 7) | 0x37
}

pub fn auipc(rd: u8, upper20: u32) -> u32 {
    ((upper20 & 0xFFFFF) << 12) | ((rd as u32) << 7) | 0x17
}

pub fn jal(rd: u8, offset: i32) -> u32 {
    let imm = offset as u32;
    (((imm >> 20) & 1) << 31)
        | (((imm >> 1) & 0x3FF) << 21)
        | (((imm >> 11) & 1) << 20)
        | (((imm >> 12) & 0xFF) << 12)
        | ((rd as u32) << 7)
        | 0x6F
}

pub fn jalr(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 0, rd, 0x67)
}

pub fn beq(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 0)
}
pub fn bne(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 1)
}
pub fn blt(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 4)
}
pub fn bge(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 5)
}
pub fn bltu(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 6)
}
pub fn bgeu(rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, 7)
}

/// Conditional branch by funct3 (0 beq, 1 bne, 4 blt, 5 bge, 6 bltu, 7 bgeu).
pub fn branch(funct3: u32, rs1: u8, rs2: u8, offset: i32) -> u32 {
    b(offset, rs2, rs1, funct3)
}

pub fn lb(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 0, rd, 0x03)
}
pub fn lh(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 1, rd, 0x03)
}
pub fn lw(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 2, rd, 0x03)
}
pub fn lbu(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 4, rd, 0x03)
}
pub fn lhu(rd: u8, rs1: u8, offset: i32) -> u32 {
    i(offset, rs1, 5, rd, 0x03)
}

pub fn sb(rs2: u8, rs1: u8, offset: i32) -> u32 {
    s(offset, rs2, rs1, 0)
}
pub fn sh(rs2: u8, rs1: u8, offset: i32) -> u32 {
    s(offset, rs2, rs1, 1)
}
pub fn sw(rs2: u8, rs1: u8, offset: i32) -> u32 {
    s(offset, rs2, rs1, 2)
}

pub fn addi(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 0, rd, 0x13)
}
pub fn slti(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 2, rd, 0x13)
}
pub fn sltiu(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 3, rd, 0x13)
}
pub fn xori(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 4, rd, 0x13)
}
pub fn ori(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 6, rd, 0x13)
}
pub fn andi(rd: u8, rs1: u8, imm: i32) -> u32 {
    i(imm, rs1, 7, rd, 0x13)
}
pub fn slli(rd: u8, rs1: u8, shamt: u32) -> u32 {
    r(0, (shamt & 0x1F) as u8, rs1, 1, rd, 0x13)
}
pub fn srli(rd: u8, rs1: u8, shamt: u32) -> u32 {
    r(0, (shamt & 0x1F) as u8, rs1, 5, rd, 0x13)
}
pub fn srai(rd: u8, rs1: u8, shamt: u32) -> u32 {
    r(0x20, (shamt & 0x1F) as u8, rs1, 5, rd, 0x13)
}

pub fn add(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 0, rd, 0x33)
}
pub fn sub(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0x20, rs2, rs1, 0, rd, 0x33)
}
pub fn sll(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 1, rd, 0x33)
}
pub fn slt(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 2, rd, 0x33)
}
pub fn sltu(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 3, rd, 0x33)
}
pub fn xor(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 4, rd, 0x33)
}
pub fn srl(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 5, rd, 0x33)
}
pub fn sra(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0x20, rs2, rs1, 5, rd, 0x33)
}
pub fn or(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 6, rd, 0x33)
}
pub fn and(rd: u8, rs1: u8, rs2: u8) -> u32 {
    r(0, rs2, rs1, 7, rd, 0x33)
}

pub fn csrrw(rd: u8, csr: u16, rs1: u8) -> u32 {
    i(csr as i32, rs1, 1, rd, 0x73)
}
pub fn csrrs(rd: u8, csr: u16, rs1: u8) -> u32 {
    i(csr as i32, rs1, 2, rd, 0x73)
}
pub fn csrrc(rd: u8, csr: u16, rs1: u8) -> u32 {
    i(csr as i32, rs1, 3, rd, 0x73)
}
pub fn csrrwi(rd: u8, csr: u16, uimm: u8) -> u32 {
    i(csr as i32, uimm & 0x1F, 5, rd, 0x73)
}
pub fn csrrsi(rd: u8, csr: u16, uimm: u8) -> u32 {
    i(csr as i32, uimm & 0x1F, 6, rd, 0x73)
}
pub fn csrrci(rd: u8, csr: u16, uimm: u8) -> u32 {
    i(csr as i32, uimm & 0x1F, 7, rd, 0x73)
}

/// `csrr rd, csr`
pub fn csrr(rd: u8, csr: u16) -> u32 {
    csrrs(rd, csr, 0)
}
/// `csrw csr, rs1`
pub fn csrw(csr: u16, rs1: u8) -> u32 {
    csrrw(0, csr, rs1)
}

pub const NOP: u32 = 0x0000_0013;
pub const ECALL: u32 = 0x0000_0073;
pub const EBREAK: u32 = 0x0010_0073;
pub const MRET: u32 = 0x3020_0073;
pub const WFI: u32 = 0x1050_0073;
pub const FENCE: u32 = 0x0FF0_000F;

/// Loads an arbitrary 32-bit constant with `lui` + `addi`.
pub fn li(rd: u8, value: u32) -> [u32; 2] {
    let lo = ((value as i32) << 20) >> 20;
    let hi = value.wrapping_sub(lo as u32) >> 12;
    [lui(rd, hi), addi(rd, rd, lo)]
}
