//! Byte-addressable memory: ROM, RAM and a small MMIO block.
//!
//! MMIO layout, relative to `mmio_base`, little-endian:
//!
//! | offset | register                                   |
//! |--------|--------------------------------------------|
//! | 0x00   | `mtime` low (write sets the counter)       |
//! | 0x04   | `mtime` high                               |
//! | 0x08   | `mtimecmp` low                             |
//! | 0x0C   | `mtimecmp` high                            |
//! | 0x10   | console out: low byte of any store emitted |
//! | 0x14   | exit: a store ends the run with its value  |

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MMIO_MTIME: u32 = 0x00;
pub const MMIO_MTIMECMP: u32 = 0x08;
pub const MMIO_CONSOLE: u32 = 0x10;
pub const MMIO_EXIT: u32 = 0x14;
pub const MMIO_SIZE: u32 = 0x18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MemFault {
    #[error("misaligned load at {0:#010x}")]
    LoadAddressMisaligned(u32),
    #[error("load access fault at {0:#010x}")]
    LoadAccessFault(u32),
    #[error("misaligned store at {0:#010x}")]
    StoreAddressMisaligned(u32),
    #[error("store access fault at {0:#010x}")]
    StoreAccessFault(u32),
    #[error("store to ROM at {0:#010x}")]
    StoreToRom(u32),
}

impl MemFault {
    pub fn address(self) -> u32 {
        match self {
            MemFault::LoadAddressMisaligned(a)
            | MemFault::LoadAccessFault(a)
            | MemFault::StoreAddressMisaligned(a)
            | MemFault::StoreAccessFault(a)
            | MemFault::StoreToRom(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("memory regions overlap")]
    Overlap,
    #[error("image [{0:#010x}, +{1:#x}) is not inside ROM or RAM")]
    OutOfRange(u32, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub base: u32,
    pub size: u32,
}

impl Region {
    pub fn contains(&self, addr: u32, len: u32) -> bool {
        addr >= self.base && (addr as u64 + len as u64) <= self.base as u64 + self.size as u64
    }

    fn overlaps(&self, other: &Region) -> bool {
        let (a0, a1) = (self.base as u64, self.base as u64 + self.size as u64);
        let (b0, b1) = (other.base as u64, other.base as u64 + other.size as u64);
        a0 < b1 && b0 < a1
    }
}

/// Address map plus the access latencies charged by the MEM stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryMap {
    pub rom: Region,
    pub ram: Region,
    pub mmio_base: u32,
    pub load_extra_cycles: u32,
    pub store_extra_cycles: u32,
}

impl Default for MemoryMap {
    fn default() -> Self {
        MemoryMap {
            rom: Region { base: 0x0000_0000, size: 64 * 1024 },
            ram: Region { base: 0x4000_0000, size: 1024 * 1024 },
            mmio_base: 0x8000_0000,
            load_extra_cycles: 2,
            store_extra_cycles: 1,
        }
    }
}

impl MemoryMap {
    pub fn mmio(&self) -> Region {
        Region { base: self.mmio_base, size: MMIO_SIZE }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let regions = [self.rom, self.ram, self.mmio()];
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if a.overlaps(b) {
                    return Err(MapError::Overlap);
                }
            }
        }
        Ok(())
    }
}

/// Effect of a store on the devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreEffect {
    None,
    Console(u8),
    Exit(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Memory {
    map: MemoryMap,
    rom: Vec<u8>,
    ram: Vec<u8>,
    pub mtime: u64,
    pub mtimecmp: u64,
    pub console: Vec<u8>,
    pub exit_code: Option<u32>,
}

enum Where {
    Rom(usize),
    Ram(usize),
    Mmio(u32),
}

impl Memory {
    pub fn new(map: MemoryMap) -> Result<Self, MapError> {
        map.validate()?;
        Ok(Memory {
            map,
            rom: vec![0; map.rom.size as usize],
            ram: vec![0; map.ram.size as usize],
            mtime: 0,
            mtimecmp: u64::MAX,
            console: Vec::new(),
            exit_code: None,
        })
    }

    pub fn map(&self) -> &MemoryMap {
        &self.map
    }

    pub fn ram(&self) -> &[u8] {
        &self.ram
    }

    fn locate(&self, addr: u32, len: u32) -> Option<Where> {
        if self.map.rom.contains(addr, len) {
            Some(Where::Rom((addr - self.map.rom.base) as usize))
        } else if self.map.ram.contains(addr, len) {
            Some(Where::Ram((addr - self.map.ram.base) as usize))
        } else if self.map.mmio().contains(addr, len) {
            Some(Where::Mmio(addr - self.map.mmio_base))
        } else {
            None
        }
    }

    /// Host-side image load; bypasses ROM write protection.
    pub fn load_image(&mut self, addr: u32, bytes: &[u8]) -> Result<(), MapError> {
        let err = || MapError::OutOfRange(addr, bytes.len());
        let len = u32::try_from(bytes.len()).map_err(|_| err())?;
        if len == 0 {
            return Ok(());
        }
        match self.locate(addr, len).ok_or_else(err)? {
            Where::Rom(o) => self.rom[o..o + bytes.len()].copy_from_slice(bytes),
            Where::Ram(o) => self.ram[o..o + bytes.len()].copy_from_slice(bytes),
            Where::Mmio(_) => return Err(err()),
        }
        Ok(())
    }

    /// Instruction fetch. Only word-aligned ROM/RAM addresses are fetchable.
    pub fn fetch(&self, addr: u32) -> Option<u32> {
        if addr % 4 != 0 {
            return None;
        }
        let bytes = match self.locate(addr, 4)? {
            Where::Rom(o) => &self.rom[o..o + 4],
            Where::Ram(o) => &self.ram[o..o + 4],
            Where::Mmio(_) => return None,
        };
        Some(u32::from_le_bytes(bytes.try_into().unwrap()))
    }

    fn read_le(bytes: &[u8]) -> u32 {
        bytes.iter().rev().fold(0u32, |acc, &b| (acc << 8) | b as u32)
    }

    fn mmio_read(&self, off: u32, width: u32) -> Option<u32> {
        let word_off = off & !3;
        let word = match word_off {
            0x00 => self.mtime as u32,
            0x04 => (self.mtime >> 32) as u32,
            0x08 => self.mtimecmp as u32,
            0x0C => (self.mtimecmp >> 32) as u32,
            MMIO_CONSOLE | MMIO_EXIT => 0,
            _ => return None,
        };
        let shift = (off - word_off) * 8;
        let mask = if width == 4 { u32::MAX } else { (1u32 << (width * 8)) - 1 };
        Some((word >> shift) & mask)
    }

    /// Load of `width` bytes; returns the (sign- or zero-extended) value and
    /// the extra latency in cycles.
    pub fn load(&self, addr: u32, width: u32, signed: bool) -> Result<(u32, u32), MemFault> {
        debug_assert!(matches!(width, 1 | 2 | 4));
        if addr % width != 0 {
            return Err(MemFault::LoadAddressMisaligned(addr));
        }
        let w = width as usize;
        let raw = match self.locate(addr, width).ok_or(MemFault::LoadAccessFault(addr))? {
            Where::Rom(o) => Self::read_le(&self.rom[o..o + w]),
            Where::Ram(o) => Self::read_le(&self.ram[o..o + w]),
            Where::Mmio(off) => self.mmio_read(off, width).ok_or(MemFault::LoadAccessFault(addr))?,
        };
        let value = match (width, signed) {
            (1, true) => raw as u8 as i8 as i32 as u32,
            (2, true) => raw as u16 as i16 as i32 as u32,
            _ => raw,
        };
        Ok((value, self.map.load_extra_cycles))
    }

    fn mmio_write(&mut self, off: u32, width: u32, value: u32) -> Option<StoreEffect> {
        let word_off = off & !3;
        let shift = (off - word_off) * 8;
        let mask = if width == 4 { u32::MAX } else { ((1u32 << (width * 8)) - 1) << shift };
        let merge = |old: u32| (old & !mask) | ((value << shift) & mask);
        match word_off {
            0x00 => self.mtime = (self.mtime & !0xFFFF_FFFF) | merge(self.mtime as u32) as u64,
            0x04 => {
                self.mtime = (self.mtime & 0xFFFF_FFFF) | ((merge((self.mtime >> 32) as u32) as u64) << 32)
            }
            0x08 => {
                self.mtimecmp = (self.mtimecmp & !0xFFFF_FFFF) | merge(self.mtimecmp as u32) as u64
            }
            0x0C => {
                self.mtimecmp = (self.mtimecmp & 0xFFFF_FFFF)
                    | ((merge((self.mtimecmp >> 32) as u32) as u64) << 32)
            }
            MMIO_CONSOLE => {
                let byte = value as u8;
                self.console.push(byte);
                return Some(StoreEffect::Console(byte));
            }
            MMIO_EXIT => {
                self.exit_code = Some(value);
                return Some(StoreEffect::Exit(value));
            }
            _ => return None,
        }
        Some(StoreEffect::None)
    }

    /// Store of the low `width` bytes of `value`; returns the extra latency
    /// and any device side effect.
    pub fn store(&mut self, addr: u32, width: u32, value: u32) -> Result<(u32, StoreEffect), MemFault> {
        debug_assert!(matches!(width, 1 | 2 | 4));
        if addr % width != 0 {
            return Err(MemFault::StoreAddressMisaligned(addr));
        }
        let w = width as usize;
        let bytes = value.to_le_bytes();
        let effect = match self.locate(addr, width).ok_or(MemFault::StoreAccessFault(addr))? {
            Where::Rom(_) => return Err(MemFault::StoreToRom(addr)),
            Where::Ram(o) => {
                self.ram[o..o + w].copy_from_slice(&bytes[..w]);
                StoreEffect::None
            }
            Where::Mmio(off) => {
                self.mmio_write(off, width, value).ok_or(MemFault::StoreAccessFault(addr))?
            }
        };
        Ok((self.map.store_extra_cycles, effect))
    }

    pub fn timer_pending(&self) -> bool {
        self.mtime >= self.mtimecmp
    }
}
