//! Program images: flat binaries and 32-bit little-endian RISC-V ELF
//! executables.

use std::path::Path;

use thiserror::Error;

use super::config::ImageFormat;
use crate::hart::{HartState, MemoryMap};

const EI_CLASS: usize = 4;
const EI_DATA: usize = 5;
const ELFCLASS32: u8 = 1;
const ELFDATA2LSB: u8 = 1;
const ET_EXEC: u16 = 2;
const EM_RISCV: u16 = 243;
const PT_LOAD: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),
    #[error("segment [{addr:#010x}, +{len:#x}) is outside ROM and RAM")]
    SegmentOutOfRange { addr: u32, len: u64 },
    #[error("cannot read program: {0}")]
    IoFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub addr: u32,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedImage {
    pub entry: u32,
    pub segments: Vec<Segment>,
}

impl LoadedImage {
    pub fn flat(bytes: Vec<u8>, map: &MemoryMap) -> Result<Self, LoadError> {
        let seg = Segment { addr: map.rom.base, bytes };
        check_range(&seg, map)?;
        Ok(LoadedImage { entry: map.rom.base, segments: vec![seg] })
    }

    pub fn elf32(file: &[u8], map: &MemoryMap) -> Result<Self, LoadError> {
        let unsupported = |m: &str| LoadError::UnsupportedImage(m.to_owned());
        if file.len() < 16 || &file[..4] != b"\x7fELF" {
            return Err(unsupported("not an ELF file"));
        }
        if file[EI_CLASS] != ELFCLASS32 {
            return Err(unsupported("not a 32-bit ELF"));
        }
        if file[EI_DATA] != ELFDATA2LSB {
            return Err(unsupported("not a little-endian ELF"));
        }
        let half = |o: usize| file.get(o..o + 2).map(|b| u16::from_le_bytes([b[0], b[1]]));
        let word = |o: usize| file.get(o..o + 4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let truncated = || unsupported("truncated ELF header");
        if half(18).ok_or_else(truncated)? != EM_RISCV {
            return Err(unsupported("not a RISC-V ELF"));
        }
        if half(16).ok_or_else(truncated)? != ET_EXEC {
            return Err(unsupported("not an executable"));
        }
        let entry = word(24).ok_or_else(truncated)?;
        let phoff = word(28).ok_or_else(truncated)? as usize;
        let phentsize = half(42).ok_or_else(truncated)? as usize;
        let phnum = half(44).ok_or_else(truncated)? as usize;
        if phnum > 0 && phentsize < 32 {
            return Err(unsupported("bad program header size"));
        }
        let mut segments = Vec::new();
        for n in 0..phnum {
            let ph = phoff + n * phentsize;
            let f = |i: usize| word(ph + 4 * i).ok_or_else(|| unsupported("truncated program header"));
            let (p_type, offset, vaddr, filesz, memsz) = (f(0)?, f(1)? as usize, f(2)?, f(4)?, f(5)?);
            if p_type != PT_LOAD || memsz == 0 {
                continue;
            }
            if filesz > memsz {
                return Err(LoadError::SegmentOutOfRange { addr: vaddr, len: memsz.into() });
            }
            let data = offset
                .checked_add(filesz as usize)
                .and_then(|end| file.get(offset..end))
                .ok_or_else(|| unsupported("segment data past end of file"))?;
            let mut bytes = data.to_vec();
            bytes.resize(memsz as usize, 0);
            let seg = Segment { addr: vaddr, bytes };
            check_range(&seg, map)?;
            segments.push(seg);
        }
        Ok(LoadedImage { entry, segments })
    }

    pub fn parse(file: Vec<u8>, format: ImageFormat, map: &MemoryMap) -> Result<Self, LoadError> {
        match format {
            ImageFormat::Flat => Self::flat(file, map),
            ImageFormat::Elf32 => Self::elf32(&file, map),
        }
    }

    pub fn from_path(path: &Path, format: ImageFormat, map: &MemoryMap) -> Result<Self, LoadError> {
        Self::parse(std::fs::read(path)?, format, map)
    }

    pub fn install(&self, hart: &mut HartState) -> Result<(), LoadError> {
        for s in &self.segments {
            hart.mem
                .load_image(s.addr, &s.bytes)
                .map_err(|_| LoadError::SegmentOutOfRange { addr: s.addr, len: s.bytes.len() as u64 })?;
        }
        Ok(())
    }
}

fn check_range(s: &Segment, map: &MemoryMap) -> Result<(), LoadError> {
    let err = || LoadError::SegmentOutOfRange { addr: s.addr, len: s.bytes.len() as u64 };
    let len = u32::try_from(s.bytes.len()).map_err(|_| err())?;
    if len == 0 || map.rom.contains(s.addr, len) || map.ram.contains(s.addr, len) {
        Ok(())
    } else {
        Err(err())
    }
}
