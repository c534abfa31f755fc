#!/usr/bin/env python3
"""Rebuilds the RV32I fixture images under crates/core/fixtures.

Needs clang with the riscv32 target and ld.lld. Outputs:

  <name>.bin          flat ROM image (entry at address 0)
  quicksort64.elf     linked executable of the quicksort port
  ram_hello.elf       executable linked entirely at the RAM base
  ram_hello.json      entry point and per-segment digests of ram_hello.elf
  isa_vectors.txt     assembler-produced encodings of isa_vectors.s lines
"""

import hashlib
import json
import shutil
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "crates" / "core" / "fixtures"
SRC = FIX / "src"
RAM_BASE = 0x40000000

ARCH = ["--target=riscv32", "-march=rv32i", "-mabi=ilp32", "-mno-relax"]
CFLAGS = ["-O2", "-ffreestanding", "-fno-builtin", "-fno-pic", "-nostdlib"]


def sh(*args):
    subprocess.run(args, check=True)


def compile_obj(src: Path, out: Path):
    extra = CFLAGS if src.suffix == ".c" else []
    sh("clang", *ARCH, *extra, "-I", str(SRC), "-c", "-o", str(out), str(src))


def link(objs, script: Path, out: Path):
    sh("clang", *ARCH, "-nostdlib", "-fuse-ld=lld", "-Wl,--no-relax",
       "-T", str(script), "-o", str(out), *map(str, objs))


def load_segments(elf: bytes):
    if elf[:4] != b"\x7fELF" or elf[4] != 1 or elf[5] != 1:
        raise SystemExit("expected a 32-bit little-endian ELF")
    entry, phoff = struct.unpack_from("<II", elf, 24)
    phentsize, phnum = struct.unpack_from("<HH", elf, 42)
    segs = []
    for n in range(phnum):
        p_type, off, vaddr, _paddr, filesz, memsz = struct.unpack_from("<IIIIII", elf, phoff + n * phentsize)
        if p_type == 1 and memsz:
            segs.append((vaddr, elf[off:off + filesz], memsz))
    return entry, segs


def flat_image(elf: bytes) -> bytes:
    entry, segs = load_segments(elf)
    assert entry == 0, "flat images must start at address 0"
    image = bytearray()
    for vaddr, data, _ in segs:
        if vaddr >= RAM_BASE:
            assert not data, "initialized RAM data cannot go in a flat image"
            continue
        end = vaddr + len(data)
        if len(image) < end:
            image.extend(b"\0" * (end - len(image)))
        image[vaddr:end] = data
    return bytes(image)


def isa_vectors(tmp: Path):
    lines = [l.strip() for l in (SRC / "isa_vectors.s").read_text().splitlines()]
    lines = [l for l in lines if l and not l.startswith("#")]
    asm = tmp / "vec.s"
    asm.write_text("\t.text\n" + "".join(f"\t{l}\n" for l in lines))
    obj = tmp / "vec.o"
    raw = tmp / "vec.bin"
    sh("clang", *ARCH, "-c", "-o", str(obj), str(asm))
    sh("ld.lld", "-Ttext=0", "-e", "0", "--oformat=binary", "-o", str(raw), str(obj))
    text = raw.read_bytes()
    assert len(text) == 4 * len(lines), "every vector must assemble to one word"
    words = struct.unpack(f"<{len(lines)}I", text[: 4 * len(lines)])
    out = "".join(f"{w:#010x}\t{l}\n" for w, l in zip(words, lines))
    (FIX / "isa_vectors.txt").write_text(out)


def main():
    if shutil.which("clang") is None:
        sys.exit("clang not found")
    with tempfile.TemporaryDirectory() as t:
        tmp = Path(t)
        crt0 = tmp / "crt0.o"
        compile_obj(SRC / "crt0.S", crt0)
        for src in sorted(SRC.glob("*.S")):
            if src.stem in ("crt0", "ram_hello"):
                continue
            obj = tmp / f"{src.stem}.o"
            elf = tmp / f"{src.stem}.elf"
            compile_obj(src, obj)
            link([obj], SRC / "link.ld", elf)
            (FIX / f"{src.stem}.bin").write_bytes(flat_image(elf.read_bytes()))

        qs = tmp / "quicksort64.o"
        compile_obj(SRC / "quicksort64.c", qs)
        link([crt0, qs], SRC / "link.ld", FIX / "quicksort64.elf")
        (FIX / "quicksort64.bin").write_bytes(flat_image((FIX / "quicksort64.elf").read_bytes()))

        obj = tmp / "ram_hello.o"
        compile_obj(SRC / "ram_hello.S", obj)
        link([obj], SRC / "link_ram.ld", FIX / "ram_hello.elf")
        entry, segs = load_segments((FIX / "ram_hello.elf").read_bytes())
        meta = {
            "entry": entry,
            "segments": [
                {"vaddr": v, "filesz": len(d), "memsz": m, "sha256": hashlib.sha256(d + b"\0" * (m - len(d))).hexdigest()}
                for v, d, m in segs
            ],
        }
        (FIX / "ram_hello.json").write_text(json.dumps(meta, indent=2) + "\n")

        isa_vectors(tmp)


if __name__ == "__main__":
    main()
