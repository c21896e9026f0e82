"""Command-line driver."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .config import ConfigError, ObfConfig
from .pipeline import EXIT_USAGE, run_pipeline


class _Parser(argparse.ArgumentParser):
    # usage errors use exit status 1, not argparse's default 2
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hex(s: str) -> int:
    try:
        v = int(s, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex value: {s!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wasmobf", description="Obfuscate a WebAssembly (core v1) binary.")
    p.add_argument("input", help="input .wasm file")
    p.add_argument("-o", "--output", required=True, help="output .wasm file")
    g = p.add_argument_group("passes")
    g.add_argument("--name", action="store_true", help="scramble function names in the name section")
    g.add_argument("--exports", action="store_true", help="rename exports not in the allowlist")
    g.add_argument("--imports", action="store_true", help="also rename imports (outside WASI modules)")
    g.add_argument("--mem", action="store_true", help="encrypt linear memory with runtime decryption")
    g.add_argument("--flatten", type=int, metavar="N", help="flatten functions into N dispatched blocks")
    g.add_argument("--alias", type=float, metavar="P", help="turn P%% of direct calls into call_indirect")
    g.add_argument("--collatz", choices=("o1", "o2"), help="Collatz opaque predicates (o1: two per function, o2: all)")
    g.add_argument("--opaque", choices=("const", "simple"), default="const",
                   help="table-index form at non-Collatz alias sites")
    p.add_argument("--seed", type=_hex, default=0, metavar="HEX", help="RNG seed")
    p.add_argument("--key", type=_hex, default=None, metavar="HEX", help="keystream seed (default: derived from --seed)")
    p.add_argument("--key-length", type=int, default=8, choices=(1, 2, 4, 8), help="keystream period in bytes")
    p.add_argument("--allowlist", default="memory,_start", metavar="CSV", help="export names kept as-is")
    p.add_argument("--rename-map", metavar="PATH", help="write the rename map (JSON)")
    p.add_argument("--metrics", metavar="PATH", help="write metrics (JSON, or key=value for .txt)")
    p.add_argument("--measure", metavar="EXPORT", help="also report interpreter step counts for this export")
    p.add_argument("--vectors", type=int, default=20, help="input vectors used by --measure")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(a: argparse.Namespace) -> ObfConfig:
    return ObfConfig(
        name=a.name, exports=a.exports, memory=a.mem, flatten=a.flatten, alias=a.alias,
        collatz=a.collatz or "none", opaque=a.opaque, seed=a.seed,
        key_seed=a.seed if a.key is None else a.key, key_length=a.key_length,
        allowlist=tuple(s for s in a.allowlist.split(",") if s), rename_imports=a.imports,
    ).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = config_from_args(a)
    except ConfigError as exc:
        parser.error(str(exc))
    return run_pipeline(a.input, cfg, a.output, a.rename_map, a.metrics, a.measure, a.vectors)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
