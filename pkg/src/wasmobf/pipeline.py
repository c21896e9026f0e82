"""Pass pipeline: fixed pass order, seeding, output gate, metrics report."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import code_obf, data_obf
from .analysis import count_metrics, metrics_to_kv, validate_module
from .binfmt import DecodeError, EncodeError, Module, decode_module, encode_module
from .config import ObfConfig
from .data_obf import MemKey, RenameMap
from .errors import PassError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_REFUSED, EXIT_IO = 0, 1, 2, 3, 4


class InvalidModule(Exception):
    """Input or output failed decoding or validation."""


@dataclass
class ObfResult:
    module: Module
    rename_map: RenameMap = field(default_factory=RenameMap)
    stats: dict = field(default_factory=dict)


def pass_rng(cfg: ObfConfig, name: str) -> random.Random:
    return random.Random(f"{cfg.seed}:{name}")


def obfuscate(m: Module, cfg: ObfConfig) -> ObfResult:
    """Apply the configured passes in order name, exports, alias, flatten, memory."""
    cfg.validate()
    res = ObfResult(m)
    stats = res.stats
    if cfg.name:
        res.module, rm = data_obf.obfuscate_function_names(res.module, pass_rng(cfg, "name"))
        res.rename_map.extend(rm)
        stats["names_renamed"] = len(rm)
    if cfg.exports:
        res.module, rm = data_obf.obfuscate_exports(res.module, pass_rng(cfg, "exports"),
                                                    cfg.allowlist, cfg.rename_imports)
        res.rename_map.extend(rm)
        stats["exports_renamed"] = sum(1 for e in rm.entries if e.space == "export")
        stats["imports_renamed"] = sum(1 for e in rm.entries if e.space == "import")
    if cfg.alias is not None:
        res.module = code_obf.alias_disrupt(res.module, cfg.alias, pass_rng(cfg, "alias"),
                                            cfg.opaque, cfg.collatz, stats)
    if cfg.flatten is not None:
        res.module = code_obf.flatten(res.module, cfg.flatten, pass_rng(cfg, "flatten"),
                                      cfg.collatz, stats)
    if cfg.memory:
        key = MemKey.from_seed(cfg.key_seed, cfg.key_length)
        res.module = data_obf.obfuscate_memory(res.module, key, stats)
    return res


# ---------------------------------------------------------------- metrics

def _ratio(a: float, b: float) -> float:
    if a == b:
        return 1.0
    return b / a if a else float("inf")


def metrics_report(before: Module, after: Module, extra: Optional[dict] = None,
                   steps: Optional[tuple[int, int]] = None) -> dict:
    mb, ma = count_metrics(before).as_dict(), count_metrics(after).as_dict()
    keys = ("num_call", "num_call_indirect", "elem_entries", "byte_size", "max_nesting", "num_functions")
    doc = {
        "before": mb,
        "after": ma,
        "delta": {k: ma[k] - mb[k] for k in keys},
        "ratios": {
            "size": _ratio(mb["byte_size"], ma["byte_size"]),
            "instructions": _ratio(sum(mb["opcode_counts"].values()), sum(ma["opcode_counts"].values())),
        },
    }
    if steps is not None:
        doc["steps"] = {"before": steps[0], "after": steps[1]}
        doc["ratios"]["steps"] = _ratio(*steps)
    if extra:
        doc.update(extra)
    return doc


def emit_metrics(before: Module, after: Module, path: str | Path, extra: Optional[dict] = None,
                 steps: Optional[tuple[int, int]] = None) -> dict:
    """Write the before/after report: JSON, or ``key=value`` lines for a ``.txt`` path."""
    doc = metrics_report(before, after, extra, steps)
    path = Path(path)
    if path.suffix == ".txt":
        path.write_text("\n".join(metrics_to_kv(doc)) + "\n")
    else:
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def measure_steps(before: Module, after: Module, entry: int, vectors: Sequence[Sequence]) -> tuple[int, int]:
    from .interp import run_vectors
    return run_vectors(before, entry, vectors).steps, run_vectors(after, entry, vectors).steps


# ---------------------------------------------------------------- file-level driver

def load_module(data: bytes) -> Module:
    try:
        m = decode_module(data)
    except DecodeError as exc:
        raise InvalidModule(f"decode error: {exc}") from None
    rep = validate_module(m)
    if not rep.ok:
        raise InvalidModule(f"input does not validate:\n{rep}")
    return m


def run_pipeline(input_path: str | Path, cfg: ObfConfig, output: str | Path,
                 rename_map: Optional[str | Path] = None, metrics: Optional[str | Path] = None,
                 measure: Optional[str] = None, vectors: int = 20) -> int:
    """Obfuscate one file; returns a process exit status."""
    try:
        data = Path(input_path).read_bytes()
    except OSError as exc:
        log.error("cannot read %s: %s", input_path, exc)
        return EXIT_IO
    try:
        m = load_module(data)
    except InvalidModule as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    try:
        res = obfuscate(m, cfg)
        out = encode_module(res.module) if cfg.any_pass else data
    except PassError as exc:
        log.error("pass refused: %s", exc)
        return EXIT_REFUSED
    except EncodeError as exc:
        log.error("cannot encode output: %s", exc)
        return EXIT_INVALID
    rep = validate_module(decode_module(out))
    if not rep.ok:
        log.error("output failed validation, nothing written:\n%s", rep)
        return EXIT_INVALID
    steps = None
    if measure is not None:
        try:
            entry = m.export_by_name(measure).index
        except KeyError:
            log.error("no export named %r", measure)
            return EXIT_USAGE
        from .fixtures import random_arg
        rng = random.Random(f"{cfg.seed}:measure")
        vecs = [[random_arg(rng, t) for t in m.func_type(entry).params] for _ in range(vectors)]
        steps = measure_steps(m, res.module, entry, vecs)
    try:
        Path(output).write_bytes(out)
        if rename_map is not None:
            Path(rename_map).write_text(res.rename_map.to_json() + "\n")
        if metrics is not None:
            emit_metrics(m, res.module, metrics, {"passes": res.stats, "config": cfg.as_dict()}, steps)
    except OSError as exc:
        log.error("write failed: %s", exc)
        return EXIT_IO
    return EXIT_OK
