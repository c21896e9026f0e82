import json
import subprocess
import sys

import pytest

from wasmobf.binfmt import decode_module, encode_module
from wasmobf.cli import main
from wasmobf.config import MATRIX, PRESETS, ConfigError, ObfConfig, with_seed
from wasmobf.fixtures import load_fixture
from wasmobf.interp import differential_check
from wasmobf.pipeline import (
    EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_REFUSED, EXIT_USAGE, metrics_report, obfuscate,
)


@pytest.fixture
def wasm(tmp_path):
    def write(name="calls20"):
        p = tmp_path / f"{name}.wasm"
        p.write_bytes(encode_module(load_fixture(name).module))
        return p
    return write


def test_full_pipeline(wasm, tmp_path):
    src = wasm("strhash")
    out, rmap, met = tmp_path / "o.wasm", tmp_path / "map.json", tmp_path / "m.json"
    rc = main([str(src), "-o", str(out), "--name", "--exports", "--mem", "--flatten", "5", "--alias", "50",
               "--collatz", "o1", "--seed", "c0ffee", "--rename-map", str(rmap), "--metrics", str(met),
               "--measure", "fnv_hash", "--vectors", "5"])
    assert rc == EXIT_OK
    fx = load_fixture("strhash")
    obf = decode_module(out.read_bytes())
    entry = [e for e in obf.exports if e.kind == 0][0].index
    assert differential_check(fx.module, obf, fx.entry, fx.vectors(20), obf_entry=entry).equal
    doc = json.loads(met.read_text())
    assert {"before", "after", "delta", "ratios", "steps", "passes", "config"} <= set(doc)
    assert doc["ratios"]["steps"] >= 1.0
    assert any(e["space"] == "export" for e in json.loads(rmap.read_text()))


def test_determinism(wasm, tmp_path):
    src = wasm("bubble")
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}.wasm"
        assert main([str(src), "-o", str(out), "--flatten", "5", "--alias", "100", "--mem", "--name",
                     "--seed", "ab"]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "o2.wasm"
    main([str(src), "-o", str(other), "--flatten", "5", "--alias", "100", "--seed", "ac"])
    assert other.read_bytes() != outs[0]


def test_no_pass_is_identity(wasm, tmp_path):
    src = wasm("floats")
    out = tmp_path / "o.wasm"
    assert main([str(src), "-o", str(out)]) == EXIT_OK
    assert out.read_bytes() == src.read_bytes()


@pytest.mark.parametrize("args", [
    ["--collatz", "o1"], ["--flatten", "1"], ["--alias", "150"], ["--seed", "zz"], ["--bogus"],
])
def test_usage_errors(wasm, tmp_path, args):
    with pytest.raises(SystemExit) as exc:
        main([str(wasm()), "-o", str(tmp_path / "o.wasm")] + args)
    assert exc.value.code == EXIT_USAGE


def test_missing_output_flag(wasm):
    with pytest.raises(SystemExit) as exc:
        main([str(wasm())])
    assert exc.value.code == EXIT_USAGE


def test_io_and_invalid(tmp_path):
    out = tmp_path / "o.wasm"
    assert main([str(tmp_path / "missing.wasm"), "-o", str(out)]) == EXIT_IO
    bad = tmp_path / "bad.wasm"
    bad.write_bytes(b"\0asm\1\0\0\0\x01\x05")
    assert main([str(bad), "-o", str(out)]) == EXIT_INVALID
    assert not out.exists()


def test_refused_pass(tmp_path):
    from wasmobf.binfmt import DataSegment, Instr, Limits, Module
    m = Module(memories=[Limits(1)], data=[DataSegment(0, [Instr("i32.const", 0)], b"abcd"),
                                           DataSegment(0, [Instr("i32.const", 2)], b"xy")])
    src = tmp_path / "ov.wasm"
    src.write_bytes(encode_module(m))
    out = tmp_path / "o.wasm"
    assert main([str(src), "-o", str(out), "--mem"]) == EXIT_REFUSED
    assert not out.exists()


def test_measure_unknown_export(wasm, tmp_path):
    assert main([str(wasm()), "-o", str(tmp_path / "o.wasm"), "--name", "--measure", "nope"]) == EXIT_USAGE


def test_metrics_txt(wasm, tmp_path):
    met = tmp_path / "m.txt"
    assert main([str(wasm()), "-o", str(tmp_path / "o.wasm"), "--alias", "100", "--metrics", str(met)]) == 0
    kv = dict(line.split("=", 1) for line in met.read_text().splitlines())
    assert kv["delta.num_call_indirect"] == "20"
    assert float(kv["ratios.size"]) > 1.0


def test_identical_modules_ratio_one():
    m = load_fixture("gcd").module
    doc = metrics_report(m, m, steps=(10, 10))
    assert doc["ratios"] == {"size": 1.0, "instructions": 1.0, "steps": 1.0}
    assert all(v == 0 for v in doc["delta"].values())


def test_config_validation():
    with pytest.raises(ConfigError):
        ObfConfig(key_length=3).validate()
    with pytest.raises(ConfigError):
        ObfConfig(seed=-1).validate()
    assert len(MATRIX) == 14 and {"o1", "o2"} <= set(PRESETS)
    assert not ObfConfig().any_pass and ObfConfig(memory=True).any_pass
    assert with_seed(ObfConfig(), 5).seed == 5


def test_obfuscate_api_presets():
    fx = load_fixture("call_chain")
    for cfg in (PRESETS["o1"], PRESETS["o2"]):
        res = obfuscate(fx.module, cfg)
        entry = [e for e in res.module.exports if e.kind == 0][0].index
        assert differential_check(fx.module, res.module, fx.entry, fx.vectors(10), obf_entry=entry).equal


def test_module_entry_point(wasm, tmp_path):
    out = tmp_path / "o.wasm"
    r = subprocess.run([sys.executable, "-m", "wasmobf", str(wasm()), "-o", str(out), "--flatten", "3"],
                       capture_output=True)
    assert r.returncode == 0 and out.exists()
