import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasmobf.asm import asm
from wasmobf.binfmt import (
    CustomSection, DecodeError, EncodeError, Export, FuncBody, FuncType, Module, NameData, NameEntry,
    decode_module, encode_module, encode_name_section, get_name_data, parse_name_section, set_name_data,
)
from wasmobf.fixtures import corpus, load_fixture
from wasmobf.gen import random_module
from wasmobf.leb128 import write_uleb128

HEADER = b"\x00asm\x01\x00\x00\x00"


def test_empty_module():
    m = decode_module(HEADER)
    assert m == Module()
    assert encode_module(Module()) == HEADER


def test_add_fixture_shape():
    m = decode_module(encode_module(load_fixture("add").module))
    assert len(m.functions) == 1 and len(m.exports) == 1
    assert m.types[m.functions[0]] == FuncType(("i32", "i32"), ("i32",))


@pytest.mark.parametrize("data", [b"msa\x00\x01\x00\x00\x00", b"\x00asm\x02\x00\x00\x00", b"\x00as"])
def test_bad_header(data):
    with pytest.raises(DecodeError):
        decode_module(data)


def test_unknown_section_id():
    with pytest.raises(DecodeError, match="section"):
        decode_module(HEADER + b"\x0c\x00")


def test_section_length_overrun():
    with pytest.raises(DecodeError):
        decode_module(HEADER + b"\x01\x05\x00")


def test_out_of_order_sections():
    m = load_fixture("add").module
    b = encode_module(Module(types=m.types, functions=m.functions, code=m.code))
    # swap: put the code section before the function section
    type_end = 8 + 2 + b[9]
    func_sec = b[type_end:type_end + 2 + b[type_end + 1]]
    rest = b[type_end + len(func_sec):]
    with pytest.raises(DecodeError, match="order"):
        decode_module(b[:type_end] + rest + func_sec)


def test_post_mvp_opcode_reports_location():
    m = Module(types=[FuncType()], functions=[0], code=[FuncBody([], [])])
    b = bytearray(encode_module(m))
    # body is [size=2, 0 locals, end]; patch in a SIMD prefix before end
    assert b[-3:] == b"\x02\x00\x0b"
    b[-3:] = b"\x03\x00\xfd\x0b"
    b[-6] += 1  # code section size
    with pytest.raises(DecodeError) as exc:
        decode_module(bytes(b))
    assert exc.value.opcode == 0xFD
    assert exc.value.func_index == 0


def test_corpus_roundtrip():
    for fx in corpus():
        b = encode_module(fx.module)
        assert decode_module(b) == fx.module
        assert encode_module(decode_module(b)) == b


def test_overlong_leb_normalized():
    m = Module(types=[FuncType()], functions=[0], code=[FuncBody([], asm("i32.const 5; drop"))])
    b = encode_module(m)
    canon = decode_module(b)
    # re-encode the i32.const immediate 5 as a padded 2-byte LEB
    padded = b.replace(b"\x41\x05", b"\x41\x85\x00")
    padded = bytearray(padded)
    idx = padded.index(b"\x0a")  # code section id
    padded[idx + 1] += 1
    body_size_pos = idx + 3
    padded[body_size_pos] += 1
    assert decode_module(bytes(padded)) == canon
    assert encode_module(decode_module(bytes(padded))) == b


def test_export_index_out_of_range():
    m = Module(exports=[Export(b"f", 0, 3)])
    with pytest.raises(EncodeError):
        encode_module(m)


def test_custom_sections_preserved():
    m = load_fixture("add").module
    m.customs.insert(0, CustomSection(b"sourceMappingURL", b"/home/dev/src/secret.c", after=0))
    m.customs.append(CustomSection(b"producers", bytes(range(40)), after=11))
    b = encode_module(m)
    d = decode_module(b)
    assert [c.name for c in d.customs] == [b"sourceMappingURL", b"name", b"producers"]
    assert encode_module(d) == b
    assert d.customs[0].data == b"/home/dev/src/secret.c"


def test_name_section_header_bytes():
    m = load_fixture("add").module
    nd = get_name_data(m)
    b = encode_module(m)
    assert b"\x04name\x01" + write_uleb128(nd.section_len) in b


def test_parse_name_single_entry():
    raw = b"\x01\x07\x01\x00\x04main"
    nd = parse_name_section(raw)
    assert nd.count == 1
    assert (nd.entries[0].index, nd.entries[0].name_len, nd.entries[0].name) == (0, 4, b"main")
    assert encode_name_section(nd) == raw


def test_parse_name_empty():
    nd = parse_name_section(b"\x01\x01\x00")
    assert nd.count == 0
    assert encode_name_section(nd) == b"\x01\x01\x00"


def test_parse_name_keeps_other_subsections():
    raw = b"\x00\x03\x02ab" + b"\x01\x07\x01\x00\x04main" + b"\x02\x01\x00"
    nd = parse_name_section(raw)
    assert nd.prefix == b"\x00\x03\x02ab" and nd.suffix == b"\x02\x01\x00"
    assert encode_name_section(nd) == raw


@pytest.mark.parametrize("raw", [b"\x01\x08\x01\x00\x04main", b"\x01\x07\x01\x00\x05main", b"\x01"])
def test_parse_name_inconsistent(raw):
    with pytest.raises(DecodeError):
        parse_name_section(raw)


names = st.lists(st.tuples(st.integers(0, 5000), st.binary(max_size=30)), max_size=20, unique_by=lambda t: t[0])


@given(names)
def test_name_data_roundtrip(entries):
    nd = NameData([NameEntry(i, n) for i, n in sorted(entries)])
    raw = encode_name_section(nd)
    back = parse_name_section(raw)
    assert back == nd
    assert encode_name_section(back) == raw


@given(st.integers(0, 2 ** 32))
def test_random_module_roundtrip(seed):
    m = random_module(random.Random(seed), runnable=False)
    b = encode_module(m)
    assert decode_module(b) == m
    assert encode_module(decode_module(b)) == b


def test_set_name_data_adds_section():
    m = Module(types=[FuncType()], functions=[0], code=[FuncBody()])
    set_name_data(m, NameData([NameEntry(0, b"f")]))
    assert get_name_data(decode_module(encode_module(m))).entries == [NameEntry(0, b"f")]
