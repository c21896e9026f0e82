#!/usr/bin/env python3
"""Write the built-in fixture corpus as .wasm files (handy for trying the CLI)."""

import argparse
import pathlib

from wasmobf.binfmt import encode_module
from wasmobf.fixtures import corpus


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("outdir", type=pathlib.Path)
    a = p.parse_args(argv)
    a.outdir.mkdir(parents=True, exist_ok=True)
    for fx in corpus():
        path = a.outdir / f"{fx.name}.wasm"
        path.write_bytes(encode_module(fx.module))
        print(f"{path}  entry={fx.entry} params={list(fx.params)}")


if __name__ == "__main__":
    main()
