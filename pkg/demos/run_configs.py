"""Run every demo config through the CLI, then compare the two Mathieu cutoffs.

Usage: python3 demos/run_configs.py [out_dir]
"""
import sys
from pathlib import Path

from hillbasis import cli

HERE = Path(__file__).parent


def main(out="demo_out"):
    codes = {}
    for cfg in sorted((HERE / "configs").glob("*.ini")):
        print(f"== {cfg.name}")
        codes[cfg.name] = cli.main(["run", str(cfg), "--out", out])
    print("== compare mathieu 64 vs 128")
    cli.main(["compare", f"{out}/mathieu.json", f"{out}/mathieu_128.json"])
    return max(codes.values())


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
