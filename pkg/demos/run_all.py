"""Run every CLI campaign on the example configs and merge the reports.

    python demos/run_all.py [out_dir]
"""

import sys
from pathlib import Path

from kgescape.cli import run

HERE = Path(__file__).resolve().parent
RUNS = [
    ("flow", "trace", "minkowski"),
    ("nontrap", "scan", "minkowski"),
    ("escape", "verify", "minkowski"),
    ("escape", "verify", "perturbed"),
    ("quantize", "check", "euclidean_1d"),
    ("commutator", "verify", "euclidean_1d"),
    ("cascade", "run", "euclidean_1d"),
    ("probe", "run", "minkowski"),
    ("probe", "run", "perturbed"),
    ("escape", "verify", "ring_trap"),
    ("nontrap", "scan", "ring_trap"),
]


def main(out="demo_out"):
    out = Path(out)
    codes = {}
    for group, action, conf in RUNS:
        d = out / conf
        codes[(group, action, conf)] = run([group, action, "--config", str(HERE / "configs" / f"{conf}.toml"),
                                            "--out", str(d), "--format", "csv"])
    run(["report", "merge", *[str(p) for p in sorted(out.iterdir()) if p.is_dir()], "--out", str(out)])
    print()
    for (group, action, conf), code in codes.items():
        print(f"{group} {action} [{conf}]: exit {code}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
