"""Search the campaign constants and freeze them into the package manifest.

Run once after changing a campaign definition; the test suite then replays
the frozen values as regression checks.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np

from kgescape.estimates import (CommutatorSetup, search_R0, verify_incoming_observable,
                                verify_operator_commutator, verify_outgoing_cutoff)
from kgescape.geometry import Cometric, PowerDecay
from kgescape.quantize import GridSpec
from kgescape.symbols import CutoffParams

VERSION = "2026.10.1"
OUT = Path(__file__).resolve().parents[1] / "src" / "kgescape" / "data" / "constants.json"

PERTURBATION = {"amplitude": [[0.1, 0.02], [0.02, -0.05]], "mu": 0.5}
INCOMING = dict(delta=0.2, sigma=0.5, sigma_prime=0.3, sigma_inf=0.9, R=1.0, gamma=0.2, nu=0.1)
OUTGOING = dict(delta=0.2, sigma=-0.5, sigma_prime=-0.3, sigma_inf=-0.9, R=1.0, gamma=0.2, nu=0.1,
                orientation="outgoing")
RUNG = dict(delta=0.2, sigma=0.5, sigma_prime=0.3, sigma_inf=0.9, R=2.0, gamma=0.05, nu=0.25)
RUNG_NEXT = dict(RUNG, delta=0.24, R=1.2, sigma=0.55, sigma_prime=0.35)
CASCADE = dict(delta=0.24, sigma=0.5, sigma_prime=0.3, sigma_inf=0.9, R=1.0, gamma=0.25, nu=2.0)
CASCADE_NEXT = dict(CASCADE, delta=0.245, R=0.75, sigma=0.55, sigma_prime=0.35)


def metrics():
    flat = Cometric.minkowski(2)
    pert = Cometric.minkowski(2, perturbation=PowerDecay(amplitude=np.array(PERTURBATION["amplitude"]),
                                                         mu=PERTURBATION["mu"]))
    return {"flat": flat, "perturbed": pert}


def main():
    t0 = time.time()
    out = {"version": VERSION, "campaigns": {}}
    inc = CutoffParams(**INCOMING)
    outg = CutoffParams(**OUTGOING)
    for name, g in metrics().items():
        s = search_R0(inc, g, R_lo=1.0, R_hi=256.0, count=100_000, seed=0)
        R0 = round(float(s["R0"]), 3)
        c1, rep = verify_incoming_observable(inc.with_(R=R0), g, count=100_000, seed=0)
        o = verify_outgoing_cutoff(outg.with_(R=R0), g, count=100_000, seed=0)
        out["campaigns"][name] = {
            "R0": R0,
            "R_bisect": s["R_bisect"],
            "c1_observable": c1,
            "c1_chain_lower_bound": rep.details["chain_lower_bound"],
            "C0": o.details["C0"],
            "outgoing_pass": o.passed,
        }
        print(name, out["campaigns"][name], f"{time.time() - t0:.1f}s", flush=True)
    grids = [GridSpec(1, 7.0, 256, h) for h in (0.2, 0.1, 0.05)]
    setup = CommutatorSetup(CutoffParams(**RUNG), CutoffParams(**RUNG_NEXT))
    rep = verify_operator_commutator(setup, Cometric.euclidean(1), grids,
                                     c0_values=[1e-3, 4e-3, 1e-2, 2e-2, 4e-2],
                                     alpha_values=[0.0] + [float(a) for a in np.logspace(0, 6, 13)])
    out["commutator"] = {
        "c_basic": rep["c0"],
        "c_rung_0": rep["alpha"],
        "lambda_min": [r["lambda_min"] for r in rep["rows"]],
        "fitted_order": rep["fit"]["order"],
        "box": list(setup.box),
        "box_next": list(setup.box_next),
        "L": 7.0,
        "N": 256,
    }
    out["cutoffs"] = {"perturbation": PERTURBATION, "incoming": INCOMING, "outgoing": OUTGOING,
                      "rung": RUNG, "rung_next": RUNG_NEXT, "cascade": CASCADE,
                      "cascade_next": CASCADE_NEXT}
    out["cascade"] = {"boxes": [[4.2, 5.3], [4.4, 5.4]], "L": 6.0, "N": 256, "center_x": 3.0,
                      "center_xi": -1.0}
    print("commutator", out["commutator"], f"{time.time() - t0:.1f}s")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=2) + "\n")
    print("wrote", OUT)
    return 0


if __name__ == "__main__":
    sys.exit(main())
