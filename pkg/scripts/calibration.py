"""EB weight as a function of the observed outcome, for several gamma.

Writes one calibration table for the oncology mixture (events at exposure
117.6) and one for a beta example (responders out of 40).

    python3 scripts/calibration.py --outdir results
"""
import argparse
from pathlib import Path

import numpy as np

from ebrmap.analysis import calibration_curve, write_calibration_csv
from ebrmap.conjmix import ConjugateMixture, MixtureComponent
from ebrmap.experiments import PUBLISHED_MAP, PUBLISHED_VAGUE
from ebrmap.records import Design

GAMMAS = (0.5, 0.75, 0.85, 0.9, 0.95)
BETA_MAP = ConjugateMixture((MixtureComponent.beta(12, 36), MixtureComponent.beta(3, 9)), (0.6, 0.4))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--grid-step", type=float, default=0.01)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    tte = calibration_curve(PUBLISHED_MAP, PUBLISHED_VAGUE, Design("tte", exposure=117.6), GAMMAS,
                            np.arange(0, 101), args.grid_step)
    write_calibration_csv(tte, out / "calibration_tte.csv")
    beta = calibration_curve(BETA_MAP, MixtureComponent.beta(1, 1), Design("binomial", n=40), GAMMAS,
                             grid_step=args.grid_step)
    write_calibration_csv(beta, out / "calibration_binomial.csv")

    at = {(r.gamma, r.observed): r.w_eb for r in tte}
    for g in GAMMAS:
        zero = [int(o) for (gg, o), w in at.items() if gg == g and w == 0.0]
        window = f"{min(zero)}..{max(zero)}" if zero else "none"
        print(f"gamma {g:.2f}: w_eb at 32 events {at[(g, 32.0)]:.2f}, full borrowing for {window} events")

if __name__ == "__main__":
    main()
