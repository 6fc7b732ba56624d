"""Regime-change experiments: comparative statics in the signal precision,
the debt and currency crisis sweeps, and the heterogeneous-precision debt
cutoffs. Results go to stdout and CSV files under ``out_dir``.

    python3 scripts/regime_tables.py [out_dir]
"""
import os
import sys

import numpy as np

from ambigg import cli
from ambigg.model import AmbiguitySet
from ambigg.numerics import Interval
from ambigg.regime import (
    ambiguous_cutoff,
    currency_model,
    debt_model,
    heterogeneous_cutoff,
    heterogeneous_debt_cutoff,
    quality_monotonicity,
    single_prior_cutoff,
    synthetic_model,
    theta_star,
)

HERE = os.path.dirname(os.path.abspath(__file__))


def statics(out_dir):
    xis = np.geomspace(0.25, 16.0, 13)
    models = {"debt": debt_model(0.4), "currency": currency_model(), "synthetic": synthetic_model()}
    rows = []
    for name, m in models.items():
        print(f"{name:10s} theta_star vs precision: {quality_monotonicity(m, xis)}")
        for xi in xis:
            k = single_prior_cutoff(m, float(xi))
            rows.append((name, xi, k, theta_star(k, float(xi))))
    cli.write_csv(os.path.join(out_dir, "statics.csv"), ["model", "xi", "k", "theta_star"], rows)

    amb = AmbiguitySet.interval(0.5, 4.0)
    for name, m in models.items():
        k = ambiguous_cutoff(m, amb)
        print(f"{name:10s} cutoff with xi in [0.5, 4]: {k:.6f}  theta_star at xi=1: {theta_star(k, 1.0):.6f}")


def heterogeneous(out_dir):
    rows = []
    for lam in (0.3, 0.4, 0.6):
        for own in (0.5, 1.0, 4.0):
            for opp in (0.5, 1.0, 4.0):
                k, ts = heterogeneous_debt_cutoff(lam, own, opp)
                rows.append((lam, own, opp, k, ts))
        k = heterogeneous_cutoff(debt_model(lam), Interval(0.5, 4.0), Interval(0.5, 4.0))
        print(f"debt lam={lam}: product-set cutoff {k:.6f}")
    cli.write_csv(os.path.join(out_dir, "heterogeneous_debt.csv"), ["lam", "xi_own", "xi_opp", "k", "theta_star"], rows)


def main(out_dir="tables"):
    os.makedirs(out_dir, exist_ok=True)
    statics(out_dir)
    heterogeneous(out_dir)
    for name in ("debt_crisis", "currency_width"):
        sub = os.path.join(out_dir, name)
        os.makedirs(sub, exist_ok=True)
        code = cli.main(["crisis", "--config", os.path.join(HERE, "configs", f"{name}.ini"), "--out", sub])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
