"""Isotonic regression: ISVR against PAVA at SNR 10 and 20, gaussian and laplacian noise."""

import numpy as np
from _common import parser, print_summary

from lcsvr.experiments import ScenarioConfig, run_scenario

args = parser(__doc__, reps=20).parse_args()
# 5 x 5 grid, C log-spaced over [1, 1e3]
grid = dict(C_grid=tuple(np.logspace(0, 3, 5)), nu_grid=tuple(np.linspace(0.05, 1.0, 5)))
if args.quick:
    grid = dict(C_grid=(1.0, 31.6, 1000.0), nu_grid=(0.2, 0.5, 0.8), folds=3)
for noise in ("gaussian", "laplacian"):
    cfg = ScenarioConfig(p=50, snr=(10.0, 20.0), noise=noise, reps=args.reps, seed=args.seed,
                         jobs=args.jobs, **grid)
    print_summary(run_scenario("isotonic", cfg, out_dir=f"{args.out_dir}/isotonic_{noise}"))
