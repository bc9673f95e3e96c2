"""Simplex-constrained regression: RMSE of Cibersort, SOLS and SSVR against SNR."""

from _common import parser, print_summary

from lcsvr.experiments import ScenarioConfig, run_scenario

args = parser(__doc__, reps=20).parse_args()
grid = dict(C_grid=(0.1, 1.0, 10.0), nu_grid=(0.2, 0.5, 0.8), folds=3) if args.quick else {}
cfg = ScenarioConfig(n=200, p=25, snr=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0), reps=args.reps,
                     seed=args.seed, jobs=args.jobs, **grid)
print_summary(run_scenario("simplex", cfg, out_dir=f"{args.out_dir}/simplex"))
