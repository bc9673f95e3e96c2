"""Non-negative regression: SVR, P-SVR, NNSVR and NNLS under gaussian and laplacian noise."""

from _common import parser, print_summary

from lcsvr.experiments import ScenarioConfig, run_scenario

args = parser(__doc__, reps=20).parse_args()
grid = dict(C_grid=(1.0, 10.0, 100.0, 1000.0), nu_grid=(0.2, 0.5, 0.8), folds=3) if args.quick else {}
for noise in ("gaussian", "laplacian"):
    cfg = ScenarioConfig(n=200, p=20, snr=(10.0, 20.0), noise=noise, reps=args.reps,
                         seed=args.seed, jobs=args.jobs, **grid)
    print_summary(run_scenario("nonneg", cfg, out_dir=f"{args.out_dir}/nonneg_{noise}"))
