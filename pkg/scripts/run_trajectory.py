"""Solver trajectories of SMO (SVR) and generalized SMO (SSVR) on simplex data."""

from _common import parser

from lcsvr.experiments import ScenarioConfig, run_scenario

args = parser(__doc__, reps=10).parse_args()
cfg = ScenarioConfig(n=200, p=25, snr=(30.0,), reps=args.reps, seed=args.seed, jobs=args.jobs)
res = run_scenario("trajectory", cfg, out_dir=f"{args.out_dir}/trajectory")
for noise in ("none", "gaussian"):
    svr = res.values("svr", "iterations", noise=noise)
    ssvr = res.values("ssvr", "iterations", noise=noise)
    fewer = sum(a < b for a, b in zip(ssvr, svr))
    ties = sum(a == b for a, b in zip(ssvr, svr))
    print(f"noise={noise}: SSVR needs fewer iterations in {fewer}/{len(svr)} reps ({ties} ties); "
          f"mean iterations SVR={sum(svr) / len(svr):.0f} SSVR={sum(ssvr) / len(ssvr):.0f}")
