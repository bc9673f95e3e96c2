"""Shared argument handling for the experiment runners."""

import argparse


def parser(description: str, reps: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--reps", type=int, default=reps)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--quick", action="store_true", help="3-point grids and 3 folds")
    return p


def print_summary(result) -> None:
    for row in result.summary():
        print(f"{row['noise']:>9} snr={row['snr_db']:<5g} {row['estimator']:>9}  "
              f"rmse={row['rmse_mean']:.4f} ({row['rmse_std']:.4f})  "
              f"mae={row['mae_mean']:.4f} ({row['mae_std']:.4f})")
