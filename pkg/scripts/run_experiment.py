"""Run a YAML-configured simulation grid and summarize best-lambda curves.

    python scripts/run_experiment.py configs/b_rate.yaml
    python scripts/run_experiment.py configs/a_ar1.yaml --output-dir results/a_ar1
"""
import argparse
import time

from tvkron.harness import METRICS, ExperimentConfig, best_lambda, emit_plot_data, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    args = p.parse_args()

    cfg = ExperimentConfig.load(args.config)
    over = {k: v for k, v in (("output_dir", args.output_dir), ("workers", args.workers)) if v}
    if over:
        cfg = ExperimentConfig(**{**cfg.__dict__, **over})
    start = time.perf_counter()
    table = run_experiment(cfg)
    print(f"{len(table.rows)} rows, {len(table.errors)} failed cells, "
          f"{time.perf_counter() - start:.1f}s -> {cfg.output_dir}")

    for target in sorted({r.target for r in table.rows}):
        rows = [r for r in table.rows if r.target == target]
        for metric in METRICS:
            emit_plot_data(rows, ("target", "m"), metric, f"{cfg.output_dir}/plot_data")
        print(f"\n{target.upper()}  m     best rel_fro        best rel_l2         best MCC")
        for m in cfg.m_grid:
            sub = [r for r in rows if r.m == m]
            if not sub:
                continue
            fro = best_lambda(sub, "rel_fro", minimize=True)
            l2 = best_lambda(sub, "rel_l2", minimize=True)
            mc = best_lambda(sub, "mcc", minimize=False)
            print(f"   {m:5d}  {fro.mean:.3f} +- {fro.stderr:.3f}   {l2.mean:.3f} +- {l2.stderr:.3f}   "
                  f"{mc.mean:.3f} +- {mc.stderr:.3f}")


if __name__ == "__main__":
    main()
