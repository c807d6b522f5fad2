"""
Seeded sweeps with persisted results
====================================

An experiment is a frozen configuration. Its hash stamps every output row,
and rerunning the same configuration reproduces the CSV byte for byte.
"""
import csv
import tempfile
from pathlib import Path

from robustacg import ExperimentConfig, run_experiment

with tempfile.TemporaryDirectory() as tmp:
    cfg = ExperimentConfig(eps_list=[0.0, 0.2, 0.5], reps=5, seed=42, out_dir=tmp)
    run_experiment(cfg)
    first = (Path(tmp) / "metrics.csv").read_bytes()
    run_experiment(cfg)
    print("config hash", cfg.config_hash, "| replay identical:",
          first == (Path(tmp) / "metrics.csv").read_bytes())
    with open(Path(tmp) / "metrics.csv") as fh:
        for row in csv.DictReader(fh):
            print(f"rep {row['rep']} eps {float(row['eps']):.1f}: ratio {float(row['ratio']):.4f}, "
                  f"distance {float(row['distance']):.2e} <= {float(row['distance_bound']):.3f}")
