"""Long-time branch overlap versus the band exponent of the couplings at fixed environment size."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from _common import parse_config, save_config, write_rows
from friendsim.observe import MonitorModel, long_time_average, overlap_ensemble


@dataclass
class Config:
    alphas: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0])
    n_qubits: int = 7
    realizations: int = 20
    t_max: float = 50.0
    samples: int = 501
    window_lo: float = 2.0
    seed: int = 11
    out: str = "results/chaos"


def main(cfg: Config) -> None:
    out = Path(cfg.out)
    save_config(cfg, out, "chaos")
    times = np.linspace(0, cfg.t_max, cfg.samples)
    rows, summary = [], []
    for a in cfg.alphas:
        ov = overlap_ensemble(MonitorModel(cfg.n_qubits, a, cfg.seed), times, cfg.realizations)
        rows += [(a, t, v) for t, v in zip(times, ov.mean(axis=0))]
        mean, se = long_time_average(ov, times, (cfg.window_lo, cfg.t_max))
        summary.append((a, mean, se))
        print(f"alpha={a}: long-time overlap {mean:.4f} +- {se:.4f}")
    write_rows(out / "chaos_timeseries.csv", ["alpha", "t", "value"], rows)
    write_rows(out / "chaos_scaling.csv", ["alpha", "mean", "stderr"], summary)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
