"""Branch-environment overlap |<eps1|eps2>|^2 versus time for several environment sizes."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from _common import parse_config, save_config, write_rows
from friendsim.observe import MonitorModel, long_time_average, overlap_ensemble


@dataclass
class Config:
    n_values: list = field(default_factory=lambda: [1, 3, 5, 7, 9])
    alpha: float = 0.0
    realizations: int = 20
    t_max: float = 10.0
    samples: int = 201
    window_lo: float = 2.0
    window_hi: float = 10.0
    seed: int = 11
    out: str = "results/overlap"


def main(cfg: Config) -> None:
    out = Path(cfg.out)
    save_config(cfg, out, "overlap")
    times = np.linspace(0, cfg.t_max, cfg.samples)
    series_rows, summary = [], []
    for n in cfg.n_values:
        ov = overlap_ensemble(MonitorModel(n, cfg.alpha, cfg.seed), times, cfg.realizations)
        err = ov.std(axis=0, ddof=1) / np.sqrt(len(ov))
        series_rows += [(n, t, m, e) for t, m, e in zip(times, ov.mean(axis=0), err)]
        mean, se = long_time_average(ov, times, (cfg.window_lo, cfg.window_hi))
        summary.append((n, mean, se))
        print(f"N={n}: long-time overlap {mean:.4f} +- {se:.4f}")
    write_rows(out / "overlap_timeseries.csv", ["N", "t", "value", "stderr"], series_rows)
    write_rows(out / "overlap_scaling.csv", ["N", "mean", "stderr"], summary)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
