"""Environment autocorrelation C(tau) = |<eps(t)|eps(t+tau)>|^2 for several environment sizes."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from _common import parse_config, save_config, write_rows
from friendsim.observe import MonitorModel, correlation_ensemble


@dataclass
class Config:
    n_values: list = field(default_factory=lambda: [1, 3, 5, 7, 9])
    alpha: float = 0.0
    realizations: int = 20
    dt: float = 0.1
    tau_max: float = 20.0
    base_span: float = 50.0
    n_base: int = 10_000
    tau_min_average: float = 10.0
    seed: int = 13
    out: str = "results/correlation"


def main(cfg: Config) -> None:
    if cfg.tau_max < cfg.tau_min_average:
        raise SystemExit(f"tau-max {cfg.tau_max} is below tau-min-average {cfg.tau_min_average}")
    out = Path(cfg.out)
    save_config(cfg, out, "correlation")
    taus = cfg.dt * np.arange(int(round(cfg.tau_max / cfg.dt)) + 1)
    rows, summary = [], []
    for n in cfg.n_values:
        res = correlation_ensemble(
            MonitorModel(n, cfg.alpha, cfg.seed), taus, cfg.dt, cfg.base_span, cfg.realizations, cfg.n_base
        )
        rows += [(n, t, v, e) for t, v, e in zip(taus, res.values, res.stderr)]
        tail = float(res.values[taus >= cfg.tau_min_average - 1e-9].mean())
        summary.append((n, tail))
        print(f"N={n}: mean C(tau >= {cfg.tau_min_average}) = {tail:.4f}")
    write_rows(out / "correlation_timeseries.csv", ["N", "tau", "value", "stderr"], rows)
    write_rows(out / "correlation_scaling.csv", ["N", "long_tau_mean"], summary)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
