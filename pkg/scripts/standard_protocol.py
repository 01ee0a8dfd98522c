"""Standard Wigner's-friend run: coefficients seen by the friend and by the outside agent.

Runs every coupling in ``g_values`` on the same seeds, so the effect of a slow
external pre-measurement can be compared directly.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from _common import parse_config, save_config, write_rows
from friendsim.observe import long_time_average
from friendsim.protocols import ProtocolConfig, run_standard_ensemble


@dataclass
class Config:
    g_values: list = field(default_factory=lambda: [100.0, 1.0])
    n_qubits: int = 6
    realizations: int = 10
    theta_over_pi: float = 0.125
    tau1: float = 10.0
    t_final: float = 100.0
    samples_per_stage: int = 512
    seed: int = 2024
    out: str = "results/standard"


def main(cfg: Config) -> None:
    out = Path(cfg.out)
    save_config(cfg, out, "standard")
    base = ProtocolConfig(
        theta=np.pi * cfg.theta_over_pi, n_int=cfg.n_qubits, n_ext=cfg.n_qubits, tau1=cfg.tau1,
        t_final=cfg.t_final, samples_per_stage=cfg.samples_per_stage, seed=cfg.seed,
    )
    rows, summary = [], []
    for g in cfg.g_values:
        runs = run_standard_ensemble(replace(base, g=g), cfg.realizations)
        t = runs[0].times
        fields = {
            "C_hh": np.array([r.internal.hh for r in runs]),
            "C_vv": np.array([r.internal.vv for r in runs]),
            "ND_int": np.array([r.internal.nd for r in runs]),
            "C_aa": np.array([r.external.c11 for r in runs]),
            "C_bb": np.array([r.external.c22 for r in runs]),
            "ND_ext": np.array([r.external.nd for r in runs]),
        }
        means = {k: v.mean(axis=0) for k, v in fields.items()}
        rows += [(g, ti, *(means[k][i] for k in fields)) for i, ti in enumerate(t)]
        window = runs[0].final_window(0.2)
        finals = {k: long_time_average(v, t, window)[0] for k, v in fields.items()}
        summary.append((g, *finals.values()))
        print(f"g={g}: " + ", ".join(f"{k}={v:.4f}" for k, v in finals.items()))
    write_rows(out / "standard_timeseries.csv", ["g", "t", *fields], rows)
    write_rows(out / "standard_final.csv", ["g", *fields], summary)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
