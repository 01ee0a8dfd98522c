"""CHSH value of the Brukner variant at every stage, on memories and on laboratory states."""

from dataclasses import dataclass
from pathlib import Path

from _common import parse_config, save_config, write_rows
from friendsim.protocols import BRUKNER_STAGES, ProtocolConfig, chsh, run_brukner


@dataclass
class Config:
    n_qubits: int = 3
    seed: int = 3
    g: float = 100.0
    tau1: float = 10.0
    out: str = "results/brukner"


def main(cfg: Config) -> None:
    out = Path(cfg.out)
    save_config(cfg, out, "brukner")
    rows = []
    for mode in ("ideal", "decoherent"):
        pc = ProtocolConfig.two_lab_defaults(mode=mode, n_int=cfg.n_qubits, n_ext=cfg.n_qubits,
                                             seed=cfg.seed, g=cfg.g, tau1=cfg.tau1)
        for stage in BRUKNER_STAGES:
            result = run_brukner(pc, stage)
            for obs in ("memories", "laboratories"):
                rep = chsh(result, obs)
                c = rep.correlators
                rows.append((mode, stage, obs, c["A1B1"], c["A1B0"], c["A0B1"], c["A0B0"], rep.S))
                print(f"{mode} stage {stage} {obs}: S = {rep.S:.4f}")
    write_rows(out / "brukner_chsh.csv", ["mode", "stage", "observables", "A1B1", "A1B0", "A0B1", "A0B0", "S"], rows)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
