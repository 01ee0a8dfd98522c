"""Frauchiger-Renner outcome tables in ideal and decoherent mode, plus the four basis forms."""

from dataclasses import dataclass
from itertools import product
from pathlib import Path

from _common import parse_config, save_config, write_rows
from friendsim.protocols import MEMORY_OUTCOMES, ProtocolConfig, fr_basis_ambiguity, run_fr_all


@dataclass
class Config:
    n_qubits: int = 3
    seed: int = 3
    g: float = 100.0
    tau1: float = 10.0
    out: str = "results/fr"


def main(cfg: Config) -> None:
    out = Path(cfg.out)
    save_config(cfg, out, "fr")
    rows = []
    for mode in ("ideal", "decoherent"):
        pc = ProtocolConfig.two_lab_defaults(mode=mode, n_int=cfg.n_qubits, n_ext=cfg.n_qubits,
                                             seed=cfg.seed, g=cfg.g, tau1=cfg.tau1)
        for tag, table in run_fr_all(pc).items():
            for ks in product(range(2), repeat=4):
                labels = [MEMORY_OUTCOMES[i][k] for i, k in enumerate(ks)]
                rows.append((mode, tag, *labels, float(table.probs[ks])))
            if tag == "final":
                print(f"{mode}: p(-_A,-_B)={table.prob('-_A', '-_B'):.4f}, "
                      f"p(+_B|v_a)={table.conditional('+_B', given=('v_a',)):.4f}")
    write_rows(out / "fr_tables.csv", ["mode", "stage", "I_A", "I_B", "E_A", "E_B", "p"], rows)
    forms = []
    for name, f in fr_basis_ambiguity().items():
        for i, j in product(range(2), repeat=2):
            forms.append((name, f.basis_a, f.basis_b, i, j, float(f.amplitudes[i, j].real)))
    write_rows(out / "fr_basis_forms.csv", ["form", "basis_A", "basis_B", "i", "j", "amplitude"], forms)


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
