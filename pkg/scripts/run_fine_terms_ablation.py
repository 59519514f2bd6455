"""Which triplet hinges matter: ascent only, descent only, or both (monotone task, three seeds).

    python scripts/run_fine_terms_ablation.py
"""
import dataclasses
from pathlib import Path

from corrloss import experiments as X

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> None:
    base = X.load_config(CONFIGS / "src.ini")
    cfgs = [
        dataclasses.replace(base, name=f"src[{ft}]", loss=dataclasses.replace(base.loss, fine_terms=ft))
        for ft in ("both", "ascent", "descent")
    ]
    print(X.format_compare(X.compare(cfgs)), end="")


if __name__ == "__main__":
    main()
