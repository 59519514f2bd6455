"""Four-way loss ablation on the monotone task: MSE, +PLC, +SRC, +PLC+SRC.

Prints a mean(std) table over three seeds and writes it to runs/ablation/.

    python scripts/run_loss_ablation.py [--seed 0] [--format delimited]
"""
import argparse
from pathlib import Path

from corrloss import experiments as X

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=("table", "delimited"), default="table")
    ap.add_argument("--out", default="runs/ablation")
    args = ap.parse_args()

    cfgs = [X.load_config(CONFIGS / f"{n}.ini").with_seed(args.seed) for n in ("mse", "plc", "src", "plc_src")]
    rows = X.compare(cfgs)
    text = X.format_compare(rows, args.format)
    print(text, end="")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.txt").write_text(text, encoding="utf-8")


if __name__ == "__main__":
    main()
