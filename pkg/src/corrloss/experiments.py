"""Run configuration, INI parsing and the end-to-end train/evaluate pipeline."""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data, model as model_mod
from .losses import LossConfig, select_outliers
from .metrics import MetricsReport, evaluate, mean_std
from .trainer import HISTORY_COLUMNS, TrainConfig, TrainResult, train


class ConfigError(ValueError):
    pass


@dataclass
class TaskConfig:
    # "linear", "monotone" or "csv"
    kind: str = "monotone"
    n: int = 2000
    d: int = 8
    noise: float = 0.05
    # |w| of the monotone task
    scale: float = 1.5
    seed: int = 0
    csv_path: str = ""
    target_column: str = "target"
    standardize: bool = False
    # label noise injected into the training split only
    contaminate_frac: float = 0.0
    magnitude: float = 3.0


@dataclass
class ModelConfig:
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "tanh"


@dataclass
class RunConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    split: data.SplitSpec = field(default_factory=data.SplitSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs/default"
    report_format: str = "table"
    name: str = ""

    def with_seed(self, seed: int) -> "RunConfig":
        """Same run with a new master seed (split, init and shuffling; not the task)."""
        return dataclasses.replace(
            self,
            split=dataclasses.replace(self.split, seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
        )


_SECTIONS = {"task": TaskConfig, "split": data.SplitSpec, "model": ModelConfig,
             "loss": LossConfig, "train": TrainConfig}


def _coerce(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(",", " ").split())
        return raw.strip()
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - set(_SECTIONS) - {"output", "run"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    parts = {}
    for sec, cls in _SECTIONS.items():
        defaults = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        kw = {}
        if cp.has_section(sec):
            for key, raw in cp.items(sec):
                if key not in names:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                kw[key] = _coerce(raw, getattr(defaults, key), f"[{sec}] {key}")
        try:
            parts[sec] = cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{sec}]: {exc}") from None
    out = cp["output"] if cp.has_section("output") else {}
    run = cp["run"] if cp.has_section("run") else {}
    fmt = out.get("format", "table")
    if fmt not in ("table", "delimited"):
        raise ConfigError(f"[output] format must be table or delimited, got {fmt!r}")
    cfg = RunConfig(**parts, output_dir=out.get("dir", "runs/default"), report_format=fmt,
                    name=run.get("name", ""))
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cfg = parse_config(p.read_text(encoding="utf-8"), str(p))
    if not cfg.name:
        cfg.name = p.stem
    if cfg.task.kind == "csv" and not Path(cfg.task.csv_path).is_absolute():
        cfg.task.csv_path = str((p.parent / cfg.task.csv_path).resolve())
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.task.kind not in ("linear", "monotone", "csv"):
        raise ConfigError(f"unknown task kind {cfg.task.kind!r}")
    if cfg.task.kind == "csv" and not cfg.task.csv_path:
        raise ConfigError("csv task needs csv_path")
    if not 0 <= cfg.task.contaminate_frac < 0.5:
        raise ConfigError("contaminate_frac must be in [0, 0.5)")
    if cfg.model.activation not in ("tanh", "relu"):
        raise ConfigError(f"unknown activation {cfg.model.activation!r}")
    if not cfg.model.hidden or min(cfg.model.hidden) < 1:
        raise ConfigError("model needs at least one hidden layer")


def to_ini(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser()
    cp["run"] = {"name": cfg.name}
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        cp[sec] = {
            f.name: (", ".join(map(str, v)) if isinstance(v, tuple) else repr(v) if isinstance(v, float) else str(v))
            for f in dataclasses.fields(obj) for v in [getattr(obj, f.name)]
        }
    cp["output"] = {"dir": cfg.output_dir, "format": cfg.report_format}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def build_dataset(task: TaskConfig) -> data.Dataset:
    if task.kind == "linear":
        return data.gen_linear(task.n, task.d, task.noise, task.seed)
    if task.kind == "monotone":
        return data.gen_monotone(task.n, task.d, task.seed, task.noise, task.scale)
    return data.load_csv(task.csv_path, task.target_column)


def prepare_splits(cfg: RunConfig) -> tuple[data.Dataset, data.Dataset, data.Dataset]:
    train_ds, val_ds, test_ds = data.split(build_dataset(cfg.task), cfg.split)
    if cfg.task.contaminate_frac > 0:
        train_ds = data.gen_outlier_contaminated(
            train_ds, cfg.task.contaminate_frac, cfg.task.magnitude, seed=cfg.split.seed + 1)
    if cfg.task.standardize:
        std = data.Standardizer.fit(train_ds.features)
        train_ds, val_ds, test_ds = (dataclasses.replace(s, features=std(s.features))
                                     for s in (train_ds, val_ds, test_ds))
    return train_ds, val_ds, test_ds


@dataclass
class RunResult:
    config: RunConfig
    result: TrainResult
    splits: dict[str, data.Dataset]
    reports: dict[str, MetricsReport]
    predictions: dict[str, np.ndarray]


def run(cfg: RunConfig) -> RunResult:
    train_ds, val_ds, test_ds = prepare_splits(cfg)
    dims = [train_ds.n_features, *cfg.model.hidden]
    net = model_mod.init(dims, cfg.model.activation, seed=cfg.train.seed)
    res = train(net, train_ds, val_ds, cfg.loss, cfg.train)
    splits = {"train": train_ds, "val": val_ds, "test": test_ds}
    preds = {k: net.predict(s.features) for k, s in splits.items()}
    reports = {k: evaluate(preds[k], s.targets) for k, s in splits.items()}
    return RunResult(cfg, res, splits, reports, preds)


# ---------------------------------------------------------------- file output


def _num(v: float) -> str:
    return repr(float(v))


def format_report(reports: dict[str, MetricsReport], fmt: str = "table") -> str:
    cols = ("split", "n") + MetricsReport.FIELDS
    if fmt == "delimited":
        lines = [",".join(cols)]
        for split_name, r in reports.items():
            lines.append(",".join([split_name, str(r.n)] + [_num(getattr(r, f)) for f in MetricsReport.FIELDS]))
        return "\n".join(lines) + "\n"
    lines = [f"{'split':<6} {'n':>6} " + " ".join(f"{c:>10}" for c in MetricsReport.FIELDS)]
    for split_name, r in reports.items():
        vals = " ".join(f"{getattr(r, f):>10.4f}" for f in MetricsReport.FIELDS)
        lines.append(f"{split_name:<6} {r.n:>6} {vals}")
    return "\n".join(lines) + "\n"


def scatter_rows(rr: RunResult, split_name: str = "test") -> list[tuple[float, float, str, int]]:
    """(target, prediction, split, is_outlier) rows for a correlation/consistency plot."""
    y = rr.splits[split_name].targets
    p = rr.predictions[split_name]
    flags = select_outliers(p, y, rr.config.loss.outlier_fraction)
    return [(float(t), float(q), split_name, int(f)) for t, q, f in zip(y, p, flags)]


def write_outputs(rr: RunResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "config": out / "config.ini",
        "history": out / "history.csv",
        "report": out / "report.csv",
        "scatter": out / "scatter.csv",
        "checkpoint": out / "model.npz",
    }
    paths["config"].write_text(to_ini(rr.config), encoding="utf-8")
    hist = [",".join(HISTORY_COLUMNS)]
    for row in rr.result.history:
        hist.append(",".join(_num(row[c]) if isinstance(row[c], float) else str(row[c])
                             for c in HISTORY_COLUMNS))
    paths["history"].write_text("\n".join(hist) + "\n", encoding="utf-8")
    paths["report"].write_text(format_report(rr.reports, "delimited"), encoding="utf-8")
    sc = ["target,prediction,split,is_outlier"]
    sc += [f"{_num(t)},{_num(p)},{s},{f}" for t, p, s, f in scatter_rows(rr)]
    paths["scatter"].write_text("\n".join(sc) + "\n", encoding="utf-8")
    rr.result.model.save(paths["checkpoint"])
    return paths


# ---------------------------------------------------------------- multi-seed comparison


@dataclass
class CompareRow:
    name: str
    per_seed: list[dict[str, float]]
    failed: bool = False

    def summary(self, key: str) -> tuple[float, float]:
        return mean_std([r[key] for r in self.per_seed])


COMPARE_METRICS = ("plc", "src", "klc", "ae_mean", "re_mean")


def compare(configs: list[RunConfig], seeds=None, split_name: str = "test") -> list[CompareRow]:
    rows = []
    for cfg in configs:
        base = cfg.train.seed
        use = list(seeds) if seeds is not None else [base, base + 1, base + 2]
        per = []
        failed = False
        for s in use:
            try:
                rr = run(cfg.with_seed(s))
            except Exception:  # noqa: BLE001 - any sub-run failure flags the row
                failed = True
                continue
            per.append(rr.reports[split_name].as_dict())
        rows.append(CompareRow(cfg.name or cfg.output_dir, per, failed))
    return rows


def format_compare(rows: list[CompareRow], fmt: str = "table") -> str:
    header = ("config",) + COMPARE_METRICS
    cells = []
    for r in rows:
        vals = []
        for k in COMPARE_METRICS:
            if r.per_seed:
                m, s = r.summary(k)
                vals.append(f"{m:.3f}({s:.3f})")
            else:
                vals.append("n/a")
        cells.append([r.name + (" [partial]" if r.failed else "")] + vals)
    if fmt == "delimited":
        return "\n".join(",".join(c) for c in [list(header)] + cells) + "\n"
    widths = [max(len(str(x)) for x in col) for col in zip(header, *cells)]
    fmt_row = lambda row: "  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip()
    return "\n".join([fmt_row(header)] + [fmt_row(c) for c in cells]) + "\n"
