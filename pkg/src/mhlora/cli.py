"""Command line front end: presets, sweeps, parallel dispatch and CSV output.

``mhlora run`` executes ``run_count`` independent runs per sweep point and
writes one aggregated CSV row per (architecture, sweep point).
``mhlora figure`` turns such a CSV into plot-ready ``x y ci`` series.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .config import ExperimentConfig, coerce, load_config, parse_architecture
from .errors import ConfigError

CSV_COLUMNS = (
    "architecture", "N", "R", "A_L", "seed_base", "S_mean", "S_ci95",
    "ed_energy_mean_mJ", "ed_energy_ci95", "unserved_ed_mean",
    "frames_lost_noise", "frames_lost_interference",
)

SWEEP_FIELDS = {"N": "n_eds", "R": "n_relays", "A_L": "area_side"}


class MissingSweepError(ValueError):
    """A figure needs sweep points the CSV does not contain."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_FIELDS:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; use one of N, R, A_L")
        if not self.values:
            raise ConfigError(f"sweep over {self.variable} has no values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError(f"sweep values for {self.variable} must be strictly increasing")

    @property
    def field(self) -> str:
        return SWEEP_FIELDS[self.variable]

    @classmethod
    def parse(cls, text: str) -> SweepSpec:
        if "=" not in text:
            raise ConfigError(f"sweep must look like VAR=v1,v2,..., got {text!r}")
        var, raw = (p.strip() for p in text.split("=", 1))
        if var not in SWEEP_FIELDS:
            raise ConfigError(f"unknown sweep variable {var!r}; use one of N, R, A_L")
        try:
            values = tuple(coerce(SWEEP_FIELDS[var], v.strip()) for v in raw.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"sweep {var}: {exc}") from None
        return cls(var, values)


def sweep_points(base: ExperimentConfig, architectures: Sequence[str],
                 sweeps: Sequence[SweepSpec]) -> list[ExperimentConfig]:
    """Cartesian product of architectures and sweep values, validated eagerly."""
    points = []
    grids = [[(s.field, v) for v in s.values] for s in sweeps]
    for arch in architectures:
        for combo in itertools.product(*grids):
            points.append(base.replace(architecture=parse_architecture(arch), **dict(combo)))
    return points


def _one_run(task: tuple[ExperimentConfig, int]) -> dict[str, float]:
    from .engine import run
    from .scenario import generate

    cfg, idx = task
    return run(generate(cfg, idx)).summary()


def execute(points: Sequence[ExperimentConfig], workers: int = 1) -> list[list[dict[str, float]]]:
    """Run every point ``run_count`` times; results come back in run-index order."""
    tasks = [(cfg, i) for cfg in points for i in range(cfg.run_count)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_one_run, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        flat = [_one_run(t) for t in tasks]
    out, pos = [], 0
    for cfg in points:
        out.append(flat[pos:pos + cfg.run_count])
        pos += cfg.run_count
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def summarise(cfg: ExperimentConfig, runs: Sequence[Mapping[str, float]]) -> dict[str, str]:
    from .metrics import describe

    s = describe([r["S"] for r in runs])
    e = describe([r["ed_energy_mJ"] for r in runs])
    return {
        "architecture": cfg.architecture.value,
        "N": str(cfg.n_eds),
        "R": str(cfg.n_relays),
        "A_L": _fmt(cfg.area_side),
        "seed_base": str(cfg.base_seed),
        "S_mean": _fmt(s.mean),
        "S_ci95": _fmt(s.ci95),
        "ed_energy_mean_mJ": _fmt(e.mean),
        "ed_energy_ci95": _fmt(e.ci95),
        "unserved_ed_mean": _fmt(describe([r["unserved_ed"] for r in runs]).mean),
        "frames_lost_noise": _fmt(describe([r["frames_lost_noise"] for r in runs]).mean),
        "frames_lost_interference": _fmt(describe([r["frames_lost_interference"] for r in runs]).mean),
    }


def render_csv(rows: Iterable[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_experiment(config_path: str | Path | None, overrides: Mapping[str, Any] | None,
                   output: str | Path | None, *, architectures: Sequence[str] = (),
                   sweeps: Sequence[SweepSpec] = (), workers: int = 1) -> str:
    """Execute the experiment and return (and optionally write) the CSV text.

    Raises :class:`ConfigError` for bad configuration before any run starts.
    """
    base = load_config(config_path, overrides)
    archs = list(architectures) or [base.architecture.value]
    points = sweep_points(base, archs, sweeps)
    results = execute(points, workers)
    text = render_csv(summarise(cfg, runs) for cfg, runs in zip(points, results))
    if output is not None:
        Path(output).write_text(text)
    return text


# figure data -------------------------------------------------------------

@dataclass(frozen=True)
class FigureSpec:
    x: str  # CSV column on the x axis
    y: str
    ci: str
    fixed: dict  # column -> value every row must match
    xs: tuple
    series: tuple  # (label, {column: value}) pairs


_BENCH = ("subghz", "24ghz")
_N_TICKS = (50, 100, 200, 500)
_R_TICKS = (1, 2, 5, 8, 16)


def _arch_series(r: int = 5):
    return tuple((a, {"architecture": a}) for a in _BENCH) + (
        ("proposal", {"architecture": "proposal", "R": r}),)


FIGURES = {
    "fig3": FigureSpec("N", "S_mean", "S_ci95", {"A_L": 1000.0}, _N_TICKS, _arch_series()),
    "fig4": FigureSpec("N", "S_mean", "S_ci95", {"A_L": 5000.0}, _N_TICKS, _arch_series()),
    "fig5": FigureSpec("R", "S_mean", "S_ci95", {"A_L": 5000.0, "architecture": "proposal"},
                       _R_TICKS, tuple((f"N={n}", {"N": n}) for n in (50, 200, 500))),
    "table3": FigureSpec("N", "ed_energy_mean_mJ", "ed_energy_ci95", {"A_L": 5000.0},
                         (50, 500), _arch_series()),
}


def _matches(row: Mapping[str, str], want: Mapping[str, Any]) -> bool:
    for key, value in want.items():
        cell = row.get(key)
        if cell is None:
            return False
        if isinstance(value, str):
            if cell != value:
                return False
        elif float(cell) != float(value):
            return False
    return True


def figure_series(rows: Sequence[Mapping[str, str]], figure: str) -> dict[str, list[tuple[float, float, float]]]:
    """Extract ``{series label: [(x, y, ci), ...]}`` for one figure id."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    spec = FIGURES[figure]
    out: dict[str, list[tuple[float, float, float]]] = {}
    missing = []
    for label, extra in spec.series:
        pts = []
        for x in spec.xs:
            want = {**spec.fixed, **extra, spec.x: x}
            hit = [r for r in rows if _matches(r, want)]
            if not hit:
                missing.append(f"{label} @ {spec.x}={x}")
                continue
            r = hit[-1]
            pts.append((float(x), float(r[spec.y]), float(r[spec.ci])))
        out[label] = pts
    if missing:
        raise MissingSweepError(f"{figure}: CSV lacks {len(missing)} point(s): " + "; ".join(missing))
    return out


def emit_figure_data(csv_path: str | Path, figure: str, out_dir: str | Path | None = None) -> dict:
    """Write one whitespace-separated ``x y ci`` file per series."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    series = figure_series(rows, figure)
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for label, pts in series.items():
            safe = label.replace("=", "").replace(" ", "_")
            lines = [f"# {figure} {label}", f"# x {FIGURES[figure].y} ci95"]
            lines += [f"{x:g} {y!r} {ci!r}" for x, y, ci in pts]
            (d / f"{figure}_{safe}.dat").write_text("\n".join(lines) + "\n")
    return series


# argument handling -------------------------------------------------------

def _parse_set(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhlora", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")

    r = sub.add_parser("run", help="run simulations and write the aggregated CSV")
    r.add_argument("--config", help="flat key = value config file")
    r.add_argument("--preset", action="append", default=[],
                   help="architecture: subghz, 24ghz or proposal (repeatable)")
    r.add_argument("--sweep", action="append", default=[], metavar="VAR=v1,v2,...",
                   help="sweep N, R or A_L (repeatable; points form a grid)")
    r.add_argument("--runs", type=int, help="runs per sweep point")
    r.add_argument("--seed", type=int, help="base seed")
    r.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    r.add_argument("--out", help="CSV path (default: stdout)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")

    f = sub.add_parser("figure", help="extract plot series from a CSV")
    f.add_argument("csv")
    f.add_argument("figure", choices=sorted(FIGURES))
    f.add_argument("--out-dir", default=".")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("run", "figure", "-h", "--help"):
        argv.insert(0, "run")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            series = emit_figure_data(args.csv, args.figure, args.out_dir)
            for label, pts in series.items():
                print(f"{label}: {len(pts)} points")
            return 0
        overrides = _parse_set(args.set)
        if args.runs is not None:
            overrides["run_count"] = args.runs
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        sweeps = [SweepSpec.parse(s) for s in args.sweep]
        text = run_experiment(args.config, overrides, args.out, architectures=args.preset,
                              sweeps=sweeps, workers=args.workers)
        if args.out is None:
            sys.stdout.write(text)
        return 0
    except (ConfigError, MissingSweepError) as exc:
        print(f"mhlora: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        print(f"mhlora: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
