"""Flat config files, CSV traces, manifests, and minimal SVG plots.

Configs are plain ``key = value`` lines with ``#`` comments.  The manifest a
run writes echoes the resolved config and appends ``derived.*`` lines for
every quantity computed from it (weights, contraction constants, measured
bounds, seeds).  The parser skips the ``derived.`` namespace, so a manifest
is itself a valid config that reproduces the run byte for byte.

Numbers in CSV output are printed with %.17g (enough digits to round-trip a
double) and LF line endings regardless of platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VERSION = "0.1.0"

_FAMILIES = ("gossip", "fixed_cycle", "matrix_file")
_NOISE_KINDS = ("noiseless", "gaussian_channel", "stochastic_quantizer")


def _cast_int(raw: str) -> int:
    return int(raw)


def _cast_float(raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _cast_str(raw: str) -> str:
    return raw


def _cast_int_list(raw: str) -> tuple[int, ...]:
    items = tuple(int(tok) for tok in raw.split(",") if tok.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _cast_choice(*choices: str):
    def cast(raw: str) -> str:
        if raw not in choices:
            raise ValueError(f"must be one of {choices}")
        return raw

    return cast


# key -> (caster, default).  This is the full config surface; anything else
# (outside the derived. namespace) is rejected.
SCHEMA: dict[str, tuple] = {
    "family": (_cast_choice(*_FAMILIES), "fixed_cycle"),
    "matrix_file": (_cast_str, ""),
    "n": (_cast_int, 20),
    "d": (_cast_int, 25),
    "N": (_cast_int, 100),
    "seed": (_cast_int, 0),
    "noise": (_cast_choice(*_NOISE_KINDS), "noiseless"),
    "sigma": (_cast_float, 0.0),
    "quantizer_levels": (_cast_int, 0),
    "alpha0": (_cast_float, 0.1),
    "nu": (_cast_float, 0.25),
    "beta0": (_cast_float, 0.7),
    "mu": (_cast_float, 0.75),
    "T": (_cast_int, 5000),
    "runs": (_cast_int, 20),
    "T_grid": (_cast_int_list, (500, 1000, 2000, 4000, 5000)),
    "p_low": (_cast_float, 0.01),
    "p_high": (_cast_float, 0.09),
    "horizon": (_cast_int, 0),
    "window": (_cast_int, 0),
    "output_dir": (_cast_str, ""),
}


@dataclass(frozen=True)
class Config:
    """Resolved config values plus the set of keys the file actually set
    (so builders can tell an explicit value from a default)."""

    values: dict
    provided: frozenset

    def __getitem__(self, key: str):
        return self.values[key]

    def was_set(self, key: str) -> bool:
        return key in self.provided


def parse_config_text(text: str, source: str = "<config>") -> Config:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    provided: set[str] = set()
    unknown: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key.startswith("derived."):
            continue
        if key not in SCHEMA:
            unknown.append(f"{key} (line {lineno})")
            continue
        caster, _ = SCHEMA[key]
        try:
            values[key] = caster(rhs)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
        provided.add(key)
    if unknown:
        raise ValueError(f"{source}: unknown config keys: {', '.join(unknown)}")
    return Config(values=values, provided=frozenset(provided))


def parse_config(path) -> Config:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def fmt(value) -> str:
    """One config/CSV token: floats with 17 significant digits, lists
    comma-joined, everything else via str()."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(fmt(v) for v in value)
    return str(value)


def format_config(values: dict) -> str:
    lines = [f"{key} = {fmt(values[key])}" for key in SCHEMA]
    return "\n".join(lines) + "\n"


def write_manifest(path, values: dict, derived: dict) -> None:
    """Config echo plus derived.* facts; the result parses as a config."""
    parts = [format_config(values)]
    for key, val in derived.items():
        parts.append(f"derived.{key} = {fmt(val)}\n")
    Path(path).write_text("".join(parts), encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# CSV output

TRACE_HEADER = "t,loss_pooled,loss_weighted,deviation_sq,dist_opt_sq"


def write_trace_csv(path, trace) -> None:
    rows = [TRACE_HEADER]
    for i, t in enumerate(trace.t):
        rows.append(
            ",".join(
                (
                    str(int(t)),
                    fmt(trace.loss_pooled[i]),
                    fmt(trace.loss_weighted[i]),
                    fmt(trace.deviation_sq[i]),
                    fmt(trace.dist_opt_sq[i]),
                )
            )
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_mean_csv(path, mc) -> None:
    """Per-iteration mean and standard error of every trace column over the
    completed runs."""
    names = ("loss_pooled", "loss_weighted", "deviation_sq", "dist_opt_sq")
    header = "t," + ",".join(f"{n}_mean,{n}_stderr" for n in names)
    rows = [header]
    for i, t in enumerate(mc.t):
        cells = [str(int(t))]
        for name in names:
            cells.append(fmt(mc.mean[name][i]))
            cells.append(fmt(mc.stderr[name][i]))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_sweep_csv(path, ts, mc) -> None:
    """Final-iterate statistics at each horizon in ts, sliced from one run
    at the largest horizon (iteration t never depends on the horizon)."""
    names = ("loss_pooled", "loss_weighted", "deviation_sq", "dist_opt_sq")
    header = "T," + ",".join(f"{n}_mean,{n}_stderr" for n in names)
    rows = [header]
    for T in ts:
        i = T - 1
        cells = [str(int(T))]
        for name in names:
            cells.append(fmt(mc.mean[name][i]))
            cells.append(fmt(mc.stderr[name][i]))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read one of this package's CSV files back into named float arrays."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    names = lines[0].split(",")
    data = np.array([[float(tok) for tok in line.split(",")] for line in lines[1:]])
    return {name: data[:, j] for j, name in enumerate(names)}


# ---------------------------------------------------------------------------
# minimal SVG log-log plots

_PALETTE = ("#1f6fb2", "#d1495b", "#3a8f5f", "#8a5fb0", "#b07d2b", "#4a4a4a")


def _loglog_ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def svg_loglog(path, series: dict, title: str, xlabel: str = "t", ylabel: str = "") -> None:
    """Write a small self-contained log-log SVG line plot.

    ``series`` maps a legend label to a pair of arrays (x, y); points with
    nonpositive coordinates are dropped (they have no place on a log axis).
    """
    W, H = 640, 440
    ml, mr, mt, mb = 70, 20, 40, 50
    cleaned: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for label, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = (xs > 0) & (ys > 0)
        if np.any(keep):
            cleaned[label] = (xs[keep], ys[keep])
    if not cleaned:
        raise ValueError("nothing positive to plot")
    x_lo = min(float(x.min()) for x, _ in cleaned.values())
    x_hi = max(float(x.max()) for x, _ in cleaned.values())
    y_lo = min(float(y.min()) for _, y in cleaned.values())
    y_hi = max(float(y.max()) for _, y in cleaned.values())
    if x_lo == x_hi:
        x_lo, x_hi = x_lo / 2, x_hi * 2
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 2, y_hi * 2

    def px(x: float) -> float:
        f = (math.log10(x) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))
        return ml + f * (W - ml - mr)

    def py(y: float) -> float:
        f = (math.log10(y) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
        return H - mb - f * (H - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>',
        f'<text x="{(ml + W - mr) / 2}" y="{H - 12}" text-anchor="middle">{xlabel}</text>',
    ]
    if ylabel:
        out.append(
            f'<text x="16" y="{(mt + H - mb) / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(mt + H - mb) / 2})">{ylabel}</text>'
        )
    for k in _loglog_ticks(x_lo, x_hi):
        x = 10.0**k
        if x_lo <= x <= x_hi:
            out.append(
                f'<line x1="{px(x):.1f}" y1="{H - mb}" x2="{px(x):.1f}" y2="{H - mb + 5}" stroke="black"/>'
            )
            out.append(
                f'<text x="{px(x):.1f}" y="{H - mb + 18}" text-anchor="middle">1e{k}</text>'
            )
    for k in _loglog_ticks(y_lo, y_hi):
        y = 10.0**k
        if y_lo <= y <= y_hi:
            out.append(
                f'<line x1="{ml - 5}" y1="{py(y):.1f}" x2="{ml}" y2="{py(y):.1f}" stroke="black"/>'
            )
            out.append(
                f'<text x="{ml - 8}" y="{py(y):.1f}" text-anchor="end" dominant-baseline="middle">1e{k}</text>'
            )
    for idx, (label, (xs, ys)) in enumerate(cleaned.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{px(float(x)):.1f},{py(float(y)):.1f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{W - mr - 6}" y="{mt + 16 * idx + 12}" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
