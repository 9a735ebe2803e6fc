"""Render figures from the simulation CLI's exported CSV tables.

This package consumes only the documented CSV schemas and recomputes no
physics.  Rendering is a pure function of the CSV content and the FigureSpec:
the backend, style parameters, and image metadata are pinned so that
identical inputs produce identical image bytes.
"""

import csv
import os
import re as _re
import tempfile
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class SchemaError(ValueError):
    """A CSV does not match the schema its figure kind requires."""


KINDS = ("husimi", "nonmark", "spectrum", "deltan", "semiclassical")

_REQUIRED = {
    "husimi": ("re_alpha", "im_alpha", "Q", "trunc_ok"),
    "nonmark": ("g", "omega", "N_value", "pair_kind", "seed", "converged"),
    "spectrum": ("g", "level_index", "energy"),
    "deltan": ("g", "delta_N"),
    "semiclassical": ("t", "re_alpha", "im_alpha", "C"),
}

# style pinned for byte-identical rendering; hashsalt fixes svg ids
_RC = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "svg.hashsalt": "dickeplots",
}

_METADATA = {
    "png": {"Software": None},
    "pdf": {"CreationDate": None},
    "svg": {"Date": None},
}


@dataclass(frozen=True)
class FigureSpec:
    """One figure: a kind, its input CSVs (one panel each), and styling."""

    kind: str
    inputs: tuple
    output: str
    q_cap: float = 0.3    # husimi: every Q >= q_cap takes the same dark color

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.kind == "husimi" and not self.q_cap > 0.0:
            raise SchemaError("q_cap must be > 0")


def read_table(path, kind):
    """Load a CSV as string columns, enforcing the schema of the given kind."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0]
    for column in _REQUIRED[kind]:
        if column not in header:
            raise SchemaError(f"{path}: missing column '{column}'")
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {k} has {len(row)} cells, "
                              f"header has {len(header)}")
    table = {name: [row[j] for row in rows[1:]]
             for j, name in enumerate(header)}
    if kind == "semiclassical":
        _check_emitter_columns(header, path)
    return table


def _check_emitter_columns(header, path):
    # beta_re_j / beta_im_j / zeta_j must come in matched sets j = 1..n
    counts = {}
    for stem in ("beta_re", "beta_im", "zeta"):
        js = sorted(int(m.group(1)) for name in header
                    for m in [_re.fullmatch(stem + r"_(\d+)", name)] if m)
        if js != list(range(1, len(js) + 1)):
            raise SchemaError(f"{path}: columns {stem}_1..{stem}_n must be "
                              f"consecutive from 1, got {js}")
        counts[stem] = len(js)
    if len(set(counts.values())) != 1 or counts["zeta"] < 1:
        raise SchemaError(f"{path}: per-emitter column counts disagree: "
                          f"{counts}")


def _floats(table, column, path):
    try:
        return np.array([float(cell) for cell in table[column]])
    except ValueError as exc:
        raise SchemaError(f"{path}: column '{column}' is not numeric: {exc}")


def _bools(table, column, path):
    out = np.empty(len(table[column]), dtype=bool)
    for i, cell in enumerate(table[column]):
        if cell not in ("true", "false"):
            raise SchemaError(f"{path}: column '{column}' must be "
                              f"true/false, got {cell!r}")
        out[i] = cell == "true"
    return out


def _draw_husimi(ax, table, path, q_cap):
    re_a = _floats(table, "re_alpha", path)
    im_a = _floats(table, "im_alpha", path)
    q = _floats(table, "Q", path)
    ok = _bools(table, "trunc_ok", path)
    re_ax = np.unique(re_a)
    im_ax = np.unique(im_a)
    grid = np.full((im_ax.size, re_ax.size), np.nan)
    i = np.searchsorted(im_ax, im_a)
    j = np.searchsorted(re_ax, re_a)
    grid[i, j] = np.where(ok, q, np.nan)
    cmap = plt.get_cmap("hot_r").copy()
    cmap.set_bad("0.82")    # untrusted or missing grid cells
    img = ax.imshow(grid, origin="lower", cmap=cmap, vmin=0.0, vmax=q_cap,
                    extent=(re_ax[0], re_ax[-1], im_ax[0], im_ax[-1]),
                    aspect="equal", interpolation="nearest")
    ax.figure.colorbar(img, ax=ax, label="Q", shrink=0.85)
    ax.set_xlabel("Re alpha")
    ax.set_ylabel("Im alpha")


def _draw_nonmark(ax, table, path):
    g = _floats(table, "g", path)
    value = _floats(table, "N_value", path)
    conv = _bools(table, "converged", path)
    canonical = np.array([k == "canonical" for k in table["pair_kind"]])
    rnd = ~canonical
    ax.scatter(g[rnd], value[rnd], s=16, facecolors="none",
               edgecolors="tab:blue", linewidths=0.8, label="random pairs")
    ax.scatter(g[canonical], value[canonical], s=42, marker="x",
               color="tab:red", linewidths=1.2, label="canonical pair")
    if not conv.all():
        ax.scatter(g[~conv], value[~conv], s=6, marker=".", color="0.35",
                   label="unconverged")
    ax.set_xlabel("g")
    ax.set_ylabel("N")
    ax.legend(loc="upper left")


def _draw_spectrum(ax, table, path):
    g = _floats(table, "g", path)
    level = _floats(table, "level_index", path).astype(int)
    energy = _floats(table, "energy", path)
    for idx in np.unique(level):
        sel = level == idx
        order = np.argsort(g[sel], kind="stable")
        ax.plot(g[sel][order], energy[sel][order])
    ax.set_xlabel("g")
    ax.set_ylabel("energy")


def _draw_deltan(ax, table, path):
    g = _floats(table, "g", path)
    dn = _floats(table, "delta_N", path)
    ax.plot(g, dn, marker="o", ms=3, color="tab:purple")
    ax.set_xlabel("g")
    ax.set_ylabel("delta N")


def _draw_semiclassical(axes, table, path):
    t = _floats(table, "t", path)
    axes[0].plot(t, _floats(table, "re_alpha", path), label="Re alpha")
    axes[0].plot(t, _floats(table, "im_alpha", path), label="Im alpha")
    axes[0].set_ylabel("cavity field")
    axes[0].legend(loc="upper right")
    n_emitters = sum(1 for name in table if _re.fullmatch(r"zeta_\d+", name))
    for j in range(1, n_emitters + 1):
        axes[1].plot(t, _floats(table, f"zeta_{j}", path), label=f"zeta_{j}")
    axes[1].set_ylabel("inversion")
    axes[1].legend(loc="upper right")
    axes[2].plot(t, _floats(table, "C", path), color="0.2")
    axes[2].set_ylabel("C")
    axes[2].set_xlabel("t")


def render(spec):
    """Render one figure per the spec; returns the written image path.

    One input CSV makes one panel (column); the semiclassical kind uses
    three stacked axes per panel.  The file is written atomically.
    """
    tables = [read_table(path, spec.kind) for path in spec.inputs]
    ext = os.path.splitext(spec.output)[1].lstrip(".").lower()
    if ext not in _METADATA:
        raise SchemaError(f"unsupported image format '.{ext}' "
                          f"(use {'/'.join(sorted(_METADATA))})")
    nrows = 3 if spec.kind == "semiclassical" else 1
    ncols = len(tables)
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(4.4 * ncols, 2.2 * nrows + 1.2),
                         layout="constrained")
        axes = fig.subplots(nrows, ncols, squeeze=False)
        try:
            for c, (table, path) in enumerate(zip(tables, spec.inputs)):
                if spec.kind == "husimi":
                    _draw_husimi(axes[0][c], table, path, spec.q_cap)
                elif spec.kind == "nonmark":
                    _draw_nonmark(axes[0][c], table, path)
                elif spec.kind == "spectrum":
                    _draw_spectrum(axes[0][c], table, path)
                elif spec.kind == "deltan":
                    _draw_deltan(axes[0][c], table, path)
                else:
                    _draw_semiclassical([axes[r][c] for r in range(3)],
                                        table, path)
            _atomic_savefig(fig, spec.output, ext)
        finally:
            plt.close(fig)
    return spec.output


def _atomic_savefig(fig, out_path, ext):
    out_dir = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix="." + ext)
    try:
        os.close(fd)
        fig.savefig(tmp, format=ext, metadata=_METADATA[ext])
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
