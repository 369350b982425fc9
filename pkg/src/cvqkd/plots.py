"""Static SVG figures with byte-stable output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .estimation import Histogram1D, Histogram2D  # noqa: E402
from .witness import BoundCurve  # noqa: E402

_RC = {"svg.hashsalt": "cvqkd", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def q_function(h: Histogram2D, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        m = ax.pcolormesh(h.x_edges, h.y_edges, h.density.T, shading="flat", cmap="viridis", rasterized=False)
        fig.colorbar(m, ax=ax, label="density")
        ax.set_xlabel("x (SNU)")
        ax.set_ylabel("y (SNU)")
        ax.set_aspect("equal")
        return _save(fig, path)


def marginals(hists: dict[str, Histogram1D], path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for axis, h in hists.items():
            ax.step(h.centers, h.density, where="mid", label=axis)
        ax.set_xlabel("outcome (SNU)")
        ax.set_ylabel("density")
        ax.legend()
        return _save(fig, path)


def bound_curves(curves: list[BoundCurve], path, points=None) -> Path:
    """E_max(overlap), one line per transmission; optional (overlap, E) markers."""
    by_T: dict[float, list[BoundCurve]] = {}
    for c in curves:
        by_T.setdefault(c.transmission, []).append(c)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.8))
        for T, cs in by_T.items():
            cs = sorted(cs, key=lambda c: c.overlap)
            ax.plot([c.overlap for c in cs], [c.E_max for c in cs], label=f"T = {T:g}")
        if points:
            ax.plot([p[0] for p in points], [p[1] for p in points], "D", mfc="none", color="k", label="data")
        ax.set_xlabel("state overlap")
        ax.set_ylabel("tolerable excess variance E")
        ax.legend()
        return _save(fig, path)


def postselection_sweep(tau, acc_emp, err_emp, acc_th, err_th, path) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(tau, acc_th, "-", color="C0", label="acceptance (closed form)")
        ax.plot(tau, acc_emp, "s", mfc="none", color="C0", label="acceptance (simulated)")
        ax.plot(tau, err_th, "-", color="k", label="error rate (closed form)")
        ax.plot(tau, err_emp, "o", color="k", label="error rate (simulated)")
        ax.set_xlabel("threshold tau (SNU)")
        ax.set_ylabel("fraction")
        ax.legend(fontsize="small")
        return _save(fig, path)
