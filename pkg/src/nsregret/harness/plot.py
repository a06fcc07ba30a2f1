"""Deterministic SVG line plots of cumulative regret."""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable
from xml.sax.saxutils import escape

import numpy as np

from .runner import RegretTrace

__all__ = ["emit_plot", "aggregate"]

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 20, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
MAX_POINTS = 400


def aggregate(traces: Iterable[RegretTrace]) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Group by (alg, env) in first-seen order; mean and standard error across replications."""
    groups: dict[tuple[str, str], list[np.ndarray]] = defaultdict(list)
    for tr in traces:
        groups[(tr.alg, tr.env)].append(tr.cum_regret)
    out = []
    for (alg, env), runs in groups.items():
        n = min(r.size for r in runs)
        stack = np.vstack([r[:n] for r in runs])
        mean = stack.mean(axis=0)
        se = stack.std(axis=0, ddof=1) / math.sqrt(len(runs)) if len(runs) > 1 else np.zeros(n)
        label = f"{alg} / {env}" if env else alg
        out.append((label, mean, se))
    return out


def _ticks(hi: float, n: int = 5) -> list[float]:
    if hi <= 0:
        return [0.0]
    raw = hi / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    return [i * step for i in range(int(hi / step + 1e-9) + 1)]


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def emit_plot(traces: Iterable[RegretTrace], title: str = "cumulative regret") -> str:
    """One mean polyline per (alg, env) group with a shaded standard-error band and a legend."""
    series = aggregate(traces)
    T = max((m.size for _, m, _ in series), default=1)
    ymax = max((float((m + s).max()) for _, m, s in series if m.size), default=0.0)
    ymax = ymax if ymax > 0 else 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(step: float) -> float:
        return LEFT + pw * (step - 1) / max(T - 1, 1)

    def sy(v: float) -> float:
        return TOP + ph * (1.0 - v / ymax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<title>{escape(title)}</title>',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}"/>'
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}"/></g>',
    ]
    ticks = ['<g class="ticks" font-family="sans-serif" font-size="11">']
    for v in _ticks(ymax):
        y = sy(v)
        ticks.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>'
                     f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{_num(v)}</text>')
    for v in _ticks(T):
        if v < 1:
            continue
        x = sx(v)
        ticks.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 4}" stroke="black"/>'
                     f'<text x="{x:.2f}" y="{TOP + ph + 16}" text-anchor="middle">{_num(v)}</text>')
    ticks.append('</g>')
    parts.extend(ticks)
    parts.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">step</text>')
    parts.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 {TOP + ph / 2})">{escape(title)}</text>')

    for i, (label, mean, se) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        idx = np.unique(np.linspace(0, mean.size - 1, min(mean.size, MAX_POINTS)).round().astype(int))
        steps = idx + 1
        upper = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(steps, mean[idx] + se[idx]))
        lower = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(steps[::-1], (mean[idx] - se[idx])[::-1]))
        parts.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" fill-opacity="0.2" '
                     f'stroke="none"/>')
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(steps, mean[idx]))
        parts.append(f'<polyline class="trace" points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"><title>{escape(label)}</title></polyline>')

    if series:
        parts.append('<g class="legend" font-family="sans-serif" font-size="11">')
        for i, (label, _, _) in enumerate(series):
            y = TOP + 12 + 16 * i
            color = PALETTE[i % len(PALETTE)]
            parts.append(f'<line x1="{LEFT + 10}" y1="{y - 4}" x2="{LEFT + 30}" y2="{y - 4}" '
                         f'stroke="{color}" stroke-width="2"/>'
                         f'<text x="{LEFT + 35}" y="{y}">{escape(label)}</text>')
        parts.append('</g>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"
