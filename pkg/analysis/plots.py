"""SVG line plots for run artifacts.

Figures use the object API (no pyplot) and come back as SVG bytes for the
artifact storage.
"""
import io

import matplotlib
import numpy as np

matplotlib.use('Agg')
from matplotlib.figure import Figure  # noqa: E402


def _to_svg(figure):
    buffer = io.BytesIO()
    figure.savefig(buffer, format='svg', bbox_inches='tight')
    return buffer.getvalue()


def decay_svg(trajectory, beta1=None):
    figure = Figure(figsize=(6, 4))
    ax = figure.subplots()
    times = trajectory.times
    dist = trajectory.column('dist_to_mean')
    ax.semilogy(times, [max(d, 1e-300) for d in dist], label='dist to mean')
    if beta1 is not None and dist[0] > 0:
        ax.semilogy(times, dist[0] * np.exp(-beta1 * np.asarray(times)), '--', label='exp(-beta1 t) bound')
    ax.set_xlabel('t')
    ax.set_ylabel('||w - mean||')
    ax.legend()
    return _to_svg(figure)


def sweep_svg(rows):
    figure = Figure(figsize=(6, 4))
    ax = figure.subplots()
    ax.loglog([row.epsilon for row in rows], [row.sup_error for row in rows], 'o-')
    ax.set_xlabel('epsilon')
    ax.set_ylabel('sup_t ||w_eps - w_heat||')
    ax.invert_xaxis()
    return _to_svg(figure)


def spectrum_svg(report):
    figure = Figure(figsize=(6, 4))
    ax = figure.subplots()
    grid = report.eigvec.grid
    ax.plot(grid.positions, report.eigvec.values)
    ax.axvline(0.0, color='grey', linewidth=0.5)
    ax.set_xlabel('x')
    ax.set_title(f'slowest mode, beta1 = {report.beta1:.6g}')
    return _to_svg(figure)
