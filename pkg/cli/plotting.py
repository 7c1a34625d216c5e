from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use('Agg')
matplotlib.rcParams.update({'svg.hashsalt': 'kagome', 'axes.unicode_minus': False})

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from dynamics.correlation import CorrelationSeries  # noqa: E402
from utils.data_helper import atomic_path  # noqa: E402


def _save(fig, path: Path) -> Path:
    with atomic_path(path, 'wb') as handle:
        fig.savefig(handle, format='svg', metadata={'Date': None}, bbox_inches='tight')
    plt.close(fig)
    return path


def plot_trace(trace: pd.DataFrame, path: Path, reference: float | None = None) -> Path:
    """Energy per sweep, with the exact ground energy as a dashed line when known."""
    fig, ax = plt.subplots(figsize=(5, 3.5), constrained_layout=True)
    ax.plot(trace['sweep'], trace['energy_over_hbar_OmegaR'], marker='o', markersize=3, label='PEPS')
    if reference is not None:
        ax.axhline(reference, linestyle='--', color='black', linewidth=1, label='ED')
    ax.set_xlabel('sweep')
    ax.set_ylabel(r'$E / \hbar\Omega_R$')
    ax.legend()
    return _save(fig, path)


def plot_correlations(series: Iterable[CorrelationSeries], path: Path, title: str = '') -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    for item in series:
        k, other = item.pair
        ax.plot(item.times, item.values, linewidth=1, label=f'G({k},{other})')
    ax.set_xlabel(r'$\Omega_R t$')
    ax.set_ylabel(r'$\mathcal{G}_{k,k^\prime}$')
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_table(frame: pd.DataFrame, x: str, columns: Iterable[str], path: Path, step: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5), constrained_layout=True)
    for column in columns:
        if step:
            ax.step(frame[x], frame[column], where='mid', label=column)
        else:
            ax.plot(frame[x], frame[column], marker='o', markersize=3, label=column)
    ax.set_xlabel(x)
    ax.legend(fontsize=7)
    return _save(fig, path)
