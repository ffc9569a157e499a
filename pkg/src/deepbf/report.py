'''
SVG figures from evaluation samples: KDE of log10 BF, ROC, and a scatter
of estimated against exact log10 BF. Bayes factors are clipped to
[1e-6, 1e6] for display and the number of clipped points is shown in the
title.
'''

import io
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from pathlib import Path
from typing import Optional
from .evalkit import Kde, kde_grid, roc_auc
from .utility import atomic_write_text

DISPLAY_LIMIT = 6.
matplotlib.rcParams['svg.hashsalt'] = 'deepbf'

def _log10_clipped(log_bf : np.ndarray):
    values = np.asarray(log_bf, dtype = np.float64) / np.log(10)
    clipped = int(np.sum(np.abs(values) > DISPLAY_LIMIT))
    return np.clip(values, -DISPLAY_LIMIT, DISPLAY_LIMIT), clipped

def save_svg(fig, path, description : Optional[str] = None):
    buffer = io.StringIO()
    metadata = {'Date' : None}
    if description is not None:
        metadata['Description'] = description
    fig.savefig(buffer, format = 'svg', metadata = metadata)
    plt.close(fig)
    atomic_write_text(path, buffer.getvalue())

def plot_kde(samples : pd.DataFrame, path, description = None):
    fig, axes = plt.subplots(1, 2, figsize = (9, 3.5))
    clipped = 0
    for ax, model in zip(axes, (1, 2)):
        rows = samples[samples['model'] == model]
        curves = [('estimated', rows['est_log_bf'].to_numpy())]
        if rows['true_log_bf'].notna().all():
            curves.insert(0, ('exact', rows['true_log_bf'].to_numpy()))
        kdes = []
        for label, values in curves:
            values, count = _log10_clipped(values)
            clipped += count
            kdes.append((label, Kde(values)))
        grid = kde_grid(*(k for _, k in kdes))
        for label, kde in kdes:
            ax.plot(grid, kde(grid), label = label)
        ax.set_xlabel('log10 BF')
        ax.set_title(f'data from M{model}')
        ax.legend()
    fig.suptitle(f'KDE of log10 Bayes factors ({clipped} clipped)')
    fig.tight_layout()
    save_svg(fig, path, description)

def plot_roc(samples : pd.DataFrame, path, description = None):
    fig, ax = plt.subplots(figsize = (4, 4))
    m1, m2 = samples[samples['model'] == 1], samples[samples['model'] == 2]
    columns = [('estimated', 'est_log_bf')]
    if samples['true_log_bf'].notna().all():
        columns.insert(0, ('exact', 'true_log_bf'))
    for label, column in columns:
        roc = roc_auc(m1[column].to_numpy(), m2[column].to_numpy())
        ax.plot(roc.fpr, roc.tpr, label = f'{label} (AUC {roc.auc:.3f})')
    ax.plot([0, 1], [0, 1], color = 'grey', linewidth = 0.5)
    ax.set_xlabel('false positive rate')
    ax.set_ylabel('true positive rate')
    ax.legend(loc = 'lower right')
    fig.tight_layout()
    save_svg(fig, path, description)

def plot_scatter(samples : pd.DataFrame, path, description = None):
    fig, ax = plt.subplots(figsize = (4, 4))
    if samples['true_log_bf'].isna().any():
        ax.text(0.5, 0.5, 'no exact Bayes factors', ha = 'center', va = 'center')
        clipped = 0
    else:
        clipped = 0
        for model in (1, 2):
            rows = samples[samples['model'] == model]
            x, cx = _log10_clipped(rows['true_log_bf'].to_numpy())
            y, cy = _log10_clipped(rows['est_log_bf'].to_numpy())
            clipped += cx + cy
            ax.scatter(x, y, s = 2, label = f'M{model}')
        ax.plot([-DISPLAY_LIMIT, DISPLAY_LIMIT], [-DISPLAY_LIMIT, DISPLAY_LIMIT], color = 'grey', linewidth = 0.5)
        ax.set_xlabel('exact log10 BF')
        ax.set_ylabel('estimated log10 BF')
        ax.legend()
    ax.set_title(f'estimated vs exact ({clipped} clipped)')
    fig.tight_layout()
    save_svg(fig, path, description)

def render_report(samples : pd.DataFrame, output_dir, description = None):
    output_dir = Path(output_dir)
    paths = [output_dir / 'kde.svg', output_dir / 'roc.svg', output_dir / 'scatter.svg']
    for plot, path in zip((plot_kde, plot_roc, plot_scatter), paths):
        plot(samples, path, description)
    return paths
