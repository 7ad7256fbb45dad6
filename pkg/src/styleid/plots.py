"""Report figures (headless matplotlib, PNG files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps/version strings in the PNG so reruns stay byte-identical
_SAVE_KW = {"format": "png", "dpi": 100, "metadata": {"Software": None}}

plt.rcParams.update({
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def loss_curves(history, path, title="fine-tuning"):
    epochs = np.arange(len(history))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(epochs, history.total, label="total", color="k")
    ax.plot(epochs, history.l_ref, label="L_ref", color="tab:blue", lw=0.8)
    ax2 = ax.twinx()
    ax2.plot(epochs, history.l_feature, label="L_feature", color="tab:red", lw=0.8)
    ax2.set_ylabel("L_feature", color="tab:red")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def montage(images, labels, path, ncols=None):
    n = len(images)
    ncols = ncols or min(n, 6)
    nrows = int(np.ceil(n / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(1.6 * ncols, 1.8 * nrows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, img, label in zip(axes.ravel(), images, labels):
        img = np.clip(img, 0.0, 1.0)
        ax.imshow(img[:, :, 0] if img.shape[2] == 1 else img, cmap="gray", interpolation="nearest")
        ax.set_title(label, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def ssim_histogram(values, path):
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.hist(values, bins=min(20, max(len(values), 1)), color="tab:gray", edgecolor="k")
    ax.set_xlabel("SSIM")
    ax.set_ylabel("pairs")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
