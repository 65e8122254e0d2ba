"""Render exported term grids to figure files next to the CSV output."""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 120


def _load_main_grid(path):
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return body[:, 0], body[:, 1]


def _load_pair_grid(path):
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x = np.unique(body[:, 0])
    y = np.unique(body[:, 1])
    z = body[:, 2].reshape(x.size, y.size)
    return x, y, z


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_main_effect(csv_path, png_path, name, importance=None):
    x, v = _load_main_grid(csv_path)
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(x, v, drawstyle="steps-post", color="tab:blue", lw=1.2)
    ax.axhline(0.0, color="0.6", lw=0.6)
    title = name if importance is None else f"{name}  (sd {importance:.3g})"
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(name)
    ax.set_ylabel("effect")
    fig.tight_layout()
    _save(fig, png_path)


def render_interaction(csv_path, png_path, name_x, name_y, importance=None):
    x, y, z = _load_pair_grid(csv_path)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    mesh = ax.pcolormesh(x, y, z.T, cmap="RdBu_r", shading="nearest")
    fig.colorbar(mesh, ax=ax, label="effect")
    title = f"{name_x} : {name_y}"
    if importance is not None:
        title += f"  (sd {importance:.3g})"
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(name_x)
    ax.set_ylabel(name_y)
    fig.tight_layout()
    _save(fig, png_path)


def render_terms(terms_dir, out_dir=None) -> dict:
    """Render every term in ``terms_dir/manifest.json`` to a PNG.

    Figures land beside the CSV grids unless ``out_dir`` says otherwise.
    Returns an index mapping term files to figure files; the index is also
    written as ``figures.json`` in the output directory.
    """
    with open(os.path.join(terms_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    out_dir = out_dir or terms_dir
    os.makedirs(out_dir, exist_ok=True)
    index = {}
    for entry in manifest["terms"]:
        csv_path = os.path.join(terms_dir, entry["file"])
        png_name = os.path.splitext(entry["file"])[0] + ".png"
        png_path = os.path.join(out_dir, png_name)
        if entry["kind"] == "main":
            render_main_effect(csv_path, png_path, entry["names"][0],
                               entry.get("importance"))
        else:
            render_interaction(csv_path, png_path, entry["names"][0],
                               entry["names"][1], entry.get("importance"))
        index[entry["file"]] = png_name
    with open(os.path.join(out_dir, "figures.json"), "w", encoding="utf-8") as fh:
        json.dump({"figures": index}, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return index
