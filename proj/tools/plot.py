#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
#
# Copyright 2026 The hfbrt Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ------------------------------------------------------------------------

"""Renders the CSV outputs of an hfbrt run directory to PNG files.

The CSV files are the canonical results; the images are a convenience.

    python3 tools/plot.py runs/evaluate [--out DIR]
"""

import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_curves(df, path, title):
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, g in df.groupby("label", sort=False):
        if "stderr_db" in g:
            ax.errorbar(g.snr_db, g.nmse_db, yerr=g.stderr_db, marker="o", capsize=2, label=label)
        else:
            ax.plot(g.snr_db, g.nmse_db, marker="o", label=label)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("NMSE [dB]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_train_log(df, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(df.epoch, df.train_nmse_db, label="train")
    ax.plot(df.epoch, df.val_nmse_db, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("NMSE [dB]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_pmf(df, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(df.near_field_paths, df.probability, width=0.6, label="closed form")
    if "monte_carlo" in df:
        ax.plot(df.near_field_paths, df.monte_carlo, "kx", label="Monte-Carlo")
    ax.set_xlabel("number of near-field paths")
    ax.set_ylabel("probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_surface(df, path):
    table = df.pivot(index="subcarrier", columns="snr_db", values="nmse_db")
    fig, ax = plt.subplots(figsize=(5, 4))
    for snr in table.columns:
        ax.plot(table.index, table[snr], label=f"{snr:g} dB")
    ax.set_xlabel("subcarrier")
    ax.set_ylabel("NMSE [dB]")
    ax.legend(title="SNR")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_hyper(df, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(df.value, df.nmse_db, marker="o", label="BRT")
    ax.plot(df.value, df.ls_nmse_db, "--", label="LS")
    ax.set_xlabel(df.axis.iloc[0])
    ax.set_ylabel("NMSE [dB]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bench(df, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for k, g in df.groupby("subcarriers"):
        ax.plot(g.batch, g.per_sample_ms, marker="o", label=f"K={k}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("batch size")
    ax.set_ylabel("time per sample [ms]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("run_dir", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=None, help="image directory (default: run_dir)")
    args = ap.parse_args()
    out = args.out or args.run_dir
    out.mkdir(parents=True, exist_ok=True)

    written = []
    for csv in sorted(args.run_dir.glob("*.csv")):
        df = pd.read_csv(csv)
        png = out / (csv.stem + ".png")
        cols = set(df.columns)
        if {"snr_db", "nmse_db", "label"} <= cols:
            plot_curves(df, png, csv.stem)
        elif {"epoch", "train_nmse_db"} <= cols:
            plot_train_log(df, png)
        elif "near_field_paths" in cols:
            plot_pmf(df, png)
        elif {"subcarrier", "snr_db"} <= cols:
            plot_surface(df, png)
        elif {"axis", "value"} <= cols:
            plot_hyper(df, png)
        elif "per_sample_ms" in cols:
            plot_bench(df, png)
        else:
            continue
        written.append(png)
    for p in written:
        print(p)


if __name__ == "__main__":
    main()
