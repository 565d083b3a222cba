#!/usr/bin/env python3
"""End-to-end exercise of the hotspot CLI surface and its exit codes."""

import filecmp
import subprocess
import sys
import tempfile
from pathlib import Path

CLI = sys.argv[1] if len(sys.argv) > 1 else "hotspot"
FAILURES = []


def run(*args, expect=0, env=None, cwd=None):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True,
                          env=env, cwd=cwd)
    if proc.returncode != expect:
        FAILURES.append(f"{' '.join(map(str, args))}: exit {proc.returncode}, "
                        f"expected {expect}\nstderr: {proc.stderr[-500:]}")
    return proc


def check(cond, message):
    if not cond:
        FAILURES.append(message)


def main():
    tmp = Path(tempfile.mkdtemp(prefix="hotspot_cli_"))

    # gen: determinism, outputs, unknown shape.
    run("gen", "circle", "--r", 0.5, "--n", 400, "--out", tmp / "g1", "--grid-res", 64)
    run("gen", "circle", "--r", 0.5, "--n", 400, "--out", tmp / "g2", "--grid-res", 64)
    check((tmp / "g1" / "cloud.txt").exists(), "gen: cloud.txt missing")
    check((tmp / "g1" / "gt_grid.txt").exists(), "gen: gt_grid.txt missing")
    check((tmp / "g1" / "manifest.txt").exists(), "gen: manifest.txt missing")
    check(filecmp.cmp(tmp / "g1" / "cloud.txt", tmp / "g2" / "cloud.txt", shallow=False),
          "gen: same seed produced different cloud bytes")
    proc = run("gen", "wedge", expect=1)
    check("circle" in proc.stderr + proc.stdout, "gen: unknown-shape error must list shapes")
    for shape in ("square", "rings", "star"):
        run("gen", shape, "--n", 100, "--out", tmp / f"shape_{shape}", "--grid-res", 32)

    # train: config + overrides, machine log, divergence-free small run.
    cfg = tmp / "cfg.txt"
    cfg.write_text(
        "iterations = 300\nlr = 2e-3\nwidth = 16\nhidden_layers = 2\n"
        "n_uniform = 128\nn_gauss = 128\nboundary_fraction = 0.3\neval_interval = 100\n"
        "w_boundary.knots = 0:100\nw_eikonal.knots = 0:1\nw_heat.knots = 0:2\n"
        "lambda.knots = 0:20\n")
    proc = run("train", "--cloud", tmp / "g1" / "cloud.txt", "--config", cfg,
               "--out", tmp / "run", "--seed", 3, "--log-machine")
    check((tmp / "run" / "model.ckpt").exists(), "train: model.ckpt missing")
    check((tmp / "run" / "history.csv").exists(), "train: history.csv missing")
    check("iter=" in proc.stdout and "total=" in proc.stdout,
          "train: --log-machine must emit iter=/total= lines")
    manifest = (tmp / "run" / "manifest.txt").read_text()
    check("config.iterations = 300" in manifest, "train: manifest must snapshot the config")

    bad_cfg = tmp / "bad.txt"
    bad_cfg.write_text("iterations = many\n")
    run("train", "--cloud", tmp / "g1" / "cloud.txt", "--config", bad_cfg,
        "--out", tmp / "runbad", expect=1)

    # eval: metrics outputs and grid-mismatch exit code.
    proc = run("eval", "--checkpoint", tmp / "run" / "model.ckpt",
               "--gt", tmp / "g1" / "gt_grid.txt", "--out", tmp / "ev")
    check(proc.stdout.startswith("iou="), "eval: summary line must start with iou=")
    check((tmp / "ev" / "metrics.csv").exists(), "eval: metrics.csv missing")
    check((tmp / "ev" / "summary.txt").exists(), "eval: summary.txt missing")
    check((tmp / "ev" / "renders" / "heatmap.ppm").exists(), "eval: heatmap missing")

    run("gen", "sphere", "--n", 200, "--out", tmp / "g3d", "--grid-res", 16)
    run("eval", "--checkpoint", tmp / "run" / "model.ckpt",
        "--gt", tmp / "g3d" / "gt_grid.txt", "--out", tmp / "evbad", expect=3)

    # trace: 3D requirement and render outputs.
    run("train", "--cloud", tmp / "g3d" / "cloud.txt", "--out", tmp / "run3d",
        "--iterations", 150, "--width", 16, "--layers", 2, "--n-uniform", 128,
        "--n-gauss", 128, "--boundary-fraction", 0.3, "--lr", "2e-3")
    run("trace", "--checkpoint", tmp / "run3d" / "model.ckpt", "--out", tmp / "tr",
        "--res", 21, "--poses", 2)
    check((tmp / "tr" / "renders" / "pose00_iterations.ppm").exists(),
          "trace: pose renders missing")
    check((tmp / "tr" / "renders" / "iterations_histogram.csv").exists(),
          "trace: aggregate histogram missing")
    run("trace", "--checkpoint", tmp / "run" / "model.ckpt", "--out", tmp / "trbad",
        expect=3)

    # validate: fast suites.
    run("validate", "stability")
    run("validate", "convergence")
    run("validate", "bounds", "--configs", 3)
    run("validate", "nonsense", expect=1)

    # demo1d: curve outputs.
    proc = run("demo1d", "--mode", "eikonal_only", "--iterations", 100, "--out", tmp / "demo")
    check("final_max_error=" in proc.stdout, "demo1d: must report final_max_error")
    check((tmp / "demo" / "curve.csv").read_text().startswith("x,u,u_ref"),
          "demo1d: curve.csv header")

    # usage errors.
    run("train", expect=1)
    run("--not-a-flag", expect=1)

    if FAILURES:
        print("CLI smoke failures:")
        for f in FAILURES:
            print(" -", f)
        sys.exit(1)
    print("cli smoke: all checks passed")


if __name__ == "__main__":
    main()
