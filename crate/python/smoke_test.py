"""Smoke test for the pytvrestore extension module.

Build and install first:  cd crates/python && maturin develop --release
"""
import math
import pathlib
import random

import pytvrestore as tv

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def main():
    rng = random.Random(0)
    rows, cols = 8, 6
    x = [rng.random() for _ in range(rows * cols)]
    z = [rng.random() for _ in range(2 * rows * cols)]
    dx = tv.difference(x, rows, cols)
    lhs = sum(a * b for a, b in zip(dx, z))
    rhs = sum(a * b for a, b in zip(x, tv.difference_adjoint(z, rows, cols)))
    assert abs(lhs - rhs) < 1e-12, (lhs, rhs)
    assert tv.total_variation([0.3] * (rows * cols), rows, cols) == 0.0

    out = tv.prox_group_l12([3.0, 0.1, 4.0, 0.0], 1.0)
    assert abs(out[0] - 2.4) < 1e-12 and abs(out[2] - 3.2) < 1e-12 and out[1] == out[3] == 0.0

    noise = tv.NoiseModel()
    assert abs(noise.sim_noise_std(256.0) - 0.0256) < 1e-3

    assert tv.psnr(x, x) == math.inf
    assert abs(tv.ssim(x, x, rows, cols) - 1.0) < 1e-12

    y = [v + 0.05 * rng.gauss(0, 1) for v in x]
    sol, objective = tv.solve(y, rows, cols, "pds", config=tv.SolverConfig(iterations=30))
    assert len(sol) == rows * cols and len(objective) == 30
    assert objective[-1] <= objective[0]

    clean = tv.Image.load(str(DATA / "camera256.pgm"))
    assert (clean.rows, clean.cols) == (256, 256)
    noisy = clean.degrade(0.1, seed=0)
    cfg = tv.SolverConfig(gamma=10.0, iterations=50)
    restored = tv.restore_image(noisy, "admm", config=cfg)
    before, _ = tv.evaluate(clean, noisy)
    after, after_ssim = tv.evaluate(clean, restored)
    print(f"observed {before:.2f} dB -> restored {after:.2f} dB (ssim {after_ssim:.3f})")
    assert after > before + 2.0

    restored_noisy = tv.restore_image(noisy, "admm", noisy=True, config=tv.SolverConfig(gamma=10.0, iterations=50, seed=1))
    print(f"noisy ADMM {tv.evaluate(clean, restored_noisy)[0]:.2f} dB")
    print("smoke test passed")


if __name__ == "__main__":
    main()
