"""Raster-to-density pipeline and the smoothing/downsampling perturbations.

Generates a synthetic stained-tissue image (dark garland on a light textured
background), runs the preprocessing chain to obtain a normalized density
field, and writes perturbed variants at several smoothing strengths.
"""

from pathlib import Path

import numpy as np

from palisade import (PreprocessParams, RasterImage, export_pgm, perturb, preprocess,
                      save_field, Grid2D)

out = Path(__file__).parent / "output" / "imaging"
out.mkdir(parents=True, exist_ok=True)

n = 128
idx = np.arange(n)
X, Y = np.meshgrid(idx, idx)
c = (n - 1) / 2
r = np.hypot(X - c, Y - c)
band = np.exp(-((r - 0.3 * n) ** 2) / (2 * (0.05 * n) ** 2))
band += 0.7 * np.exp(-((r - 0.12 * n) ** 2) / (2 * (0.03 * n) ** 2))
gray = np.clip(235.0 - 180.0 * band + 10.0 * np.sin(0.8 * X) * np.cos(1.1 * Y), 0, 255)
rgb = np.stack([gray, np.clip(gray * 0.9, 0, 255), np.clip(gray * 0.95, 0, 255)], axis=-1)
image = RasterImage.from_array(np.floor(rgb + 0.5).astype(np.uint8))
export_pgm(gray / 255.0, out / "raw_gray.pgm")

params = PreprocessParams(out_nx=64, out_ny=64, gaussian_k=5, gaussian_s=1.0,
                          median_k=3, open_radius=1)
density = preprocess(image, params)
print(f"density field {density.shape}, range [{density.min():.3f}, {density.max():.3f}]")
export_pgm(density, out / "density.pgm")
save_field(out / "density.pfld", density, Grid2D(64, 64, 0.1, 0.1))

for sd in (0.2, 0.6, 1.0):
    smoothed = perturb(density, k=7, s=sd, n=1)
    export_pgm(smoothed, out / f"density_sd{sd:.1f}.pgm")
    tv = np.abs(np.diff(smoothed, axis=0)).sum() + np.abs(np.diff(smoothed, axis=1)).sum()
    print(f"sd={sd:.1f}: total variation {tv:.2f}")

coarse = perturb(density, k=3, s=0.6, n=2)
print(f"2-fold downsample: {coarse.shape}")
export_pgm(coarse, out / "density_coarse.pgm")
print(f"wrote panels to {out}")
