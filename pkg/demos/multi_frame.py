"""
Four ways to use several noisy frames
=====================================

Five independent noisy shots of the same scene are combined with BM3D-1
(average then denoise), BM3D-2 (denoise then average), BM3D-3 (one reference
frame, groups drawn from all frames) and BM3D-M (every frame is a reference,
everything is aggregated into one image).
"""
from pathlib import Path

from bm3dm import METHODS, load_image, make_dataset, mse, psnr, run_method, save_image
from bm3dm.image import central_crop, find_image

out_dir = Path(__file__).with_name("output")
out_dir.mkdir(exist_ok=True)

clean = central_crop(load_image(find_image("lena")), 128)
stack = make_dataset(clean, sigma=80.0, L=5, seed=1, source_id="lena")
print(f"{stack.L} frames, sigma={stack.sigma}, plain average mse={mse(stack.frames.mean(0), clean):.2f}")

for method in METHODS[1:]:
    out, meta = run_method(method, stack)
    extra = f" (best reference {meta['ref_index']})" if method == "BM3D-3" else ""
    print(f"{method:7s} mse={mse(out, clean):8.2f}  psnr={psnr(out, clean):5.2f} dB  "
          f"{meta['wall_time']:5.1f} s{extra}")
    save_image(out, out_dir / f"{method.lower()}.pgm", mode="pgm8-clamped")
