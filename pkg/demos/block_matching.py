"""
What a 3D group looks like
==========================

Block matching collects patches that resemble a reference patch.  With
``scope="all-frames"`` the search also visits the other frames, which is the
grouping BM3D-3 and BM3D-M rely on.
"""
import numpy as np

from bm3dm import SearchParams, load_image, make_dataset, search_group
from bm3dm.image import find_image
from bm3dm.transforms import transform_group

clean = load_image(find_image("lena"))
stack = make_dataset(clean, sigma=40.0, L=3, seed=5)
ref = (0, 120, 96)

for scope in ("reference-frame-only", "all-frames"):
    g = search_group(stack.frames, ref, SearchParams(K_max=16, scope=scope))
    frames = np.bincount(g.refs[:, 0], minlength=stack.L)
    print(f"{scope:21s} K={g.K:2d}  members per frame={frames.tolist()}  "
          f"max distance={g.distances.max():8.1f}")

# most of the group's energy ends up in the first Walsh-Hadamard slice
tg = transform_group(g, "bior15")
energy = (tg.coeffs ** 2).sum(axis=(1, 2))
print("energy share per WHT index:", np.round(energy / energy.sum(), 3))
