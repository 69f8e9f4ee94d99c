"""BM3D and multi-frame BM3D variants (BM3D-1/2/3/M) for AWGN denoising."""
from .filtering import (AggregationBuffer, FilteredGroup, aggregate_push, finalize,
                        hard_threshold_filter, kaiser_window, wiener_filter)
from .image import (FrameStack, NoiseSpec, add_awgn, load_dataset, load_image, make_dataset,
                    save_dataset, save_image)
from .matching import Group3D, PatchRef, SearchParams, enumerate_references, patch_distance, search_group
from .metrics import EvalRecord, mse, psnr
from .pipelines import (METHODS, Bm3dParams, StepParams, basic_estimate, bm3d_1, bm3d_2, bm3d_3,
                        bm3d_m, bm3d_single, run_method)
from .transforms import (bior15_2d, dct_2d, inverse_transform_group, transform_group, wht_1d)

__version__ = "0.1.0"

__all__ = [
    "AggregationBuffer", "FilteredGroup", "aggregate_push", "finalize", "hard_threshold_filter",
    "kaiser_window", "wiener_filter",
    "FrameStack", "NoiseSpec", "add_awgn", "load_dataset", "load_image", "make_dataset",
    "save_dataset", "save_image",
    "Group3D", "PatchRef", "SearchParams", "enumerate_references", "patch_distance", "search_group",
    "EvalRecord", "mse", "psnr",
    "METHODS", "Bm3dParams", "StepParams", "basic_estimate", "bm3d_1", "bm3d_2", "bm3d_3", "bm3d_m",
    "bm3d_single", "run_method",
    "bior15_2d", "dct_2d", "inverse_transform_group", "transform_group", "wht_1d",
]
