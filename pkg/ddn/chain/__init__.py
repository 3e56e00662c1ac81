from ddn.chain.paths import (  # noqa: F401
    K_CAP,
    MaskSet,
    PermutationPaths,
    build_mask_set,
    build_paths,
    prefix_mask,
)
from ddn.chain.grid import DensityGrid, export_grid, read_grid  # noqa: F401
from ddn.chain.composer import (  # noqa: F401
    conditional_head,
    conditional_heads,
    joint_grid,
    log_likelihoods,
    path_grids,
    sample_density,
    sample_log_likelihood,
)
