from ddn.objective.partition import BinPartition, cell_volume, partitions_for  # noqa: F401
from ddn.objective.losses import (  # noqa: F401
    LossBreakdown,
    kl_divergence,
    nll_loss,
    target_bins,
    total_loss,
)
