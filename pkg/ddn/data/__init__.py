from ddn.data.dataset import Dataset, read_dataset, write_dataset  # noqa: F401
from ddn.data.oracle import oracle_density  # noqa: F401
from ddn.data.rng import make_rng, split_seed, trial_rng, trial_seed  # noqa: F401
from ddn.data.tabular import TabularDataset, dataset_registry, load_tabular  # noqa: F401
from ddn.data.toy import EVAL_CONDITIONS, ToyTaskName, generate_toy_dataset, sample_toy  # noqa: F401
