from ddn.configs.base import ConfigBase  # noqa: F401
