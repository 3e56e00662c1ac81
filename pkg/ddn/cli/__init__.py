from ddn.cli.main import main  # noqa: F401
