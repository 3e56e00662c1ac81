from dataclasses import fields
from typing import Any, Dict, Set

from dbt.adapters.relation_configs import RelationConfigValidationMixin
from dbt.exceptions import DbtRuntimeError
from mashumaro import DataClassDictMixin
from mashumaro.jsonschema import build_json_schema

from ddn.exceptions import DdnConfigError


class ConfigBase(DataClassDictMixin, RelationConfigValidationMixin):
    """Dict-serializable config; subclasses are frozen dataclasses validated on construction."""

    def __post_init__(self):
        self.run_validation_rules()

    @classmethod
    def field_names(cls) -> Set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_overrides(cls, base: Dict[str, Any], **overrides: Any):
        """
        Build a config from a mapping, with keyword overrides taking precedence.

        Overrides set to None are ignored so argparse defaults do not clobber file values.
        """
        merged = dict(base)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(merged) - cls.field_names()
        if unknown:
            raise DdnConfigError(
                f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}"
            )
        try:
            return cls.from_dict(merged)
        except DbtRuntimeError:
            raise
        except Exception as exc:
            raise DdnConfigError(f"invalid {cls.__name__}: {exc}") from exc

    @classmethod
    def json_schema(cls) -> Dict[str, Any]:
        return build_json_schema(cls).to_dict()
