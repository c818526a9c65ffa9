from __future__ import annotations

import dataclasses
import enum
import logging
from types import UnionType
from typing import (
    TYPE_CHECKING,
    Any,
    Mapping,
    Optional,
    Type,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

if TYPE_CHECKING:
    import configparser

    from rmperm.types import Dataclass

from rmperm.exceptions import ConversionError, ConversionIgnoreError

logger = logging.getLogger(__name__)

#: Spellings accepted for an unset Optional option.
NONE_STATES = frozenset({"none", "null", "off", ""})


def _is_optional_type(type_hint: Any) -> bool:
    origin = get_origin(type_hint)
    return origin in [Union, UnionType] and type(None) in get_args(type_hint)


def _field_has_default_value(field: dataclasses.Field) -> bool:
    return (
        field.default_factory != dataclasses.MISSING
        or field.default != dataclasses.MISSING
    )


def _can_ignore_conversion(field: dataclasses.Field) -> bool:
    return _is_optional_type(field.type) or _field_has_default_value(field)


class ConfigConverter:
    """
    Convert the sections of a `ConfigParser` into a nested dataclass, casting
    each option string to the type hint of its field.

    Supported hints are ``int``, ``float``, ``str``, ``bool``, enums (by
    value), ``Optional``/``Union``, nested dataclasses and, with
    ``allow_custom_types``, any type that can be built from one string.

    :param config: The `ConfigParser` object containing the configuration data.
    :type config: configparser.ConfigParser
    :param boolean_states: Optional mapping of strings to booleans, defaults to
        `ConfigParser.BOOLEAN_STATES`.
    :type boolean_states: Optional[Mapping[str, bool]]
    :param allow_custom_types: Build unknown types by calling them with the string.
    :type allow_custom_types: bool
    """

    def __init__(
        self,
        config: configparser.ConfigParser,
        boolean_states: Optional[Mapping[str, bool]] = None,
        allow_custom_types: bool = False,
    ) -> None:
        self.config = config
        self.allow_custom_types = allow_custom_types
        self.boolean_states = boolean_states or self.config.BOOLEAN_STATES

    def to_dataclass(self, dataclass: Type[Dataclass]) -> Dataclass:
        """
        Convert the configuration data to a dataclass instance.

        Sections and options absent from the configuration keep the field
        defaults.

        :param dataclass: Dataclass with one field per section.
        :type dataclass: Dataclass
        :return: The populated instance.
        :rtype: Dataclass
        :raises ConversionError: If a value cannot be cast to its field type.
        :raises ConversionIgnoreError: If a required field has no value.

        **Examples:**

        .. code-block:: python

            >>> config = configparser.ConfigParser()
            >>> config.read_string(\"\"\"
            ... [code]
            ... m = 5
            ... \"\"\")
            >>> ConfigConverter(config).to_dataclass(SimConfig).code.m
            5
        """
        return self._dict_to_dataclass(self._to_dict(), dataclass)

    def _to_dict(self) -> dict[str, dict[str, str]]:
        return {
            sect: {opt: self.config.get(sect, opt) for opt in self.config.options(sect)}
            for sect in self.config.sections()
        }

    def _dict_to_dataclass(
        self, input_dict: Mapping[str, Any], dataclass: Type[Dataclass]
    ) -> Dataclass:
        type_hints = get_type_hints(dataclass)
        known = {field.name for field in dataclasses.fields(dataclass)}
        unknown = set(input_dict) - known
        if unknown:
            raise ConversionError(
                f"Unknown options {sorted(unknown)} for {dataclass.__name__}"
            )

        _dict_with_types: dict[str, Any] = {}
        for field in dataclasses.fields(dataclass):
            field_name = field.name
            field_type = type_hints[field_name]
            if field_name in input_dict:
                logger.debug(f"Initiate type cast of {field_name=} to {field_type=}")
                value = input_dict[field_name]
                try:
                    _dict_with_types[field_name] = self._cast_value(value, field_type)
                except ConversionError:
                    raise
                except (ValueError, TypeError) as e:
                    raise ConversionError(f"Option {field_name}={value!r}: {e}") from e
            elif not _can_ignore_conversion(field):
                raise ConversionIgnoreError(
                    f"Config not found and not allowed to skip {field_name=}, "
                    "the field is not optional nor has a default"
                )
        try:
            return dataclass(**_dict_with_types)
        except ValueError as e:
            raise ConversionError(
                f"Invalid values for {dataclass.__name__}: {e}"
            ) from e

    def _cast_value(self, value: Any, type_hint: Any) -> Any:
        if dataclasses.is_dataclass(type_hint):
            _type_hint = type_hint if isinstance(type_hint, type) else type(type_hint)
            return self._dict_to_dataclass(value, _type_hint)
        if type_hint in [int, float, str]:
            return type_hint(str(value).strip())
        if type_hint is bool:
            return self._cast_bool(value)
        if isinstance(type_hint, type) and issubclass(type_hint, enum.Enum):
            return type_hint(str(value).strip().lower())
        if get_origin(type_hint) in (Optional, Union, UnionType):
            return self._cast_union(value, type_hint)
        if type_hint is type(None):
            if str(value).strip().lower() in NONE_STATES:
                return None
            raise ValueError(f"{value=} is not one of {sorted(NONE_STATES)}")
        if self.allow_custom_types:
            return type_hint(value)
        raise ValueError(f"Unsupported type: {type_hint}")

    def _cast_bool(self, value: Any) -> bool:
        if str(value).strip().lower() in self.boolean_states:
            return self.boolean_states[str(value).strip().lower()]
        raise ValueError(f"{value=} not in possible {self.boolean_states=}")

    def _cast_union(self, value: Any, type_hint: Any) -> Any:
        for typ in get_args(type_hint):
            try:
                return self._cast_value(value, typ)
            except Exception as e:
                logger.debug(f"Failed to cast {value=} into {typ=}, error: {e}")
                continue
        raise ConversionError(f"Not possible to cast {value} into type {type_hint}")
