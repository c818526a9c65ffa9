from __future__ import annotations

import configparser
import logging
import os
import platform
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Mapping, Optional

from rmperm.convert import ConfigConverter
from rmperm.exceptions import ConfigurationError, NoConfigFilesFoundError
from rmperm.simharness import SimConfig

if TYPE_CHECKING:
    from _typeshed import StrOrBytesPath

logger = logging.getLogger(__name__)

#: Prefix of environment variables overriding configuration options.
ENV_PREFIX = "RMPERM_"
APP_NAME = "rmperm"
CONFIG_FILE_NAME = "rmperm.ini"


def _log_and_return_if_exists(file_path: Path) -> Optional[Path]:
    if file_path.exists():
        logger.debug(f"Found config file: {file_path}")
        return file_path
    return None


def _unix_config_dirs() -> List[Path]:
    system = [Path(d) for d in os.getenv("XDG_CONFIG_DIRS", "/etc/xdg").split(":") if d]
    system.reverse()
    home = Path(os.getenv("XDG_CONFIG_HOME", Path.home() / ".config"))
    return [*system, home]


def _windows_config_dirs() -> List[Path]:
    return [
        Path(os.environ[var]) for var in ("PROGRAMDATA", "APPDATA") if os.getenv(var)
    ]


def collect_config_files(
    file_name: str = CONFIG_FILE_NAME,
    app_name: str = APP_NAME,
    allow_no_found_files: bool = True,
) -> List[Path]:
    """
    Collect configuration files from conventional locations.

    Files are returned in ascending priority: system wide, then the user's
    config directory, then ``file_name`` in the working directory.

    :param file_name: Name of the configuration file.
    :type file_name: str
    :param app_name: Subdirectory below the config directories.
    :type app_name: str
    :param allow_no_found_files: Return an empty list instead of raising.
    :type allow_no_found_files: bool
    :return: Paths of the existing files.
    :rtype: List[Path]
    :raises NoConfigFilesFoundError: If nothing is found and `allow_no_found_files`
        is False.
    """
    if platform.system() == "Windows":
        directories = _windows_config_dirs()
    else:
        directories = _unix_config_dirs()
    candidates = [directory / app_name / file_name for directory in directories]
    candidates.append(Path.cwd() / file_name)
    found = [
        path for path in map(_log_and_return_if_exists, candidates) if path is not None
    ]
    if not found and not allow_no_found_files:
        raise NoConfigFilesFoundError(
            f"No configuration files found for {file_name=}, {app_name=}"
        )
    return found


class SimConfigParser:
    def __init__(
        self,
        env_prefix: str = ENV_PREFIX,
        config_parser: configparser.ConfigParser | None = None,
        **overrides: str | None,
    ):
        """
        Layered simulation configuration: files, then environment variables,
        then direct overrides.

        Keys of environment variables and overrides name ``SECTION__OPTION``
        and are matched case-insensitively. Overrides whose value is None are
        ignored, so unset command-line flags can be passed through as is.

        :param env_prefix: Prefix of environment variables, defaults to ``RMPERM_``.
        :type env_prefix: str, optional
        :param config_parser: Parser to fill, defaults to a new one.
        :type config_parser: configparser.ConfigParser, optional
        :param overrides: Direct overrides such as ``decoder__list_size="16"``.
        :type overrides: dict[str, str | None]

        **Examples:**

        .. code-block:: python

            >>> parser = SimConfigParser(code__m="5", code__r="2")
            >>> parser.apply_overrides()
            >>> parser.to_sim_config().code.m
            5
        """
        self.env_prefix = env_prefix
        self.overrides = {
            key: value for key, value in overrides.items() if value is not None
        }
        if config_parser is None:
            config_parser = configparser.ConfigParser()
        self._config = config_parser

    def read(
        self,
        filenames: StrOrBytesPath | Iterable[StrOrBytesPath],
        encoding: str | None = None,
    ) -> list[str]:
        files_read = self._config.read(filenames=filenames, encoding=encoding)
        logger.debug(f"Read configuration from {files_read=}")
        return files_read

    def read_string(self, string: str, source: str = "<string>") -> None:
        self._config.read_string(string, source=source)

    @property
    def config(self) -> configparser.ConfigParser:
        return self._config

    def collect_env_vars_with_prefix(self) -> dict[str, str]:
        prefix = self.env_prefix.upper()
        return {
            key[len(prefix) :]: value
            for key, value in os.environ.items()
            if key.upper().startswith(prefix)
        }

    def parse_key(self, key: str) -> tuple[str, str]:
        """
        Split ``SECTION__OPTION`` into lowercase section and option.

        :raises ConfigurationError: If the key names no section.
        """
        parts = key.split("__", 1)
        if len(parts) != 2 or not all(parts):
            raise ConfigurationError(
                f"Override key {key!r} is not of the form SECTION__OPTION"
            )
        return parts[0].lower(), self._config.optionxform(parts[1])

    def override(self, key: str, value: str) -> None:
        section, option = self.parse_key(key)
        sections = self._config.sections()
        existing = next((s for s in sections if s.lower() == section), None)
        if existing is None:
            self._config.add_section(section)
            existing = section
        logger.debug(f"Override section={existing}, {option=}")
        self._config.set(existing, option, value)

    def apply_overrides(self) -> None:
        """Apply environment variables, then direct overrides, over the files read."""
        for key, value in self.collect_env_vars_with_prefix().items():
            self.override(key, value)
        for key, value in self.overrides.items():
            self.override(key, value)

    def to_sim_config(self) -> SimConfig:
        """
        Convert and validate.

        :return: The simulation configuration.
        :rtype: SimConfig
        :raises ConfigurationError: On unknown sections, unconvertible values or
            violated invariants.
        """
        sections = {s.lower() for s in self._config.sections()}
        unknown = sections - set(SimConfig.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(
                f"Unknown configuration sections {sorted(unknown)}"
            )
        converter = ConfigConverter(self._config, allow_custom_types=True)
        sim_config = converter.to_dataclass(SimConfig)
        sim_config.validate()
        return sim_config


def load_sim_config(
    config_files: Optional[Iterable[Path | str]] = None,
    env_prefix: str = ENV_PREFIX,
    overrides: Optional[Mapping[str, str | None]] = None,
) -> SimConfig:
    """
    Read, override, convert and validate a simulation configuration.

    :param config_files: Files to read in ascending priority; collected from the
        conventional locations when None.
    :type config_files: Optional[Iterable[Path | str]]
    :param env_prefix: Prefix of environment variables.
    :type env_prefix: str
    :param overrides: Direct overrides keyed ``section__option``.
    :type overrides: Optional[Mapping[str, str | None]]
    :return: The validated configuration.
    :rtype: SimConfig
    :raises ConfigurationError: If an explicitly given file cannot be read or the
        result is invalid.
    """
    parser = SimConfigParser(env_prefix=env_prefix, **dict(overrides or {}))
    if config_files is None:
        files = collect_config_files()
    else:
        files = [Path(f) for f in config_files]
        missing = [str(f) for f in files if not f.is_file()]
        if missing:
            raise ConfigurationError(f"Configuration files not found: {missing}")
    try:
        parser.read(files)
    except configparser.Error as e:
        raise ConfigurationError(f"Malformed configuration file: {e}") from e
    parser.apply_overrides()
    return parser.to_sim_config()
