# =============================================================================
# FILE: config_loader.py
# PURPOSE:
#   Reads the INI-style run configuration (sections of `key = value` lines)
#   into a plain {section: {key: value}} mapping, and overlays environment
#   overrides loaded through python-dotenv. Typed interpretation of the values
#   happens in training/config.py.
# =============================================================================

import configparser
import logging
import os
from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import load_dotenv

from utils.errors import ConfigurationError

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

RawConfig = Dict[str, Dict[str, str]]

# Environment variable -> (section, key) it overrides.
ENV_OVERRIDES = {
    "SEMIDRD_SEED": ("train", "seed"),
    "SEMIDRD_ENCODER_WEIGHTS": ("contrastive", "encoder_weights"),
}


# -----------------------------------------------------------------------------
# FUNCTION: load_config_text
# -----------------------------------------------------------------------------
def load_config_text(filename: Union[str, Path], default: Optional[str] = None) -> str:
    """
    Loads the raw text of a config file.

    Args:
        filename: Path to the file to read (relative or absolute).
        default: Text to fall back to when the file is missing. When None a
                 missing file is a configuration error.

    Returns:
        The file contents, or the fallback default string.
    """
    try:
        with open(filename, "r", encoding="utf-8") as f:
            return f.read()
    except FileNotFoundError:
        if default is None:
            raise ConfigurationError(f"config file not found: {filename}")
        logger.warning("Config file not found: %s. Using default.", filename)
    except OSError as e:
        raise ConfigurationError(f"failed to read config {filename}: {e}")
    return default


def parse_config_text(text: str, source: str = "<string>") -> RawConfig:
    """
    Parses INI text into a nested dict. Keys are lower-cased by configparser.

    Args:
        text: INI formatted text.
        source: Name used in error messages.

    Returns:
        {section: {key: raw string value}}
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(f"malformed config {source}: {e}".replace("\n", " "))
    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_config_file(filename: Union[str, Path]) -> RawConfig:
    """Reads and parses a config file; a missing file is an error."""
    return parse_config_text(load_config_text(filename), source=str(filename))


def apply_env_overrides(raw: RawConfig, environ: Optional[Dict[str, str]] = None) -> RawConfig:
    """
    Overlays the supported environment variables onto a raw config.

    Args:
        raw: Parsed config; not modified.
        environ: Mapping to read from (defaults to os.environ).

    Returns:
        A new raw config with overrides applied.
    """
    environ = os.environ if environ is None else environ
    merged = {section: dict(values) for section, values in raw.items()}
    for variable, (section, key) in ENV_OVERRIDES.items():
        value = environ.get(variable)
        if value:
            merged.setdefault(section, {})[key] = value
            logger.debug("%s overrides %s.%s", variable, section, key)
    return merged


def parse_override(assignment: str) -> tuple:
    """
    Splits a CLI override of the form `section.key=value`.

    Returns:
        (section, key, value)
    """
    name, sep, value = assignment.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise ConfigurationError(f"override must look like section.key=value, got {assignment!r}")
    return section.lower(), key.lower(), value.strip()


def render_config(raw: RawConfig) -> str:
    """Renders a raw config back to INI text with sections and keys sorted."""
    lines = []
    for section in sorted(raw):
        lines.append(f"[{section}]")
        for key in sorted(raw[section]):
            lines.append(f"{key} = {raw[section][key]}")
        lines.append("")
    return "\n".join(lines)
