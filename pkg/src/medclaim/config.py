"""Deployment configuration: an INI file selected by --config or the
MEDCLAIM_CONFIG environment variable (the variable wins)."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from typing import Optional

ENV_VAR = "MEDCLAIM_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    port: int = 8000
    store_path: Optional[str] = None          # None keeps the journal in memory
    fixtures_path: Optional[str] = None       # None uses the bundled reference data
    monitor_interval_ms: int = 5000
    monitor_timeout_ms: int = 1000
    monitor_unbind_after: int = 3
    monitor_rebind_after: int = 2
    session_ttl_minutes: int = 60
    tpa_id: str = "TPA-EAST"
    ui_dist: Optional[str] = None             # None probes the repo checkout


def _int_option(parser: configparser.ConfigParser, section: str, option: str,
                fallback: int, minimum: int = 1) -> int:
    raw = parser.get(section, option, fallback=None)
    if raw is None or raw.strip() == "":
        return fallback
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{option} must be an integer, got '{raw}'") from None
    if value < minimum:
        raise ConfigError(f"{section}.{option} must be at least {minimum}")
    return value


def _str_option(parser: configparser.ConfigParser, section: str, option: str) -> Optional[str]:
    raw = parser.get(section, option, fallback=None)
    if raw is None or raw.strip() == "":
        return None
    return raw.strip()


def load_config(path: Optional[str] = None) -> AppConfig:
    """Read settings from the INI file at MEDCLAIM_CONFIG, else path,
    else return the defaults."""
    chosen = os.environ.get(ENV_VAR) or path
    if chosen is None:
        return AppConfig()
    parser = configparser.ConfigParser()
    try:
        with open(chosen, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {chosen}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"bad config file {chosen}: {exc}") from None

    defaults = AppConfig()
    return AppConfig(
        port=_int_option(parser, "server", "port", defaults.port),
        store_path=_str_option(parser, "store", "path"),
        fixtures_path=_str_option(parser, "fixtures", "path"),
        monitor_interval_ms=_int_option(
            parser, "monitor", "interval_ms", defaults.monitor_interval_ms),
        monitor_timeout_ms=_int_option(
            parser, "monitor", "timeout_ms", defaults.monitor_timeout_ms),
        monitor_unbind_after=_int_option(
            parser, "monitor", "unbind_after", defaults.monitor_unbind_after),
        monitor_rebind_after=_int_option(
            parser, "monitor", "rebind_after", defaults.monitor_rebind_after),
        session_ttl_minutes=_int_option(
            parser, "session", "ttl_minutes", defaults.session_ttl_minutes),
        tpa_id=_str_option(parser, "tpa", "id") or defaults.tpa_id,
        ui_dist=_str_option(parser, "ui", "dist"),
    )
