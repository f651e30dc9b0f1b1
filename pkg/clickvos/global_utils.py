import json
import logging
import re
from pathlib import Path
from typing import List, Optional


DEFAULT_CLASS_NAME_ATTRIBUTE_NAME = "DEFAULT_COMMAND_NAME"
DEFAULT_COMMAND_DEFS_FILE = "commandDefs.json"


log = logging.getLogger(__name__)


def _kebab(name: str) -> str:
    return re.sub(r"(?<=[a-z0-9])([A-Z])", r"-\1", name).lower()


def class_name_to_command_name(klass) -> str:

    if not klass:
        raise ValueError("[clickvos.class_name_to_command_name] Expected class or class name!")

    if isinstance(klass, str):
        return _kebab(klass)

    try:
        return getattr(klass, DEFAULT_CLASS_NAME_ATTRIBUTE_NAME, None) or _kebab(klass.__name__)
    except AttributeError:
        try:
            return _kebab(type(klass).__name__)
        except Exception as e:
            log.error(f"[clickvos.class_name_to_command_name] Could not resolve class name: {e}")
            return "unknown"


def load_localized_translation(command: str, translate_key: str, locale_str: str = None, default: str = None) -> str:
    if default is None:
        default = ""

    if not command or not isinstance(command, str) or not command.strip():
        log.error("[clickvos.load_localized_translation] The 'command' must be a string and must not be empty!")
        return default

    if locale_str is None:
        locale_str = "en"

    locale_dir = Path(__file__).parent / "locales" / locale_str
    help_path = locale_dir / DEFAULT_COMMAND_DEFS_FILE

    if not help_path.is_file():
        log.debug(f"[clickvos.load_localized_translation] '{help_path.absolute()}' is not a file!")
        return default

    try:
        with help_path.open("r", encoding="utf-8") as f:
            data = json.load(f)
        return data.get(command, {}).get(translate_key, default)
    except Exception as e:
        log.error(f"[clickvos.load_localized_translation] Error loading the {translate_key} locale: {e}")
        return default


def load_localized_help_text(command: str, default: str = None, locale_str: str = None) -> str:
    return load_localized_translation(command, "HELP_TEXT", locale_str=locale_str, default=default)


def parse_floats(s: Optional[str], expected: Optional[int] = None) -> Optional[List[float]]:
    if not s:
        return None
    s = s.strip()
    if not s:
        return None
    try:
        vals = [float(x) for x in s.replace(";", ",").replace("x", ",").split(",") if x.strip() != ""]
    except ValueError:
        return None
    if expected is not None and len(vals) != expected:
        return None
    return vals


def parse_ints(s: Optional[str], expected: Optional[int] = None) -> Optional[List[int]]:
    vals = parse_floats(s, expected)
    if vals is None or any(v != int(v) for v in vals):
        return None
    return [int(v) for v in vals]
