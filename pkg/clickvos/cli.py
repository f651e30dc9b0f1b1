import argparse
import logging
import sys
from typing import Any, Dict, Optional, Sequence

from . import COMMAND_CLASS_MAPPINGS, COMMAND_DISPLAY_NAME_MAPPINGS, __version__
from .errors import ClickVOSError
from .global_utils import load_localized_help_text


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

_SCALARS = {"STRING": str, "INT": int, "FLOAT": float}


log = logging.getLogger(__name__)


def _bounded(convert, name: str, low=None, high=None):
    """argparse type that also enforces the declared min/max."""

    def parse(text: str):
        value = convert(text)
        if low is not None and value < low:
            raise argparse.ArgumentTypeError(f"{name} must be >= {low}, got {value}")
        if high is not None and value > high:
            raise argparse.ArgumentTypeError(f"{name} must be <= {high}, got {value}")
        return value

    parse.__name__ = convert.__name__
    return parse


def _add_argument(parser: argparse.ArgumentParser, name: str, spec, required: bool) -> None:
    kind, options = spec[0], (spec[1] if len(spec) > 1 else {})
    flag = "--" + name.replace("_", "-")
    kwargs: Dict[str, Any] = {"dest": name, "help": options.get("tooltip")}
    has_default = "default" in options

    if kind == "BOOLEAN":
        parser.add_argument(flag, action="store_true", default=bool(options.get("default", False)), **kwargs)
        return
    if isinstance(kind, (list, tuple)):
        kwargs["choices"] = list(kind)
        kwargs["type"] = str
    else:
        kwargs["type"] = _SCALARS.get(kind, str)
        if "min" in options or "max" in options:
            kwargs["type"] = _bounded(kwargs["type"], flag, options.get("min"), options.get("max"))
    if has_default:
        kwargs["default"] = options["default"]
    kwargs["required"] = required and not has_default
    parser.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clickvos",
        description="Click-based video object segmentation with attention before segmentation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=LOG_LEVELS, type=str.upper)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    for command, klass in COMMAND_CLASS_MAPPINGS.items():
        help_text = load_localized_help_text(command, default=getattr(klass, "HELP_TEXT", ""))
        child = sub.add_parser(
            command,
            help=f"{COMMAND_DISPLAY_NAME_MAPPINGS.get(command, command)} [{getattr(klass, 'CATEGORY', 'clickvos')}]",
            description=help_text,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        inputs = klass.INPUT_TYPES()
        for section, required in (("required", True), ("optional", False)):
            for name, spec in inputs.get(section, {}).items():
                _add_argument(child, name, spec, required)
        child.set_defaults(_command_class=klass)
    return parser


def run_command(klass, arguments: Dict[str, Any]):
    instance = klass()
    return getattr(instance, klass.FUNCTION)(**arguments)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return 0 if e.code in (0, None) else 1

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    klass = args._command_class
    arguments = {k: v for k, v in vars(args).items() if k not in ("command", "log_level", "_command_class")}

    try:
        result = run_command(klass, arguments)
    except ClickVOSError as e:
        log.error(str(e))
        return e.exit_code

    outputs = list(zip(getattr(klass, "RETURN_NAMES", ()), getattr(klass, "RETURN_TYPES", ())))
    if isinstance(result, tuple):
        for (name, kind), value in zip(outputs, result):
            if name == "summary" and kind == "STRING":
                print(value)
    return 0


if __name__ == "__main__":
    sys.exit(main())
