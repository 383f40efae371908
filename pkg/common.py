#!/usr/bin/env python3
"""Shared console helpers and input collection for the command-line tools."""
import sys
from datetime import datetime
from typing import Dict, Iterable, List, Optional


class Colors:
    """ANSI color codes"""
    RESET = '\033[0m'
    BOLD = '\033[1m'
    DIM = '\033[2m'

    RED = '\033[31m'
    GREEN = '\033[32m'
    YELLOW = '\033[33m'
    BLUE = '\033[34m'
    MAGENTA = '\033[35m'
    CYAN = '\033[36m'

    BRIGHT_RED = '\033[91m'
    BRIGHT_GREEN = '\033[92m'


def use_color(enabled: bool = True):
    """Blank every color code (for redirected output)."""
    if enabled:
        return
    for name in [n for n in vars(Colors) if n.isupper()]:
        setattr(Colors, name, '')


def print_separator(width=60):
    """Print a separator line"""
    print(f"{Colors.DIM}{'─' * width}{Colors.RESET}")


def print_timestamp_log(emoji, message, color=None):
    """Print a timestamped log line"""
    color = Colors.CYAN if color is None else color
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    print(f"{Colors.DIM}[{timestamp}]{Colors.RESET} {emoji} {color}{message}{Colors.RESET}")


def print_task_header(task: str, settings: Dict[str, object]):
    """Print the task banner with its settings"""
    print()
    print(f"{Colors.BOLD}{Colors.CYAN}🔄 {task}{Colors.RESET}")
    print_separator()
    print(f"{Colors.BOLD}Settings:{Colors.RESET}")
    for key, value in settings.items():
        print(f"  {Colors.DIM}·{Colors.RESET} {key}: {Colors.YELLOW}{value}{Colors.RESET}")
    print_separator()


def format_elapsed(elapsed_time: float) -> str:
    minutes = int(elapsed_time // 60)
    seconds = int(elapsed_time % 60)
    return f"{minutes}m {seconds}s" if minutes > 0 else f"{elapsed_time:.1f}s"


def print_task_summary(ok: bool, summary: str, elapsed_time: float, output_path: Optional[str] = None):
    """Print the task summary"""
    print_separator()
    if ok:
        print(f"{Colors.BOLD}{Colors.GREEN}✅ {summary}{Colors.RESET}")
    else:
        print(f"{Colors.BOLD}{Colors.RED}❌ {summary}{Colors.RESET}")
    print(f" {Colors.DIM}Elapsed:{Colors.RESET} {Colors.CYAN}{format_elapsed(elapsed_time)}{Colors.RESET}")
    if output_path:
        print(f" {Colors.DIM}Output:{Colors.RESET} {Colors.GREEN}{output_path}{Colors.RESET}")
    print()


def print_error(message: str):
    print(f"{Colors.RED}✗ {message}{Colors.RESET}", file=sys.stderr)


def _parse_values(raw: Iterable[str]) -> List[float]:
    """Parse numbers, skipping blanks and '#' comments, keeping first occurrences in order"""
    seen = set()
    values: List[float] = []
    for item in raw or []:
        cleaned = str(item).split('#', 1)[0].strip()
        if not cleaned:
            continue
        try:
            value = float(cleaned)
        except ValueError as exc:
            raise ValueError(f"not a number: {cleaned!r}") from exc
        if value in seen:
            continue
        seen.add(value)
        values.append(value)
    return values


def read_values_from_file(path: str) -> List[float]:
    """Read one number per line from a file"""
    try:
        with open(path, "r", encoding="utf-8") as file:
            return _parse_values(file.readlines())
    except OSError as exc:
        raise RuntimeError(f"Failed to read values file: {exc}") from exc


def load_values(cli_values: Iterable[str], values_file: Optional[str] = None, *,
                entity_label: str = "value") -> List[float]:
    """Collect numbers from the command line and an optional file"""
    collected: List[float] = []
    if values_file:
        collected.extend(read_values_from_file(values_file))
    collected.extend(v for v in _parse_values(cli_values) if v not in collected)
    if not collected:
        raise ValueError(f"at least one {entity_label} is required (on the command line or with -f)")
    return collected
