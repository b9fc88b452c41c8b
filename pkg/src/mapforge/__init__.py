"""mapforge: a mapper DSL, machine-space algebra, cost simulator, and
online mapper-search harness for task-based runtimes."""

from .parser import parse
from .printer import print_program
from .validator import validate

__all__ = ["parse", "print_program", "validate"]
__version__ = "0.1.0"
