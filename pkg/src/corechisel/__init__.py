"""Core Chisel: parser, interpreter, communication analysis and Chisel emitter."""

from .analysis import analyze, check_soundness
from .ast import Program, pretty_print
from .environment import Env, RegKey, overlay
from .interpreter import init_env, run, step
from .parser import parse, parse_program, validate_program

__all__ = [
    "Env", "Program", "RegKey", "analyze", "check_soundness", "init_env", "overlay",
    "parse", "parse_program", "pretty_print", "run", "step", "validate_program",
]
