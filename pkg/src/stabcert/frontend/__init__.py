"""Problem files, the run orchestration, the case-study corpus and the CLI."""

from .corpus import corpus_get, corpus_list, corpus_text
from .problem import ProblemError, ProblemFile, parse_expression, parse_formula, parse_problem, print_problem
from .runner import RunOptions, dumps, exit_code, run, run_text, summary, verify_report

__all__ = [
    "ProblemError", "ProblemFile", "RunOptions", "corpus_get", "corpus_list", "corpus_text", "dumps", "exit_code",
    "parse_expression", "parse_formula", "parse_problem", "print_problem", "run", "run_text", "summary",
    "verify_report",
]
