"""Chain-of-thought data synthesis from executed visual programs.

The pipeline samples candidate programs for a visual question, runs them
against vision tools while recording every tool call, keeps the best program
whose answer matches the label, rewrites its trace into a rationale and emits
paired label/rationale training records.

Subpackages and modules:

- ``scene``: synthetic scene graphs, structured queries and the exact oracle
- ``vpl``: the visual program language (lexer, parser, checker, printer)
- ``interpreter``: trace-recording evaluator
- ``tools``: tool registry with oracle and HTTP backends
- ``progen``, ``filter``, ``cot``, ``dataset``: the four synthesis stages
- ``harness``: corpus driver and success-rate reports
"""

__version__ = "0.1.0"
