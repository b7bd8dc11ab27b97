"""Differentiable first-order fuzzy logic over numpy.

Formulas of a typed first-order language are grounded onto real-valued
tensors: constants and variables become feature vectors (or stacks of
them), functions and predicates become trainable maps, connectives and
quantifiers become fuzzy operators. Every formula evaluates to a truth
tensor with one axis per free variable, and the whole pipeline is
differentiable, so "make this theory true" is a gradient descent problem.

The public surface:

- :mod:`reallogic.tensor` -- reverse-mode autodiff over numpy arrays.
- :mod:`reallogic.nn` -- parameter store, dense networks, Adam.
- :mod:`reallogic.fuzzy` -- fuzzy connective/aggregator families and the
  numerically stable product configuration.
- :mod:`reallogic.logic` -- the typed language, groundings, and the
  formula evaluator (including diagonal and guarded quantification).
- :mod:`reallogic.parser` -- a small text format for theories.
- :mod:`reallogic.training` -- satisfiability, learning, querying, and
  refutation-based entailment checking.
- :mod:`reallogic.demos` -- end-to-end tasks runnable from the ``rl`` CLI.
"""

from reallogic.tensor import Tensor, DomainError

__all__ = ["Tensor", "DomainError"]

__version__ = "0.1.0"
