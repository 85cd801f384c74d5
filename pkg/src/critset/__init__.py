"""Criterion sets for universality of quadratic forms over Z and real quadratic fields."""

__version__ = "0.1.0"

from .ring import AlgInt, FieldCtx, FieldError, make_field
from .elements import SquareClass, class_of, enumerate_classes, indec_sequence, square_divisor
from .forms import FormError, QForm, diag_form, find_representation, gram_form, non_represented_up_to
from .criterion import (
    ALL,
    SSpec,
    certify_critical,
    criterion_candidates,
    escalate_witness,
    exception_form,
    truants,
)
from .ztree import build_tree, reduce_form

__all__ = [
    "AlgInt", "FieldCtx", "FieldError", "make_field",
    "SquareClass", "class_of", "enumerate_classes", "indec_sequence", "square_divisor",
    "FormError", "QForm", "diag_form", "gram_form", "find_representation", "non_represented_up_to",
    "ALL", "SSpec", "certify_critical", "criterion_candidates", "escalate_witness", "exception_form", "truants",
    "build_tree", "reduce_form",
]
