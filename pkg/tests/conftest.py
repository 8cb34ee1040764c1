import math

from cpdelab.lattice import unoriented
from cpdelab.randomness import ModelParams


class ListStream:
    """Mark stream backed by an explicit sorted list (fixture double)."""

    def __init__(self, marks):
        self.marks = list(marks)

    def first_after(self, t):
        for m in self.marks:
            if m > t:
                return m
        return math.inf

    def marks_until(self, horizon):
        import numpy as np
        return np.asarray([m for m in self.marks if m <= horizon])


class StubFamilies:
    """Hand-filled variable families for forcing indicator branches.

    Values are looked up by (family, key); missing keys raise so a test
    that forgot to pin a consulted variable fails loudly.
    """

    def __init__(self, params=ModelParams(2, 0.5, 1.0, 1.0)):
        self.params = params
        self.tie_count = 0
        self._v = {}
        self._streams = {}

    # -- fillers -----------------------------------------------------
    def set_edge_state(self, e, value):
        self._v[("omega", unoriented(*e))] = value

    def set_switch_on(self, e, value):
        self._v[("on", unoriented(*e))] = value

    def set_switch_off(self, e, value):
        self._v[("off", unoriented(*e))] = value

    def set_recovery(self, x, value):
        self._v[("rec", x)] = value

    def set_recovery_retry(self, x, value):
        self._v[("rec2", x)] = value

    def set_infection(self, e, value):
        self._v[("inf", e)] = value

    def set_recovery_marks(self, x, marks):
        self._streams[("recm", x)] = ListStream(marks)

    def set_infection_marks(self, e, marks):
        self._streams[("infm", unoriented(*e))] = ListStream(marks)

    # -- VariableFamilies surface -------------------------------------
    def edge_state(self, e):
        return self._v[("omega", unoriented(*e))]

    def switch_on_delay(self, e):
        return self._v[("on", unoriented(*e))]

    def switch_off_delay(self, e):
        return self._v[("off", unoriented(*e))]

    def recovery_delay(self, x):
        return self._v[("rec", x)]

    def recovery_delay_retry(self, x):
        return self._v[("rec2", x)]

    def infection_delay(self, e):
        return self._v[("inf", e)]

    def recovery_marks(self, x):
        return self._streams[("recm", x)]

    def infection_marks(self, e):
        return self._streams[("infm", unoriented(*e))]

    def less(self, a, tag_a, b, tag_b):
        if a < b:
            return True
        if b < a:
            return False
        if a == math.inf:
            return False
        self.tie_count += 1
        return tag_a < tag_b
