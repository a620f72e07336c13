"""Independent reference implementations used only by the test suite.

Each oracle solves the same physical problem as a pipeline module but
by a structurally different method (explicit boundary-value solves,
brute-force Cartesian sums, dense augmented linear systems, analytic
closed forms).  They are written once, frozen, and never refactored to
share code with the package under test.
"""
