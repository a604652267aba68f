"""Opcode table shared by the tape compiler and both evaluator backends.

A tape is a straight-line SSA program: instruction k writes register k and
may read two earlier registers (ia, ib) and one constant (cs). The compiled
extension duplicates these numbers in C; test_backend checks the mapping.
"""

OP_CONST = 0   # out = cs[k]
OP_VAR = 1     # out = x[ia[k]]
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7     # general a^b, jets need a > 0
OP_POWC = 8    # a^c with constant exponent cs[k]
OP_SQRT = 9
OP_EXP = 10
OP_LOG = 11
OP_SIN = 12
OP_COS = 13
OP_ATAN = 14
OP_ABS = 15    # kink flagged within KINK_TOL in jet modes
OP_ATAN2 = 16  # atan2(a, b), a = y, b = x
OP_DOT = 17    # sum_k x_k^2, reads the input point directly
OP_NORM = 18   # sqrt(dot), kink flagged within KINK_TOL of the origin

# err codes, per batch element
ERR_OK = 0
ERR_NONFINITE = 1
ERR_KINK = 2

KINK_TOL = 1e-12
