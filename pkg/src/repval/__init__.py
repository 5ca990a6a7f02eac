"""Desk-scale many-agent RL workbench.

Attention-weighted neighborhood value factorization (RFQ / RFAC) and its
baselines (IL, MFQ, AC, MFAC) on a seeded grid-world battle simulator,
plus a numerical oracle for the underlying approximation guarantees and
an Elo tournament harness.
"""

__version__ = "0.1.0"
