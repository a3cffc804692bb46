"""Shared test utilities."""

import numpy as np


def random_stable(rng, n, margin=0.1):
    A = rng.standard_normal((n, n))
    shift = np.linalg.eigvals(A).real.max() + margin + rng.uniform(0.0, 1.0)
    return A - shift * np.eye(n)


def toy_model(rhs, n, outputs=None):
    """FullOrderModel around an autonomous right-hand side ``rhs(w)``."""
    from gla_workbench.statespace import FullOrderModel

    return FullOrderModel(
        n=n,
        residual=lambda w, u_c, u_d, p: np.asarray(rhs(w), dtype=float),
        state_partition={"structural": (0, n)},
        output_map=outputs or (lambda w: w[:1]),
        output_names=("tip_displacement",),
    )


def linsys(A, b, c, b_c=None, b_c1=None, b_c2=None):
    """Single-input LinearizedSystem with the gust on ``b``."""
    from gla_workbench.statespace import LinearizedSystem

    n = A.shape[0]

    def col(v):
        return np.zeros((n, 1)) if v is None else np.asarray(v, dtype=float).reshape(n, 1)

    c = np.asarray(c, dtype=float).reshape(-1, n)
    names = ("tip_displacement", "root_bending_moment")[: c.shape[0]]
    return LinearizedSystem(A=A, B_c=col(b if b_c is None else b_c), B_c1=col(b_c1), B_c2=col(b_c2),
                            B_g=col(b), C=c, output_names=names)


def full_rom(lin):
    from gla_workbench.nmor import project, select_modes
    from gla_workbench.statespace import eig_biorthonormal

    dec = eig_biorthonormal(lin.A)
    return project(lin, dec, select_modes(dec, lin, criterion="manual", indices=list(range(dec.m))))
