"""Plain-text triplet files for model matrices.

A symmetric matrix file starts with ``symmetric <n>`` followed by one
``i j v`` triplet per line (1-based, lower triangle incl. diagonal,
17 significant digits). A rectangular matrix uses the header
``general <rows> <cols>`` and lists all nonzero entries. Blank lines and
``#`` comments are ignored.

A model is stored as ``<stem>.mass``, ``<stem>.stiff`` and ``<stem>.dofs``;
the dof file lists ``index node tag boundary|inner|constrained``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .assembly import AssembledModel


class MatrixFileError(ValueError):
    """Malformed matrix or dof file."""


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def write_symmetric(path, A: np.ndarray, comment: str | None = None) -> None:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"symmetric {n}")
    rows, cols = np.tril_indices(n)
    for i, j in zip(rows, cols):
        v = A[i, j]
        if v != 0.0:
            lines.append(f"{i + 1} {j + 1} {_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_general(path, A: np.ndarray, comment: str | None = None) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"general {A.shape[0]} {A.shape[1]}")
    for i, j in zip(*np.nonzero(A)):
        lines.append(f"{i + 1} {j + 1} {_fmt(A[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _content_lines(text: str):
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield k, line


def read_matrix(path) -> np.ndarray:
    """Read a ``symmetric`` or ``general`` triplet file."""
    lines = _content_lines(Path(path).read_text())
    try:
        k, header = next(lines)
    except StopIteration:
        raise MatrixFileError(f"{path}: empty file") from None
    parts = header.split()
    try:
        if parts[0] == "symmetric" and len(parts) == 2:
            shape = (int(parts[1]), int(parts[1]))
            symmetric = True
        elif parts[0] == "general" and len(parts) == 3:
            shape = (int(parts[1]), int(parts[2]))
            symmetric = False
        else:
            raise ValueError
    except ValueError:
        raise MatrixFileError(f"{path}: malformed header at line {k}: {header!r}") from None
    if min(shape) < 0:
        raise MatrixFileError(f"{path}: negative size at line {k}")

    A = np.zeros(shape)
    seen: dict[tuple[int, int], float] = {}
    for k, line in lines:
        parts = line.split()
        if len(parts) != 3:
            raise MatrixFileError(f"{path}: expected 'i j v' at line {k}")
        try:
            i, j, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise MatrixFileError(f"{path}: unparseable triplet at line {k}") from None
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise MatrixFileError(f"{path}: index out of range at line {k}")
        key = (max(i, j), min(i, j)) if symmetric else (i, j)
        if key in seen and seen[key] != v:
            raise MatrixFileError(
                f"{path}: asymmetric duplicate entry at line {k}")
        seen[key] = v
        A[i, j] = v
        if symmetric:
            A[j, i] = v
    return A


def export_matrices(model: AssembledModel, stem) -> list[Path]:
    """Write ``stem.mass``, ``stem.stiff`` and ``stem.dofs``."""
    stem = Path(stem)
    paths = [stem.with_suffix(".mass"), stem.with_suffix(".stiff"),
             stem.with_suffix(".dofs")]
    write_symmetric(paths[0], model.mass_matrix)
    write_symmetric(paths[1], model.stiffness_matrix)
    b = set(model.boundary_set)
    lines = [f"# dofs {model.n_dof}"]
    for k, (node, tag) in enumerate(model.dof_labels):
        lines.append(f"{k + 1} {node} {tag} {'boundary' if k in b else 'inner'}")
    for node, tag in model.constrained:
        lines.append(f"0 {node} {tag} constrained")
    paths[2].write_text("\n".join(lines) + "\n")
    return paths


def import_matrices(stem) -> AssembledModel:
    """Inverse of :func:`export_matrices` (node coordinates are not stored)."""
    stem = Path(stem)
    M = read_matrix(stem.with_suffix(".mass"))
    K = read_matrix(stem.with_suffix(".stiff"))
    if M.shape != K.shape:
        raise MatrixFileError(f"{stem}: mass {M.shape} and stiffness {K.shape} differ")
    labels: list = []
    boundary = []
    constrained = []
    dof_path = stem.with_suffix(".dofs")
    for k, line in _content_lines(dof_path.read_text()):
        parts = line.split()
        if len(parts) != 4 or parts[3] not in ("boundary", "inner", "constrained"):
            raise MatrixFileError(f"{dof_path}: malformed dof entry at line {k}")
        try:
            idx, node = int(parts[0]), int(parts[1])
        except ValueError:
            raise MatrixFileError(f"{dof_path}: unparseable dof entry at line {k}") from None
        if parts[3] == "constrained":
            constrained.append((node, parts[2]))
            continue
        if idx != len(labels) + 1:
            raise MatrixFileError(f"{dof_path}: dof index out of order at line {k}")
        if parts[3] == "boundary":
            boundary.append(idx - 1)
        labels.append((node, parts[2]))
    if len(labels) != M.shape[0]:
        raise MatrixFileError(
            f"{dof_path}: {len(labels)} dofs listed, matrices have {M.shape[0]}")
    return AssembledModel(mass_matrix=M, stiffness_matrix=K,
                          dof_labels=tuple(labels), boundary_set=tuple(boundary),
                          constrained=tuple(constrained))
