"""Line-oriented instance files.

::

    # comments run to end of line
    [input]
    joint = 0.3 0.2 ; 0.1 0.4      # rows separated by ';'

    [target]
    qu1 = 0.25                      # Q_U(1), binary outputs
    qv1 = 0.25
    pmf = 0.6 0.15 ; 0.15 0.1       # optional full output table
    rho = 0.2                       # optional E[UV] for uniform binary outputs
    agreement = 0.7                 # optional P(U = V)

    [solver]
    d = 3
    eps_lambda = 0.04

Every section is optional in the file, but each command checks for what
it needs.  Numbers are written back with ``repr`` so a written file
re-parses to an equal object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .distributions import SIMPLEX_TOL

SECTIONS = ("input", "target", "solver")
SOLVER_INT_KEYS = {"d", "fw_max_iters", "fw_stall_iters", "pg_max_iters", "max_escapes"}
SOLVER_FLOAT_KEYS = {"alpha0", "beta0", "alpha1", "beta1", "d_lambda", "eps_lambda", "fw_tol"}


class InstanceParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, source: str = "<instance>"):
        super().__init__(f"{source}:{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.source = source


@dataclass(frozen=True)
class Target:
    qu1: float | None = None
    qv1: float | None = None
    pmf: tuple[tuple[float, ...], ...] | None = None
    rho: float | None = None
    agreement: float | None = None

    def is_empty(self) -> bool:
        return all(getattr(self, f.name) is None for f in fields(self))


@dataclass(frozen=True)
class Instance:
    joint: tuple[tuple[float, ...], ...] | None = None
    target: Target = field(default_factory=Target)
    solver: tuple[tuple[str, float | int], ...] = ()

    def solver_options(self) -> dict:
        return dict(self.solver)

    def joint_array(self) -> np.ndarray:
        if self.joint is None:
            raise ValueError("instance has no [input] joint")
        return np.array(self.joint, dtype=float)


def _number(text: str, line: int, col: int, src: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise InstanceParseError(f"not a number: {text!r}", line, col, src) from None
    if not math.isfinite(x):
        raise InstanceParseError(f"non-finite number {text!r}", line, col, src)
    return x


def _matrix(value: str, line: int, col: int, src: str) -> tuple[tuple[float, ...], ...]:
    rows = []
    offset = 0
    for raw in value.split(";"):
        row = []
        pos = 0
        for tok in raw.split():
            pos = raw.index(tok, pos)
            row.append(_number(tok, line, col + offset + pos, src))
            pos += len(tok)
        if not row:
            raise InstanceParseError("empty matrix row", line, col + offset, src)
        rows.append(tuple(row))
        offset += len(raw) + 1
    if len({len(r) for r in rows}) != 1:
        raise InstanceParseError("matrix rows differ in length", line, col, src)
    return tuple(rows)


def _check_pmf(mat, line: int, col: int, src: str, what: str) -> None:
    arr = np.array(mat, dtype=float)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InstanceParseError(f"{what} must be at least 2 x 2", line, col, src)
    if arr.min() < 0:
        raise InstanceParseError(f"{what} has a negative entry", line, col, src)
    if abs(arr.sum() - 1.0) > SIMPLEX_TOL:
        raise InstanceParseError(f"{what} sums to {arr.sum():.12g}, not 1", line, col, src)


def _check_unit(x: float, key: str, line: int, col: int, src: str, lo: float = 0.0) -> None:
    if not lo <= x <= 1.0:
        raise InstanceParseError(f"{key} must lie in [{lo:g}, 1]", line, col, src)


def parse_instance(text: str, source: str = "<instance>") -> Instance:
    section = None
    seen: dict[tuple[str, str], int] = {}
    joint = None
    target: dict = {}
    solver: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        indent = len(line) - len(stripped)
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise InstanceParseError("unterminated section header", lineno, indent + 1, source)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise InstanceParseError(f"unknown section [{name}]", lineno, indent + 2, source)
            section = name
            continue
        if "=" not in stripped:
            raise InstanceParseError("expected 'key = value'", lineno, indent + 1, source)
        if section is None:
            raise InstanceParseError("entry outside any section", lineno, indent + 1, source)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        vcol = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        value = value_part.strip()
        kcol = indent + 1
        if not value:
            raise InstanceParseError(f"missing value for {key!r}", lineno, vcol, source)
        if (section, key) in seen:
            raise InstanceParseError(f"duplicate key {key!r} (first on line {seen[section, key]})", lineno, kcol, source)
        seen[section, key] = lineno

        if section == "input":
            if key != "joint":
                raise InstanceParseError(f"unknown key {key!r} in [input]", lineno, kcol, source)
            joint = _matrix(value, lineno, vcol, source)
            _check_pmf(joint, lineno, vcol, source, "joint pmf")
        elif section == "target":
            if key == "pmf":
                target["pmf"] = _matrix(value, lineno, vcol, source)
                _check_pmf(target["pmf"], lineno, vcol, source, "target pmf")
            elif key in ("qu1", "qv1", "agreement"):
                target[key] = _number(value, lineno, vcol, source)
                _check_unit(target[key], key, lineno, vcol, source)
            elif key == "rho":
                target[key] = _number(value, lineno, vcol, source)
                _check_unit(target[key], key, lineno, vcol, source, lo=-1.0)
            else:
                raise InstanceParseError(f"unknown key {key!r} in [target]", lineno, kcol, source)
        else:
            if key in SOLVER_INT_KEYS:
                x = _number(value, lineno, vcol, source)
                if x != int(x) or x < 1:
                    raise InstanceParseError(f"{key} must be a positive integer", lineno, vcol, source)
                solver.append((key, int(x)))
            elif key in SOLVER_FLOAT_KEYS:
                x = _number(value, lineno, vcol, source)
                if x <= 0:
                    raise InstanceParseError(f"{key} must be positive", lineno, vcol, source)
                solver.append((key, x))
            else:
                raise InstanceParseError(f"unknown key {key!r} in [solver]", lineno, kcol, source)
    return Instance(joint, Target(**target), tuple(solver))


def read_instance(path) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(), str(path))


def _fmt_matrix(mat) -> str:
    return " ; ".join(" ".join(repr(float(x)) for x in row) for row in mat)


def format_instance(inst: Instance) -> str:
    out = []
    if inst.joint is not None:
        out += ["[input]", f"joint = {_fmt_matrix(inst.joint)}", ""]
    if not inst.target.is_empty():
        out.append("[target]")
        for f in fields(Target):
            v = getattr(inst.target, f.name)
            if v is None:
                continue
            out.append(f"{f.name} = {_fmt_matrix(v) if f.name == 'pmf' else repr(float(v))}")
        out.append("")
    if inst.solver:
        out.append("[solver]")
        out += [f"{k} = {int(v) if k in SOLVER_INT_KEYS else float(v)!r}" for k, v in inst.solver]
        out.append("")
    return "\n".join(out)


def write_instance(inst: Instance, path) -> Path:
    path = Path(path)
    path.write_text(format_instance(inst))
    return path


def instance_from_arrays(joint, target: Target | None = None, **solver) -> Instance:
    j = tuple(tuple(float(x) for x in row) for row in np.asarray(joint, float))
    return Instance(j, target or Target(), tuple(solver.items()))
