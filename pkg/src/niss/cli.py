"""``niss`` command line: solve, simulate and regenerate figure data as CSV.

Exit codes: 0 success, 2 malformed input (argument or instance file),
3 infeasible target, unsupported instance or enumeration cap.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .distributions import JointPmf, TargetPmf, binary_joint, binary_target, dsbs, tv_distance
from .duallp import DualInstance, InfeasibleLpError, SingularKernelError, UnboundedLpError, dual_biased_maxcorr
from .fourier import fourier_transform, multi_indices
from .fpath import FPathConfig, export_trace_csv, fpath_solve
from .instance import InstanceParseError, read_instance
from .lexico import tv_decay_experiment
from .maxcorr import PrimalInstance, direction_of_target
from .oracle import CapExceededError, brute_force_biased_maxcorr, brute_force_extremes
from .protocol import (
    InfeasibleTargetError,
    coin_protocol_fb,
    coin_protocol_ff,
    coin_protocol_uniform_output,
    monte_carlo_eval,
    tv_band,
)
from .report import write_csv

log = logging.getLogger("niss")

EXIT_PARSE = 2
EXIT_INFEASIBLE = 3

FIG2_LEVELS = (1, 2, 3, 4, 8)
FIG2_RHO = 0.4
FIG2_MAX_D = 8
FIG5_JOINT = (0.6, 0.7, 0.4)
FIG5_TARGET = (0.25, 0.125)
FIG5_D = 3
LEXDECAY = (1.0 / 3.0, 1.0 / 3.0, 0.4, 14)


class Infeasible(Exception):
    """Reported with exit code 3."""


def _config(opts: dict) -> FPathConfig:
    return FPathConfig(**{k: v for k, v in opts.items() if k != "d"})


def _block_length(args, opts: dict) -> int:
    d = args.d if args.d is not None else opts.get("d", 1)
    if d < 1:
        raise Infeasible("block length must be at least 1")
    return int(d)


def _output_biases(target) -> tuple[float, float]:
    if target.pmf is not None:
        tq = TargetPmf(target.pmf)
        if tq.shape != (2, 2):
            raise Infeasible("solve handles binary outputs only")
        return float(tq.qu[1]), float(tq.qv[1])
    if target.rho is not None and target.qu1 is None and target.qv1 is None:
        return 0.5, 0.5
    if target.qu1 is None or target.qv1 is None:
        raise Infeasible("target needs qu1 and qv1 (or a pmf)")
    return target.qu1, target.qv1


def _coefficient_rows(side: str, vec, d: int, q: int):
    idx = multi_indices(d, q)
    for s, c in enumerate(vec.coeffs):
        yield side, s, "".join(map(str, idx[s])), c


# ---------------------------------------------------------------- solve


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    joint = JointPmf(inst.joint_array())
    opts = inst.solver_options()
    d = _block_length(args, opts)
    qu1, qv1 = _output_biases(inst.target)
    out = Path(args.out)
    summary = [("d", d), ("qu1", qu1), ("qv1", qv1)]

    if args.dual:
        try:
            dual = DualInstance(joint, d, qu1, qv1)
            res = dual_biased_maxcorr(dual)
        except (ValueError, SingularKernelError, InfeasibleLpError, UnboundedLpError) as exc:
            raise Infeasible(str(exc)) from exc
        summary = [("method", "dual")] + summary
        summary += [("rho_b", res.value), ("lps_solved", res.lps_solved), ("box_violation", res.box_violation)]
        write_csv(out / "values.csv", ["side", "index", "value"],
                  [("f", i, v) for i, v in enumerate(res.f_values)] + [("g", i, v) for i, v in enumerate(res.g_values)])
    elif args.oracle:
        n = joint.qx**d
        if not joint.is_uniform():
            raise Infeasible("the exhaustive search pins acceptance counts, which fixes the means only for uniform inputs")
        n_u, n_v = qu1 * n, qv1 * n
        if abs(n_u - round(n_u)) > 1e-9 or abs(n_v - round(n_v)) > 1e-9:
            raise Infeasible(f"output probabilities are not multiples of 1/{n}")
        try:
            res = brute_force_biased_maxcorr(joint, d, int(round(n_u)), int(round(n_v)))
        except CapExceededError as exc:
            raise Infeasible(f"enumeration cap: {exc}") from exc
        summary = [("method", "oracle")] + summary + [("rho_b", res.value)]
        f, g = res.tables(n)
        write_csv(out / "values.csv", ["side", "index", "value"],
                  [("f", i, v) for i, v in enumerate(f)] + [("g", i, v) for i, v in enumerate(g)])
    else:
        prim = PrimalInstance(joint, d, qu1, qv1)
        state = fpath_solve(prim, _config(opts))
        cert = state.certificate
        summary = [("method", "fpath")] + summary + [
            ("rho_b", state.objective),
            ("f_norm", state.boundary_flags[0]),
            ("g_norm", state.boundary_flags[1]),
            ("on_boundary", state.on_boundary()),
            ("certified", cert is not None),
            ("lambda_star", cert.lam_star if cert else float("nan")),
            ("boundary_lambda", cert.boundary_lambda if cert else float("nan")),
        ]
        rows = list(_coefficient_rows("f", state.f, d, joint.qx)) + list(_coefficient_rows("g", state.g, d, joint.qy))
        write_csv(out / "coefficients.csv", ["side", "index", "multi_index", "coefficient"], rows)
        if args.trace:
            export_trace_csv(state, out / "trace.csv")
        for note in state.notes:
            log.warning(note)

    write_csv(out / "summary.csv", ["key", "value"], summary)
    for k, v in summary:
        print(f"{k}: {v}")
    return 0


# ---------------------------------------------------------------- simulate


def _target_pmf(target) -> TargetPmf:
    if target.pmf is not None:
        return TargetPmf(target.pmf)
    if target.rho is not None:
        return binary_target(0.5, 0.5, (1.0 + target.rho) / 4.0)
    if target.qu1 is not None and target.qv1 is not None and target.agreement is not None:
        p11 = (target.agreement - 1.0 + target.qu1 + target.qv1) / 2.0
        try:
            return binary_target(target.qu1, target.qv1, p11)
        except ValueError as exc:
            raise Infeasible(str(exc)) from exc
    raise Infeasible("target needs a pmf, a correlation rho, or qu1/qv1 with an agreement probability")


def build_protocol(joint: JointPmf, target, d: int, cfg: FPathConfig):
    """Pick the protocol family that matches the target description."""
    tq = _target_pmf(target)
    uniform_out = np.allclose(tq.qu, 0.5, atol=1e-12) and np.allclose(tq.qv, 0.5, atol=1e-12)
    if tq.shape == (2, 2) and target.rho is not None and uniform_out:
        return coin_protocol_uniform_output(joint, target.rho), tq
    if tq.shape == (2, 2):
        qu1, qv1 = float(tq.qu[1]), float(tq.qv[1])
        state = fpath_solve(PrimalInstance(joint, d, qu1, qv1), cfg)
        return coin_protocol_fb(joint, qu1, qv1, tq, state), tq
    try:
        alpha, _ = direction_of_target(tq)
    except ValueError:
        alpha = None
    try:
        extremes = brute_force_extremes(joint, d, tq.shape, marginals=(tq.qu, tq.qv))
    except CapExceededError as exc:
        raise Infeasible(f"enumeration cap: {exc}") from exc
    if alpha is None:
        if not extremes:
            raise InfeasibleTargetError("no sampler with the target marginals")
        return coin_protocol_ff(joint, tq, extremes[0]), tq
    match = [e for e in extremes if np.abs(e.alpha - alpha.alpha).max() <= 1e-6]
    if not match:
        raise InfeasibleTargetError(f"no sampler at block length {d} points in the target direction")
    return coin_protocol_ff(joint, tq, max(match, key=lambda e: e.t)), tq


def cmd_simulate(args) -> int:
    inst = read_instance(args.instance)
    tgt = read_instance(args.target)
    joint = JointPmf(inst.joint_array())
    opts = inst.solver_options()
    d = _block_length(args, opts)
    target = tgt.target if not tgt.target.is_empty() else inst.target
    protocol, tq = build_protocol(joint, target, d, _config(opts))
    if protocol.d != d:
        log.info("protocol uses block length %d", protocol.d)
    emp = monte_carlo_eval(protocol, joint, args.samples, args.seed, coins=args.coins)
    exact = tv_distance(protocol.exact_output(joint), tq)
    out = Path(args.out)
    write_csv(out / "empirical.csv", ["u", "v", "count", "phat", "target", "abs_diff"], emp.rows(tq))
    summary = [
        ("protocol", protocol.kind),
        ("gate", protocol.gate),
        ("d", protocol.d),
        ("samples", args.samples),
        ("seed", args.seed),
        ("coins", args.coins),
        ("tv", emp.tv_to(tq)),
        ("tv_band_3sigma", tv_band(tq, args.samples)),
        ("exact_tv", exact),
        ("within_3sigma", emp.within(tq)),
    ]
    write_csv(out / "summary.csv", ["key", "value"], summary)
    for k, v in summary:
        print(f"{k}: {v}")
    return 0


# ---------------------------------------------------------------- figures


def fig2_rows(max_d: int = FIG2_MAX_D, levels=FIG2_LEVELS, rho: float = FIG2_RHO, cfg: FPathConfig = FPathConfig()):
    """``{level: [(d, raw, lifted, certified), ...]}`` for outputs ``Q(1) = level / 16``.

    ``lifted`` is the best value over block lengths up to ``d``: a function
    of fewer samples can ignore the extra ones, so the optimum never drops.
    """
    joint = dsbs(rho)
    out = {}
    for k in levels:
        best, rows = -np.inf, []
        for d in range(1, max_d + 1):
            st = fpath_solve(PrimalInstance(joint, d, k / 16, k / 16), cfg)
            best = max(best, st.objective)
            rows.append((d, st.objective, best, st.certificate is not None))
        out[k] = rows
    return out


def fig5_state(d: int = FIG5_D, cfg: FPathConfig = FPathConfig()):
    joint = binary_joint(*FIG5_JOINT)
    prim = PrimalInstance(joint, d, *FIG5_TARGET)
    return prim, fpath_solve(prim, cfg)


def write_fig5(prim, state, out: Path) -> None:
    n = prim.joint.qx**prim.d
    header = ["lambda"] + [f"f_{s}" for s in range(n)] + [f"g_{s}" for s in range(n)]
    rows = []
    for snap in state.snapshots:
        f = fourier_transform(snap.vf, prim.basis_x).coeffs
        g = fourier_transform(snap.vg, prim.basis_y).coeffs
        rows.append([snap.lam, *f, *g])
    write_csv(out / "fig5_coefficients.csv", header, rows)


def write_fig6(state, out: Path) -> None:
    cfg = state.config
    tr = state.trace
    rows = []
    for lam, obj, nf, ng, flag in zip(tr["lambda"], tr["objective"], tr["f_norm"], tr["g_norm"], tr["resolve_flag"]):
        _, _, k = cfg.weights(float(lam))
        rows.append((lam, obj, obj - k, nf, ng, int(flag)))
    write_csv(out / "fig6_objective.csv", ["lambda", "objective", "shifted_objective", "f_norm", "g_norm", "resolve_flag"], rows)


def cmd_figures(args) -> int:
    out = Path(args.out)
    which = ("fig2", "fig5", "fig6", "lexdecay") if args.which == "all" else (args.which,)
    if "fig2" in which:
        for k, rows in fig2_rows(args.d or FIG2_MAX_D).items():
            path = write_csv(out / f"fig2_p{k:02d}_16.csv", ["d", "rho_b", "rho_b_lifted", "certified"], rows)
            print(path)
    if "fig5" in which or "fig6" in which:
        prim, state = fig5_state(args.d or FIG5_D)
        if "fig5" in which:
            write_fig5(prim, state, out)
            print(out / "fig5_coefficients.csv")
        if "fig6" in which:
            write_fig6(state, out)
            print(out / "fig6_objective.csv")
    if "lexdecay" in which:
        qu, qv, rho, top = LEXDECAY
        rows = [(r.d, r.tv, r.ratio) for r in tv_decay_experiment(qu, qv, rho, range(1, (args.d or top) + 1))]
        print(write_csv(out / "lexdecay.csv", ["d", "tv", "ratio"], rows))
    return 0


# ---------------------------------------------------------------- entry


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="niss", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="biased maximal correlation of an instance")
    s.add_argument("instance")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--dual", action="store_true", help="dual linear programs (uniform marginals)")
    mode.add_argument("--oracle", action="store_true", help="exhaustive search (small instances)")
    s.add_argument("--d", type=_positive)
    s.add_argument("--trace", action="store_true", help="write the lambda trace")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="Monte-Carlo run of the matching coin protocol")
    m.add_argument("instance")
    m.add_argument("target")
    m.add_argument("--samples", type=_positive, default=1_000_000)
    m.add_argument("--seed", type=_u64, default=0)
    m.add_argument("--d", type=_positive)
    m.add_argument("--coins", choices=("pseudo", "von_neumann"), default="pseudo")
    m.add_argument("--out", default=".")
    m.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figures", help="regenerate figure data")
    f.add_argument("which", choices=("fig2", "fig5", "fig6", "lexdecay", "all"))
    f.add_argument("--d", type=_positive, help="largest (fig2, lexdecay) or only (fig5/6) block length")
    f.add_argument("--out", default=".")
    f.set_defaults(func=cmd_figures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InstanceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (Infeasible, InfeasibleTargetError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
