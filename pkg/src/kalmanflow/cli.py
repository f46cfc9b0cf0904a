"""Command-line front end.

Exit codes: 0 success, 1 numerical or convergence failure, 2 bad input.
Reports are ``key: value`` lines with 17 significant digits.
"""
import argparse
import sys as _sys
import time

import numpy as np

from . import attainability, kalman, lie, simulate
from .errors import (
    ControlOutOfSet,
    DimensionError,
    KalmanFlowError,
    NotLocallyControllable,
    ParseError,
    ValidationError,
)
from .model import ExtendedState, format_control, load_system, parse_control

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (list, tuple, np.ndarray)):
        return ",".join(fmt(v) for v in x)
    return str(x)


def emit(out, key, value):
    print(f"{key}: {fmt(value)}", file=out)


def parse_vector(text, n, name):
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise InputError(f"{name}: expected {n} comma-separated numbers, got {text!r}")
    if len(values) != n or not np.all(np.isfinite(values)):
        raise InputError(f"{name}: expected {n} finite values, got {len(values)}")
    return np.array(values)


def _load(path):
    try:
        return load_system(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}")


def cmd_analyze(args, out):
    sys = _load(args.file)
    t0 = time.perf_counter()
    ka = kalman.analyze(sys, args.tol)
    t1 = time.perf_counter()
    span = lie.lie_span_at(lie.linear_family(sys), np.zeros(sys.n), args.tol)
    t2 = time.perf_counter()
    cert = attainability.jacobian_rank_certificate(sys, args.T, args.tol, args.eps)
    t3 = time.perf_counter()
    emit(out, "n", sys.n)
    emit(out, "m", sys.m)
    emit(out, "kalman_rank", ka.rank)
    emit(out, "kalman", ka.describe())
    emit(out, "lie_span_dim", span.rank)
    emit(out, "ell_max", cert.ell_max)
    emit(out, "n_ell", list(cert.n_ell))
    emit(out, "epsilon", cert.epsilon)
    emit(out, "det_script_A", cert.det_script_A)
    emit(out, "jacobian_rank", cert.jacobian_rank)
    emit(out, "jacobian_rank_raw", cert.jacobian_rank_raw)
    emit(out, "cross_check", cert.cross_check)
    emit(out, "verdict", cert.verdict)
    emit(out, "time_kalman_s", t1 - t0)
    emit(out, "time_lie_s", t2 - t1)
    emit(out, "time_certificate_s", t3 - t2)
    return EXIT_OK


def cmd_steer(args, out):
    sys = _load(args.file)
    target = parse_vector(args.target, sys.n, "--target")
    try:
        result = attainability.steer(sys, target, T=args.T, eps=args.eps, tol=args.tol)
    except NotLocallyControllable as exc:
        print(str(exc), file=out)
        return EXIT_NUMERIC
    except ControlOutOfSet as exc:
        print(f"error: steering control leaves the control set: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    text = format_control(result.control, header=[f"forward control, T = {fmt(args.T)}"])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="", file=out)
    emit(out, "certificate", result.certificate.verdict)
    emit(out, "epsilon", result.certificate.epsilon)
    emit(out, "q0", result.initial_state)
    emit(out, "newton_iterations", result.newton_iterations)
    emit(out, "segments", len(result.control))
    emit(out, "max_abs_control", float(np.max(np.abs(result.control.values))))
    emit(out, "residual", result.residual)
    return EXIT_OK if result.residual <= attainability.STEERING_TOL else EXIT_NUMERIC


def cmd_sample(args, out):
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    if args.segments < 1:
        raise InputError("--segments must be at least 1")
    if not args.T > 0:
        raise InputError("--T must be positive")
    if args.workers < 1:
        raise InputError("--workers must be at least 1")
    sys = _load(args.file)
    cloud = simulate.sample_reachable(sys, args.T, args.trials, args.segments, args.seed, args.workers)
    csv = cloud.to_csv()
    try:
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(csv)
        else:
            print(csv, end="", file=out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    report = simulate.subspace_probe(cloud, args.tol)
    emit(out if args.out else _sys.stderr, "L_dimension", report.dimension)
    emit(out if args.out else _sys.stderr, "ball_radius", report.ball_radius)
    return EXIT_OK


def cmd_simulate(args, out):
    sys = _load(args.file)
    try:
        with open(args.control) as fh:
            ctrl = parse_control(fh.read(), sys.m)
    except OSError as exc:
        raise InputError(f"cannot read {args.control}: {exc.strerror or exc}")
    ctrl.check(sys.control_set)
    q0 = np.zeros(sys.n) if args.q0 is None else parse_vector(args.q0, sys.n, "--q0")
    x0 = ExtendedState(0.0, q0, ctrl.values[0])
    graph = simulate.build_stepped_graph(ctrl, x0, sys, args.sign)
    header = ["t"] + [f"q_{i + 1}" for i in range(sys.n)] + [f"u_{j + 1}" for j in range(sys.m)] + ["arc_kind"]
    lines = [",".join(header)]
    for x, kind in graph.trajectory(sys):
        lines.append(",".join([fmt(x.t)] + [fmt(v) for v in x.q] + [fmt(v) for v in x.u] + [kind]))
    csv = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        print(csv, end="", file=out)
    report = out if args.out else _sys.stderr
    for k, arc in enumerate(graph.even_arcs):
        emit(report, f"jump_{k + 1}", [arc.start.t, *(arc.end.u - arc.start.u)])
    emit(report, "endpoint", graph.end.q)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="kalmanflow", description="Controllability analysis of linear systems.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file", help="system description file")
        sp.add_argument("--tol", type=float, default=1e-9, help="relative rank tolerance")

    a = sub.add_parser("analyze", help="rank tests and attainability certificate")
    common(a)
    a.add_argument("--T", type=float, default=1.0)
    a.add_argument("--eps", type=float, default=None)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("steer", help="stepped control reaching a nearby point")
    common(s)
    s.add_argument("--target", required=True, help="q_1,...,q_n")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--out", default=None, help="control file to write")
    s.set_defaults(func=cmd_steer)

    m = sub.add_parser("sample", help="random endpoints from the origin as CSV")
    common(m)
    m.add_argument("--T", type=float, default=1.0)
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--segments", type=int, default=4)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_sample)

    r = sub.add_parser("simulate", help="trajectory of a stepped control as CSV")
    common(r)
    r.add_argument("--control", required=True, help="control file")
    r.add_argument("--q0", default=None, help="initial state q_1,...,q_n (default 0)")
    r.add_argument("--sign", type=int, choices=(1, -1), default=-1,
                   help="dynamics q' = sign (A q + B u); -1 is the drift")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_simulate)
    return p


def main(argv=None, out=None):
    out = _sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (InputError, ParseError, ValidationError, DimensionError, ControlOutOfSet) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    except (KalmanFlowError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    _sys.exit(main())
