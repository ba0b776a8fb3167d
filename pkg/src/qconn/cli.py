"""Command line driver: ``qconn check | converge | spectrum | kernel-io``.

Exit codes: 0 pass, 1 check failure, 2 config error, 3 kernel file error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj):
    # json writes floats with repr(), the shortest round-trip form
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def cmd_check(cfg, out):
    from .checks import run_checks

    checks = run_checks(cfg)
    passed = all(c["passed"] for c in checks if c["gating"])
    report = {"command": "check", "passed": passed, "config": cfg.to_json(), "checks": checks}
    _emit(_dumps(report), out)
    for c in checks:
        if not c["passed"]:
            label = "FAILED" if c["gating"] else "NOTE (non-gating)"
            print(f"{label} {c['name']}: measured {c['measured']} threshold {c['threshold']}"
                  + (f" ({c['error']})" if "error" in c else ""), file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def _check_progression(hbars):
    from .config import ConfigError

    if len(hbars) < 3:
        raise ConfigError("converge needs at least 3 hbar values")
    ratios = [hbars[i] / hbars[i + 1] for i in range(len(hbars) - 1)]
    if any(abs(r - ratios[0]) > 1e-9 * ratios[0] for r in ratios) or ratios[0] <= 1:
        raise ConfigError("hbar values must form a decreasing geometric progression")


def cmd_converge(cfg, out):
    from .checks import convergence_rows

    _check_progression([float(h) for h in cfg["hbar"]])
    rows = convergence_rows(cfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["quantity", "hbar", "spacing", "residual", "measured_order"])
    for quantity, hbar, spacing, residual, order in rows:
        writer.writerow([quantity, repr(float(hbar)), repr(float(spacing)), repr(float(residual)),
                         order if isinstance(order, str) else repr(float(order))])
    _emit(buf.getvalue(), out)
    return EXIT_OK


def cmd_spectrum(cfg, out):
    from . import operators as ops
    from .classical import all_modes, lattice_symbol
    from .config import ConfigError
    from .dirac import dirac_matrix, tetrad_from_metric
    from .qconnection import ClassicalConnection, build_kernel

    lat = cfg.lattice()
    report = {"command": "spectrum", "shape": list(lat.shape)}
    if lat.d == 3 and cfg.n == 2:
        e = tetrad_from_metric(lat)
        ev = np.linalg.eigvals(dirac_matrix(e))
        ev = ev[np.lexsort((ev.imag, ev.real))]
        report["dirac_eigenvalues"] = [[float(v.real), float(v.imag)] for v in ev]
        if e.is_constant:
            modes = all_modes(lat).reshape(-1, 3)
            sym = np.concatenate([np.linalg.eigvalsh(lattice_symbol(e, 0, k)) for k in modes])
            report["symbol_eigenvalues"] = sorted(float(v) for v in sym)
    else:
        report["dirac_eigenvalues"] = None
    a0 = ClassicalConnection.random(lat, cfg.seed("connection"), cfg["bandlimits"]["connection"],
                                    cfg["amplitudes"]["connection"], n=cfg.n, kind=cfg.group_kind)
    try:
        k = build_kernel(a0, float(cfg["hbar"][0]), int(cfg["steps"]))
        report["kernel_singular_values"] = [float(v) for v in ops.weighted_singular_values(k)]
    except MemoryError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(_dumps(report), out)
    return EXIT_OK


def cmd_kernel_io(cfg, action, path, out):
    from . import operators as ops
    from .kernelfile import KernelFormatError, load_kernel, save_kernel
    from .qconnection import ClassicalConnection, build_kernel, unitarity_defect

    lat = cfg.lattice()
    if action == "save":
        a0 = ClassicalConnection.random(lat, cfg.seed("connection"), cfg["bandlimits"]["connection"],
                                        cfg["amplitudes"]["connection"], n=cfg.n, kind=cfg.group_kind)
        k = build_kernel(a0, float(cfg["hbar"][0]), int(cfg["steps"]))
        try:
            save_kernel(path, k)
        except OSError as exc:
            print(f"cannot write {path}: {exc}", file=sys.stderr)
            return EXIT_IO
        summary = {"command": "kernel-io", "action": "save", "path": path, "trace": ops.trace(k)}
    else:
        try:
            k = load_kernel(path, lat)
        except (OSError, KernelFormatError) as exc:
            print(f"cannot load {path}: {exc}", file=sys.stderr)
            return EXIT_IO
        summary = {"command": "kernel-io", "action": "load", "path": path, "trace": ops.trace(k),
                   "hbar": getattr(k, "hbar", None), "N": k.n, "shape": list(lat.shape),
                   "unitarity_defect": unitarity_defect(k)}
    _emit(_dumps(summary), out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qconn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--seed", type=int, help="override the base seed")

    common(sub.add_parser("check", help="run the invariant suites"))
    common(sub.add_parser("converge", help="write the convergence-order table as CSV"))
    common(sub.add_parser("spectrum", help="dump Dirac and kernel spectra as JSON"))
    kio = sub.add_parser("kernel-io", help="save or load a binary kernel file")
    kio.add_argument("action", choices=["save", "load"])
    kio.add_argument("path")
    common(kio)
    return p


def _thread_limit():
    value = os.environ.get("QCONN_THREADS")
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    from .config import ConfigError

    try:
        limit = int(value)
    except ValueError:
        raise ConfigError(f"QCONN_THREADS must be a positive integer, got {value!r}") from None
    if limit < 1:
        raise ConfigError(f"QCONN_THREADS must be a positive integer, got {value!r}")
    return threadpool_limits(limits=limit)


def main(argv=None):
    from .config import ConfigError, RunConfig

    args = build_parser().parse_args(argv)
    limiter = None
    try:
        limiter = _thread_limit()
        cfg = RunConfig.load(args.config, seed=args.seed)
        if args.command == "check":
            return cmd_check(cfg, args.out)
        if args.command == "converge":
            return cmd_converge(cfg, args.out)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.out)
        return cmd_kernel_io(cfg, args.action, args.path, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
