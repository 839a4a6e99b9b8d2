"""Command line interface: ``phaselat <subcommand>``.

Exit codes: 0 success, 1 bad input or configuration, 2 the sphere decoder
fell back to its best point after exhausting the node budget, 3 the
asymptotic covariance is undefined (boundary density too close to one).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import latticecore as lc
from .asymptotics import AsymptoticModel, ExceptionalCaseError, asymptotic_covariance, crb
from .circular import DegenerateSampleError, NoiseModel, wrap_phase
from .estimator import LsuProblem, SolverBudgetError, lsu_estimate
from .polylattice import alias_of, generator_inverse, is_alias, region, sample_signal
from .simharness import PRESETS, SimConfig, gen_noise, run_simulation, snr_db_to_sigma_c

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_EXCEPTIONAL = 0, 1, 2, 3

# Known aliased pairs: (3 + 8t)/10 vs (33 - 2t)/10
# and (15 - 15t + 4t^2)/10 vs (25 - t^2)/10.
ALIAS_FIXTURES = {
    "linear": ([0.3, 0.8], [3.3, -0.2]),
    "quadratic": ([1.5, -1.5, 0.4], [2.5, 0.0, -0.1]),
}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with other bad input; 2 is reserved
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _floats(text, what):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse {what}: {text!r}") from None


def read_samples(path):
    """Parse ``index,re,im`` rows.  Returns ``(origin, complex array)``.

    Blank lines and ``#`` comments are skipped; a non-numeric first row is
    treated as a header.  Indices must be consecutive.
    """
    idx, vals = [], []
    header_ok = True
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = [p.strip() for p in s.split(",")]
            try:
                if len(parts) != 3:
                    raise ValueError("expected 3 fields")
                i, re, im = int(parts[0]), float(parts[1]), float(parts[2])
            except ValueError as exc:
                if header_ok:
                    header_ok = False
                    continue
                raise InputError(f"line {lineno}: cannot parse {s!r} as index,re,im ({exc})") from None
            header_ok = False
            if idx and i != idx[-1] + 1:
                raise InputError(f"line {lineno}: index {i} does not follow {idx[-1]}")
            if not (math.isfinite(re) and math.isfinite(im)):
                raise InputError(f"line {lineno}: non-finite sample")
            idx.append(i)
            vals.append(complex(re, im))
            if vals[-1] == 0:
                raise InputError(f"line {lineno}: sample at index {i} is zero and has no phase")
    if not idx:
        raise InputError(f"{path}: no samples")
    return idx[0], np.array(vals)


def write_samples(fh, origin, y):
    fh.write("index,re,im\n")
    for i, v in enumerate(y):
        fh.write(f"{origin + i},{fmt(v.real)},{fmt(v.imag)}\n")


def read_matrix(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in s.replace(";", ",").split(",")])
            except ValueError:
                raise InputError(f"{path} line {lineno}: cannot parse {s!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: expected a non-empty rectangular matrix")
    return np.array(rows)


def read_config(path):
    """Flat ``key=value`` file; ``#`` starts a comment."""
    cfg = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise InputError(f"{path} line {lineno}: expected key=value")
            k, v = s.split("=", 1)
            cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def cmd_estimate(args):
    origin, y = read_samples(args.input)
    try:
        problem = LsuProblem(wrap_phase(y, origin), args.order)
    except DegenerateSampleError as exc:
        raise InputError(str(exc)) from None
    code = EXIT_OK
    try:
        est = lsu_estimate(problem, None if args.solver == "auto" else args.solver, kbest_k=args.kbest_k,
                           node_budget=args.node_budget, grid_resolution=args.grid_resolution)
    except SolverBudgetError as exc:
        est, code = exc.estimate, EXIT_BUDGET
        print(f"warning: {exc}; reporting best point found", file=sys.stderr)
    with _output(args.out) as fh:
        fh.write("k,mu_hat_k\n")
        for k, v in enumerate(est.mu_hat):
            fh.write(f"{k},{fmt(v)}\n")
        fh.write(f"# ss_value={fmt(est.ss_value)}\n")
        fh.write(f"# solver={est.solver}\n")
        fh.write(f"# exact={'true' if est.exact else 'false'}\n")
    return code


_SIM_KEYS = {
    "order": int, "trials": int, "seed": int, "solver": str, "kbest_k": int, "node_budget": int, "rho": float,
    "sample_sizes": str, "snr_db": str, "sigma_c": str,
}


def build_sim_config(args) -> SimConfig:
    base = PRESETS[args.preset] if args.preset else PRESETS["desk"]
    settings = {}
    if args.config:
        for k, v in read_config(args.config).items():
            if k not in _SIM_KEYS:
                raise InputError(f"unknown config key {k!r}")
            settings[k] = v
    for k in _SIM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
    try:
        kw = {k: _SIM_KEYS[k](v) for k, v in settings.items()}
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rho = kw.get("rho", base.rho)
    if "sigma_c" in kw and "snr_db" in kw:
        raise InputError("give sigma_c or snr_db, not both")
    if "sigma_c" in kw:
        sigma = tuple(_floats(kw["sigma_c"], "sigma_c"))
    elif "snr_db" in kw:
        sigma = tuple(snr_db_to_sigma_c(s, rho) for s in _floats(kw["snr_db"], "snr_db"))
    else:
        sigma = tuple(s * rho / base.rho for s in base.sigma_c)
    sizes = tuple(int(n) for n in _floats(kw["sample_sizes"], "sample_sizes")) if "sample_sizes" in kw \
        else base.sample_sizes
    try:
        return SimConfig(
            order=kw.get("order", base.order),
            sample_sizes=sizes,
            sigma_c=sigma,
            trials=kw.get("trials", base.trials),
            base_seed=kw.get("seed", base.base_seed),
            solver=kw.get("solver", base.solver),
            kbest_k=kw.get("kbest_k", base.kbest_k),
            node_budget=kw.get("node_budget", base.node_budget),
            rho=rho,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args):
    config = build_sim_config(args)
    table = run_simulation(config, workers=args.workers)
    with _output(args.out) as fh:
        fh.write(table.to_csv())
    for (N, s), n in table.failures.items():
        print(f"warning: N={N} sigma_c={s:g}: {n} trials exceeded the node budget", file=sys.stderr)
    return EXIT_OK


def cmd_asympt(args):
    if (args.snr is None) == (args.snr_db is None):
        raise InputError("give exactly one of --snr or --snr-db")
    snr = args.snr if args.snr is not None else 10.0 ** (args.snr_db / 10.0)
    if not snr > 0:
        raise InputError("snr must be positive")
    noise = NoiseModel.from_snr(snr, args.rho)
    model = AsymptoticModel.from_noise(args.order, noise)
    with _output(args.out) as fh:
        fh.write(f"# sigma2_intr={fmt(model.sigma2_intr)}\n")
        fh.write(f"# h={fmt(model.h)}\n")
        try:
            theory = np.diag(asymptotic_covariance(model, args.N))
        except ExceptionalCaseError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_EXCEPTIONAL
        bound = np.diag(crb(args.N, args.order, snr))
        fh.write("k,theory_var,crb,ratio\n")
        for k in range(args.order + 1):
            fh.write(f"{k},{fmt(theory[k])},{fmt(bound[k])},{fmt(theory[k] / bound[k])}\n")
    return EXIT_OK


def cmd_decode(args):
    basis = read_matrix(args.basis)
    target = np.array(_floats(open(args.target).read().replace("\n", ","), "target"))
    try:
        lat = lc.GenericLattice(basis)
        code = EXIT_OK
        if args.solver == "sphere":
            try:
                res = lc.nearest_point_exact(lat, target, node_budget=args.node_budget)
            except lc.BudgetExceeded as exc:
                res, code = exc.best, EXIT_BUDGET
        elif args.solver == "kbest":
            res = lc.nearest_point_kbest(lat, target, args.kbest_k)
        elif args.solver == "babai":
            res = lc.nearest_point_babai(lat, target)
        else:
            res = lc.brute_force_nearest(lat, target, args.coord_bound)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    with _output(args.out) as fh:
        fh.write("integer_coords=" + ",".join(str(int(v)) for v in res.integer_coords) + "\n")
        fh.write(f"distance_sq={fmt(res.distance_sq)}\n")
        fh.write(f"exact={'true' if res.exact else 'false'}\n")
    return code


def cmd_alias_demo(args):
    m = args.order
    if args.fixture:
        a, b = (np.array(v) for v in ALIAS_FIXTURES[args.fixture])
        m = a.size - 1
    else:
        rng = np.random.default_rng(args.seed)
        a = region(m).uniform(rng)
        c = rng.integers(-2, 3, size=m + 1)
        b = alias_of(a, c)
    coords = generator_inverse(m) @ (b - a)
    count = 2 * (m + 1)
    sa, sb = sample_signal(a, 1, count), sample_signal(b, 1, count)
    dev = float(np.max(np.abs(sa - sb)))
    with _output(args.out) as fh:
        fh.write("# mu_a=" + ",".join(fmt(v) for v in a) + "\n")
        fh.write("# mu_b=" + ",".join(fmt(v) for v in b) + "\n")
        fh.write("# lattice_coords=" + ",".join(fmt(v) for v in coords) + "\n")
        fh.write(f"# is_alias={'true' if is_alias(a, b) else 'false'}\n")
        fh.write(f"# max_deviation={fmt(dev)}\n")
        fh.write("n,re_a,im_a,re_b,im_b\n")
        for n in range(count):
            fh.write(f"{n + 1},{fmt(sa[n].real)},{fmt(sa[n].imag)},{fmt(sb[n].real)},{fmt(sb[n].imag)}\n")
    return EXIT_OK


def cmd_synth(args):
    mu = np.array(_floats(args.coeffs, "coefficients"))
    y = sample_signal(mu, args.start, args.N, args.rho)
    if args.sigma_c > 0:
        y = y + gen_noise(args.N, args.sigma_c, args.seed)
    with _output(args.out) as fh:
        write_samples(fh, args.start, y)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phaselat", description="Polynomial phase estimation by least squares unwrapping")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, choices, default):
        sp.add_argument("--solver", choices=choices, default=default)
        sp.add_argument("--kbest-k", type=int, default=4096)
        sp.add_argument("--node-budget", type=int, default=lc.DEFAULT_NODE_BUDGET)

    e = sub.add_parser("estimate", help="estimate coefficients from an index,re,im file")
    e.add_argument("input")
    e.add_argument("--order", "-m", type=int, required=True)
    solver_flags(e, ["auto", "sphere", "kbest", "babai", "grid"], "auto")
    e.add_argument("--grid-resolution", type=float, default=1e-3)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="Monte-Carlo MSE table as CSV")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--config", help="key=value file")
    s.add_argument("--order", type=int)
    s.add_argument("--sample-sizes", dest="sample_sizes")
    s.add_argument("--snr-db", dest="snr_db")
    s.add_argument("--sigma-c", dest="sigma_c")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--solver", choices=["auto", "sphere", "kbest", "babai"])
    s.add_argument("--kbest-k", type=int)
    s.add_argument("--node-budget", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--workers", type=int, help="defaults to $PHASELAT_THREADS or 1")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("asympt", help="asymptotic variance and CRB table")
    a.add_argument("--order", "-m", type=int, required=True)
    a.add_argument("--snr", type=float)
    a.add_argument("--snr-db", type=float)
    a.add_argument("--N", type=int, required=True)
    a.add_argument("--rho", type=float, default=1.0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_asympt)

    d = sub.add_parser("decode", help="closest lattice point")
    d.add_argument("--basis", required=True, help="matrix file, columns generate the lattice")
    d.add_argument("--target", required=True)
    solver_flags(d, ["sphere", "kbest", "babai", "brute"], "sphere")
    d.add_argument("--coord-bound", type=int, default=3)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decode)

    al = sub.add_parser("alias-demo", help="two aliased coefficient vectors and their samples")
    al.add_argument("--order", "-m", type=int, default=1)
    al.add_argument("--seed", type=int, default=0)
    al.add_argument("--fixture", choices=sorted(ALIAS_FIXTURES))
    al.add_argument("--out")
    al.set_defaults(func=cmd_alias_demo)

    g = sub.add_parser("synth", help="write noiseless or noisy samples as index,re,im")
    g.add_argument("--coeffs", required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--start", type=int, default=1)
    g.add_argument("--rho", type=float, default=1.0)
    g.add_argument("--sigma-c", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
