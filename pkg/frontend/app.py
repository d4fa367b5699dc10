# frontend/app.py
"""
Command-line front end.

    python -m frontend.app <command> [options]

Commands: existence, kernel, norm, covariance, simulate, verify.
Exit codes: 0 ok, 1 usage or domain error, 2 non-convergence or a
covariance that will not factor (or a failed verify check), 3 H at or
below the existence threshold.
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field

# ---------------------------------------------------------
# LOCAL IMPORTS
# ---------------------------------------------------------
from backend.errors import (
    ConvergenceError,
    DomainError,
    FracHeatError,
    NotPositiveDefinite,
    SchemaViolation,
    ThresholdViolation,
    UsageError,
)
from backend.field_sim import (
    SpaceTimeGrid,
    assemble_covariance,
    factor_with_jitter,
    sample_field,
    samples_frame,
)
from backend.fractional_time import derive_hurst_params
from backend.heat_green import SpaceTimePoint
from backend.norms_existence import (
    covariance_solution,
    divergence_scan,
    existence_check,
    existence_table,
    norm_g_colored,
    norm_g_white,
)
from backend.quadrature import QuadratureSpec
from backend.rng import RngSpec
from backend.settings import DEFAULT_SEED, LOG_LEVEL, LOG_LEVELS, log_level_name
from backend.spatial_kernels import (
    KernelSpec,
    closed_form_I_f,
    kernel_eval,
    printed_constants,
    spectral_density,
)
from backend.verify import CHECKS, run_suite
from frontend.config_file import load_config_file, parse_config_text
from frontend.output import render_json, scalar_frame, write_output

logger = logging.getLogger(__name__)

COMMANDS = ("existence", "kernel", "norm", "covariance", "simulate", "verify")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_THRESHOLD = 3

DEFAULTS = {
    "kernel": "white",
    "alpha": 0.0,
    "dim": 1,
    "hurst": 0.75,
    "horizon": 1.0,
    "grid_times": 4,
    "grid_sites": 5,
    "extent": 1.0,
    "rule": "gauss_legendre",
    "panels": 8,
    "singularity_split": True,
    "rel_tol": 1e-8,
    "max_refinements": 6,
    "order": 12,
    "draws": None,
    "seed": DEFAULT_SEED,
    "threads": None,
    "mc_samples": 10 ** 6,
    "format": "csv",
    "output": None,
}

SIMULATE_DRAWS = 1000
VERIFY_DRAWS = 2 * 10 ** 4


# ---------------------------------------------------------
# RUN CONFIG
# ---------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    command: str
    kernel: KernelSpec
    hurst: float
    horizon: float
    grid_times: int
    grid_sites: int
    extent: float
    quadrature: QuadratureSpec
    seed: int
    threads: int = None
    draws: int = None
    mc_samples: int = 10 ** 6
    format: str = "csv"
    output: str = None
    log_level: str = "WARNING"
    params: dict = field(default_factory=dict, hash=False)

    def inputs(self):
        """Echo of every input, embedded in all outputs."""
        return {
            "command": self.command,
            "kernel": self.kernel.family.value,
            "alpha": self.kernel.alpha,
            "d": self.kernel.d,
            "hurst": self.hurst,
            "T": self.horizon,
            "grid_times": self.grid_times,
            "grid_sites": self.grid_sites,
            "extent": self.extent,
            "base_rule": self.quadrature.base_rule,
            "panels_per_axis": self.quadrature.panels_per_axis,
            "singularity_split": self.quadrature.singularity_split,
            "rel_tolerance": self.quadrature.rel_tolerance,
            "max_refinements": self.quadrature.max_refinements,
            "order": self.quadrature.order,
            "seed": self.seed,
            "draws": self.draws,
            "mc_samples": self.mc_samples,
            **{k: v for k, v in self.params.items() if v is not None},
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser():
    p = _Parser(prog="python -m frontend.app", allow_abbrev=False,
                description="Fractional-colored stochastic heat equation numerics.")
    p.add_argument("command", nargs="?", help=f"one of: {', '.join(COMMANDS)}")
    p.add_argument("--config", help="TOML config file; flags override its values")

    k = p.add_argument_group("model")
    k.add_argument("--kernel", help="white, riesz, bessel, heat or poisson")
    k.add_argument("--alpha", type=float)
    k.add_argument("--dim", type=int)
    k.add_argument("--hurst", type=float)
    k.add_argument("--T", dest="horizon", type=float)

    q = p.add_argument_group("quadrature")
    q.add_argument("--rule", choices=("gauss_legendre", "adaptive"))
    q.add_argument("--panels", type=int)
    q.add_argument("--no-split", dest="singularity_split", action="store_const", const=False)
    q.add_argument("--rel-tol", type=float)
    q.add_argument("--max-refinements", type=int)
    q.add_argument("--order", type=int)

    g = p.add_argument_group("grid and sampling")
    g.add_argument("--grid-times", type=int)
    g.add_argument("--grid-sites", type=int)
    g.add_argument("--extent", type=float)
    g.add_argument("--draws", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--mc-samples", type=int)

    c = p.add_argument_group("command options")
    c.add_argument("--table", action="store_true", help="existence: table over families and d")
    c.add_argument("--x", help="kernel: evaluation point, comma separated")
    c.add_argument("--xi", help="kernel: frequency for the spectral density")
    c.add_argument("--t", type=float, help="kernel/norm: time")
    c.add_argument("--r", type=float, help="kernel: first integration time of I_f")
    c.add_argument("--s", type=float, help="kernel: second integration time of I_f")
    c.add_argument("--method", choices=("reduced", "double"), help="norm: integration route")
    c.add_argument("--scan", help="norm: divergence scan over eps = 2^-k, k in K0:K1")
    c.add_argument("--t1", type=float)
    c.add_argument("--x1")
    c.add_argument("--t2", type=float)
    c.add_argument("--x2")
    c.add_argument("--only", help="verify: comma separated check names")

    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--output", help="output path (stdout when omitted)")
    o.add_argument("--log-level")
    return p


def _point(text, d, name):
    if text is None:
        return None
    try:
        x = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise UsageError(f"--{name} must be comma separated numbers, got {text!r}")
    if len(x) != d:
        raise UsageError(f"--{name} must have {d} coordinates, got {len(x)}")
    return x


def _scan_levels(text):
    try:
        k0, k1 = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--scan expects K0:K1, got {text!r}")
    if not 0 <= k0 < k1:
        raise UsageError("--scan needs 0 <= K0 < K1")
    return k0, k1


def parse_config(argv, file_text=None):
    """Validated RunConfig; defaults < config file < command-line flags."""
    args = build_parser().parse_args(list(argv))
    if args.command is None:
        raise UsageError(f"missing command; expected one of: {', '.join(COMMANDS)}")
    if args.command not in COMMANDS:
        raise UsageError(f"unknown command {args.command!r}; expected one of: {', '.join(COMMANDS)}")

    values = dict(DEFAULTS)
    if file_text is not None:
        values.update(parse_config_text(file_text))
    elif args.config:
        values.update(load_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    try:
        spec = KernelSpec.from_name(values["kernel"], values["alpha"], values["dim"])
        quad = QuadratureSpec(values["rule"], values["panels"], values["singularity_split"],
                              values["rel_tol"], values["max_refinements"], values["order"])
        if args.command != "verify":
            derive_hurst_params(values["hurst"])
        if not values["horizon"] > 0.0:
            raise DomainError("T must be positive")
        RngSpec(values["seed"])
    except (DomainError, ValueError) as e:
        raise UsageError(str(e))
    if values["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {values['format']!r}")
    if args.log_level is not None and log_level_name(args.log_level, None) is None:
        raise UsageError(f"log level must be one of {', '.join(LOG_LEVELS)}, got {args.log_level!r}")
    for key in ("draws", "threads", "mc_samples"):
        if values[key] is not None and values[key] < 1:
            raise UsageError(f"{key} must be >= 1")

    d = spec.d
    params = {
        "table": bool(args.table) or None,
        "x": _point(args.x, d, "x"),
        "xi": _point(args.xi, d, "xi"),
        "t": args.t,
        "r": args.r,
        "s": args.s,
        "method": args.method,
        "scan": _scan_levels(args.scan) if args.scan else None,
        "t1": args.t1,
        "x1": _point(args.x1, d, "x1"),
        "t2": args.t2,
        "x2": _point(args.x2, d, "x2"),
        "only": tuple(args.only.split(",")) if args.only else None,
    }
    if params["only"]:
        names = {name for name, _ in CHECKS}
        unknown = [n for n in params["only"] if n not in names]
        if unknown:
            raise UsageError(f"unknown checks {unknown}; expected from {sorted(names)}")
    if args.command == "covariance" and None in (params["t1"], params["x1"], params["t2"], params["x2"]):
        raise UsageError("covariance needs --t1 --x1 --t2 --x2")

    return RunConfig(
        command=args.command,
        kernel=spec,
        hurst=float(values["hurst"]),
        horizon=float(values["horizon"]),
        grid_times=int(values["grid_times"]),
        grid_sites=int(values["grid_sites"]),
        extent=float(values["extent"]),
        quadrature=quad,
        seed=int(values["seed"]),
        threads=values["threads"],
        draws=values["draws"],
        mc_samples=int(values["mc_samples"]),
        format=values["format"],
        output=values["output"],
        log_level=log_level_name(args.log_level, LOG_LEVEL),
        params=params,
    )


# ---------------------------------------------------------
# COMMANDS
# ---------------------------------------------------------
def _constants(spec, hp=None):
    low, up = printed_constants(spec)
    out = {"kernel": spec.to_dict(), "printed_lower": low, "printed_upper": up}
    if hp is not None:
        out["hurst"] = hp.to_dict()
    return out


def cmd_existence(config):
    if config.params.get("table"):
        frame = existence_table(config.hurst, dims=(1, 2, 3))
        return {"table": frame.to_dict(orient="records")}, frame
    res = existence_check(config.kernel, config.hurst)
    result = res.to_dict()
    return result, scalar_frame(result)


def cmd_kernel(config):
    spec, p = config.kernel, config.params
    result = {"constants": _constants(spec)}
    if not spec.is_white:
        x = p["x"] or (1.0,) + (0.0,) * (spec.d - 1)
        result["x"] = list(x)
        result["value"] = kernel_eval(spec, x)
    if p["xi"] is not None:
        sd = spectral_density(spec, p["xi"])
        result["spectral_density"] = sd.value
        result["spectral_density_consistent"] = sd.consistent
    if p["t"] is not None:
        r = p["r"] if p["r"] is not None else 0.0
        s = p["s"] if p["s"] is not None else 0.0
        result["I_f"] = closed_form_I_f(spec, p["t"], r, s).to_dict()
    return result, scalar_frame(result)


def cmd_norm(config):
    spec, p = config.kernel, config.params
    hp = derive_hurst_params(config.hurst)
    t = p["t"] if p["t"] is not None else config.horizon
    if p["scan"]:
        k0, k1 = p["scan"]
        scan = divergence_scan(spec, hp, t, [2.0 ** -k for k in range(k0, k1 + 1)], config.quadrature)
        frame = scan.to_frame()
        result = {"exponent": scan.exponent, "convergent": scan.convergent,
                  "scan": frame.to_dict(orient="records")}
        return result, frame
    if spec.is_white:
        res = norm_g_white(hp, spec.d, t, config.quadrature, strict=True)
        result = {"t": t, "norm_squared": res.to_dict()}
    else:
        br = norm_g_colored(spec, hp, t, config.quadrature, method=p["method"] or "reduced",
                            strict=True)
        result = {"t": t, "norm_squared": br.exact.to_dict(),
                  "lower": br.lower.to_dict(), "upper": br.upper.to_dict()}
    result["constants"] = _constants(spec, hp)
    return result, scalar_frame(result)


def cmd_covariance(config):
    spec, p = config.kernel, config.params
    hp = derive_hurst_params(config.hurst)
    p1, p2 = SpaceTimePoint(p["t1"], p["x1"]), SpaceTimePoint(p["t2"], p["x2"])
    res = covariance_solution(spec, hp, p1, p2, config.quadrature, strict=True)
    result = {"p1": p1.to_dict(), "p2": p2.to_dict(), "covariance": res.to_dict(),
              "constants": _constants(spec, hp)}
    return result, scalar_frame(result)


def cmd_simulate(config):
    spec = config.kernel
    hp = derive_hurst_params(config.hurst)
    grid = SpaceTimeGrid.regular(config.grid_times, config.grid_sites, config.horizon, spec.d,
                                 config.extent)
    cov = assemble_covariance(grid, spec, hp, config.quadrature, config.threads)
    if not cov.converged:
        raise ConvergenceError("covariance assembly did not reach its tolerance")
    factor = factor_with_jitter(cov)
    rng = RngSpec(config.seed)
    samples = sample_field(factor, config.draws or SIMULATE_DRAWS, rng, config.threads)
    frame = samples_frame(samples, grid.labels())
    result = {
        "grid": grid.to_dict(),
        "covariance": cov.to_dict(),
        "relative_jitter": factor.relative_jitter,
        "min_eigenvalue": cov.min_eigenvalue(),
        "rng": rng.to_dict(),
        "samples": frame.drop(columns="stream_id").to_numpy(),
        "constants": _constants(spec, hp),
    }
    return result, frame.reset_index()


def cmd_verify(config):
    report = run_suite(RngSpec(config.seed), n_mc=config.mc_samples,
                       n_draws=config.draws or VERIFY_DRAWS, threads=config.threads,
                       only=config.params.get("only"))
    result = {"all_passed": bool(report["passed"].all()),
              "checks": report.to_dict(orient="records")}
    frame = report.assign(detail=report["detail"].astype(str))
    return result, frame


HANDLERS = {
    "existence": cmd_existence,
    "kernel": cmd_kernel,
    "norm": cmd_norm,
    "covariance": cmd_covariance,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


# ---------------------------------------------------------
# RUN
# ---------------------------------------------------------
def _fail(config, error, code):
    """Nothing goes to the output path; the error document goes to stderr."""
    logger.error("%s", error)
    if config is not None and config.format == "json":
        payload = {"success": False, "error": str(error), "exit_code": code,
                   "inputs": config.inputs()}
        sys.stderr.write(render_json(payload))
    else:
        sys.stderr.write(f"error: {error}\n")
    return code


def run(config):
    """Execute one command and write its output; returns the exit code."""
    try:
        scan = config.command == "norm" and config.params.get("scan")
        if config.command in ("norm", "covariance", "simulate") and not scan:
            res = existence_check(config.kernel, config.hurst)
            if not res.admissible:
                raise ThresholdViolation(config.hurst, res.critical, res.condition)
        result, frame = HANDLERS[config.command](config)
    except ThresholdViolation as e:
        return _fail(config, e, EXIT_THRESHOLD)
    except (UsageError, DomainError) as e:
        return _fail(config, e, EXIT_USAGE)
    except (ConvergenceError, NotPositiveDefinite) as e:
        return _fail(config, e, EXIT_NUMERICAL)

    payload = {"success": True, "command": config.command, "inputs": config.inputs(),
               "result": result}
    try:
        write_output(payload, frame, config.format, config.output)
    except SchemaViolation as e:
        return _fail(config, e, EXIT_NUMERICAL)
    if config.command == "verify" and not result["all_passed"]:
        failed = [c["check"] for c in result["checks"] if not c["passed"]]
        logger.error("verify failed: %s", ", ".join(failed))
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except FracHeatError as e:
        logging.basicConfig(level=LOG_LEVEL, stream=sys.stderr)
        return _fail(None, e, EXIT_USAGE)
    logging.basicConfig(level=config.log_level,
                        stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
