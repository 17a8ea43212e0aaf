import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from os.path import abspath, dirname

# Add the project root to the Python path
project_root = dirname(dirname(dirname(abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy import isprime

from src.constants import (
    DEFAULT_BOUND,
    DEFAULT_LIMIT_TERMS,
    DEFAULT_SEARCH_BOUND,
    EXIT_BUDGET,
    EXIT_INPUT,
    EXIT_MISMATCH,
    EXIT_OK,
    MASS_TABLE,
)
from src.core.config import settings
from src.core.exceptions import BudgetExceededError, InputError, SiegelFlowError
from src.core.logger import logging
from src.core.types import HalfIntSym, rat_to_json
from src.utils import eisenstein_utils, global_utils
from src.utils.arith_utils import ord
from src.utils.cache_utils import DensityCache
from src.utils.density_utils import Budget, alpha

PRIME_SUBCOMMANDS = {"verify-main-theorem", "congruence", "limit-report", "construct-sp"}


# =========================================================
# JOB CONFIGURATION
# =========================================================
class JobConfig(BaseModel):
    """Parsed flags merged with the settings defaults."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    p: int = Field(default_factory=lambda: settings.DEFAULT_P)
    n: int = 3
    bound: int = Field(default=DEFAULT_BOUND, ge=1)
    budget: int = Field(default_factory=lambda: settings.DEFAULT_BUDGET, ge=1_000_000)
    threads: int = Field(default_factory=lambda: settings.THREAD_COUNT, ge=1)
    cache_path: str | None = None
    output_path: str | None = None
    csv_path: str | None = None
    reps_path: str | None = None

    @model_validator(mode="after")
    def check_prime(self):
        if self.subcommand in PRIME_SUBCOMMANDS and (self.p <= 2 or not isprime(self.p)):
            raise ValueError(f"--p must be an odd prime for {self.subcommand}, got {self.p}")
        return self

    def parameters(self) -> dict:
        return self.model_dump(exclude={"output_path", "csv_path"})


def parse_matrix(text: str) -> HalfIntSym:
    """A JSON array of rows of 2T."""
    try:
        rows = json.loads(text)
        return HalfIntSym(two_t=rows)
    except (ValueError, TypeError) as e:
        raise InputError(f"could not parse matrix {text!r}: {e}") from e


def _report(claim: str, config: JobConfig, keys_checked: int, failures: list, started: float, **extra) -> dict:
    report = {
        "claim": claim,
        "parameters": config.parameters(),
        "keys_checked": keys_checked,
        "failures": failures,
        "elapsed": round(time.monotonic() - started, 3),
        "status": "pass" if not failures else "fail",
    }
    report.update(extra)
    return report


def _write_csv(path: str, *tables):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for table in tables:
            for row in table.csv_rows():
                writer.writerow(row)
    logging.info(f"Wrote CSV to {path}")


def _reps_for(config: JobConfig):
    if config.reps_path:
        return global_utils.load_reps(config.reps_path)
    if config.p == 11:
        return global_utils.p11_reps()
    raise InputError(f"no built-in representatives for p={config.p}; pass --reps")


# =========================================================
# SUBCOMMANDS
# =========================================================
def cmd_eisenstein_coeff(config: JobConfig, k: int, t: HalfIntSym) -> dict:
    started = time.monotonic()
    value = eisenstein_utils.eis_coeff(config.n, k, t)
    return _report(
        f"a(E_{k}^({config.n}), T)", config, 1, [], started, k=k, two_t=t.to_json(), value=rat_to_json(value)
    )


def cmd_verify_main_theorem(config: JobConfig) -> dict:
    """Limit of E_{k_m} against the genus theta series, key by key."""
    started = time.monotonic()
    reps = _reps_for(config)
    n, p = config.n, config.p
    keys = global_utils.enumerate_keys(n, config.bound, positive_only=True)
    logging.info(f"===== MAIN IDENTITY: p={p}, n={n}, {len(keys)} keys =====")
    failures, rows = [], []
    extra = {}
    if n >= 5:
        extra["vanishing"] = eisenstein_utils.vanishing_report(n, p, DEFAULT_LIMIT_TERMS + 1, reps=reps)
    for t in keys:
        left = eisenstein_utils.limit_eis2_coeff(n, p, t) if n in (3, 4) else Fraction(0)
        right = global_utils.genus_theta_coeff(reps, t)
        rows.append({"two_t": t.to_json(), "limit": rat_to_json(left), "genus": rat_to_json(right)})
        if left != right:
            logging.warning(f"Mismatch at 2T={t.to_json()}: {left} vs {right}")
            failures.append({"two_t": t.to_json(), "limit": str(left), "genus": str(right)})
    if config.csv_path:
        _write_csv(config.csv_path, eisenstein_utils.genus_table(reps, n, config.bound, config.threads))
    return _report("limit of E_{k_m} equals genus theta", config, len(keys), failures, started, rows=rows, **extra)


def cmd_congruence(config: JobConfig, which: str) -> dict:
    started = time.monotonic()
    p, n, bound = config.p, config.n, config.bound
    checks = []
    tables = []
    if which == "serre":
        if p <= n or n not in (3, 4):
            raise InputError(f"the Serre-type congruence needs n in (3, 4) and p > n, got n={n}, p={p}")
        limit = eisenstein_utils.limit_table(n, p, bound, config.threads)
        eis = eisenstein_utils.eis_table(n, p + 1, bound, config.threads)
        checks.append(("limit == E_{p+1} mod p", eisenstein_utils.congruence_check(limit, eis, p, 1)))
        tables = [limit, eis]
    elif which == "theta-mod-p":
        eis = eisenstein_utils.eis_table(3, p + 1, bound, config.threads)
        theta = eisenstein_utils.theta_operator(eis)
        checks.append(("theta(E_{p+1}) == 0 mod p", eisenstein_utils.congruence_check(
            theta, eisenstein_utils.zero_table(theta), p, 1)))
        tables = [eis]
    elif which == "theta-mod-p2":
        eis = eisenstein_utils.eis_table(4, p * p - p + 2, bound, config.threads)
        theta = eisenstein_utils.theta_operator(eis)
        limit = eisenstein_utils.limit_table(4, p, bound, config.threads)
        checks.append(("theta(E_{p^2-p+2}) == 0 mod p^2", eisenstein_utils.congruence_check(
            theta, eisenstein_utils.zero_table(theta), p, 2)))
        checks.append(("limit == E_{p^2-p+2} mod p^2", eisenstein_utils.congruence_check(limit, eis, p, 2)))
        support = [
            {"two_t": list(key), "value": str(v), "reason": "nonzero with ord_p(det 2T) < 2"}
            for key, v in limit.entries.items()
            if v and ord(HalfIntSym.from_key(4, key).det2, p) < 2
        ]
        checks.append(("limit supported on ord_p(det 2T) >= 2", {
            "keys_checked": len(limit.entries), "failures": support, "ok": not support}))
        tables = [limit, eis]
    else:
        raise InputError(f"unknown congruence {which!r}")
    if config.csv_path:
        _write_csv(config.csv_path, *tables)
    failures = [dict(f, check=name) for name, res in checks for f in res["failures"]]
    keys = max(res["keys_checked"] for _, res in checks)
    return _report(f"congruence {which}", config, keys, failures, started,
                   checks=[{"check": name, "ok": res["ok"], "keys_checked": res["keys_checked"]} for name, res in checks])


def cmd_local_density(config: JobConfig, s: HalfIntSym, t: HalfIntSym, q: int) -> dict:
    started = time.monotonic()
    cache = DensityCache(config.cache_path) if config.cache_path else None
    result = alpha(s, t, q, budget=Budget(config.budget, q=q), cache=cache, threads=config.threads)
    return _report(
        f"alpha_{q}(S, T)", config, 1, [], started,
        two_s=s.to_json(), two_t=t.to_json(), q=q, result=result.to_json(),
    )


def cmd_limit_report(config: JobConfig, t: HalfIntSym, terms: int) -> dict:
    started = time.monotonic()
    rep = eisenstein_utils.limit_report(config.n, config.p, t, terms)
    orders = [o for o in rep.cauchy_orders]
    failures = []
    for i in range(1, len(orders)):
        if orders[i] < orders[i - 1]:
            failures.append({"index": i, "reason": "cauchy order decreased"})
    return _report("p-adic convergence of E_{k_m}", config, 1, failures, started, report=rep.to_json())


def cmd_mass_table(config: JobConfig) -> dict:
    started = time.monotonic()
    failures, rows = [], []
    for p, expected in sorted(MASS_TABLE.items()):
        got = global_utils.mass_closed_form(p)
        rows.append({"p": p, "closed_form": rat_to_json(got), "table": rat_to_json(expected)})
        if got != expected:
            failures.append({"p": p, "closed_form": str(got), "table": str(expected)})
    reps = global_utils.p11_reps()
    inv = 1 / global_utils.mass(reps)
    rows.append({"p": 11, "representatives": rat_to_json(inv)})
    if inv != MASS_TABLE[11]:
        failures.append({"p": 11, "representatives": str(inv), "table": str(MASS_TABLE[11])})
    return _report("M(S^(p))^-1 = 1152/(p-1)^2", config, len(rows), failures, started, rows=rows)


def cmd_construct_sp(config: JobConfig, search_bound: int) -> dict:
    started = time.monotonic()
    s = global_utils.construct_Sp(config.p, search_bound)
    return _report(
        f"S^({config.p}) exists", config, 1, [], started,
        two_s=s.to_json(), det=rat_to_json(s.det), level=global_utils.level(s),
    )


# =========================================================
# ARGUMENT PARSING
# =========================================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siegelflow", description="Siegel Eisenstein series and genus theta checks")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, default=None)
    common.add_argument("--n", type=int, default=None)
    common.add_argument("--bound", type=int, default=None)
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--cache", dest="cache_path", default=None)
    common.add_argument("--reps", dest="reps_path", default=None)
    common.add_argument("--out", dest="output_path", default=None)
    common.add_argument("--csv", dest="csv_path", default=None)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    eis = sub.add_parser("eis-coeff", parents=[common])
    eis.add_argument("--k", type=int, required=True)
    group = eis.add_mutually_exclusive_group(required=True)
    group.add_argument("--T", dest="matrix")
    group.add_argument("--t", type=int, help="shorthand for degree 1")

    sub.add_parser("verify-main-theorem", parents=[common])

    cong = sub.add_parser("congruence", parents=[common])
    cong.add_argument("which", choices=["serre", "theta-mod-p", "theta-mod-p2"])

    dens = sub.add_parser("local-density", parents=[common])
    dens.add_argument("--S", dest="s_matrix", required=True)
    dens.add_argument("--T", dest="matrix", required=True)
    dens.add_argument("--q", type=int, required=True)

    lim = sub.add_parser("limit-report", parents=[common])
    lim.add_argument("--T", dest="matrix", required=True)
    lim.add_argument("--terms", type=int, default=DEFAULT_LIMIT_TERMS)

    sub.add_parser("mass-table", parents=[common])

    con = sub.add_parser("construct-sp", parents=[common])
    con.add_argument("--search-bound", type=int, default=DEFAULT_SEARCH_BOUND)
    return parser


def _config_from(args) -> JobConfig:
    fields = {"subcommand": args.subcommand}
    for name in ("p", "n", "bound", "budget", "threads", "cache_path", "reps_path", "output_path", "csv_path"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    if args.subcommand == "eis-coeff" and getattr(args, "t", None) is not None and args.n is None:
        fields["n"] = 1
    try:
        return JobConfig(**fields)
    except ValueError as e:
        raise InputError(str(e)) from e


def _dispatch(config: JobConfig, args) -> dict:
    if config.subcommand == "eis-coeff":
        t = HalfIntSym(two_t=[[2 * args.t]]) if args.t is not None else parse_matrix(args.matrix)
        return cmd_eisenstein_coeff(config, args.k, t)
    if config.subcommand == "verify-main-theorem":
        return cmd_verify_main_theorem(config)
    if config.subcommand == "congruence":
        return cmd_congruence(config, args.which)
    if config.subcommand == "local-density":
        return cmd_local_density(config, parse_matrix(args.s_matrix), parse_matrix(args.matrix), args.q)
    if config.subcommand == "limit-report":
        return cmd_limit_report(config, parse_matrix(args.matrix), args.terms)
    if config.subcommand == "mass-table":
        return cmd_mass_table(config)
    if config.subcommand == "construct-sp":
        return cmd_construct_sp(config, args.search_bound)
    raise InputError(f"unknown subcommand {config.subcommand!r}")


def _emit(report: dict, output_path: str | None):
    text = json.dumps(report, sort_keys=True, indent=2)
    if output_path:
        with open(output_path, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logging.info(f"Report written to {output_path}")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    """
    Runs one subcommand and prints its JSON report.

    Returns:
        int: 0 pass, 1 mathematical mismatch, 2 input error, 3 budget exceeded.
    """
    # Limit coefficients along k_m outgrow the default int -> str digit cap
    if hasattr(sys, "set_int_max_str_digits"):
        sys.set_int_max_str_digits(0)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    started = time.monotonic()
    output_path = getattr(args, "output_path", None)
    saved = (settings.DEFAULT_BUDGET, settings.THREAD_COUNT)
    try:
        config = _config_from(args)
        settings.DEFAULT_BUDGET = config.budget
        settings.THREAD_COUNT = config.threads
        logging.info(f"===== SIEGELFLOW {config.subcommand.upper()} =====")
        report = _dispatch(config, args)
        _emit(report, output_path)
        return EXIT_OK if report["status"] == "pass" else EXIT_MISMATCH
    except BudgetExceededError as e:
        logging.warning(f"Budget exceeded: {e}")
        _emit({"claim": args.subcommand, "status": "budget", "error": str(e), "partial": e.partial,
               "elapsed": round(time.monotonic() - started, 3)}, output_path)
        return EXIT_BUDGET
    except SiegelFlowError as e:
        logging.error(f"{args.subcommand} failed: {e}")
        _emit({"claim": args.subcommand, "status": "error", "error": str(e),
               "elapsed": round(time.monotonic() - started, 3)}, output_path)
        return e.exit_code
    except Exception as e:
        logging.critical(f"{args.subcommand} failed with an unhandled exception: {e}", exc_info=True)
        return EXIT_MISMATCH
    finally:
        settings.DEFAULT_BUDGET, settings.THREAD_COUNT = saved


if __name__ == "__main__":
    # To run: python -m src.pipeline <subcommand>
    sys.exit(main())
