"""Command-line front end: ``coherent-link {rate,sweep,oracle-check,ghz}``.

Exit codes: 0 success, 1 usage or validation error, 2 numerical or verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bell import bell_diagonal_decompose
from .core import DomainError, TruncationError, UnsupportedConfigurationError
from .nonideal import NoiseConfig, composed_outcomes, rate_point
from .oracle import (
    outcome_map,
    parity_consistent_success,
    run_cow_dr_oracle,
    run_cow_usd_oracle,
    run_ctw_oracle,
    run_mode_mismatch_oracle,
    total_success,
)
from .protocols import (
    PROTOCOLS,
    ctw_outcome_probabilities_cat_norm,
    dolinar_table,
    eta_from_db,
    db_from_eta,
    repeaterless_bound_direct,
    repeaterless_bound_midpoint,
)
from .sweep import (
    ALPHA_BOUNDS,
    POLICIES,
    SPACINGS,
    GhzSpec,
    SweepSpec,
    ghz_expected_rounds,
    ghz_throughput_compare,
    optimize_alpha,
    sweep_loss,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
CSV_HEADER = (
    "protocol",
    "loss_db",
    "eta",
    "alpha",
    "p_success",
    "hashing",
    "rate",
    "bound_midpoint",
    "bound_direct",
    "flags",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """12 significant digits, '.' decimal separator."""
    return format(float(x), ".12g")


# ---- configuration -------------------------------------------------------

# config key -> (subcommands it applies to, converter)
def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true/false, got {v!r}")


def _protocol_list(v):
    items = v if isinstance(v, list) else str(v).split(",")
    return [str(p).strip() for p in items if str(p).strip()]


_ALL = ("rate", "sweep", "oracle-check", "ghz")
CONFIG_KEYS = {
    "protocol": (("rate", "oracle-check", "sweep"), _protocol_list),
    "eta": (("rate", "oracle-check", "ghz"), float),
    "loss_db": (("rate", "oracle-check", "ghz"), float),
    "alpha": (("rate", "oracle-check", "sweep"), float),
    "optimize_alpha": (("rate", "sweep"), _bool),
    "epsilon": (_ALL, float),
    "dark": (_ALL, float),
    "visibility": (_ALL, float),
    "points": (("sweep",), int),
    "loss_db_min": (("sweep",), float),
    "loss_db_max": (("sweep",), float),
    "spacing": (("sweep",), str),
    "alpha_min": (("rate", "sweep"), float),
    "alpha_max": (("rate", "sweep"), float),
    "out": (("sweep",), str),
    "cutoff": (("oracle-check",), str),
    "tolerance": (("oracle-check",), float),
    "policy": (("ghz",), str),
    "n": (("ghz",), int),
    "per_link_success": (("ghz",), float),
}


def load_config(path: str, command: str) -> dict:
    """Read a flat TOML document; unknown or inapplicable keys are errors."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid config {path!r}: {exc}") from None
    out = {}
    for key, value in doc.items():
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        commands, conv = CONFIG_KEYS[key]
        if command not in commands:
            raise UsageError(f"config key {key!r} does not apply to '{command}'")
        if isinstance(value, dict):
            raise UsageError(f"config key {key!r} must be a scalar, got a table")
        try:
            out[key] = conv(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for config key {key!r}: {exc}") from None
    return out


def _merge(args: argparse.Namespace, command: str) -> dict:
    """Flag values, falling back to config values; flags win."""
    cfg = load_config(args.config, command) if getattr(args, "config", None) else {}
    merged = dict(cfg)
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return merged


def _noise(opts: dict) -> NoiseConfig:
    return NoiseConfig(
        epsilon=opts.get("epsilon", 0.0),
        p_dark=opts.get("dark", 0.0),
        visibility=opts.get("visibility", 1.0),
    )


def _eta(opts: dict, required: bool = True) -> float | None:
    if "eta" in opts and "loss_db" in opts:
        raise UsageError("give either --eta or --loss-db, not both")
    if "eta" in opts:
        return float(opts["eta"])
    if "loss_db" in opts:
        return eta_from_db(opts["loss_db"])
    if required:
        raise UsageError("one of --eta or --loss-db is required")
    return None


def _single_protocol(opts: dict) -> str:
    protos = opts.get("protocol")
    if not protos:
        raise UsageError("--protocol is required")
    if len(protos) != 1:
        raise UsageError("exactly one --protocol is expected here")
    if protos[0] not in PROTOCOLS:
        raise UsageError(f"unknown protocol {protos[0]!r}; choose from {', '.join(PROTOCOLS)}")
    return protos[0]


def _bounds(opts: dict) -> tuple[float, float]:
    return (opts.get("alpha_min", ALPHA_BOUNDS[0]), opts.get("alpha_max", ALPHA_BOUNDS[1]))


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, np.floating):
        return _json_value(float(x))
    return x


def dump_json(doc: dict) -> str:
    return json.dumps(_json_value(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _noise_dict(noise: NoiseConfig) -> dict:
    return {"epsilon": noise.epsilon, "p_dark": noise.p_dark, "visibility": noise.visibility}


# ---- commands ------------------------------------------------------------


def cmd_rate(opts: dict, out) -> int:
    protocol = _single_protocol(opts)
    eta = _eta(opts)
    noise = _noise(opts)
    flags: tuple[str, ...] = ()
    if opts.get("optimize_alpha"):
        if "alpha" in opts:
            raise UsageError("give either --alpha or --optimize-alpha, not both")
        res = optimize_alpha(protocol, eta, noise, _bounds(opts))
        point, flags = res.point, res.flags
    elif "alpha" in opts:
        point = rate_point(protocol, opts["alpha"], eta, noise)
    else:
        raise UsageError("one of --alpha or --optimize-alpha is required")
    doc = {
        "protocol": protocol,
        "eta": point.eta,
        "loss_db": db_from_eta(point.eta),
        "alpha": point.alpha,
        "p_success": point.p_success,
        "hashing": point.hashing_per_success,
        "rate": point.rate,
        "bound_midpoint": repeaterless_bound_midpoint(point.eta),
        "bound_direct": repeaterless_bound_direct(point.eta),
        "noise": _noise_dict(noise),
        "flags": list(flags),
    }
    out.write(dump_json(doc))
    return EXIT_OK


def sweep_spec(opts: dict) -> SweepSpec:
    protos = opts.get("protocol") or list(PROTOCOLS)
    for p in protos:
        if p not in PROTOCOLS:
            raise UsageError(f"unknown protocol {p!r}; choose from {', '.join(PROTOCOLS)}")
    fixed = opts.get("alpha")
    if fixed is not None and opts.get("optimize_alpha"):
        raise UsageError("give either --alpha or --optimize-alpha, not both")
    return SweepSpec(
        protocols=tuple(protos),
        loss_db_min=opts.get("loss_db_min", 0.01),
        loss_db_max=opts.get("loss_db_max", 40.0),
        points=opts.get("points", 50),
        spacing=opts.get("spacing", "linear-db"),
        noise=_noise(opts),
        alpha_bounds=_bounds(opts),
        optimize=fixed is None,
        alpha=fixed,
    )


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [
                r.protocol,
                fmt(r.loss_db),
                fmt(r.eta),
                fmt(r.alpha),
                fmt(r.p_success),
                fmt(r.hashing),
                fmt(r.rate),
                fmt(r.bound_midpoint),
                fmt(r.bound_direct),
                ";".join(r.flags),
            ]
        )
    return buf.getvalue()


def cmd_sweep(opts: dict, out) -> int:
    spec = sweep_spec(opts)
    text = rows_to_csv(sweep_loss(spec))
    target = opts.get("out", "-")
    if target == "-":
        out.write(text)
        return EXIT_OK
    meta = {
        "generator": f"coherent-link {__version__}",
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "protocols": list(spec.protocols),
        "loss_db_min": spec.loss_db_min,
        "loss_db_max": spec.loss_db_max,
        "points": spec.points,
        "spacing": spec.spacing,
        "noise": _noise_dict(spec.noise),
        "alpha_bounds": list(spec.alpha_bounds),
        "optimize": spec.optimize,
        "alpha": spec.alpha,
    }
    try:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(target + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump_json(meta))
    except OSError as exc:
        raise UsageError(f"cannot write {target!r}: {exc.strerror}") from None
    return EXIT_OK


def _entry(name, analytic, oracle, compared=True) -> dict:
    dev = abs(analytic - oracle) if compared else None
    return {"quantity": name, "analytic": analytic, "oracle": oracle, "abs_dev": dev, "compared": compared}


def _success_hashing(outcomes) -> float | None:
    succ = [o for o in outcomes if o.success and o.probability > 0.0]
    p = math.fsum(o.probability for o in succ)
    if p == 0.0:
        return None
    return math.fsum(o.probability * o.hashing() for o in succ) / p


def _pair_contrast(state, pair: str) -> float:
    """(p_+ - p_-)/(p_+ + p_-) within one Bell pair, the dephasing factor of that pair."""
    bd = bell_diagonal_decompose(state)[0]
    plus, minus = (bd.p_phi_plus, bd.p_phi_minus) if pair == "phi" else (bd.p_psi_plus, bd.p_psi_minus)
    return (plus - minus) / (plus + minus)


def _max_residual(outcomes) -> float:
    vals = [bell_diagonal_decompose(o.state)[1] for o in outcomes if o.success and o.state is not None]
    return max(vals, default=0.0)


def oracle_report(protocol: str, alpha: float, eta: float, noise: NoiseConfig, cutoff: int | None) -> dict:
    entries, notes = [], []
    point, heralds = composed_outcomes(protocol, alpha, eta, noise)
    hm = outcome_map(heralds)
    only_dark = noise.epsilon == 0.0 and noise.visibility == 1.0

    if protocol == "cow-dr":
        orc = run_cow_dr_oracle(alpha, eta, cutoff)
        om = outcome_map(orc)
        table = dolinar_table(alpha, eta)
        plus = bell_diagonal_decompose(om["plus"].state)[0] if om["plus"].state is not None else None
        entries.append(_entry("success", point.p_success, total_success(orc)))
        for lab in ("plus", "minus"):
            entries.append(_entry(f"p[{lab}]", hm[lab].probability, om[lab].probability))
        if plus is not None:
            entries.append(_entry("p_error", table.p_e, plus.p_psi_plus + plus.p_psi_minus))
            entries.append(_entry("p_phase", table.p_phase, plus.p_phi_minus + plus.p_psi_minus))
            entries.append(_entry("hashing", point.hashing_per_success, _success_hashing(orc)))
            raw = max(bell_diagonal_decompose(o.raw_state)[1] for o in orc if o.raw_state is not None)
            notes.append(
                "receiver outcomes are Bell-twirled before hashing; the raw projected states "
                f"carry Phi/Psi coherences with residual {raw:.3g}"
            )
    elif protocol == "ctw" and only_dark:
        orc = run_ctw_oracle(alpha, eta, cutoff, p_dark=noise.p_dark)
        om = outcome_map(orc)
        entries.append(_entry("success", point.p_success, total_success(orc)))
        cat = ctw_outcome_probabilities_cat_norm(alpha, eta)
        for lab in ("d1_even", "d1_odd", "d2_even", "d2_odd"):
            entries.append(_entry(f"p[{lab}]", hm[lab].probability, om[lab].probability))
            if noise.p_dark == 0.0:
                entries.append(_entry(f"p_cat_norm_form[{lab}]", cat[lab], om[lab].probability, compared=False))
            if hm[lab].state is not None and om[lab].state is not None:
                d = float(np.max(np.abs(hm[lab].state.matrix - om[lab].state.matrix)))
                entries.append({"quantity": f"state[{lab}]", "abs_dev": d, "compared": True})
        if noise.p_dark == 0.0:
            notes.append(
                "per-class probabilities written as (1 - e^-mu)|N|^2/8 do not split even/odd counts "
                "like the Poisson parity law; totals agree (p_cat_norm_form entries are informational)"
            )
            if om["d1_even"].state is not None:
                entries.append(
                    _entry("dephasing_T", math.exp(-4.0 * (1 - math.sqrt(eta)) * alpha**2), _pair_contrast(om["d1_even"].state, "phi"))
                )
        else:
            notes.append(
                "dark-count mixture probabilities use the per-arm sqrt(eta) intensity; the "
                "exponent written with e^{-2 eta |alpha|^2} would not match the oracle"
            )
        h_orc = _success_hashing(orc)
        if h_orc is not None:
            entries.append(_entry("hashing", point.hashing_per_success, h_orc))
    elif protocol == "cow-usd" and only_dark:
        orc = run_cow_usd_oracle(alpha, eta, cutoff, p_dark=noise.p_dark)
        om = outcome_map(orc)
        entries.append(_entry("success", point.p_success, total_success(orc)))
        for lab in ("d1", "d2"):
            entries.append(_entry(f"p[{lab}]", hm[lab].probability, om[lab].probability))
            if hm[lab].state is not None and om[lab].state is not None:
                d = float(np.max(np.abs(hm[lab].state.matrix - om[lab].state.matrix)))
                entries.append({"quantity": f"state[{lab}]", "abs_dev": d, "compared": True})
        if noise.p_dark == 0.0 and om["d1"].state is not None:
            entries.append(_entry("dephasing_T", math.exp(-2.0 * (1 - eta) * alpha**2), _pair_contrast(om["d1"].state, "phi")))
        if noise.p_dark > 0.0:
            notes.append("with on-off detectors a real click needs only the other detector quiet: weight (1 - p_d)")
        h_orc = _success_hashing(orc)
        if h_orc is not None:
            entries.append(_entry("hashing", point.hashing_per_success, h_orc))
    else:
        # mismatch and/or imperfect overlap: compare the post-selected success probability
        if noise.visibility < 1.0:
            orc = run_mode_mismatch_oracle(protocol, alpha, eta, noise.visibility, noise.epsilon, noise.p_dark, cutoff)
        elif protocol == "ctw":
            orc = run_ctw_oracle(alpha, eta, cutoff, epsilon=noise.epsilon, p_dark=noise.p_dark)
        else:
            orc = run_cow_usd_oracle(alpha, eta, cutoff, epsilon=noise.epsilon, p_dark=noise.p_dark)
        comparable = noise.p_dark == 0.0
        entries.append(_entry("success", point.p_success, parity_consistent_success(orc), compared=comparable))
        entries.append(_entry("success_all_single_clicks", point.p_success, total_success(orc), compared=False))
        notes.append("success counts only clicks in the port the memory parity should light; light leaking to the other port is discarded")
        if not comparable:
            notes.append("with dark counts on top of mismatch the model mixes dark counts after post-selection; not oracle-comparable")
        if noise.visibility < 1.0:
            notes.append("the two-mode oracle folds loss into the pulse amplitudes, so only click statistics are compared")
        elif comparable and protocol == "ctw":
            om = outcome_map(orc)
            if om["d1_even"].state is not None:
                t_eps = math.exp(-4.0 * (1 - math.sqrt(eta)) * alpha**2 * (1 + noise.epsilon**2))
                entries.append(_entry("dephasing_T_eps", t_eps, _pair_contrast(om["d1_even"].state, "phi")))
        elif comparable:
            om = outcome_map(orc)
            if om["d1"].state is not None:
                entries.append(
                    _entry("dephasing_T", math.exp(-2.0 * (1 - eta) * alpha**2), _pair_contrast(om["d1"].state, "phi"), compared=False)
                )
                notes.append("the model keeps T' for mismatched COW pulses; the oracle's T' follows the larger transmitted pulse")

    devs = [e["abs_dev"] for e in entries if e.get("compared") and e.get("abs_dev") is not None]
    return {
        "protocol": protocol,
        "alpha": alpha,
        "eta": eta,
        "noise": _noise_dict(noise),
        "entries": entries,
        "bell_residual_max": _max_residual(orc),
        "max_abs_dev": max(devs, default=0.0),
        "notes": notes,
    }


def cmd_oracle_check(opts: dict, out) -> int:
    protocol = _single_protocol(opts)
    eta = _eta(opts)
    if "alpha" not in opts:
        raise UsageError("--alpha is required")
    raw_cut = str(opts.get("cutoff", "auto"))
    if raw_cut == "auto":
        cutoff = None
    else:
        try:
            cutoff = int(raw_cut)
        except ValueError:
            raise UsageError(f"--cutoff must be an integer or 'auto', got {raw_cut!r}") from None
        if cutoff < 1:
            raise UsageError("--cutoff must be positive")
    tol = opts.get("tolerance", 1e-8)
    if not tol > 0:
        raise UsageError("--tolerance must be positive")
    report = oracle_report(protocol, opts["alpha"], eta, _noise(opts), cutoff)
    report["tolerance"] = tol
    report["pass"] = report["max_abs_dev"] <= tol
    out.write(dump_json(report))
    return EXIT_OK if report["pass"] else EXIT_NUMERIC


def cmd_ghz(opts: dict, out) -> int:
    if "n" not in opts:
        raise UsageError("--n is required")
    n = opts["n"]
    policy = opts.get("policy")
    if policy is not None and policy not in POLICIES:
        raise UsageError(f"--policy must be one of {', '.join(POLICIES)}")
    eta = _eta(opts, required=False)
    if "per_link_success" in opts:
        if eta is not None:
            raise UsageError("give either --per-link-success or --eta/--loss-db, not both")
        p = opts["per_link_success"]
        doc = {"n": n, "per_link_success": p, "source": "given"}
    elif eta is not None:
        cmp = ghz_throughput_compare(n, eta, _noise(opts))
        p = cmp["coherent"]["per_link_success"]
        doc = {"n": n, "per_link_success": p, "source": "ctw-optimized", "eta": eta, "alpha": cmp["coherent"]["alpha"]}
    else:
        raise UsageError("one of --per-link-success, --eta or --loss-db is required")
    policies = (policy,) if policy else POLICIES
    doc["expected_rounds"] = {pol: ghz_expected_rounds(GhzSpec(n, p, pol)) for pol in policies}
    coherent = doc["expected_rounds"][policy or "retry-link"]
    base = ghz_expected_rounds(GhzSpec(n, 0.5, "restart-chain"))
    doc["baseline"] = {"per_link_success": 0.5, "policy": "restart-chain", "expected_rounds": base}
    doc["ratio"] = base / coherent
    out.write(dump_json(doc))
    return EXIT_OK


# ---- argument parsing ----------------------------------------------------


def _add_noise(p):
    p.add_argument("--epsilon", type=float, help="fractional amplitude mismatch, [0, 0.5)")
    p.add_argument("--dark", type=float, help="dark-count probability per detector, [0, 0.1]")
    p.add_argument("--visibility", type=float, help="mode-overlap visibility, (0, 1]")


def _add_link(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eta", type=float, help="end-to-end transmissivity")
    g.add_argument("--loss-db", dest="loss_db", type=float, help="end-to-end loss in dB")


def _add_protocol(p, multiple=False):
    if multiple:
        p.add_argument(
            "--protocol",
            action="append",
            type=lambda s: _protocol_list(s),
            help=f"protocol(s), comma-separated or repeated: {', '.join(PROTOCOLS)}",
        )
    else:
        p.add_argument("--protocol", type=lambda s: [s], help=", ".join(PROTOCOLS))


def _add_alpha(p):
    p.add_argument("--alpha", type=float, help="coherent amplitude")
    p.add_argument("--optimize-alpha", dest="optimize_alpha", action="store_const", const=True)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coherent-link", description="Entanglement rates of coherent-state memory links.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("rate", help="rate at one operating point (JSON)")
    p.add_argument("--config")
    _add_protocol(p)
    _add_link(p)
    _add_alpha(p)
    _add_noise(p)

    p = sub.add_parser("sweep", help="rates over a loss range (CSV)")
    p.add_argument("--config")
    _add_protocol(p, multiple=True)
    p.add_argument("--loss-db-min", dest="loss_db_min", type=float)
    p.add_argument("--loss-db-max", dest="loss_db_max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--spacing", choices=SPACINGS)
    _add_alpha(p)
    _add_noise(p)
    p.add_argument("--out", help="output CSV path, '-' for stdout (default)")

    p = sub.add_parser("oracle-check", help="closed forms against the Fock-space oracle (JSON)")
    p.add_argument("--config")
    _add_protocol(p)
    _add_link(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--cutoff", help="Fock cutoff or 'auto'")
    p.add_argument("--tolerance", type=float)
    _add_noise(p)

    p = sub.add_parser("ghz", help="GHZ chaining cost (JSON)")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--per-link-success", dest="per_link_success", type=float)
    _add_link(p)
    p.add_argument("--policy", choices=POLICIES)
    _add_noise(p)
    return parser


COMMANDS = {"rate": cmd_rate, "sweep": cmd_sweep, "oracle-check": cmd_oracle_check, "ghz": cmd_ghz}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and args.protocol is not None:
        args.protocol = [p for group in args.protocol for p in group]
    try:
        opts = _merge(args, args.command)
        return COMMANDS[args.command](opts, out)
    except TruncationError as exc:
        print(f"coherent-link: truncation error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, UnsupportedConfigurationError) as exc:
        print(f"coherent-link: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
