"""Command-line interface: validate, analyze, sweep, simulate, certificate.

Model files are JSON with two arrival blocks, four service blocks, a
discipline, and the feedback probability.  Outputs are byte-stable for
fixed inputs and seeds: data files carry no timestamps (a sidecar
.meta.json does), JSON keys are sorted, CSV rows follow input order.

Exit codes are a stable contract: 0 positive recurrent, 1 transient,
4 inconclusive (including degenerate or unavailable analyses), 2 model
validation failure, 3 parse or usage error, 5 internal error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import json
import math
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    AssumptionViolated,
    BadParameterPath,
    BetaSumNotOne,
    CertificateNotFound,
    ClosedFormUnavailable,
    EmptySubset,
    InsufficientData,
    InvalidSubgenerator,
    ModelFileError,
    ModelParseError,
    NegativeProbability,
    NetdriftError,
    NotConverged,
    SignConditionViolated,
    SingularH,
    UnsupportedSubset,
)
from .generator import check_semi_irreducible
from .induced_chains import CANONICAL_SUBSETS, drift_table, subset_name
from .primitives import (
    erlang_ph,
    exponential_ph,
    hyperexponential_ph,
    map_arrival_rate,
    mmpp_map,
    poisson_map,
    validate_map,
    validate_ph,
)
from .service_disciplines import (
    MSPSpec,
    T_KEYS,
    U_KEYS,
    build_network,
)
from .simulator import estimate_drift, replication_seeds, simulate, simulate_saturated
from .stability import (
    INCONCLUSIVE,
    POSITIVE_RECURRENT,
    TRANSIENT,
    classify,
    lyapunov_certificate,
)

EXIT_BY_CLASSIFICATION = {POSITIVE_RECURRENT: 0, TRANSIENT: 1, INCONCLUSIVE: 4}

# errors that mean "analysis cannot decide", not "input is wrong"
_INCONCLUSIVE_ERRORS = (
    AssumptionViolated,
    CertificateNotFound,
    ClosedFormUnavailable,
    EmptySubset,
    InsufficientData,
    NotConverged,
    SignConditionViolated,
    UnsupportedSubset,
)


# --- model file parsing -------------------------------------------------------

def _need(block, key, path):
    if not isinstance(block, dict):
        raise ModelParseError(f"{path}: expected an object")
    if key not in block:
        raise ModelParseError(f"{path}: missing field '{key}'")
    return block[key]


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelParseError(f"{path}: expected a number")
    if not math.isfinite(value):
        raise ModelParseError(f"{path}: value must be finite")
    return value


def _matrix(value, path):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(f"{path}: expected a numeric matrix") from None
    if M.ndim != 2:
        raise ModelParseError(f"{path}: expected a two-dimensional matrix")
    return M


def _vector(value, path):
    try:
        v = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelParseError(f"{path}: expected a numeric vector") from None
    if v.ndim != 1:
        raise ModelParseError(f"{path}: expected a one-dimensional vector")
    return v


def _parse_map(block, path):
    if not isinstance(block, dict):
        raise ModelParseError(f"{path}: expected an object")
    try:
        if "poisson" in block:
            return poisson_map(_number(block["poisson"], f"{path}.poisson"))
        if "mmpp" in block:
            inner = block["mmpp"]
            Q = _matrix(_need(inner, "switch", f"{path}.mmpp"), f"{path}.mmpp.switch")
            rates = _vector(_need(inner, "rates", f"{path}.mmpp"), f"{path}.mmpp.rates")
            return mmpp_map(Q, rates)
        if "C" in block or "D" in block:
            C = _matrix(_need(block, "C", path), f"{path}.C")
            D = _matrix(_need(block, "D", path), f"{path}.D")
            return validate_map(C, D)
    except ModelParseError:
        raise
    except NetdriftError as exc:
        raise ModelFileError(path, str(exc)) from exc
    raise ModelParseError(
        f"{path}: expected 'poisson' or 'mmpp' shorthand or C/D matrices"
    )


def _parse_ph(block, path):
    if not isinstance(block, dict):
        raise ModelParseError(f"{path}: expected an object")
    try:
        if "exponential" in block:
            return exponential_ph(_number(block["exponential"], f"{path}.exponential"))
        if "erlang" in block:
            inner = block["erlang"]
            phases = _need(inner, "phases", f"{path}.erlang")
            rate = _number(_need(inner, "rate", f"{path}.erlang"), f"{path}.erlang.rate")
            return erlang_ph(phases, rate)
        if "hyperexponential" in block:
            inner = block["hyperexponential"]
            weights = _vector(_need(inner, "weights", f"{path}.hyperexponential"),
                              f"{path}.hyperexponential.weights")
            rates = _vector(_need(inner, "rates", f"{path}.hyperexponential"),
                            f"{path}.hyperexponential.rates")
            return hyperexponential_ph(weights, rates)
        if "beta" in block or "H" in block:
            beta = _vector(_need(block, "beta", path), f"{path}.beta")
            H = _matrix(_need(block, "H", path), f"{path}.H")
            try:
                return validate_ph(beta, H)
            except BetaSumNotOne as exc:
                raise ModelFileError(f"{path}.beta", str(exc)) from exc
            except (InvalidSubgenerator, SingularH) as exc:
                raise ModelFileError(f"{path}.H", str(exc)) from exc
    except ModelParseError:
        raise
    except ModelFileError:
        raise
    except NetdriftError as exc:
        raise ModelFileError(path, str(exc)) from exc
    raise ModelParseError(
        f"{path}: expected 'exponential', 'erlang' or 'hyperexponential' "
        "shorthand or beta/H matrices"
    )


def _parse_msp(block, path):
    if not isinstance(block, dict):
        raise ModelParseError(f"{path}: expected an object")
    s_lo = _need(block, "sLo", path)
    s_hi = _need(block, "sHi", path)
    if isinstance(s_lo, bool) or isinstance(s_hi, bool) \
            or not isinstance(s_lo, int) or not isinstance(s_hi, int):
        raise ModelParseError(f"{path}: sLo and sHi must be integers")
    t_block = _need(block, "t", path)
    u_block = _need(block, "u", path)
    t = {}
    for key in T_KEYS:
        t[key] = _matrix(_need(t_block, key, f"{path}.t"), f"{path}.t.{key}")
    u = {}
    for key in U_KEYS:
        u[key] = _matrix(_need(u_block, key, f"{path}.u"), f"{path}.u.{key}")
    n = t["00"].shape[0]
    return MSPSpec(n=n, s_lo=s_lo, s_hi=s_hi, t=t, u=u, kind="custom")


def parse_model_dict(data):
    """Build a validated NetworkModel from parsed model-file JSON."""
    if not isinstance(data, dict):
        raise ModelParseError("model file must contain a JSON object")
    arrivals = _need(data, "arrivals", "model")
    if not isinstance(arrivals, list) or len(arrivals) != 2:
        raise ModelParseError("arrivals: expected a list of exactly 2 blocks")
    services = _need(data, "services", "model")
    if not isinstance(services, list) or len(services) != 4:
        raise ModelParseError("services: expected a list of exactly 4 blocks")
    map1 = _parse_map(arrivals[0], "arrivals.1")
    map3 = _parse_map(arrivals[1], "arrivals.2")
    ph = [_parse_ph(services[i], f"services.{i + 1}") for i in range(4)]
    p = _number(_need(data, "p", "model"), "p")
    discipline = _need(data, "discipline", "model")
    K = None
    msp1 = msp2 = None
    if isinstance(discipline, str):
        name = discipline
        if name not in ("non_preemptive", "preemptive_resume"):
            raise ModelParseError(
                f"discipline: unknown discipline {name!r}; expected "
                "non_preemptive, preemptive_resume, limited or custom"
            )
    elif isinstance(discipline, dict) and "limited" in discipline:
        name = "limited"
        K = _need(discipline["limited"], "K", "discipline.limited")
    elif isinstance(discipline, dict) and "custom" in discipline:
        name = "custom"
        inner = discipline["custom"]
        msp1 = _parse_msp(_need(inner, "msp1", "discipline.custom"),
                          "discipline.custom.msp1")
        msp2 = _parse_msp(_need(inner, "msp2", "discipline.custom"),
                          "discipline.custom.msp2")
    else:
        raise ModelParseError(
            "discipline: expected a name or {'limited': {...}} / {'custom': {...}}"
        )
    try:
        return build_network(map1, map3, ph[0], ph[1], ph[2], ph[3], p,
                             discipline=name, K=K, msp1=msp1, msp2=msp2)
    except NegativeProbability as exc:
        raise ModelFileError("p", str(exc)) from exc
    except NetdriftError as exc:
        raise ModelFileError("discipline", str(exc)) from exc


def load_model(path):
    """Parse and validate the model file at `path`."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelParseError(f"cannot read model file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"malformed JSON in {path}: {exc}") from exc
    return parse_model_dict(data)


def canonical_model_dict(model):
    """Canonical model-file form: raw matrices, explicit discipline."""
    if model.discipline == "limited":
        discipline = {"limited": {"K": int(model.K)}}
    elif model.discipline == "custom":
        def msp_dict(m):
            return {
                "sLo": int(m.s_lo),
                "sHi": int(m.s_hi),
                "t": {k: m.t[k].tolist() for k in T_KEYS},
                "u": {k: m.u[k].tolist() for k in U_KEYS},
            }
        discipline = {"custom": {"msp1": msp_dict(model.msp1),
                                 "msp2": msp_dict(model.msp2)}}
    else:
        discipline = model.discipline
    return {
        "arrivals": [
            {"C": model.map1.C.tolist(), "D": model.map1.D.tolist()},
            {"C": model.map3.C.tolist(), "D": model.map3.D.tolist()},
        ],
        "services": [
            {"beta": ph.beta.tolist(), "H": ph.H.tolist()} for ph in model.ph
        ],
        "discipline": discipline,
        "p": float(model.p),
    }


# --- sweep parameter paths ----------------------------------------------------

def apply_parameter(model_dict, path, value):
    """Return a copy of the model dict with the parameter at `path` set.

    Supported paths: p, discipline.K, arrivals.<i>.rate (poisson
    shorthand), services.<i>.rate (exponential or erlang shorthand).
    """
    out = copy.deepcopy(model_dict)
    parts = path.split(".")
    if parts == ["p"]:
        out["p"] = value
        return out
    if parts == ["discipline", "K"]:
        disc = out.get("discipline")
        if not (isinstance(disc, dict) and "limited" in disc
                and isinstance(disc["limited"], dict)):
            raise BadParameterPath(
                "discipline.K applies only to the limited discipline"
            )
        disc["limited"]["K"] = value
        return out
    if len(parts) == 3 and parts[2] == "rate" and parts[0] in ("arrivals", "services"):
        group = out.get(parts[0])
        count = 2 if parts[0] == "arrivals" else 4
        try:
            idx = int(parts[1])
        except ValueError:
            raise BadParameterPath(f"bad index in parameter path {path!r}") from None
        if not (isinstance(group, list) and 1 <= idx <= min(count, len(group))):
            raise BadParameterPath(f"index out of range in parameter path {path!r}")
        block = group[idx - 1]
        if not isinstance(block, dict):
            raise BadParameterPath(f"{path}: target block is not an object")
        if parts[0] == "arrivals":
            if "poisson" not in block:
                raise BadParameterPath(
                    f"{path}: rate sweeps need the poisson shorthand"
                )
            block["poisson"] = value
        else:
            if "exponential" in block:
                block["exponential"] = value
            elif "erlang" in block and isinstance(block["erlang"], dict):
                block["erlang"]["rate"] = value
            else:
                raise BadParameterPath(
                    f"{path}: rate sweeps need the exponential or erlang shorthand"
                )
        return out
    raise BadParameterPath(f"unknown parameter path {path!r}")


# --- output helpers -----------------------------------------------------------

def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_meta(target: Path):
    meta = {
        "generatedAt": datetime.now(timezone.utc).isoformat(),
        "tool": "netdrift",
        "version": __version__,
    }
    target.write_text(_dump_json(meta))


def _emit_json(obj, out_path):
    text = _dump_json(obj)
    if out_path:
        out = Path(out_path)
        out.write_text(text)
        _write_meta(out.with_name(out.name + ".meta.json"))
    else:
        sys.stdout.write(text)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


# --- commands -----------------------------------------------------------------

def cmd_validate(args):
    model = load_model(args.model)
    status = check_semi_irreducible(model, radius=args.probe_radius)
    if args.canonical_out:
        Path(args.canonical_out).write_text(_dump_json(canonical_model_dict(model)))
    report = {
        "valid": True,
        "discipline": model.discipline,
        "K": model.K,
        "p": model.p,
        "arrivalRates": [map_arrival_rate(model.map1), map_arrival_rate(model.map3)],
        "serviceRates": list(model.service_rates),
        "backgroundStates": model.map1.dim * model.map3.dim
        * model.msp1.n * model.msp2.n,
        "semiIrreducibility": status,
    }
    _emit_json(report, args.out)
    return 0


def cmd_analyze(args):
    model = load_model(args.model)
    report = classify(
        model,
        mode=args.mode,
        levels=args.levels,
        cap=args.cap,
        assume_semi_irreducible=args.assume_semi_irreducible,
        with_certificate=args.certificate,
        with_spiral=args.spiral or bool(args.spiral_csv),
    )
    _emit_json(report.to_json_dict(), args.out)
    if args.spiral_csv and report.spiral is not None:
        with open(args.spiral_csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "x1", "x2", "x3", "x4"])
            for step, point in enumerate(report.spiral.points, start=1):
                writer.writerow([step] + [_fmt(float(v)) for v in point])
    return EXIT_BY_CLASSIFICATION[report.classification]


def _sweep_point(payload):
    model_dict, path, value, mode, levels, cap = payload
    try:
        patched = apply_parameter(model_dict, path, value)
        model = parse_model_dict(patched)
        # a near-empty-box probe keeps per-point cost flat across the sweep;
        # a confirmation is a proof at any radius
        report = classify(model, mode=mode, levels=levels, cap=cap,
                          probe_radius=1)
        note = "; ".join(report.reasons)
        return (value, report.r1, report.r2, report.r1r2,
                report.classification, note)
    except NetdriftError as exc:
        return (value, None, None, None, INCONCLUSIVE,
                f"{type(exc).__name__}: {exc}")


def cmd_sweep(args):
    model_dict = _load_json(args.model)
    parse_model_dict(model_dict)
    sweep = _load_json(args.sweep)
    path = _need(sweep, "parameter", "sweep")
    if not isinstance(path, str):
        raise ModelParseError("sweep.parameter: expected a string path")
    values = _need(sweep, "values", "sweep")
    if not isinstance(values, list):
        raise ModelParseError("sweep.values: expected a list")
    for i, v in enumerate(values, start=1):
        _number(v, f"sweep.values.{i}")
    if values:
        apply_parameter(model_dict, path, values[0])
    payloads = [(model_dict, path, v, args.mode, args.levels, args.cap)
                for v in values]
    if args.jobs > 1 and len(payloads) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    target = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(["value", "r1", "r2", "r1r2", "classification", "note"])
        for value, r1, r2, r1r2, classification, note in rows:
            writer.writerow([_fmt(value), _fmt(r1), _fmt(r2), _fmt(r1r2),
                             classification, note])
    finally:
        if args.out:
            target.close()
            _write_meta(Path(args.out).with_name(Path(args.out).name + ".meta.json"))
    return 0


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"malformed JSON in {path}: {exc}") from exc


def _parse_subset(text):
    if text.strip().upper() == "N":
        return frozenset((1, 2, 3, 4))
    try:
        items = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ModelParseError(
            f"bad subset {text!r}; expected comma-separated queue indices"
        ) from None
    return frozenset(items)


def _analytic_reference(model, subset):
    """Closed-form drift entry for the saturated subset, when in scope."""
    try:
        table = drift_table(model, mode="closed")
        entry = table.entry(subset)
        return {
            "drifts": list(entry.drifts),
            "outputRates": list(entry.output_rates),
        }
    except NetdriftError:
        return None


def cmd_simulate(args):
    model = load_model(args.model)
    subset = _parse_subset(args.saturate) if args.saturate else None
    if subset is not None and args.initial:
        sys.stderr.write("netdrift simulate: --initial cannot combine with "
                         "--saturate\n")
        return 3
    initial = None
    if args.initial:
        try:
            coords = [int(tok) for tok in args.initial.split(",")]
        except ValueError:
            coords = []
        if len(coords) != 4:
            sys.stderr.write("netdrift simulate: --initial needs four "
                             "comma-separated queue lengths\n")
            return 3
        initial = (tuple(coords), 0)
    seeds = replication_seeds(args.seed, args.replications)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    replication_reports = []
    estimates = []
    for idx, child_seed in enumerate(seeds, start=1):
        if subset is not None:
            traj = simulate_saturated(model, subset, args.horizon, child_seed)
        else:
            traj = simulate(model, args.horizon, child_seed, initial)
        entry = {"replication": idx, **traj.summary()}
        try:
            est = estimate_drift(traj, burn_in=args.burn_in)
            estimates.append(est)
            entry["driftEstimate"] = est.to_json_dict()
        except InsufficientData as exc:
            entry["driftEstimate"] = None
            entry["note"] = str(exc)
        replication_reports.append(entry)
        if out_dir:
            name = out_dir / f"trajectory_{idx:03d}.csv"
            with open(name, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["t", "x1", "x2", "x3", "x4"])
                for row in traj.sample_rows():
                    writer.writerow([_fmt(row[0])] + [str(v) for v in row[1:]])
    summary = {
        "horizon": args.horizon,
        "seed": args.seed,
        "replications": args.replications,
        "saturated": sorted(subset) if subset else None,
        "perReplication": replication_reports,
        "analytical": None,
        "agreement": None,
    }
    if subset is not None and estimates:
        reference = _analytic_reference(model, subset)
        summary["analytical"] = reference
        if reference is not None:
            pooled_rate = np.mean([e.departure_rates for e in estimates], axis=0)
            pooled_hw = np.max([e.departure_rate_half_widths for e in estimates],
                               axis=0)
            agreement = []
            for i in range(4):
                diff = abs(pooled_rate[i] - reference["outputRates"][i])
                agreement.append({
                    "queue": i + 1,
                    "simulatedRate": float(pooled_rate[i]),
                    "analyticRate": reference["outputRates"][i],
                    "halfWidth": float(pooled_hw[i]),
                    "ok": bool(diff <= 3.0 * max(pooled_hw[i], 1e-12)),
                })
            summary["agreement"] = agreement
    _emit_json(summary, str(out_dir / "summary.json") if out_dir else None)
    if out_dir:
        _write_meta(out_dir / "run.meta.json")
    return 0


def cmd_certificate(args):
    model = load_model(args.model)
    table = drift_table(model, mode=args.mode, levels=args.levels, cap=args.cap)
    certificate = lyapunov_certificate(table)
    payload = certificate.to_json_dict()
    payload["subsets"] = [subset_name(A) for A in CANONICAL_SUBSETS]
    _emit_json(payload, args.out)
    return 0


# --- parser -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 3, leaving 2
    free for model validation failures."""

    def error(self, message):
        self.exit(3, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="netdrift",
                     description="Stability analysis of a two-station "
                                 "re-entrant queueing network")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add_common(p):
        p.add_argument("--mode", choices=("both", "closed", "numeric"),
                       default="both", help="drift table mode")
        p.add_argument("--levels", type=int, default=32,
                       help="initial truncation level per free coordinate")
        p.add_argument("--cap", type=int, default=512,
                       help="truncation level cap")
        p.add_argument("--out", help="write output to this path")

    p = sub.add_parser("validate", help="validate a model file")
    p.add_argument("model")
    p.add_argument("--probe-radius", type=int, default=3)
    p.add_argument("--canonical-out", help="also write the canonical model form")
    p.add_argument("--out", help="write the report to this path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="classify a model")
    p.add_argument("model")
    add_common(p)
    p.add_argument("--certificate", action="store_true",
                   help="attach a Lyapunov certificate when positive recurrent")
    p.add_argument("--spiral", action="store_true",
                   help="attach the spiral path of the boundary vector fields")
    p.add_argument("--spiral-csv", help="write the spiral path as CSV")
    p.add_argument("--assume-semi-irreducible", action="store_true",
                   help="skip the reachability probe")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="classify across a parameter sweep")
    p.add_argument("model")
    p.add_argument("sweep", help="JSON file: {parameter, values}")
    p.add_argument("--mode", choices=("both", "closed", "numeric"),
                   default="closed",
                   help="drift table mode per point (closed is fastest)")
    p.add_argument("--levels", type=int, default=32)
    p.add_argument("--cap", type=int, default=512)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="simulate trajectories")
    p.add_argument("model")
    p.add_argument("--horizon", type=float, default=10000.0)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--saturate",
                   help="comma-separated queues to pin (or N for all)")
    p.add_argument("--initial", help="four comma-separated initial queue lengths")
    p.add_argument("--burn-in", type=float, default=0.2)
    p.add_argument("--out", help="directory for trajectory CSVs and summary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certificate", help="construct a Lyapunov certificate")
    p.add_argument("model")
    add_common(p)
    p.set_defaults(func=cmd_certificate)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ModelParseError as exc:
        sys.stderr.write(f"netdrift: parse error: {exc}\n")
        return 3
    except ModelFileError as exc:
        sys.stderr.write(f"netdrift: invalid model at {exc.path}: {exc.message}\n")
        return 2
    except _INCONCLUSIVE_ERRORS as exc:
        sys.stderr.write(f"netdrift: {type(exc).__name__}: {exc}\n")
        return 4
    except NetdriftError as exc:
        sys.stderr.write(f"netdrift: {type(exc).__name__}: {exc}\n")
        return 2
    except Exception:
        traceback.print_exc()
        return 5


if __name__ == "__main__":
    sys.exit(main())
