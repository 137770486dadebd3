"""Command-line entry point: ``qpl <subcommand> [flags]``.

Subcommands: spectrum, induct, eigen, measure, oracle, verify. Each writes
``<name>.json`` and ``<name>.csv`` into ``--output`` (a directory) or
prints the JSON report to stdout. Every section of a report names the
``module.operation`` that produced its numbers.

Exit codes: 0 ok, 1 configuration error, 2 pipeline or gate failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import ConfigError, QPLError

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE, EXIT_INTERNAL = 0, 1, 2, 3


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _clean(x):
    """JSON-safe, deterministic structure: NaN/inf become null, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _section(source: str, values) -> dict:
    return {"source": source, "values": values}


# ------------------------------------------------------------ pipelines


def _spectrum(cfg: RunConfig):
    from .oracle import approximate_spectrum

    cover = approximate_spectrum(cfg.lam, cfg.potential_spec(), cfg.frequency(), cfg.q)
    src = "spectral_oracle.approximate_spectrum"
    report = [_section(src, {"q": cover.q, "padding": cover.padding, "measure": cover.measure,
                             "intervals": cover.intervals})]
    rows = [{"piece": k, "E_lo": lo, "E_hi": hi, "source": src} for k, (lo, hi) in enumerate(cover.intervals)]
    return report, rows


def _induct(cfg: RunConfig):
    from .induction import InductionParams, evenness_check, run_chain, verify_scale_estimates

    spec, freq = cfg.potential_spec(), cfg.frequency()
    params = InductionParams(tau=cfg.induction_tau, precise=spec.is_trig)
    chain = run_chain(cfg.t, cfg.lam, spec, freq, cfg.scales, params)
    report = [_section("induction.run_chain", [s.to_dict() for s in chain])]
    est = [verify_scale_estimates(a, b, cfg.lam, spec, freq, cfg.epsilon) for a, b in zip(chain, chain[1:])]
    report.append(_section("induction.verify_scale_estimates", est))
    report.append(_section("induction.evenness_check", [evenness_check(s, cfg.lam) for s in chain]))
    rows = [{"i": s.i, "c1": s.c[0], "c2": s.c[1], "radius": s.radius, "r": s.r,
             "source": "induction.run_chain"} for s in chain]
    return report, rows


def _eigen(cfg: RunConfig):
    from .eigen import energy_for_phase

    pair = energy_for_phase(cfg.theta, cfg.lam, cfg.potential_spec(), cfg.frequency(),
                            dc=cfg.diophantine(), n_max=cfg.n_max)
    report = [_section("eigen.energy_for_phase", pair.to_dict())]
    rows = [{"n": int(n), "u_n": float(u), "log_env": float(l), "source": "eigen.build_eigenfunction"}
            for n, u, l in zip(pair.sites, pair.samples, pair.log_abs)]
    if not pair.accepted:
        return report, rows, EXIT_PIPELINE
    return report, rows


def _measure(cfg: RunConfig):
    from .lmeasure import completeness_report

    rep = completeness_report(cfg.theta, cfg.lam, cfg.potential_spec(), cfg.frequency(), cfg.N,
                              cfg.dc.gamma, cfg.dc.tau, kmax=cfg.dc.kmax, n_max=cfg.n_max, epsilon=cfg.epsilon)
    window = rep.pop("report")
    report = [
        _section("lmeasure.lmeasure_window", window.to_dict()),
        _section("lmeasure.completeness_report", rep),
    ]
    rows = [{"m": e.m, "E_m": e.E, "w_m": e.weight, "ok": e.accepted, "source": "lmeasure.lmeasure_window"}
            for e in window.entries]
    return report, rows


def _oracle(cfg: RunConfig):
    from .oracle import finite_box_eigensystem, localized_state_near

    spec, freq = cfg.potential_spec(), cfg.frequency()
    box = finite_box_eigensystem(cfg.theta, cfg.lam, spec, freq, cfg.box_N)
    U = box.eigenvectors
    i0, i1 = box.index_of(0), box.index_of(1)
    src = "spectral_oracle.finite_box_eigensystem"
    rows = [{"index": k, "E": float(box.eigenvalues[k]), "mass_0": float(U[i0, k] ** 2),
             "mass_01": float(0.5 * (U[i0, k] ** 2 + U[i1, k] ** 2)),
             "center": int(box.sites[np.argmax(np.abs(U[:, k]))]), "source": src}
            for k in range(box.eigenvalues.size)]
    report = [_section(src, {"N": cfg.box_N, "eigenvalue_count": int(box.eigenvalues.size)})]
    try:
        E, _u = localized_state_near(cfg.theta, cfg.lam, spec, freq, cfg.box_N)
        report.append(_section("spectral_oracle.localized_state_near", {"E": E, "site": 0}))
    except QPLError as exc:
        report.append(_section("spectral_oracle.localized_state_near", {"error": str(exc)}))
    return report, rows


def _verify(cfg: RunConfig):
    from .acceptance import run_all

    results = run_all(echo=lambda line: print(line, file=sys.stderr))
    report = [_section("acceptance.run_all", [r.to_dict() for r in results])]
    rows = [{"criterion": r.number, "name": r.name, "passed": r.passed, "source": "acceptance.run_all"}
            for r in results]
    code = EXIT_OK if all(r.passed for r in results) else EXIT_PIPELINE
    return report, rows, code


PIPELINES = {
    "spectrum": _spectrum,
    "induct": _induct,
    "eigen": _eigen,
    "measure": _measure,
    "oracle": _oracle,
    "verify": _verify,
}


# ------------------------------------------------------------ argument handling


def _parse_alpha(text: str) -> dict:
    if text == "golden":
        return {"type": "golden"}
    if "/" in text:
        p, q = text.split("/", 1)
        try:
            return {"type": "rational", "p": int(p), "q": int(q)}
        except ValueError:
            raise ConfigError("alpha", f"cannot parse {text!r}") from None
    try:
        return {"type": "value", "x": float(text)}
    except ValueError:
        raise ConfigError("alpha", f"cannot parse {text!r}") from None


def _parse_potential(text: str) -> dict:
    if text == "amo":
        return {"type": "amo"}
    if text.startswith("trig:"):
        try:
            return {"type": "trig", "cos_coeffs": [float(c) for c in text[5:].split(",")]}
        except ValueError:
            raise ConfigError("potential", f"cannot parse {text!r}") from None
    raise ConfigError("potential", f"expected 'amo' or 'trig:c1,c2,...', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qpl", description="Localization machinery for quasiperiodic Schrödinger operators.")
    sub = p.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--alpha", help="golden, a decimal value, or p/q")
    common.add_argument("--potential", help="amo or trig:c1,c2,...")
    common.add_argument("--theta", type=float)
    common.add_argument("--t", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--box-N", dest="box_N", type=int)
    common.add_argument("--q", type=int)
    common.add_argument("--scales", type=int)
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--gamma", type=float)
    common.add_argument("--tau", type=float)
    common.add_argument("--kmax", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--output", help="directory receiving <command>.json and <command>.csv")
    common.add_argument("--format", choices=["json", "csv"], help="stdout format when --output is absent")
    for name in PIPELINES:
        sub.add_parser(name, parents=[common])
    return p


def config_from_args(ns) -> RunConfig:
    base = RunConfig.load(ns.config) if ns.config else RunConfig()
    over = {k: getattr(ns, k) for k in ("lam", "theta", "t", "N", "box_N", "q", "scales", "n_max", "gamma",
                                          "tau", "kmax", "epsilon", "seed", "output", "format")}
    if ns.alpha:
        over["alpha"] = _parse_alpha(ns.alpha)
    if ns.potential:
        over["potential"] = _parse_potential(ns.potential)
    try:
        return base.with_overrides(**over)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _csv_text(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()})
    return buf.getvalue()


def emit(command: str, cfg: RunConfig, sections, rows, status: str) -> None:
    # output location is presentation, not input: leave it out so reruns are byte-identical
    run = {k: v for k, v in cfg.to_dict().items() if k not in ("output", "format")}
    doc = {"command": command, "status": status, "config": run, "sections": sections}
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{command}.json").write_text(text)
        (out / f"{command}.csv").write_text(_csv_text(rows))
    elif cfg.format == "csv":
        sys.stdout.write(_csv_text(rows))
    else:
        sys.stdout.write(text)


def _fail(kind: str, exc: BaseException, code: int) -> int:
    err = {"error": type(exc).__name__, "kind": kind, "module": getattr(exc, "module", None), "message": str(exc)}
    if isinstance(exc, ConfigError):
        err["field"] = exc.field
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
    except _ArgumentError as exc:
        return _fail("config", ConfigError("arguments", str(exc)), EXIT_CONFIG)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    try:
        result = PIPELINES[ns.command](cfg)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except QPLError as exc:
        return _fail("pipeline", exc, EXIT_PIPELINE)
    except Exception as exc:  # noqa: BLE001 - anything else is a bug, reported as such
        return _fail("internal", exc, EXIT_INTERNAL)
    sections, rows, *rest = result
    code = rest[0] if rest else EXIT_OK
    emit(ns.command, cfg, sections, rows, "ok" if code == EXIT_OK else "gate_failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
