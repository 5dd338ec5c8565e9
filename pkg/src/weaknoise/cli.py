"""Config-driven experiment runner.

Usage::

    weaknoise SUBCOMMAND --config PATH [--seed N] [--out DIR] [--assert]

Subcommands: ``weakvalue``, ``bias-sweep``, ``learn``, ``protocol``,
``lindblad``, ``haar``.  Configs are JSON; complex numbers are ``[re, im]``
pairs.  Every run writes ``<subcommand>.json`` (sorted keys, config hash,
tool version) plus CSV tables where relevant.

Exit codes: 0 success, 2 config error, 3 domain error, 4 ``--assert`` check
failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, haar, learning, lindblad, linalg, protocols
from .channels import ChannelSpec, build_channel
from .errors import ConfigError, WeakNoiseError
from .weakvalue import bias_first_order_analytic, bias_first_order_numeric, noisy_weak_value, weak_value

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_ASSERT = 0, 2, 3, 4
SUBCOMMANDS = ("weakvalue", "bias-sweep", "learn", "protocol", "lindblad", "haar")
DEFAULT_GAMMAS = [float(g) for g in np.geomspace(1e-3, 1e-1, 8)]
NAMED_OPERATORS = {"I": linalg.I2, "X": linalg.X, "Y": linalg.Y, "Z": linalg.Z}


# -- config parsing -------------------------------------------------------------

def _complex(value, field):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(field, f"expected a number or [re, im] pair, got {value!r}")


def _matrix(value, field):
    if isinstance(value, str):
        if value in NAMED_OPERATORS:
            return NAMED_OPERATORS[value].copy()
        raise ConfigError(field, f"unknown named operator {value!r}; expected one of {sorted(NAMED_OPERATORS)}")
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(field, "expected a square matrix given as rows of [re, im] pairs")
    m = np.array([[_complex(x, field) for x in row] for row in value], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(field, f"matrix must be square, got shape {m.shape}")
    return m


def parse_operator(value, field="operator"):
    m = _matrix(value, field)
    try:
        return linalg.validate_hermitian(m)
    except WeakNoiseError as exc:
        raise ConfigError(field, str(exc)) from None


def parse_state(value, field):
    """Named state, amplitude list ``[[re, im], ...]`` or density matrix rows."""
    if isinstance(value, str):
        if value == "maximally_mixed":
            return linalg.maximally_mixed(2)
        if value in linalg.NAMED_KETS:
            return linalg.NAMED_KETS[value]
        raise ConfigError(field, f"unknown named state {value!r}")
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "expected a named state, amplitudes or density-matrix rows")
    try:
        if all(isinstance(v, list) and v and isinstance(v[0], list) for v in value):
            return linalg.validate_density(_matrix(value, field))
        return linalg.validate_pure(np.array([_complex(v, field) for v in value]), tol=1e-9)
    except ConfigError:
        raise
    except WeakNoiseError as exc:
        raise ConfigError(field, str(exc)) from None


def parse_channel(value, field="channel"):
    if not isinstance(value, dict):
        raise ConfigError(field, "expected an object with a 'kind' field")
    try:
        return ChannelSpec.from_dict(_decode_channel(value, field))
    except (KeyError, TypeError) as exc:
        raise ConfigError(field, f"malformed channel: {exc}") from None
    except WeakNoiseError as exc:
        raise ConfigError(field, str(exc)) from None


def _named_unitary(value, field):
    if not isinstance(value, str):
        return value
    named = {"hadamard": linalg.HADAMARD, **{k.lower(): v for k, v in NAMED_OPERATORS.items()}}
    if value.lower() not in named:
        raise ConfigError(field, f"unknown named unitary {value!r}")
    return [[[z.real, z.imag] for z in row] for row in named[value.lower()]]


def _decode_channel(d, field):
    out = dict(d)
    if "unitary" in out:
        out["unitary"] = _named_unitary(out["unitary"], field)
    if "unitaries" in out:
        out["unitaries"] = [_named_unitary(u, field) for u in out["unitaries"]]
    if "components" in out:
        out["components"] = [{"channel": _decode_channel(c["channel"], field), "weight": c["weight"]} for c in out["components"]]
    return out


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise ConfigError(key, "required field is missing")
    v = cfg[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(key, f"expected {kind.__name__ if isinstance(kind, type) else kind}, got {type(v).__name__}")
    return v


def _number(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(key, "required field is missing")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    return v


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# -- output helpers -----------------------------------------------------------------

def _c(z):
    z = complex(z)
    return [z.real, z.imag]


def _fmt(z):
    z = complex(z)
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.12g}"
    return f"{z.real:.12g}{z.imag:+.12g}j"


def _json_safe(x):
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def _write_json(out: Path, name: str, payload: dict, cfg: dict):
    payload = dict(payload)
    payload["config_hash"] = config_hash(cfg)
    payload["tool_version"] = __version__
    text = json.dumps(_json_safe(payload), sort_keys=True, indent=2) + "\n"
    (out / name).write_text(text, encoding="utf-8")


def _matrix_json(m):
    return [[_c(z) for z in row] for row in np.asarray(m)]


# -- subcommands --------------------------------------------------------------------

def _cmd_weakvalue(cfg, out, args):
    a = parse_operator(_require(cfg, "operator"))
    pre, post = parse_state(_require(cfg, "pre"), "pre"), parse_state(_require(cfg, "post"), "post")
    aw = weak_value(a, pre, post)
    print(f"A_w = {_fmt(aw.value)}")
    payload = {"weak_value": _c(aw.value), "overlap": aw.overlap}
    ok = True
    if "channel" in cfg:
        spec = parse_channel(cfg["channel"])
        gamma = _number(cfg, "gamma")
        noisy = noisy_weak_value(a, pre, post, build_channel(spec, gamma))
        an = bias_first_order_analytic(a, pre, post, spec).delta
        nu = bias_first_order_numeric(a, pre, post, spec).delta
        print(f"A_w,E = {_fmt(noisy.value)}  (gamma = {gamma:g})")
        print(f"bias analytic = {_fmt(an)}")
        print(f"bias numeric  = {_fmt(nu)}")
        payload.update({"noisy_weak_value": _c(noisy.value), "gamma": gamma,
                        "bias_analytic": _c(an), "bias_numeric": _c(nu)})
        ok = abs(an - nu) <= 1e-6
        payload["check"] = {"name": "analytic_vs_numeric_bias", "passed": ok}
    _write_json(out, "weakvalue.json", payload, cfg)
    return ok


def _protocol_runner(cfg, theorem):
    protocol = cfg.get("protocol", "wvmp")
    if protocol == "wvmp":
        return learning.wvmp_runner(theorem, readout=cfg.get("readout", "complex")), protocol
    if protocol == "strong":
        states = [parse_state(s, "pre_states") for s in cfg.get("pre_states", [])] or learning.informationally_complete_states()
        return learning.strong_runner(states), protocol
    if protocol == "strong_postselect":
        raw = cfg.get("pairs")
        if raw is None:
            mm = linalg.maximally_mixed(2)
            pairs = [(mm, linalg.NAMED_KETS[n]) for n in ("zero", "one", "plus", "plus_i")]
        else:
            pairs = [(parse_state(p[0], "pairs"), parse_state(p[1], "pairs")) for p in raw]
        return learning.strong_postselect_runner(pairs), protocol
    raise ConfigError("protocol", f"expected wvmp, strong or strong_postselect, got {protocol!r}")


def _sweep(cfg, theorem):
    a = parse_operator(_require(cfg, "operator"))
    spec = parse_channel(_require(cfg, "channel"))
    gammas = cfg.get("gammas", DEFAULT_GAMMAS)
    if not isinstance(gammas, list):
        raise ConfigError("gammas", "expected a list of numbers")
    runner, protocol = _protocol_runner(cfg, theorem)
    report = learning.bias_order_fit(runner, a, spec, gammas)
    return a, spec, runner, protocol, report


def _cmd_bias_sweep(cfg, out, args):
    theorem = cfg.get("theorem", "T1")
    _, _, _, protocol, report = _sweep(cfg, theorem)
    report.to_csv(out / "bias_sweep.csv")
    _write_json(out, "bias-sweep.json", {"protocol": protocol, "theorem": theorem, **report.summary()}, cfg)
    print(f"protocol = {protocol}  slope = {report.fitted_slope:g}  verdict = {report.verdict}")
    expected = cfg.get("expect_verdict")
    return report.verdict == expected if expected else report.verdict in ("exact", "second_order")


def _cmd_learn(cfg, out, args):
    theorem = cfg.get("theorem")
    if theorem is None:
        raise ConfigError("theorem", "required (config field or --theorem)")
    gamma = _number(cfg, "gamma", 0.1)
    a, spec, runner, protocol, report = _sweep(cfg, theorem)
    result = runner(a, build_channel(spec, gamma))
    report.to_csv(out / "learn_sweep.csv")
    err = result.per_element_error
    payload = {
        "theorem": theorem,
        "protocol": protocol,
        "gamma": gamma,
        "a_hat": _matrix_json(result.a_hat),
        "per_element_error": [[None if np.isnan(e) else float(e) for e in row] for row in err],
        "max_error": result.max_error,
        "sweep": report.summary(),
    }
    _write_json(out, "learn.json", payload, cfg)
    print(f"max per-element error at gamma = {gamma:g}: {result.max_error:.3e}")
    print(f"verdict = {report.verdict}")
    return report.verdict in ("exact", "second_order")


def _cmd_protocol(cfg, out, args):
    a = parse_operator(_require(cfg, "operator"))
    pre = parse_state(_require(cfg, "pre"), "pre")
    post = None if cfg.get("post") is None else parse_state(cfg["post"], "post")
    pc = _require(cfg, "probe", dict)
    probe = protocols.GaussianProbe(_number(pc, "spread"), _number(pc, "coupling"))
    dist = protocols.postselected_probe_distribution(a, pre, post, probe, pc.get("grid_points"), pc.get("half_width"))
    n = int(_number(cfg, "samples", 100_000))
    draws = protocols.sample_probe(dist, n, cfg["seed"])
    dist.to_csv(out / "probe_distribution.csv")
    smean, svar = float(np.mean(draws)), float(np.var(draws, ddof=1))
    se = float(np.sqrt(svar / n))
    payload = {"postselect_prob": dist.postselect_prob, "mean": dist.mean, "variance": dist.variance,
               "samples": n, "sample_mean": smean, "sample_variance": svar, "ratio_g_over_spread": probe.ratio}
    if post is not None:
        payload["wvmp_prediction"] = probe.coupling * weak_value(a, pre, post).real
    _write_json(out, "protocol.json", payload, cfg)
    print(f"grid mean = {dist.mean:.10g}  variance = {dist.variance:.10g}  postselect_prob = {dist.postselect_prob:.10g}")
    print(f"sample mean = {smean:.10g} +/- {se:.2g}")
    return abs(smean - dist.mean) <= 4 * se


def _cmd_lindblad(cfg, out, args):
    a = parse_operator(_require(cfg, "operator"))
    lc = cfg.get("lindblad", {})
    probe = lindblad.DiscretizedProbe(int(lc.get("points", 32)), float(lc.get("half_width", 10.0)), float(lc.get("spread", 1.0)))
    jumps = lc.get("jump_operators", [{"op": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]], "rate": 1.0}])
    ops = [(_matrix(j["op"], "lindblad.jump_operators"), j.get("rate", 1.0)) for j in jumps]
    params = lc.get("params", [[0.01, 0.01], [0.005, 0.005], [0.0025, 0.0025]])
    t = float(lc.get("t", 1.0))
    rows = lindblad.error_sweep(a, probe, ops, params, t)
    lindblad.sweep_to_csv(rows, out / "lindblad_sweep.csv")
    ratios = [r.error / r.predicted if r.predicted > 0 else float("nan") for r in rows]
    payload = {"rows": [{"g_t": r.g_t, "gamma_t": r.gamma_t, "error": r.error, "predicted": r.predicted} for r in rows],
               "ratio_error_to_predicted": ratios}
    _write_json(out, "lindblad.json", payload, cfg)
    for r, q in zip(rows, ratios):
        print(f"g_t = {r.g_t:g}  gamma_t = {r.gamma_t:g}  error = {r.error:.6e}  predicted = {r.predicted:.6e}  ratio = {q:.4f}")
    return all(np.isfinite(q) and abs(q - 1) <= 0.2 for q in ratios)


def _cmd_haar(cfg, out, args):
    a = parse_operator(_require(cfg, "operator"))
    pre, post = parse_state(_require(cfg, "pre"), "pre"), parse_state(_require(cfg, "post"), "post")
    n = int(_number(cfg, "samples", 200_000))
    eps = float(_number(cfg, "epsilon", haar.DEFAULT_EPSILON))
    stats = haar.mc_delta_stats(a, pre, post, n, cfg["seed"], eps)
    payload = stats.summary()
    ok = stats.mean_z() <= 3 and stats.second_moment_z() <= 3
    try:
        cheb = haar.chebyshev_check(stats, eps)
        payload["chebyshev"] = {"bound": cheb.bound, "empirical": cheb.empirical, "satisfied": cheb.satisfied}
        ok = ok and cheb.satisfied
    except WeakNoiseError as exc:
        payload["chebyshev"] = {"error": str(exc)}
    _write_json(out, "haar.json", payload, cfg)
    print(f"mean = {_fmt(stats.mean_est)} (theory {_fmt(stats.theory_mean)}, z = {stats.mean_z():.2f})")
    print(f"second moment = {stats.second_moment_est:.6g} (theory {stats.theory_second_moment:.6g}, z = {stats.second_moment_z():.2f})")
    return ok


COMMANDS = {
    "weakvalue": _cmd_weakvalue,
    "bias-sweep": _cmd_bias_sweep,
    "learn": _cmd_learn,
    "protocol": _cmd_protocol,
    "lindblad": _cmd_lindblad,
    "haar": _cmd_haar,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weaknoise", description="Weak-value measurement under noise.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--assert", dest="check", action="store_true", help="exit 4 if the run's checks fail")
        if name == "learn":
            p.add_argument("--theorem", choices=["T1", "T2", "T3", "T1_Pauli", "T2_Unital", "T3_ADPD"])
            p.add_argument("--gamma", type=float)
    return parser


def run(command: str, cfg: dict, out, args) -> int:
    """Execute one subcommand on a parsed config; returns the exit code."""
    if args.seed is not None:
        cfg = {**cfg, "seed": args.seed}
    for flag in ("theorem", "gamma"):
        if getattr(args, flag, None) is not None:
            cfg = {**cfg, flag: getattr(args, flag)}
    seed = _require(cfg, "seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ok = COMMANDS[command](cfg, out, args)
    if args.check and not ok:
        print("check failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(args.command, cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeakNoiseError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
