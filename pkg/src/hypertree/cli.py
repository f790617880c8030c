"""Command-line front door: `hypertree <suite> --spec <file> --out <dir>`.

Suites: collapse, wavelet, embed, protocol, separation. Specs are flat
key-value files (`key = value`; comma lists; `lo..hi` integer ranges;
`#` comments). Every run writes spec.json (an echo of the parsed spec), one
CSV per suite, and summary.json with per-check pass/fail. Outputs are
byte-identical for identical (spec, version): all numbers print in shortest
round-trip form and nothing time- or host-dependent is recorded.

Exit codes: 0 ok, 1 spec error, 2 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import euclidean, hyperbolic, protocol, trees, wavelets

SUITES = ("collapse", "wavelet", "embed", "protocol", "separation")


class SpecError(ValueError):
    """Invalid experiment spec; message carries line-precise diagnostics."""


def _parse_value(text):
    text = text.strip()
    if text == "":
        return []  # empty grid
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t.strip()]
    if re.fullmatch(r"-?\d+\.\.-?\d+", text):
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_spec_file(path):
    """Flat key-value spec: returns {key: (value, line_number)}."""
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError(f"line {lineno}: expected `key = value`, got {raw.rstrip()!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key in entries:
                raise SpecError(f"line {lineno}: duplicate key {key!r}")
            entries[key] = (_parse_value(val), lineno)
    return entries


@dataclass
class ExperimentSpec:
    suite: str
    params: dict
    lines: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: Path = Path(".")
    threads: int = 1

    def get(self, key, default=None):
        return self.params.get(key, default)

    def line(self, key):
        return self.lines.get(key, "?")

    def as_list(self, key, default=None):
        v = self.params.get(key, default)
        if v is None:
            return []
        return v if isinstance(v, list) else [v]


def load_spec(suite, path, seed_override=None, out_dir=".", threads=1) -> ExperimentSpec:
    entries = parse_spec_file(path)
    params = {k: v for k, (v, _) in entries.items()}
    lines = {k: ln for k, (_, ln) in entries.items()}
    seed = params.pop("seed", 0)
    if seed_override is not None:
        seed = seed_override
    return ExperimentSpec(suite=suite, params=params, lines=lines,
                          seed=int(seed), out_dir=Path(out_dir),
                          threads=max(1, int(threads)))


def _validate_split(spec: ExperimentSpec):
    """(errors, warnings) for an experiment spec; never mutates state."""
    errors, warnings = [], []
    p = spec.params

    def note(bucket, key, msg):
        bucket.append(f"line {spec.line(key)}: {msg}")

    rho = p.get("rho")
    if rho is not None and not 0.0 < rho < 0.5:
        note(errors, "rho", f"noise rho = {rho} is outside (0, 1/2)"
             + (" (channel capacity zero)" if rho == 0.5 else ""))
    m_vals = spec.as_list("m", p.get("m"))
    eta = p.get("eta")
    if eta is not None:
        for m in m_vals or [2]:
            if not 0.0 < eta < 0.25 * math.log(m):
                note(errors, "eta", f"eta = {eta} outside (0, log({m})/4 = "
                                    f"{0.25 * math.log(m):.6g})")
                break
    cap = trees.leaf_cap()
    for m in m_vals or []:
        for R in spec.as_list("R"):
            if m ** R > cap:
                note(errors, "R", f"m^R = {m ** R} exceeds leaf cap {cap}; "
                                  f"required cap {m ** R}")
                break
    kappa = p.get("kappa")
    eps = p.get("eps")
    if kappa is not None and isinstance(kappa, (int, float)) and eps and m_vals:
        delta_deg = max(m_vals) + 1
        required = math.log(delta_deg) / eps
        if math.sqrt(kappa) < required:
            # soft: the unspecified cap constant means this is a heuristic;
            # the distortion check itself decides pass/fail
            note(warnings, "kappa",
                 f"sqrt(kappa) = {math.sqrt(kappa):.4g} below the nominal "
                 f"curvature condition log(Delta)/eps = {required:.4g} (C_k = 1)")
    return errors, warnings


def validate(spec: ExperimentSpec):
    """All diagnostics (hard errors first), as printable strings."""
    errors, warnings = _validate_split(spec)
    return errors + warnings


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    path.write_text("\n".join(lines) + "\n")


# -- suites -------------------------------------------------------------------

def _suite_wavelet(spec: ExperimentSpec):
    m = spec.get("m", 2)
    R = spec.get("R", 4)
    ks = spec.as_list("k", [1])
    eps = spec.get("eps", 0.5)
    n_sub = spec.get("subspaces", 1)
    basis = wavelets.build_wavelets(m, R)
    gram = wavelets.gram_check(basis)
    rows = []
    bound_ok = True
    for k in ks:
        for s_idx in range(n_sub):
            seed = spec.seed + 1000 * s_idx + k
            S = wavelets.Subspace.random(basis.N, k, seed=seed)
            rep = wavelets.alignment(basis, S)
            frac, implied = wavelets.fraction_approximated(basis, S, eps)
            bound_ok &= rep.within_bound
            for w_idx in range(len(basis)):
                rows.append({
                    "m": m, "R": R, "k": k, "seed": seed, "wavelet": w_idx,
                    "alignment": float(rep.per_wavelet[w_idx]),
                    "avg_alignment": rep.average, "bound": rep.bound,
                    "fraction_eps": frac, "implied_k_bound": implied,
                })
    header = ["m", "R", "k", "seed", "wavelet", "alignment", "avg_alignment",
              "bound", "fraction_eps", "implied_k_bound"]
    checks = {
        "gram_deviation_below_1e-10": gram.max_deviation <= 1e-10,
        "wavelet_count_is_N_minus_1": len(basis) == basis.N - 1,
        "alignment_bound_held": bool(bound_ok),
    }
    return "wavelet.csv", header, rows, checks, {"gram_max_deviation": gram.max_deviation}


def _suite_embed(spec: ExperimentSpec):
    m = spec.get("m", 3)
    R = spec.get("R", 4)
    k = spec.get("k", 2)
    eps = spec.get("eps", 0.1)
    lam = spec.get("lam", 1.0)
    tree = trees.build_mary(m, R, lam)
    kappa = spec.get("kappa", "calibrate")
    if kappa == "calibrate":
        cal = hyperbolic.calibrate_curvature(tree, k=k, eps=eps)
        kappa = cal.kappa
    emb = hyperbolic.sarkar_embed(tree, k=k, kappa=float(kappa), eps=eps)
    rep = hyperbolic.distortion(tree, emb)
    rows = []
    for v in range(emb.n_nodes):
        pt = emb.point(v)
        coords = pt.cartesian if pt.cartesian is not None else \
            math.tanh(0.5 * pt.radius * math.sqrt(emb.kappa)) * pt.direction
        row = {"node_id": v, "polar_radius": float(pt.radius)}
        for i in range(k):
            row[f"coord_{i}"] = float(coords[i])
        rows.append(row)
    header = ["node_id"] + [f"coord_{i}" for i in range(k)] + ["polar_radius"]
    checks = {
        "distortion_within_1_plus_eps": rep.D <= 1.0 + eps + 1e-9,
        "edge_lengths_within_1e-6": float(emb.edge_length_errors().max()) <= 1e-6,
    }
    meta = {"kappa": emb.kappa, "tau": emb.tau, "k": k, "eps": eps,
            "distortion": {"D": rep.D, "worst_expansion": rep.worst_expansion,
                           "worst_contraction": rep.worst_contraction,
                           "n_pairs": rep.n_pairs, "exact": rep.exact}}
    return "embed.csv", header, rows, checks, meta


def _collapse_row(args):
    m, R, k, B, eta, seed, strategy = args
    tree = trees.build_mary(m, R, 1.0)
    emb = euclidean.embed_euclidean(tree, k=k, B=B, strategy=strategy, seed=seed)
    col = euclidean.find_collision(tree, emb, eta=eta)
    cut = euclidean.canonical_cut(tree, col.leaf_u, col.leaf_v)
    lip = euclidean.required_readout_lipschitz(cut, emb, col.leaf_u, col.leaf_v)
    return {"m": m, "R": R, "k": k, "B": B, "eta": eta, "seed": seed,
            "strategy": strategy, "euclid_dist": col.euclid_dist,
            "bound": col.bound, "corr_dist": col.corr_dist,
            "lip_lower_bound": lip}


def _suite_collapse(spec: ExperimentSpec):
    m = spec.get("m", 2)
    Rs = spec.as_list("R", [8])
    k = spec.get("k", 2)
    B = spec.get("B", 1.0)
    eta = spec.get("eta", 0.1)
    n_seeds = spec.get("seeds", 5)
    strategy = spec.get("strategy", "random_uniform")
    tasks = [(m, R, k, B, eta, spec.seed + s, strategy)
             for R in Rs for s in range(n_seeds)]
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            rows = list(pool.map(_collapse_row, tasks))
    else:
        rows = [_collapse_row(t) for t in tasks]
    header = ["m", "R", "k", "B", "eta", "seed", "strategy", "euclid_dist",
              "bound", "corr_dist", "lip_lower_bound"]
    checks = {"corr_dist_at_least_lambda_R":
              all(r["corr_dist"] >= r["R"] - 1e-9 for r in rows)}
    slope = math.nan
    if len(Rs) >= 3 and rows:
        by_R = {R: [] for R in Rs}
        for r in rows:
            by_R[r["R"]].append(math.log(max(r["euclid_dist"], 1e-300)))
        xs = np.array(sorted(by_R))
        ys = np.array([np.mean(by_R[R]) for R in xs])
        slope = float(np.polyfit(xs, ys, 1)[0])
        target = -(math.log(m) - 4 * eta) / (2 * k)
        checks["collapse_slope_at_most_target_plus_0.1"] = slope <= target + 0.1
    return "collapse.csv", header, rows, checks, {"log_distance_slope": slope}


def _suite_protocol(spec: ExperimentSpec):
    m = spec.get("m", 2)
    Rs = spec.as_list("R", [6])
    rho = spec.get("rho", 0.1)
    delta = spec.get("delta", 0.1)
    trials = spec.get("trials", 200)
    c = spec.get("c", 1.0)
    rows = []
    for i, R in enumerate(Rs):
        cal = protocol.calibrate_sample_complexity(m, R, rho, delta=delta,
                                                   trials=trials,
                                                   seed=spec.seed + i)
        fano = protocol.fano_constants(m, R, rho, c=c)
        pack = protocol.vg_packing(m, R, seed=spec.seed + i,
                                   candidates=spec.get("candidates", 1024))
        rows.append({"m": m, "R": R, "rho": rho, "delta": delta,
                     "seed": spec.seed + i, "trials": trials, "mode": "oracle",
                     "n_star": cal.n_star, "success_rate": cal.success_rate,
                     "beta": fano.beta, "n_lower": fano.n_lower,
                     "kl_cap_adjacent": fano.kl_cap_adjacent,
                     "packing_log_size": pack.log_size,
                     "packing_log_target": pack.packing_log_target})
    header = ["m", "R", "rho", "delta", "seed", "trials", "mode", "n_star",
              "success_rate", "beta", "n_lower", "kl_cap_adjacent",
              "packing_log_size", "packing_log_target"]
    checks = {"all_calibrations_converged":
              all(math.isfinite(r["n_star"]) for r in rows),
              "success_at_least_1_minus_delta":
              all(r["success_rate"] >= 1 - delta for r in rows)}
    return "protocol.csv", header, rows, checks, {}


def _suite_separation(spec: ExperimentSpec):
    rows = protocol.separation_experiment(
        spec.as_list("R", [4, 6, 8]), m=spec.get("m", 2), k=spec.get("k", 2),
        B=spec.get("B", 1.0), rho=spec.get("rho", 0.1),
        eps=spec.get("eps", 0.1), delta=spec.get("delta", 0.1),
        eta=spec.get("eta", 0.1), seed=spec.seed,
        trials=spec.get("trials", 200), mode=spec.get("mode", "oracle"))
    header = ["m", "R", "k", "B", "rho", "eps", "delta", "eta", "seed", "mode",
              "n_star", "success_at_n_star", "euclid_dist", "bound",
              "corr_dist", "lip_lower_bound"]
    checks = {"hyperbolic_calibrations_converged":
              all(math.isfinite(r["n_star"]) for r in rows)}
    if len(rows) >= 2:
        lips = [r["lip_lower_bound"] for r in rows if math.isfinite(r["lip_lower_bound"])]
        checks["euclidean_lipschitz_grows"] = lips == sorted(lips) or \
            (len(lips) >= 2 and lips[-1] > lips[0])
    return "separation.csv", header, rows, checks, {}


_SUITE_FN = {"wavelet": _suite_wavelet, "embed": _suite_embed,
             "collapse": _suite_collapse, "protocol": _suite_protocol,
             "separation": _suite_separation}


def run(spec: ExperimentSpec) -> int:
    """Execute a suite; returns the process exit code.

    All artifacts are buffered and written together at the end, so a failed
    run leaves no partial outputs.
    """
    errors, warnings = _validate_split(spec)
    for d in warnings:
        print(f"spec warning: {d}", file=sys.stderr)
    if errors:
        for d in errors:
            print(f"spec error: {d}", file=sys.stderr)
        return 1
    try:
        csv_name, header, rows, checks, extra = _SUITE_FN[spec.suite](spec)
    except (ValueError, OverflowError, trees.LeafCapError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 1
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"suite": spec.suite, "seed": spec.seed, "threads": spec.threads,
            "params": spec.params}
    (spec.out_dir / "spec.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n")
    _write_csv(spec.out_dir / csv_name, header, rows)
    ok = all(checks.values())
    summary = {"suite": spec.suite, "checks": checks, "ok": ok, "extra": extra}
    (spec.out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for name, result in checks.items():
        print(f"[{'PASS' if result else 'FAIL'}] {name}")
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypertree",
        description="tree embedding and sample-complexity experiment suites")
    parser.add_argument("suite", choices=SUITES)
    parser.add_argument("--spec", required=True, help="flat key-value spec file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the spec's master seed")
    args = parser.parse_args(argv)
    try:
        spec = load_spec(args.suite, args.spec, seed_override=args.seed,
                         out_dir=args.out, threads=args.threads)
    except (OSError, SpecError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 1
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
