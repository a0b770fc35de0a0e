"""Experiment runner: scenario files in, validated artifacts and reports out.

Scenarios are INI-style key = value sections (the reproducibility unit, meant
to be archived next to their outputs).  Every run writes a manifest echoing
the configuration, tolerances, and library versions; numeric result files
contain no timestamps so identical scenarios reproduce bit-identical bytes.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 resource cap.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import DEFAULT, SolverConfig
from .errors import (FlowAbortError, ModelValidationError, NumericalError,
                     ResourceCapError)
from .filters import build_F, build_g, spectral_multiplier, verify_filter
from .flow import (check_samespace, conjugated_hamiltonian, decompose_local,
                   evolve_U, generator_Ds, relbound_of_family,
                   rewrite_global_to_local)
from .models import (CommutingProjectorModel, build_ising, build_toric_code,
                     ground_data, load_model)
from .operators import hermiticity_defect
from .perturb import LocalFamily, random_family, uniform_field
from .spectral import (cluster_bands, dense_spectrum, fit_theorem1, gap_path,
                       check_theorem1, low_spectrum)
from .tqo import estimate_Lstar

EXPERIMENT_KINDS = ("spectrum", "gap-path", "tqo-audit", "flow-audit",
                    "theorem1-sweep", "lemma-suite")


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class Scenario:
    experiment: str
    model: dict
    perturbation: dict
    s_grid: list[float]
    solver: SolverConfig
    out_dir: Path
    formats: tuple[str, ...] = ("csv", "json")
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path, out_override: str | None = None,
                  seed_override: int | None = None) -> "Scenario":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        problems: list[str] = []
        if not read:
            raise ScenarioError([f"cannot read scenario file {path}"])

        def sec(name) -> dict:
            return dict(parser[name]) if parser.has_section(name) else {}

        model = sec("model")
        kind = model.get("kind")
        if kind not in ("toric", "ising", "file"):
            problems.append(f"model.kind must be toric|ising|file, got {kind!r}")
        if kind in ("toric", "ising") and "l" not in model:
            problems.append("model.L is required for builtin models")
        if kind == "file" and "path" not in model:
            problems.append("model.path is required for kind=file")

        pert = sec("perturbation")
        pkind = pert.get("kind", "none")
        if pkind not in ("uniform_field", "random", "none"):
            problems.append(f"perturbation.kind must be uniform_field|random|none, got {pkind!r}")
        if pkind == "uniform_field":
            if "h" not in pert:
                problems.append("perturbation.h is required for uniform_field")
            if pert.get("axis", "X").upper() not in ("X", "Y", "Z"):
                problems.append(f"perturbation.axis must be X|Y|Z, got {pert.get('axis')!r}")
        if pkind == "random":
            for key in ("j", "mu", "r_max"):
                if key not in pert:
                    problems.append(f"perturbation.{key} is required for random families")

        grid_sec = sec("path")
        try:
            if "s_grid" in grid_sec:
                s_grid = [float(v) for v in grid_sec["s_grid"].split(",")]
            else:
                pts = int(grid_sec.get("s_points", "11"))
                s_grid = list(np.linspace(0.0, 1.0, pts))
        except ValueError as exc:
            problems.append(f"path section: {exc}")
            s_grid = [0.0, 1.0]

        solver_kw = {}
        solver_types = {"dense_cap": int, "sparse_cap_qubits": int, "seed": int,
                        "lanczos_max_k": int, "pauli_sweep_cap": int,
                        "tqo_sample_count": int}
        for key, value in sec("solver").items():
            caster = solver_types.get(key, float)
            try:
                solver_kw[key] = caster(value)
            except (ValueError, TypeError):
                problems.append(f"solver.{key}: cannot parse {value!r}")
        try:
            solver = DEFAULT.replace(**solver_kw)
        except TypeError as exc:
            problems.append(f"solver section: {exc}")
            solver = DEFAULT
        if seed_override is not None:
            solver = solver.replace(seed=seed_override)

        exp = sec("experiment")
        exp_kind = exp.get("kind")
        if exp_kind not in EXPERIMENT_KINDS:
            problems.append(
                f"experiment.kind must be one of {', '.join(EXPERIMENT_KINDS)}, got {exp_kind!r}")
        sweep = {}
        if "h_values" in exp:
            try:
                sweep["h_values"] = [float(v) for v in exp["h_values"].split(",")]
            except ValueError:
                problems.append(f"experiment.h_values: cannot parse {exp['h_values']!r}")
        if "sizes" in exp:
            try:
                sweep["sizes"] = [int(v) for v in exp["sizes"].split(",")]
            except ValueError:
                problems.append(f"experiment.sizes: cannot parse {exp['sizes']!r}")
        if "k" in exp:
            sweep["k"] = int(exp["k"])

        out = sec("output")
        out_dir = Path(out_override or out.get("dir", "out"))
        formats = tuple(v.strip() for v in out.get("formats", "csv,json").split(","))
        if problems:
            raise ScenarioError(problems)
        raw = {s: dict(parser[s]) for s in parser.sections()}
        return cls(exp_kind, model, pert, s_grid, solver, out_dir, formats, sweep, raw)

    def build_model(self) -> CommutingProjectorModel:
        kind = self.model["kind"]
        if kind == "toric":
            return build_toric_code(int(self.model["l"]))
        if kind == "ising":
            return build_ising(int(self.model["l"]), int(self.model.get("d", "2")))
        return load_model(self.model["path"])

    def build_family(self, model: CommutingProjectorModel) -> LocalFamily:
        kind = self.perturbation.get("kind", "none")
        if kind == "none":
            return uniform_field(model, "X", 0.0)
        if kind == "uniform_field":
            return uniform_field(model, self.perturbation.get("axis", "X"),
                                 float(self.perturbation["h"]))
        return random_family(model, float(self.perturbation["j"]),
                             float(self.perturbation["mu"]),
                             int(self.perturbation["r_max"]),
                             int(self.perturbation.get("seed", self.solver.seed)))


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def write_json(path: Path, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True,
                                   default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return str(obj)


def cache_dir() -> Path | None:
    env = os.environ.get("TQOLAB_CACHE")
    return Path(env) if env else None


def cached_ground_data(model: CommutingProjectorModel, config: SolverConfig):
    """Ground data, memoized on disk for large models when TQOLAB_CACHE is set."""
    cdir = cache_dir()
    dim = 1 << model.n_qubits
    if cdir is None or dim <= config.dense_cap:
        return ground_data(model, config)
    key = f"ground-{model.name}-n{model.n_qubits}-seed{config.seed}.npz"
    path = cdir / key
    if path.exists():
        data = np.load(path)
        from .models import GroundData
        return GroundData(int(data["degeneracy"]), float(data["gap"]),
                          data["basis"], None, "basis")
    gd = ground_data(model, config)
    cdir.mkdir(parents=True, exist_ok=True)
    np.savez(path, degeneracy=gd.degeneracy, gap=gd.gap, basis=gd.basis)
    return gd


# ---------------------------------------------------------------------------
# experiments


def _spectrum_rows(model, family, scenario):
    config = scenario.solver
    h0 = model.h0_matrix(config)
    v = family.realize(config)
    from .operators import OperatorMatrix
    H = OperatorMatrix.from_matrix(h0.mat + v.mat, model.n_qubits)
    if H.is_dense:
        eigs = np.linalg.eigvalsh(H.toarray())
    else:
        k = scenario.sweep.get("k", min(model.ground_degeneracy + 4, 16))
        eigs = low_spectrum(H, k, config, return_vectors=False).eigenvalues
    bands = cluster_bands(eigs, config.band_threshold)
    rows = []
    for i, val in enumerate(np.sort(eigs)):
        label = next(b.label for b in bands.bands if b.lo - 1e-12 <= val <= b.hi + 1e-12)
        rows.append([i, float(val), label])
    band_payload = {"threshold": bands.threshold, "delta0": bands.delta0,
                    "gap": bands.gap,
                    "bands": [{"label": b.label, "lo": b.lo, "hi": b.hi,
                               "count": b.count} for b in bands.bands]}
    return rows, band_payload


def run_spectrum(scenario: Scenario, out: Path) -> dict:
    model = scenario.build_model()
    family = scenario.build_family(model)
    rows, band_payload = _spectrum_rows(model, family, scenario)
    write_csv(out / "results.csv", ["index", "value", "band"], rows)
    write_json(out / "bands.json", band_payload)
    return {"eigenvalues": len(rows), "delta0": band_payload["delta0"]}


def run_gap_path(scenario: Scenario, out: Path) -> dict:
    model = scenario.build_model()
    family = scenario.build_family(model)
    gp = gap_path(model, family, scenario.s_grid, scenario.solver)
    rows = [[float(s), float(lo), float(hi), float(g)]
            for s, lo, hi, g in zip(gp.s_grid, gp.e_min, gp.e_max, gp.gaps)]
    write_csv(out / "results.csv", ["s", "e_min", "e_max", "gap"], rows)
    write_json(out / "bands.json", {"min_gap": gp.min_gap,
                                    "holds_half": gp.holds(0.5),
                                    "holds_three_quarters": gp.holds(0.75)})
    return {"min_gap": gp.min_gap}


def run_tqo_audit(scenario: Scenario, out: Path) -> dict:
    model = scenario.build_model()
    config = scenario.solver
    dim = 1 << model.n_qubits
    ground = None
    if dim <= config.dense_cap or model.n_qubits <= config.sparse_cap_qubits:
        ground = cached_ground_data(model, config)
    report = estimate_Lstar(model, ground, config)
    rows = []
    for axis, records in (("tqo1", report.tqo1), ("tqo2", report.tqo2)):
        for rec in records:
            rows.append([axis, rec.r, rec.violation, rec.method, rec.status])
    write_csv(out / "results.csv", ["axiom", "r", "violation", "method", "status"], rows)
    write_json(out / "tqo.json", report.as_dict())
    return {"L_star": report.L_star}


def run_theorem1_sweep(scenario: Scenario, out: Path, threads: int = 1) -> dict:
    config = scenario.solver
    sizes = scenario.sweep.get("sizes", [int(scenario.model.get("l", 2))])
    h_values = scenario.sweep.get("h_values", [0.01, 0.02, 0.05])
    kind = scenario.model.get("kind", "toric")

    def point(L, h):
        model = build_toric_code(L) if kind == "toric" else build_ising(
            L, int(scenario.model.get("d", "2")))
        family = uniform_field(model, scenario.perturbation.get("axis", "X"), h)
        h0 = model.h0_matrix(config)
        v = family.realize(config)
        from .operators import OperatorMatrix
        H = OperatorMatrix.from_matrix(h0.mat + v.mat, model.n_qubits)
        if H.is_dense:
            eigs = np.linalg.eigvalsh(H.toarray())
        else:
            eigs = low_spectrum(H, model.ground_degeneracy + 2, config,
                                return_vectors=False).eigenvalues
        bands = cluster_bands(eigs, config.band_threshold)
        shifted = np.sort(eigs) - eigs.min()
        delta_fit = bands.delta0
        c1 = fit_theorem1(shifted, h, delta_fit)
        cov = check_theorem1(shifted, h, c1, delta_fit)
        return [L, h, bands.delta0, bands.bands[0].count, bands.gap,
                c1, delta_fit, cov.covered]

    points = [(L, h) for L in sizes for h in h_values]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda p: point(*p), points))
    else:
        rows = [point(*p) for p in points]
    write_csv(out / "results.csv",
              ["L", "h", "delta0", "band0_count", "gap", "c1_fit", "delta_fit", "covered"],
              rows)
    return {"points": len(rows)}


def run_flow_audit(scenario: Scenario, out: Path) -> dict:
    board = _flow_stages(scenario)
    rows = [[s["name"], s["status"], json.dumps(s.get("margins", {}), sort_keys=True)]
            for s in board]
    write_csv(out / "results.csv", ["stage", "status", "margins"], rows)
    write_json(out / "scoreboard.json", {"stages": board})
    return {"stages": len(board)}


def _flow_stages(scenario: Scenario) -> list[dict]:
    config = scenario.solver
    model = scenario.build_model()
    family = scenario.build_family(model)
    ground = ground_data(model, config)
    stages: list[dict] = []
    filt_F = build_F()
    filt_g = build_g()
    try:
        flow = evolve_U(model, family, 1.0, ground, filt_F, config)
    except FlowAbortError as exc:
        stages.append({"name": "projector-transport", "status": "fail",
                       "margins": {"aborted_at_s": exc.s, "gap": exc.gap}})
        return stages
    dev = check_samespace(flow, model, family, config)
    stages.append({"name": "projector-transport",
                   "status": "pass" if dev <= 1e-6 else "fail",
                   "margins": {"deviation": dev,
                               "unitarity_defect": flow.unitarity_defect}})
    conj = conjugated_hamiltonian(flow, model, family, config)
    stages.append({"name": "conjugated-commutation",
                   "status": "pass" if conj.commutator_with_P <= 1e-6 else "fail",
                   "margins": {"commutator": conj.commutator_with_P,
                               "strength_J": conj.strength.J_measured}})
    rewrite = rewrite_global_to_local(conj.H_prime, model, ground, filt_g, config)
    ok = rewrite.reconstruction_error <= 1e-8 and rewrite.max_commutator_with_P <= 1e-9
    stages.append({"name": "local-rewrite",
                   "status": "pass" if ok else "fail",
                   "margins": rewrite.as_dict()})
    decomps = []
    worst = {"resolution": 0.0, "reconstruction": 0.0, "annihilation": 0.0}
    y_monotone = True
    for site, x_u in rewrite.site_terms.items():
        dec = decompose_local(x_u, model, ground, site, config)
        decomps.append(dec)
        worst["resolution"] = max(worst["resolution"], dec.resolution_error)
        worst["reconstruction"] = max(worst["reconstruction"], dec.reconstruction_error)
        worst["annihilation"] = max(worst["annihilation"], dec.max_annihilation_defect)
        tail = [v for j, v in dec.y_norms if j >= 2]
        y_monotone = y_monotone and all(a >= b - 1e-12 for a, b in zip(tail, tail[1:]))
    ok = (worst["resolution"] <= 1e-12 and worst["reconstruction"] <= 1e-9
          and worst["annihilation"] <= 1e-9)
    stages.append({"name": "block-diagonal-decomposition",
                   "status": "pass" if ok else "fail",
                   "margins": {**worst, "y_monotone": y_monotone}})
    rel = relbound_of_family(decomps, model, ground, config)
    ok = rel.combined.containment is True and rel.total_b < 1.0
    stages.append({"name": "relative-bound-containment",
                   "status": "pass" if ok else "fail",
                   "margins": {"total_b": rel.total_b,
                               "per_radius_b": {str(r): rep.b for r, rep in rel.per_radius.items()},
                               "box_margins": {str(r): m for r, m in rel.box_margins.items()},
                               "containment_margin": rel.combined.margin}})
    return stages


def lemma_suite(scenario: Scenario, out: Path) -> dict:
    """Ordered verification stages with dependency-aware skipping."""
    config = scenario.solver
    stages: list[dict] = []
    model = scenario.build_model()
    stages.append({"name": "model-validation", "status": "pass",
                   "margins": {"n_qubits": model.n_qubits,
                               "terms": len(model.terms),
                               "degeneracy": model.ground_degeneracy}})
    ground = ground_data(model, config)
    tqo_report = estimate_Lstar(model, ground, config, r_cap=2)
    tqo1_ok = bool(tqo_report.tqo1) and tqo_report.tqo1[0].status == "pass"
    tqo2_first = tqo_report.tqo2[0] if tqo_report.tqo2 else None
    tqo2_ok = tqo2_first is None or tqo2_first.status in ("pass", "capped")
    stages.append({"name": "tqo-axioms",
                   "status": "pass" if (tqo1_ok and tqo2_ok) else "fail",
                   "margins": tqo_report.as_dict()})
    filt_F, filt_g = build_F(), build_g()
    rep_f, rep_g = verify_filter(filt_F, config), verify_filter(filt_g, config)
    d0 = generator_Ds(model, scenario.build_family(model), 0.0, filt_F, config)
    herm = hermiticity_defect(d0.mat)
    stages.append({"name": "filter-certification",
                   "status": "pass" if (rep_f.passed and rep_g.passed and herm <= 1e-12) else "fail",
                   "margins": {"F_checks": rep_f.checks, "g_checks": rep_g.checks,
                               "generator_hermiticity": herm}})
    family = scenario.build_family(model)
    gp = gap_path(model, family, scenario.s_grid, config)
    stages.append({"name": "gap-path",
                   "status": "pass" if gp.min_gap >= config.gap_floor else "fail",
                   "margins": {"min_gap": gp.min_gap,
                               "holds_half": gp.holds(0.5),
                               "holds_three_quarters": gp.holds(0.75)}})
    if gp.min_gap < config.gap_floor:
        for name in ("projector-transport", "conjugated-commutation", "local-rewrite",
                     "block-diagonal-decomposition", "relative-bound-containment",
                     "band-coverage"):
            stages.append({"name": name, "status": "skipped",
                           "reason": "gap below floor along the path"})
        return _finish_suite(stages, out)
    flow_stages = _flow_stages(scenario)
    tqo_dependent = {"block-diagonal-decomposition", "relative-bound-containment"}
    for st in flow_stages:
        if not tqo1_ok and st["name"] in tqo_dependent:
            stages.append({"name": st["name"], "status": "not-applicable",
                           "reason": "scalar-block axiom fails; shifted terms cannot annihilate P"})
        else:
            stages.append(st)
    h0 = model.h0_matrix(config)
    v = family.realize(config)
    from .operators import OperatorMatrix
    H = OperatorMatrix.from_matrix(h0.mat + v.mat, model.n_qubits)
    eigs = (np.linalg.eigvalsh(H.toarray()) if H.is_dense
            else low_spectrum(H, model.ground_degeneracy + 4, config,
                              return_vectors=False).eigenvalues)
    bands = cluster_bands(eigs, config.band_threshold)
    J = family.strength_J
    delta_fit = bands.delta0
    c1 = fit_theorem1(np.sort(eigs) - eigs.min(), J, delta_fit) if J > 0 else 0.0
    cov = check_theorem1(eigs, J if J > 0 else 1.0, c1, delta_fit)
    stages.append({"name": "band-coverage",
                   "status": "pass" if cov.covered else "fail",
                   "margins": {"c1_fit": c1, "delta_fit": delta_fit,
                               "min_margin": float(cov.margins.min())}})
    return _finish_suite(stages, out)


def _finish_suite(stages: list[dict], out: Path) -> dict:
    overall = all(s["status"] in ("pass", "capped", "not-applicable", "skipped")
                  for s in stages)
    board = {"stages": stages, "overall_pass": overall}
    write_json(out / "scoreboard.json", board)
    rows = [[s["name"], s["status"], json.dumps(s.get("margins", s.get("reason", {})),
                                                sort_keys=True, default=_json_default)]
            for s in stages]
    write_csv(out / "results.csv", ["stage", "status", "detail"], rows)
    return {"overall_pass": overall, "stages": len(stages)}


RUNNERS = {
    "spectrum": run_spectrum,
    "gap-path": run_gap_path,
    "tqo-audit": run_tqo_audit,
    "flow-audit": run_flow_audit,
    "lemma-suite": lemma_suite,
}


def run(scenario: Scenario, threads: int = 1) -> int:
    out = scenario.out_dir
    t0 = time.perf_counter()
    try:
        if scenario.experiment == "theorem1-sweep":
            summary = run_theorem1_sweep(scenario, out, threads)
        else:
            summary = RUNNERS[scenario.experiment](scenario, out)
    except (ScenarioError, ModelValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FlowAbortError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    elapsed = time.perf_counter() - t0
    manifest = {
        "scenario": scenario.raw,
        "experiment": scenario.experiment,
        "solver": {k: getattr(scenario.solver, k)
                   for k in scenario.solver.__dataclass_fields__},
        "versions": {"tqolab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": sys.version.split()[0]},
        "elapsed_seconds": elapsed,
        "summary": summary,
    }
    write_json(out / "manifest.json", manifest)
    lines = [f"experiment: {scenario.experiment}", f"status: ok"]
    lines += [f"{k}: {v}" for k, v in summary.items()]
    _atomic_write(out / "summary.txt", "\n".join(lines) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tqolab",
                                     description="desk-scale gap-stability laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None)
    p_val = sub.add_parser("validate", help="validate a model file")
    p_val.add_argument("model_file")
    p_suite = sub.add_parser("suite", help="run the lemma suite for a scenario")
    p_suite.add_argument("scenario")
    p_suite.add_argument("--out", default=None)
    p_suite.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            model = load_model(args.model_file)
        except ModelValidationError as exc:
            print(f"invalid model: {exc}", file=sys.stderr)
            return 1
        print(f"{model.name}: {model.n_qubits} qubits, {len(model.terms)} terms, "
              f"degeneracy {model.ground_degeneracy}")
        return 0

    try:
        scenario = Scenario.from_file(args.scenario, args.out, args.seed)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"scenario error: {problem}", file=sys.stderr)
        return 1
    if args.command == "suite":
        scenario.experiment = "lemma-suite"
    return run(scenario, getattr(args, "threads", 1))


if __name__ == "__main__":
    sys.exit(main())
