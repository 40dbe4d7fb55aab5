"""Experiment plan files.

Plans are line-oriented ``key = value`` files grouped in ``[sections]`` (a
TOML subset, parsed with :mod:`configparser`). Values are Python/TOML
literals: numbers, quoted strings, lists, ``true``/``false``. Example::

    [plan]
    name = "cross_domain"
    seeds = [0, 1, 2, 3, 4]
    backends = ["cos", "plda"]
    adaptation = ["none", "coral_plus"]

    [truth]
    dim = 32
    psi_min = 0.05
    psi_max = 5.0

    [train.0]
    n_speakers = 300
    n_sessions = 10

    [test]
    kind = "cross"
    n_speakers = 300
    n_sessions = 10

Domain sections (``train.N``, ``test``) take ``kind`` = ``identity`` |
``cross`` | ``truncation``. Cross domains accept ``scale_min``,
``scale_max``, ``shift_norm``, ``rotate``; truncation domains accept
``nonlinearity`` and either ``offset`` or ``offset_sigma`` (in units of the
generator's per-coordinate std). ``domain_seed`` defaults to ``1000 + seed``
so that train and test truncation sections describe the same domain.
An optional ``sweep_offset_sigma`` list in ``[plan]`` repeats the plan for
each truncation strength.
"""
from __future__ import annotations

import ast
import configparser
import csv
from dataclasses import dataclass, replace

from .adaptation import AdaptConfig
from .core import DataError
from .plda import PldaFitConfig
from .synthlab import DomainSample, DomainSpec, ExperimentPlan, GeneratorModel, default_truth, run_condition


def _value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(raw.replace("true", "True").replace("false", "False"))
    except (ValueError, SyntaxError):
        return raw


def _section(cp, name) -> dict:
    return {k: _value(v) for k, v in cp.items(name)}


@dataclass
class DomainTemplate:
    kind: str
    params: dict
    n_speakers: int
    n_sessions: int

    def build(self, truth: GeneratorModel, seed: int, offset_sigma: float | None = None) -> DomainSample:
        p = self.params
        dseed = int(p.get("domain_seed", 1000 + seed))
        if self.kind == "identity":
            spec = DomainSpec()
        elif self.kind == "cross":
            spec = DomainSpec.cross_domain(
                truth.dim, dseed,
                scale_range=(float(p.get("scale_min", 0.5)), float(p.get("scale_max", 2.0))),
                shift_norm=float(p.get("shift_norm", 1.0)),
                rotate=bool(p.get("rotate", False)),
            )
        elif self.kind == "truncation":
            if offset_sigma is None:
                offset_sigma = p.get("offset_sigma")
            if offset_sigma is not None:
                offset = float(offset_sigma) * truth.marginal_std()
            else:
                offset = float(p.get("offset", 0.0))
            spec = DomainSpec.truncation(truth.dim, dseed, offset, str(p.get("nonlinearity", "shifted_relu")))
        else:
            raise DataError(f"unknown domain kind {self.kind!r}")
        return DomainSample(spec, self.n_speakers, self.n_sessions)


def _template(sec: dict, where: str) -> DomainTemplate:
    try:
        n_spk = int(sec.pop("n_speakers"))
        n_ses = int(sec.pop("n_sessions"))
    except KeyError as exc:
        raise DataError(f"[{where}] missing {exc.args[0]}") from None
    return DomainTemplate(str(sec.pop("kind", "identity")), sec, n_spk, n_ses)


@dataclass
class PlanFile:
    name: str
    seeds: list
    truth: GeneratorModel
    train: list
    test: DomainTemplate
    options: dict
    sweep: list | None

    def plans(self):
        """Yield ``(offset_sigma, ExperimentPlan)`` for every sweep point and seed."""
        points = self.sweep if self.sweep is not None else [None]
        for off in points:
            for seed in self.seeds:
                plan = ExperimentPlan(
                    truth=self.truth,
                    train=[t.build(self.truth, seed, off) for t in self.train],
                    test=self.test.build(self.truth, seed, off),
                    seed=int(seed),
                    name=self.name,
                    **self.options,
                )
                yield off, plan


def load_plan(path) -> PlanFile:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as f:
            cp.read_file(f)
    except configparser.Error as exc:
        raise DataError(f"{path}: {exc}") from None
    if not cp.has_section("plan"):
        raise DataError(f"{path}: missing [plan] section")
    plan = _section(cp, "plan")
    truth_sec = _section(cp, "truth") if cp.has_section("truth") else {}
    truth = default_truth(
        dim=int(truth_sec.get("dim", 32)),
        psi_min=float(truth_sec.get("psi_min", 0.1)),
        psi_max=float(truth_sec.get("psi_max", 50.0)),
        seed=int(truth_sec.get("seed", 0)),
        rotate=bool(truth_sec.get("rotate", True)),
    )
    train_names = sorted((s for s in cp.sections() if s == "train" or s.startswith("train.")),
                         key=lambda s: (len(s), s))
    if not train_names:
        raise DataError(f"{path}: no [train] / [train.N] section")
    if not cp.has_section("test"):
        raise DataError(f"{path}: missing [test] section")
    train = [_template(_section(cp, s), s) for s in train_names]
    test = _template(_section(cp, "test"), "test")

    options = {}
    for key in ("backends", "adaptation"):
        if key in plan:
            options[key] = tuple(plan[key])
    for key in ("adapt_speakers", "adapt_sessions"):
        if key in plan:
            options[key] = int(plan[key])
    if "cos_center" in plan:
        options["cos_center"] = bool(plan["cos_center"])
    fit = PldaFitConfig()
    fit = replace(fit, em_iters=int(plan.get("em_iters", fit.em_iters)), tol=float(plan.get("tol", fit.tol)))
    adapt = AdaptConfig(alpha_b=float(plan.get("alpha_b", 0.5)), alpha_w=float(plan.get("alpha_w", 0.5)))
    options["plda"] = fit
    options["adapt"] = adapt
    seeds = plan.get("seeds", [plan.get("seed", 0)])
    sweep = plan.get("sweep_offset_sigma")
    return PlanFile(str(plan.get("name", "plan")), [int(s) for s in seeds], truth, train, test, options,
                    None if sweep is None else [float(x) for x in sweep])


RESULT_COLUMNS = ("plan", "seed", "offset_sigma", "backend", "adaptation", "eer", "min_dcf", "min_cp")


def run_plan(pf: PlanFile) -> list[dict]:
    rows = []
    for off, plan in pf.plans():
        for row in run_condition(plan):
            row["offset_sigma"] = "" if off is None else off
            rows.append(row)
    return rows


def write_results(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            out = dict(r)
            for k in ("eer", "min_dcf", "min_cp"):
                out[k] = f"{r[k]:.6f}"
            w.writerow({k: out[k] for k in RESULT_COLUMNS})
