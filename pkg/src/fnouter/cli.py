"""Command line front end: ``fnouter <command> --config FILE``.

Exit codes: 0 all checks pass, 1 some check fails, 2 inconclusive (a cap was
hit and nothing failed), 3 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from . import electric as el
from .graphs import (
    Filtration, GraphError, GraphMap, MarkedGraph, analyze_filtration, bcc_scan,
    check_rtt_conditions, find_nielsen_paths, illegal_turns,
)
from .laminations import (
    LaminationError, Player, critical_constant, expgrowth_certificate, pingpong_search,
)
from .subgroups import (
    FreeFactorSystem, SubgroupError, SubgroupGraph, check_mutual_malnormality, contains_word,
    fold_stallings, free_basis, intersect_subgroups, meet_systems, verify_free_factorization,
)
from .words import Basis, Morphism, WordError, cyclic_normal_form, inverse_defects

log = logging.getLogger("fnouter")

COMMANDS = ("validate", "analyze", "stallings", "electric", "flare", "pingpong", "nielsen")
EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3
FLARE_COLUMNS = ["input", "k", "fwd_el", "bwd_el", "fwd_Hr", "bwd_Hr"]
FOUR_COLUMNS = ["input", "n", "phi_fwd", "phi_bwd", "psi_fwd", "psi_bwd", "hits"]


class ConfigError(ValueError):
    pass


def num(x):
    """Floats rounded to 10 significant digits; everything else untouched."""
    if isinstance(x, float) or type(x).__name__.startswith("float"):
        return float(f"{float(x):.10g}")
    return x


# ---------------------------------------------------------------------------
# configuration

@dataclass
class Config:
    basis: Basis
    morphisms: dict
    graphs: dict
    maps: dict
    filtrations: dict  # name -> (graph name, Filtration)
    factor_systems: dict
    subgroups: dict
    experiments: list
    raw: dict = field(default_factory=dict)

    def get(self, table: str, name: str):
        entries = getattr(self, table)
        if name not in entries:
            raise ConfigError(f"unresolved name {name!r} in {table}")
        return entries[name]


def _word(basis: Basis, text: str, what: str):
    try:
        return basis.parse(text)
    except WordError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def parse_config(text: str) -> Config:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict) or "basis" not in data:
        raise ConfigError("config must be an object with a 'basis' entry")
    try:
        basis = Basis(names=list(data["basis"]))
    except WordError as exc:
        raise ConfigError(f"basis: {exc}") from None

    morphisms = {}
    for name, entry in sorted(data.get("morphisms", {}).items()):
        if "inverse" not in entry:
            raise ConfigError(f"morphism {name!r} has no declared inverse")
        try:
            m = Morphism.from_strings(basis, entry.get("images", {}), entry["inverse"])
        except WordError as exc:
            raise ConfigError(f"morphism {name!r}: {exc}") from None
        bad = inverse_defects(m)
        if bad:
            raise ConfigError(f"morphism {name!r} fails the inverse check on generator "
                              + ", ".join(basis.names[i] for i in bad))
        morphisms[name] = m

    rose = MarkedGraph.rose(basis)
    graphs = {"rose": rose}
    for name, entry in sorted(data.get("graphs", {}).items()):
        verts = list(entry["vertices"])
        vidx = {v: i for i, v in enumerate(verts)}
        try:
            names = list(entry["edges"])
            ends = tuple((vidx[entry["edges"][e][0]], vidx[entry["edges"][e][1]]) for e in names)
            graphs[name] = MarkedGraph(tuple(verts), tuple(names), ends)
        except (KeyError, GraphError, WordError) as exc:
            raise ConfigError(f"graph {name!r}: {exc}") from None

    maps = {name: GraphMap.from_morphism(m, basis) for name, m in morphisms.items()}
    for name, entry in sorted(data.get("maps", {}).items()):
        G = graphs.get(entry.get("graph", "rose"))
        if G is None:
            raise ConfigError(f"map {name!r}: unresolved graph {entry.get('graph')!r}")
        try:
            vimg = tuple(G.vertices.index(entry.get("vertices", {}).get(v, v)) for v in G.vertices)
            eimg = tuple(G.alphabet.parse_letters(entry["edges"].get(e, e)) for e in G.edge_names)
            maps[name] = GraphMap(G, vimg, eimg)
        except (ValueError, GraphError, WordError) as exc:
            raise ConfigError(f"map {name!r}: {exc}") from None

    filtrations = {}
    for name, entry in sorted(data.get("filtrations", {}).items()):
        gname = entry.get("graph", "rose")
        if gname not in graphs:
            raise ConfigError(f"filtration {name!r}: unresolved graph {gname!r}")
        try:
            filt = Filtration.from_names(graphs[gname], entry["strata"])
            filt.check_covers(graphs[gname])
        except (GraphError, WordError) as exc:
            raise ConfigError(f"filtration {name!r}: {exc}") from None
        filtrations[name] = (gname, filt)

    subgroups = {}
    for name, gens in sorted(data.get("subgroups", {}).items()):
        subgroups[name] = fold_stallings([_word(basis, g, f"subgroup {name!r}") for g in gens], basis.rank)

    factor_systems = {}
    for name, entry in sorted(data.get("factor_systems", {}).items()):
        factors = [[_word(basis, g, f"factor system {name!r}") for g in f] for f in entry["factors"]]
        comp = entry.get("complement")
        comp = [_word(basis, g, f"factor system {name!r}") for g in comp] if comp is not None else None
        try:
            factor_systems[name] = FreeFactorSystem.from_generators(factors, comp, basis.rank)
        except SubgroupError as exc:
            raise ConfigError(f"factor system {name!r}: {exc}") from None

    experiments = list(data.get("experiments", []))
    for i, ex in enumerate(experiments):
        if ex.get("command") not in COMMANDS:
            raise ConfigError(f"experiment {i}: unknown command {ex.get('command')!r}")
        ex.setdefault("name", f"{ex['command']}-{i}")
    cfg = Config(basis, morphisms, graphs, maps, filtrations, factor_systems, subgroups,
                 experiments, data)
    for ex in experiments:
        _check_refs(cfg, ex)
    return cfg


_REF_TABLES = {"morphism": "morphisms", "phi": "morphisms", "psi": "morphisms", "map": "maps",
               "filtration": "filtrations", "factor_system": "factor_systems", "subgroup": "subgroups"}


def _check_refs(cfg: Config, ex: dict) -> None:
    for key, table in _REF_TABLES.items():
        if key in ex:
            cfg.get(table, ex[key])
    for key in ("subgroups",):
        for n in ex.get(key, []):
            cfg.get("subgroups", n)
    for n in ex.get("factor_systems", []):
        cfg.get("factor_systems", n)
    for system in ex.get("systems", []):
        for n in system:
            cfg.get("subgroups", n)
    if "rel" in ex:
        cfg.get("factor_systems", ex["rel"])


# ---------------------------------------------------------------------------
# reports

@dataclass
class ExperimentReport:
    command: str
    items: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    status: str = "pass"  # pass | fail | inconclusive
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    wall_time: Optional[float] = None

    def to_dict(self, timing: bool = False) -> dict:
        out = {"command": self.command, "items": self.items, "summary": self.summary,
               "status": self.status, "columns": self.columns, "rows": self.rows}
        if timing and self.wall_time is not None:
            out["wall_time"] = num(self.wall_time)
        return out

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[self.status]


def _merge_status(statuses) -> str:
    statuses = list(statuses)
    if "fail" in statuses:
        return "fail"
    if "inconclusive" in statuses:
        return "inconclusive"
    return "pass"


def emit_report(report: ExperimentReport, fmt: str = "json", timing: bool = False) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(timing), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns or FLARE_COLUMNS)
        for row in report.rows:
            w.writerow([_csv_cell(x) for x in row])
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def _csv_cell(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return x


def parse_report(text: str) -> ExperimentReport:
    d = json.loads(text)
    return ExperimentReport(d["command"], d["items"], d["summary"], d["status"], d["columns"],
                            d["rows"], d.get("wall_time"))


def _jsonable(x):
    """Normalise through JSON so that reports compare equal after a round trip."""
    return json.loads(json.dumps(x))


# ---------------------------------------------------------------------------
# commands

def _map_and_filtration(cfg: Config, ex: dict):
    name = ex.get("map") or ex.get("morphism")
    if name is None:
        raise ConfigError(f"experiment {ex['name']!r} needs a map")
    f = cfg.get("maps", name)
    fname = ex.get("filtration")
    if fname is None:
        return name, f, None
    gname, filt = cfg.get("filtrations", fname)
    if cfg.graphs[gname] != f.graph:
        raise ConfigError(f"filtration {fname!r} lives on another graph than map {name!r}")
    return name, f, filt


def _top_eg(analysis) -> Optional[int]:
    eg = [s.index for s in analysis if s.kind == "EG"]
    return eg[-1] if eg else None


def run_validate(cfg: Config, exps: list, opts) -> ExperimentReport:
    rep = ExperimentReport("validate")
    statuses = []
    for name in sorted(cfg.morphisms):
        rep.items.append({"kind": "morphism", "name": name, "inverse_ok": True})
    for fname, (gname, filt) in sorted(cfg.filtrations.items()):
        for mname, f in sorted(cfg.maps.items()):
            if f.graph != cfg.graphs[gname]:
                continue
            item = {"kind": "filtration", "name": fname, "map": mname}
            try:
                filt.check_invariant(f)
                item["invariant"] = True
            except GraphError as exc:
                item["invariant"] = False
                item["error"] = str(exc)
                statuses.append("fail")
            rep.items.append(item)
    for name, F in sorted(cfg.factor_systems.items()):
        item = {"kind": "factor_system", "name": name, "basis_aligned": F.basis_aligned}
        if F.complement is not None:
            ok = verify_free_factorization(F.components, F.complement, cfg.basis.rank)
            item["free_factorization"] = ok
            statuses.append("pass" if ok else "fail")
        rep.items.append(item)
    rep.status = _merge_status(statuses)
    return rep


def run_analyze(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        exps = [{"name": f"analyze-{m}", "map": m, "filtration": fn}
                for fn, (g, _) in sorted(cfg.filtrations.items())
                for m, f in sorted(cfg.maps.items()) if f.graph == cfg.graphs[g]]
    rep = ExperimentReport("analyze", columns=["experiment", "stratum", "edges", "kind", "eigenvalue"])
    statuses = []
    for ex in exps:
        name, f, filt = _map_and_filtration(cfg, ex)
        if filt is None:
            raise ConfigError(f"experiment {ex['name']!r} needs a filtration")
        G = f.graph
        try:
            analysis = analyze_filtration(f, filt)
        except GraphError as exc:
            raise ConfigError(f"experiment {ex['name']!r}: {exc}") from None
        scan = bcc_scan(f)
        item = {"experiment": ex["name"], "map": name,
                "strata": [{"index": s.index, "edges": [G.edge_names[e] for e in s.edges],
                            "matrix": [list(r) for r in s.matrix], "kind": s.kind,
                            "eigenvalue": num(s.pf_eigenvalue)} for s in analysis],
                "bcc": scan.value, "bcc_stable": scan.stable,
                "illegal_turns": sorted([G.format_path([t[0]]), G.format_path([t[1]])]
                                        for t in illegal_turns(f) if t[0] != t[1])}
        for s in analysis:
            rep.rows.append([ex["name"], s.index, "".join(G.edge_names[e] for e in s.edges), s.kind,
                             num(s.pf_eigenvalue) if s.pf_eigenvalue is not None else ""])
        r = ex.get("stratum", _top_eg(analysis))
        if r is not None and analysis[r].kind == "EG":
            cc = critical_constant(f, filt, r)
            item["critical_constant"] = {"value": num(cc.value), "working": cc.working}
            rtt = check_rtt_conditions(f, filt, r, ex.get("max_length", 4))
            item["rtt"] = {"stratum": r, "passed": rtt.passed, "failures": [list(x) for x in rtt.failures]}
        certs = []
        for b in ex.get("beta", []):
            cert = expgrowth_certificate(f, G.parse_path(b), ex.get("k_cap", 6), ex.get("ext_cap", 16))
            certs.append({"beta": b, "k": cert.k, "verdict": cert.verdict})
            statuses.append("pass" if cert.certified else "inconclusive")
        if certs:
            item["expgrowth"] = certs
        if not scan.stable:
            statuses.append("inconclusive")
        rep.items.append(item)
    rep.status = _merge_status(statuses)
    return rep


def run_nielsen(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        exps = [{"name": f"nielsen-{m}", "map": m} for m in sorted(cfg.maps)]
    rep = ExperimentReport("nielsen", columns=["experiment", "path", "period", "indivisible"])
    for ex in exps:
        name, f, filt = _map_and_filtration(cfg, ex)
        L, k = ex.get("max_length", 4), ex.get("max_period", 2)
        found = find_nielsen_paths(f, L, k)
        paths = sorted(({"path": f.graph.format_path(p.path), "period": p.period,
                         "indivisible": p.indivisible} for p in found),
                       key=lambda d: (len(d["path"]), d["path"]))
        item = {"experiment": ex["name"], "map": name, "max_length": L, "max_period": k,
                "count": len(paths), "indivisible": [p for p in paths if p["indivisible"]]}
        if filt is not None:
            item["heights"] = {p["path"]: filt.height(f.graph.parse_path(p["path"]))
                               for p in item["indivisible"]}
        if not paths:
            item["note"] = f"none found up to length {L}"
        rep.items.append(item)
        for p in paths:
            if p["indivisible"]:
                rep.rows.append([ex["name"], p["path"], p["period"], True])
    return rep


def _graph_json(cfg: Config, H: SubgroupGraph) -> dict:
    d = H.to_json()
    d["edges"] = [[u, cfg.basis.names[x - 1], v] for u, x, v in H.edges]
    d["rank"] = H.rank
    d["basis"] = [cfg.basis.format(w) for w in free_basis(H)]
    return d


def run_stallings(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        exps = [{"name": "stallings-fold", "op": "fold", "subgroups": sorted(cfg.subgroups)}]
    rep = ExperimentReport("stallings", columns=["experiment", "op", "result"])
    statuses = []
    B = cfg.basis
    for ex in exps:
        op = ex.get("op", "fold")
        item = {"experiment": ex["name"], "op": op}
        if op == "fold":
            item["graphs"] = {n: _graph_json(cfg, cfg.get("subgroups", n)) for n in ex.get("subgroups", [])}
            result = ";".join(f"{n}:rank{g['rank']}" for n, g in item["graphs"].items())
        elif op == "contains":
            H = cfg.get("subgroups", ex["subgroup"])
            item["members"] = {w: contains_word(H, _word(B, w, "word")) for w in ex.get("words", [])}
            result = ";".join(f"{w}:{v}" for w, v in item["members"].items())
        elif op == "intersect":
            H, K = (cfg.get("subgroups", n) for n in ex["subgroups"])
            S = intersect_subgroups(H, K)
            item["components"] = [_graph_json(cfg, c) for c in S]
            result = str(len(S))
        elif op == "malnormal":
            S1, S2 = ([cfg.get("subgroups", n) for n in s] for s in ex["systems"])
            rel = cfg.get("factor_systems", ex["rel"]) if "rel" in ex else None
            v = check_mutual_malnormality(S1, S2, rel)
            item["malnormal"] = v.malnormal
            if v.witness:
                i, j, x, gens = v.witness
                item["witness"] = {"i": i, "j": j, "conjugator": B.format(x),
                                   "intersection": [B.format(g) for g in gens]}
            result = str(v.malnormal)
            if "expect" in ex:
                statuses.append("pass" if v.malnormal == ex["expect"] else "fail")
        elif op == "meet":
            F1, F2 = (cfg.get("factor_systems", n) for n in ex["factor_systems"])
            M = meet_systems(F1, F2)
            item["components"] = [_graph_json(cfg, c) for c in M]
            result = str(len(M))
        elif op == "factorization":
            F = cfg.get("factor_systems", ex["factor_system"])
            if F.complement is None:
                raise ConfigError(f"factor system {ex['factor_system']!r} has no complement")
            ok = verify_free_factorization(F.components, F.complement, B.rank)
            item["free_factorization"] = ok
            statuses.append("pass" if ok else "fail")
            result = str(ok)
        else:
            raise ConfigError(f"unknown stallings op {op!r}")
        rep.items.append(item)
        rep.rows.append([ex["name"], op, result])
    rep.status = _merge_status(statuses)
    return rep


def _context(cfg: Config, ex: dict) -> el.ElectricContext:
    F = cfg.get("factor_systems", ex["factor_system"])
    sigma = _word(cfg.basis, ex["sigma"], "sigma") if ex.get("sigma") else None
    return el.ElectricContext.from_system(cfg.basis, F, sigma)


def run_electric(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        raise ConfigError("no electric experiment in the config")
    rep = ExperimentReport("electric", columns=["experiment", "word", "closed_form", "oracle", "agree"])
    statuses = []
    B = cfg.basis
    for ex in exps:
        ctx = _context(cfg, ex)
        cap = ex.get("radius", 12)
        rows = []
        for w in ex.get("words", []):
            word = _word(B, w, "word")
            oracle = el.bfs_electric_oracle(ctx, word, cap, ex.get("slack", 2))
            closed = el.electric_length(ctx, word) if ctx.aligned else None
            agree = closed is None or closed == oracle
            statuses.append("pass" if agree else "fail")
            rows.append({"word": w, "closed_form": closed, "oracle": oracle, "agree": agree})
            rep.rows.append([ex["name"], w, "" if closed is None else closed, oracle, agree])
        classes = {}
        for c in ex.get("classes", []):
            a = _word(B, c, "class")
            classes[c] = el.electric_length_conjugacy(ctx, a)
        rep.items.append({"experiment": ex["name"], "aligned": ctx.aligned, "words": rows,
                          "classes": classes})
    rep.status = _merge_status(statuses)
    return rep


def _inputs(cfg: Config, ctx, ex: dict) -> list:
    out = [_word(cfg.basis, w, "input") for w in ex.get("inputs", [])]
    if "sample" in ex:
        s = ex["sample"]
        out += el.cyclic_sample(ctx, s.get("max_outside", 5), s.get("gap_length", 1),
                                s.get("min_outside", 1))
    return out


def run_flare(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        raise ConfigError("no flare experiment in the config")
    mode = getattr(opts, "mode", None)
    rep = ExperimentReport("flare", columns=list(FLARE_COLUMNS))
    statuses = []
    B = cfg.basis
    for ex in exps:
        m = mode or ex.get("mode", "conjugacy")
        factor = getattr(opts, "factor", None) or ex.get("factor")
        cap = getattr(opts, "cap", None) or ex.get("cap", 20)
        ctx = _context(cfg, ex)
        phi = cfg.get("morphisms", ex["morphism"])
        inputs = _inputs(cfg, ctx, ex)
        keep_rows = ex.get("rows", "sample" not in ex)
        item = {"experiment": ex["name"], "mode": m, "cap": cap, "inputs": len(inputs)}
        if m == "conjugacy":
            factor = 3.0 if factor is None else float(factor)
            res = el.uniform_exponent(ctx, phi, inputs, cap, factor, ex.get("strict", True))
            _flare_items(item, res["reports"], keep_rows, rep)
            item.update(factor=num(factor), uniform=res["uniform"], failures=res["failures"],
                        flaring_uniform=res["flaring_uniform"])
            statuses.append("pass" if res["uniform"] is not None else "inconclusive")
        elif m == "strict":
            factor = 2.0 if factor is None else float(factor)
            res = el.strict_flaring_exponent(ctx, phi, inputs, cap, factor, ex.get("strict", False))
            _flare_items(item, res["reports"], keep_rows, rep)
            item.update(factor=num(factor), uniform=res["uniform"])
            statuses.append("pass" if res["uniform"] is not None else "inconclusive")
        elif m == "3of4":
            psi = cfg.get("morphisms", ex["psi"])
            n = ex.get("n")
            if n is None:
                # classes that never flare are reported as counterexamples below
                n = el.uniform_exponent(ctx, phi, inputs, cap)["flaring_uniform"]
                if n is None:
                    item["note"] = "no uniform exponent within the cap"
                    statuses.append("inconclusive")
                    rep.items.append(item)
                    continue
            sub = ex.get("submode", "conjugacy")
            counter = []
            rep.columns = list(FOUR_COLUMNS)
            if sub == "conjugacy":
                fours = el.three_of_four_sample(ctx, phi, psi, inputs, n)
            else:
                fours = [el.three_of_four_test(ctx, phi, psi, x, n, sub) for x in inputs]
            for fv in fours:
                if not fv.passed:
                    counter.append(fv.input)
                if keep_rows:
                    rep.rows.append([fv.input, n, *fv.values, fv.hits])
            item.update(n=n, submode=sub, counterexamples=counter,
                        share=num(1 - len(counter) / len(inputs)) if inputs else None)
            # the verdict is recorded either way; counterexamples are data, not errors
            statuses.append("pass")
        else:
            raise ConfigError(f"unknown flare mode {m!r}")
        rep.items.append(item)
    rep.status = _merge_status(statuses)
    return rep


def _flare_items(item: dict, reports: list, keep_rows: bool, rep: ExperimentReport) -> None:
    hist = {}
    for r in reports:
        key = "none" if r.minimal is None else str(r.minimal)
        hist[key] = hist.get(key, 0) + 1
        if keep_rows:
            for row in r.rows:
                rep.rows.append([r.input, *row])
    item["minimal_histogram"] = dict(sorted(hist.items()))
    if keep_rows:
        item["minimal"] = {r.input: r.minimal for r in reports}


def run_pingpong(cfg: Config, exps: list, opts) -> ExperimentReport:
    if not exps:
        raise ConfigError("no pingpong experiment in the config")
    rep = ExperimentReport("pingpong", columns=["experiment", "ok", "failed_step", "M"])
    statuses = []
    for ex in exps:
        gname, filt = cfg.get("filtrations", ex["filtration"])
        if gname != "rose":
            raise ConfigError("ping-pong runs on the rose with identity identifications")
        r = ex.get("stratum", len(filt.strata) - 1)

        def players(name):
            m = cfg.get("morphisms", name)
            return {"+": Player(name + "+", GraphMap.from_morphism(m, cfg.basis), filt, r),
                    "-": Player(name + "-", GraphMap.from_morphism(m.inverse(), cfg.basis), filt, r)}

        try:
            cert = pingpong_search(players(ex["phi"]), players(ex["psi"]),
                                   exp_cap=ex.get("exp_cap", 10), window_cap=ex.get("window_cap", 40),
                                   t_check=ex.get("t_check", 2), ext_cap=ex.get("ext_cap", 16),
                                   pad=ex.get("pad", 0), reach=ex.get("reach", 20))
        except LaminationError as exc:
            raise ConfigError(f"experiment {ex['name']!r}: {exc}") from None
        fmt = cfg.basis.format
        item = {"experiment": ex["name"], "ok": cert.ok, "failed_step": cert.failed_step,
                "message": cert.message, "C": cert.C, "M": cert.M, "k": cert.k,
                "alpha": {s: fmt(w) for s, w in sorted(cert.alpha.items())},
                "beta": {s: fmt(w) for s, w in sorted(cert.beta.items())},
                "gamma": {s: fmt(w) for s, w in sorted(cert.gamma.items())},
                "p": {"".join(k): v for k, v in sorted(cert.p.items())},
                "q": {"".join(k): v for k, v in sorted(cert.q.items())},
                "audit": dict(sorted(cert.audit.items())),
                "neighborhoods": {k: fmt(v) for k, v in sorted(cert.neighborhoods().items())}}
        rep.items.append(item)
        rep.rows.append([ex["name"], cert.ok, cert.failed_step or "", cert.M if cert.M is not None else ""])
        if cert.ok:
            statuses.append("pass")
        elif ex.get("expect_failure"):
            statuses.append("pass")
        else:
            statuses.append("inconclusive")
    rep.status = _merge_status(statuses)
    return rep


RUNNERS = {"validate": run_validate, "analyze": run_analyze, "stallings": run_stallings,
           "electric": run_electric, "flare": run_flare, "pingpong": run_pingpong,
           "nielsen": run_nielsen}


def execute(cfg: Config, command: str, opts=None, name: Optional[str] = None) -> ExperimentReport:
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    exps = [ex for ex in cfg.experiments if ex["command"] == command
            and (name is None or ex["name"] == name)]
    if name is not None and not exps:
        raise ConfigError(f"unresolved experiment name {name!r}")
    start = time.perf_counter()
    try:
        rep = RUNNERS[command](cfg, exps, opts or argparse.Namespace())
    except (WordError, GraphError, SubgroupError, el.ElectricError) as exc:
        raise ConfigError(f"{command}: {exc}") from None
    rep.items = _jsonable(rep.items)
    rep.summary = _jsonable(rep.summary)
    rep.rows = _jsonable(rep.rows)
    rep.summary.setdefault("experiments", [ex["name"] for ex in exps])
    rep.wall_time = time.perf_counter() - start
    return rep


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fnouter", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file ('house' for the shipped fixture)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--experiment", help="run only the experiment with this name")
    p.add_argument("--mode", choices=("conjugacy", "strict", "3of4"))
    p.add_argument("--factor", type=float)
    p.add_argument("--cap", type=int)
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identity)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config_text(path: str) -> str:
    if path == "house":
        from importlib.resources import files
        return (files("fnouter") / "fixtures" / "house.json").read_text()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(load_config_text(args.config))
        rep = execute(cfg, args.command, args, args.experiment)
    except (ConfigError, OSError) as exc:
        print(f"fnouter: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = emit_report(rep, args.format, args.timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
