#!/usr/bin/env python3
"""Validates emitted payloads against schemas/ and compares stable ones to tests/golden/.

usage: check_payloads.py EMITTER SCHEMA_DIR GOLDEN_DIR [--update]
"""
import copy
import json
import math
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource

SCHEMA_OF = {
    "skeleton": "skeleton",
    "graph": "graph",
    "dataset_header": "dataset_header",
    "dataset_record": "dataset_record",
    "split": "split",
    "sim_report": "sim_report",
    "sizer_report": "sizer_report",
    "simulate_request": "simulate_request",
    "simulate_response_oracle": "simulate_response",
    "simulate_response_violations": "simulate_response",
    "simulate_response_surrogate": "simulate_response",
    "size_request": "size_request",
    "size_response": "size_response",
    "skeleton_response": "skeleton_response",
    "sections_response": "sections_response",
    "error_400": "error",
    "error_422": "error",
    "error_503": "error",
    "ga_artifact": "ga_artifact",
    "compare": "compare",
    "config": "config",
}

# Payloads that depend only on the oracle and the samplers. Trained weights
# (and their hashes) can move in the last bits between compilers, so anything
# downstream of training is schema-checked only.
GOLDEN = [
    "skeleton",
    "graph",
    "dataset_header",
    "dataset_record",
    "split",
    "simulate_request",
    "simulate_response_oracle",
    "simulate_response_violations",
    "skeleton_response",
    "sections_response",
    "error_400",
    "config",
]
VOLATILE = {("hashes", "sizer"), ("hashes", "surrogate")}
RTOL, ATOL = 1e-9, 1e-12


def load_registry(schema_dir):
    schemas = {}
    resources = []
    for p in sorted(schema_dir.glob("*.schema.json")):
        s = json.loads(p.read_text())
        jsonschema.Draft202012Validator.check_schema(s)
        schemas[p.name.removesuffix(".schema.json")] = s
        resources.append((s["$id"], Resource.from_contents(s)))
    return schemas, Registry().with_resources(resources)


def diff(a, b, path=()):
    if path[-2:] in VOLATILE:
        return []
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, str) or a is None:
        return [] if a == b else [f"/{'/'.join(map(str, path))}: {a!r} != {b!r}"]
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if math.isclose(a, b, rel_tol=RTOL, abs_tol=ATOL):
            return []
        return [f"/{'/'.join(map(str, path))}: {a!r} != {b!r}"]
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"/{'/'.join(map(str, path))}: length {len(a)} != {len(b)}"]
        return [m for i, (x, y) in enumerate(zip(a, b)) for m in diff(x, y, path + (i,))]
    if isinstance(a, dict) and isinstance(b, dict):
        if a.keys() != b.keys():
            return [f"/{'/'.join(map(str, path))}: keys {sorted(a)} != {sorted(b)}"]
        return [m for k in a for m in diff(a[k], b[k], path + (k,))]
    return [f"/{'/'.join(map(str, path))}: type {type(a).__name__} != {type(b).__name__}"]


def semantic(kind, j):
    """Cross-field rules a schema cannot express."""
    errs = []
    if kind.startswith("simulate_response"):
        if len(j["drift_x"]) != len(j["drift_y"]):
            errs.append("drift_x and drift_y differ in length")
        lim = j["drift_limit"]
        expect = sum(abs(v) > lim for v in j["drift_x"] + j["drift_y"])
        if expect != len(j["violations"]):
            errs.append(f"{len(j['violations'])} violations listed, {expect} drifts exceed the limit")
    if kind == "size_response":
        if len(j["p_soft"]) != len(j["sections"]):
            errs.append("p_soft and sections differ in length")
        for i, row in enumerate(j["p_soft"]):
            if abs(sum(row) - 1) > 1e-9:
                errs.append(f"p_soft row {i} sums to {sum(row)}")
            if not 0 <= j["sections"][i] < len(row):
                errs.append(f"section {i} outside its row")
    if kind == "split":
        all_ = j["train"] + j["validation"] + j["test"]
        if sorted(all_) != list(range(len(all_))):
            errs.append("split is not a partition of 0..n-1")
    if kind == "graph" or kind == "dataset_record":
        g = j["graph"] if kind == "dataset_record" else j
        n = len(g["node_features"])
        if g["ground_index"] != n - 1:
            errs.append("ground node is not last")
        if any(len(r) != g["feature_width"] for r in g["node_features"]):
            errs.append("feature row width mismatch")
        if any(not (0 <= a < n and 0 <= b < n and a != b) for a, b in g["edges"]):
            errs.append("edge endpoint out of range")
    if kind == "ga_artifact":
        for r in j["runs"]:
            if any(b > a for a, b in zip(r["trace"], r["trace"][1:])):
                errs.append(f"trace of skeleton {r['skeleton_seed']} increases")
            if len(r["best_chromosome"]) != r["bars"]:
                errs.append("chromosome length differs from bar count")
    return errs


def main():
    args = [a for a in sys.argv[1:] if a != "--update"]
    update = "--update" in sys.argv
    emitter, schema_dir, golden_dir = args[0], pathlib.Path(args[1]), pathlib.Path(args[2])
    schemas, registry = load_registry(schema_dir)
    failures = []
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([emitter, tmp], check=True, stdout=subprocess.DEVNULL)
        emitted = {p.stem for p in pathlib.Path(tmp).glob("*.json")}
        if emitted != set(SCHEMA_OF):
            failures.append(f"emitted kinds {sorted(emitted ^ set(SCHEMA_OF))} not matched to a schema")
        for kind, name in SCHEMA_OF.items():
            path = pathlib.Path(tmp) / f"{kind}.json"
            if not path.exists():
                continue
            j = json.loads(path.read_text())
            v = jsonschema.Draft202012Validator(schemas[name], registry=registry)
            for e in v.iter_errors(j):
                failures.append(f"{kind}: {e.json_path}: {e.message}")
            failures += [f"{kind}: {m}" for m in semantic(kind, j)]
            # dropping any required key must be caught
            for key in schemas[name].get("required", []):
                broken = copy.deepcopy(j)
                broken.pop(key, None)
                if v.is_valid(broken):
                    failures.append(f"{kind}: still valid without '{key}'")
            if kind in GOLDEN:
                g = golden_dir / f"{kind}.json"
                if update:
                    g.write_text(json.dumps(j, indent=1, sort_keys=True) + "\n")
                elif not g.exists():
                    failures.append(f"{kind}: no golden file {g}")
                else:
                    failures += [f"{kind}: {m}" for m in diff(json.loads(g.read_text()), j)[:10]]
    for f in failures:
        print("FAIL", f)
    print(f"{len(SCHEMA_OF)} payloads, {len(GOLDEN)} goldens, {len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
