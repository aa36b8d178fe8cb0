"""Circuit definition files and the frozen scenario presets.

Each preset is a circuit file plus an expected-values file, both JSON and
both checked against the schemas shipped in ``tsvf_lab/schemas``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .circuit import Circuit, Element, MarkedPoint, Selection, validate
from .errors import InvalidCircuit, StructuralError
from .state import CIRCULAR_LEFT, CIRCULAR_RIGHT, BasisLabel, PureState, Space

__all__ = [
    "PRESET_IDS",
    "Preset",
    "load",
    "list_presets",
    "load_circuit",
    "circuit_from_dict",
    "circuit_to_dict",
    "check_circuit_document",
    "schema",
]

PRESET_IDS = ("wheeler_open", "wheeler_closed", "nested_mzi", "polarization_marker", "ancilla_marker")

POLARIZATION_STATES = {
    "H": "H",
    "V": "V",
    "circular_right": CIRCULAR_RIGHT,
    "circular_left": CIRCULAR_LEFT,
}


def _data_dir():
    return resources.files("tsvf_lab")


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    """Load a bundled JSON schema, e.g. ``schema("circuit")``."""
    text = (_data_dir() / "schemas" / f"{name}.schema.json").read_text()
    return json.loads(text)


def _angle(value) -> float:
    if isinstance(value, Mapping):
        return float(value["pi"]) * math.pi
    return float(value)


def _complex(pair) -> complex:
    return complex(pair[0], pair[1])


def state_from_terms(space: Space, terms) -> PureState:
    amps = {}
    for term in terms:
        label = BasisLabel(**term["label"])
        amps[label] = amps.get(label, 0) + _complex(term["amplitude"])
    return PureState.from_dict(space, amps)


def check_circuit_document(doc: Mapping[str, Any]) -> list[str]:
    """Schema and structural diagnostics for a circuit document."""
    validator = jsonschema.Draft202012Validator(schema("circuit"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    diags = [f"schema: {'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
    if diags:
        return diags
    try:
        circuit = circuit_from_dict(doc, check=False)
    except (StructuralError, KeyError, TypeError, ValueError) as exc:
        return [f"structure: {exc}"]
    diags = validate(circuit)
    for name, terms in doc.get("presets", {}).items():
        try:
            state = state_from_terms(circuit.space, terms)
        except StructuralError as exc:
            diags.append(f"preset {name!r}: {exc}")
            continue
        if abs(state.norm() - 1.0) > 1e-12:
            diags.append(f"preset {name!r}: input state has norm {state.norm():.15g}, expected 1")
    return diags


def circuit_from_dict(doc: Mapping[str, Any], check: bool = True) -> Circuit:
    stages = []
    for stage in doc["stages"]:
        elements = []
        for rec in stage:
            kw = {}
            for key in ("theta", "phi", "angle"):
                if key in rec:
                    kw[key] = _angle(rec[key])
            if rec["kind"] == "beam_splitter":
                kw.setdefault("theta", math.pi / 4)
            elements.append(Element(rec["kind"], tuple(rec["modes"]), name=rec.get("name"), **kw))
        stages.append(tuple(elements))
    factors = doc.get("factors", {})
    circuit = Circuit(
        modes=tuple(doc["modes"]),
        stages=tuple(stages),
        marked_points={k: MarkedPoint(int(v["boundary"]), v["mode"]) for k, v in doc["marked_points"].items()},
        polarization=bool(factors.get("polarization", False)),
        ancilla=bool(factors.get("ancilla", False)),
        name=doc.get("name", "circuit"),
    )
    if check:
        circuit.check()
    return circuit


def circuit_to_dict(circuit: Circuit) -> dict:
    return {
        "name": circuit.name,
        "modes": list(circuit.modes),
        "factors": {"polarization": circuit.polarization, "ancilla": circuit.ancilla},
        "stages": [[el.to_dict() for el in stage] for stage in circuit.stages],
        "marked_points": {k: {"boundary": p.boundary, "mode": p.mode} for k, p in circuit.marked_points.items()},
    }


def load_circuit(path: str | Path) -> tuple[Circuit, dict[str, PureState]]:
    """Read, schema-check and validate a circuit file.

    Returns the circuit and its named input states.
    """
    doc = json.loads(Path(path).read_text())
    diags = check_circuit_document(doc)
    if diags:
        raise InvalidCircuit(diags)
    circuit = circuit_from_dict(doc)
    inputs = {k: state_from_terms(circuit.space, v).normalize() for k, v in doc.get("presets", {}).items()}
    return circuit, inputs


@dataclass(frozen=True, eq=False)
class Preset:
    id: str
    circuit: Circuit
    pre: Selection
    posts: Mapping[str, Selection]
    points: tuple[str, ...]
    expected: Mapping[str, Mapping[str, complex]]
    impossible_posts: tuple[str, ...] = ()
    operator_expectations: tuple[dict, ...] = ()
    two_state_vectors: tuple[dict, ...] = ()
    reduced_two_state_vectors: tuple[dict, ...] = ()
    dark_points: tuple[str, ...] = ()
    note: str = ""
    raw: Mapping[str, Any] = field(default_factory=dict, repr=False)

    def post(self, name: str) -> Selection:
        try:
            return self.posts[name]
        except KeyError:
            raise StructuralError(
                f"unknown post-selection {name!r} for {self.id}; known: {sorted(self.posts)}"
            ) from None

    def reference_pair(self, entry: Mapping[str, Any]) -> tuple[PureState, PureState]:
        """Forward ket and backward ket (conjugate of the listed bra) of a stored two-state vector."""
        space = self.circuit.space
        if "keep" in entry:
            space = space.only(entry["keep"])
        fwd = state_from_terms(space, entry["forward"])
        bra = state_from_terms(space, entry["backward_bra"])
        return fwd, PureState(space, bra.amplitudes.conj())


def _selection(spec: Mapping[str, Any], label: str) -> Selection:
    internal = {k: POLARIZATION_STATES.get(v, v) if k == "polarization" else v
                for k, v in spec.items() if k != "detector"}
    return Selection.click(spec["detector"], label=label, **internal)


@lru_cache(maxsize=None)
def load(preset_id: str) -> Preset:
    """Load and validate a shipped preset by id."""
    if preset_id not in PRESET_IDS:
        raise StructuralError(f"unknown scenario {preset_id!r}; known: {', '.join(PRESET_IDS)}")
    base = _data_dir() / "presets"
    doc = json.loads((base / f"{preset_id}.expected.json").read_text())
    jsonschema.validate(doc, schema("preset"))
    cdoc = json.loads((base / doc["circuit"]).read_text())
    diags = check_circuit_document(cdoc)
    if diags:
        raise InvalidCircuit(diags)
    circuit = circuit_from_dict(cdoc)
    if "edit" in doc:
        edit = doc["edit"]
        elements = [Element(e["kind"], tuple(e["modes"]), name=e.get("name"),
                            **{k: _angle(e[k]) for k in ("theta", "phi", "angle") if k in e})
                    for e in edit["elements"]]
        circuit = circuit.replace_stage(edit["replace_stage"], elements, name=preset_id)
        circuit.check()
    pre_state = state_from_terms(circuit.space, cdoc["presets"][doc["pre"]]).normalize()
    posts = {name: _selection(spec, name) for name, spec in doc["posts"].items()}
    for name, sel in posts.items():
        if sel.detector not in circuit.detectors:
            raise InvalidCircuit([f"post-selection {name!r} names unknown detector {sel.detector!r}"])
    expected = {post: {pt: _complex(v) for pt, v in table.items()}
                for post, table in doc["expected_weak_values"].items()}
    return Preset(
        id=preset_id,
        circuit=circuit,
        pre=Selection.input(pre_state),
        posts=posts,
        points=tuple(doc["points"]),
        expected=expected,
        impossible_posts=tuple(doc.get("impossible_posts", ())),
        operator_expectations=tuple(doc.get("expected_operator_weak_values", ())),
        two_state_vectors=tuple(doc.get("two_state_vectors", ())),
        reduced_two_state_vectors=tuple(doc.get("reduced_two_state_vectors", ())),
        dark_points=tuple(doc.get("dark_points", ())),
        note=doc.get("note", ""),
        raw=doc,
    )


def list_presets() -> list[str]:
    return list(PRESET_IDS)


def polarization_vector(name: str) -> np.ndarray | str:
    try:
        return POLARIZATION_STATES[name]
    except KeyError:
        raise StructuralError(f"unknown polarization {name!r}") from None
